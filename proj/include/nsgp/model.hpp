#pragma once

// The assembled non-stationary heteroscedastic GP: three hyper-functions
// (length scale, signal amplitude, noise scale) over shared inducing
// inputs, the MAP type-II objective, and prediction with the predictive
// variance split into epistemic (model) and aleatoric (noise) parts.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nsgp/errors.hpp"
#include "nsgp/kernels.hpp"
#include "nsgp/latent.hpp"
#include "nsgp/numerics.hpp"

namespace nsgp {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Ablation variant: each hyper-function independently latent or constant.
struct Variant {
  bool ell_latent = true;
  bool sigma_latent = true;
  bool omega_latent = true;

  bool any_latent() const { return ell_latent || sigma_latent || omega_latent; }

  std::string label() const {
    if (!any_latent()) return "Stationary Homoskedastic GP";
    std::string parts;
    if (ell_latent) parts += "ell";
    if (sigma_latent) parts += parts.empty() ? "sigma" : ",sigma";
    if (omega_latent) parts += parts.empty() ? "omega" : ",omega";
    return "(" + parts + ")-GP";
  }

  // All 8 ablation rows, stationary-homoskedastic first.
  static std::array<Variant, 8> all() {
    std::array<Variant, 8> out{};
    for (std::size_t i = 0; i < 8; ++i)
      out[i] = Variant{(i & 1) != 0, (i & 2) != 0, (i & 4) != 0};
    return out;
  }

  friend bool operator==(const Variant&, const Variant&) = default;
};

// Fixed (non-trainable) priors: Gamma(5, 1) on latent length scales,
// Gamma(0.5, 1) on latent amplitudes, standard normal on every whitened
// element. Constants, latent means, and inducing inputs get improper flat
// priors.
struct PriorSet {
  double latent_lengthscale_shape = 5.0;
  double latent_lengthscale_rate = 1.0;
  double latent_amplitude_shape = 0.5;
  double latent_amplitude_rate = 1.0;
};

inline double gamma_log_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return (shape - 1.0) * std::log(x) - rate * x + shape * std::log(rate) -
         std::lgamma(shape);
}

inline double normal_log_pdf(double x) { return -0.5 * (x * x + kLog2Pi); }

enum class Transform { identity, log };

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
  Transform transform = Transform::identity;
};

struct ParamLayout {
  Variant variant;
  std::size_t m = 0;  // inducing count (0 when no latent block)
  std::size_t d = 1;
  std::vector<Segment> segments;
  std::size_t size = 0;

  const Segment& find(const std::string& name) const {
    for (const auto& s : segments)
      if (s.name == name) return s;
    throw LayoutMismatch("layout has no segment named " + name);
  }
  bool has(const std::string& name) const {
    for (const auto& s : segments)
      if (s.name == name) return true;
    return false;
  }
};

// Flat, ordered container of every trainable scalar in unconstrained space.
struct ParamVector {
  ParamLayout layout;
  Vector values;
};

inline std::size_t param_count(const Variant& v, std::size_t m, std::size_t d) {
  std::size_t count = 0;
  if (v.any_latent()) count += m * d;                      // inducing inputs
  count += v.ell_latent ? m * d + 3 : 1;                   // gamma + (mu, phi) or constant
  count += v.sigma_latent ? m + 3 : 1;
  count += v.omega_latent ? m + 3 : 1;
  return count;
}

inline ParamLayout make_layout(const Variant& v, std::size_t m, std::size_t d) {
  if (d < 1) throw LayoutMismatch("make_layout: d must be >= 1");
  if (v.any_latent() && m < 1) throw LayoutMismatch("make_layout: m must be >= 1");
  ParamLayout layout;
  layout.variant = v;
  layout.m = v.any_latent() ? m : 0;
  layout.d = d;
  std::size_t off = 0;
  auto add = [&](const std::string& name, std::size_t len, Transform t) {
    layout.segments.push_back({name, off, len, t});
    off += len;
  };
  if (v.any_latent()) add("xbar", m * d, Transform::identity);
  auto add_hyper = [&](const char* h, bool latent, std::size_t n_out) {
    const std::string tag(h);
    if (latent) {
      add("gamma_" + tag, m * n_out, Transform::identity);
      add("mu_" + tag, 1, Transform::identity);
      add("phi_" + tag + "_lengthscale", 1, Transform::log);
      add("phi_" + tag + "_amplitude", 1, Transform::log);
    } else {
      add("const_" + tag, 1, Transform::log);
    }
  };
  add_hyper("ell", v.ell_latent, d);
  add_hyper("sigma", v.sigma_latent, 1);
  add_hyper("omega", v.omega_latent, 1);
  layout.size = off;
  return layout;
}

// Predictive distribution at a set of query points. var_y is materialized
// as the exact sum of the two parts.
struct Prediction {
  Vector mean;
  Vector var_f;      // epistemic
  Vector var_noise;  // aleatoric, omega(x)^2
  Vector var_y;

  std::size_t size() const { return mean.size(); }
};

struct NsgpModel {
  Matrix xbar;  // M x D; empty when no hyper-function is latent
  HyperFunction ell{HyperTag::lengthscale, LatentConstant{}};
  HyperFunction sigma{HyperTag::signal, LatentConstant{}};
  HyperFunction omega{HyperTag::noise, LatentConstant{}};
  PriorSet priors;
  Matrix train_x;
  Vector train_y;

  Variant variant() const {
    return {ell.is_latent(), sigma.is_latent(), omega.is_latent()};
  }
  std::size_t n() const { return train_x.rows(); }
  std::size_t d() const { return train_x.cols(); }
  std::size_t m() const { return xbar.rows(); }

  void validate() const {
    if (train_x.rows() != train_y.size())
      throw DimensionMismatch("model: train_x rows differ from train_y length");
    if (n() < 1) throw DimensionMismatch("model: empty training set");
    if (variant().any_latent() && m() < 1)
      throw DimensionMismatch("model: latent hyper-function without inducing inputs");
    if (!xbar.all_finite() || !train_x.all_finite())
      throw NonFinite("model: non-finite inputs");
  }
};

// Natural-scale hyper-values at a point set.
struct HyperValues {
  Matrix ell;    // n x D
  Vector sigma;  // n
  Vector omega;  // n
};

inline HyperValues hyper_values_at(const NsgpModel& m, const Matrix& points) {
  HyperValues hv;
  hv.ell = predict_value(m.ell, points, m.xbar, points.cols());
  hv.sigma = predict_value(m.sigma, points, m.xbar, 1).col(0);
  hv.omega = predict_value(m.omega, points, m.xbar, 1).col(0);
  return hv;
}

inline GibbsInputs gibbs_inputs(const HyperValues& hv) { return {hv.ell, hv.sigma}; }

// K_f + diag(omega^2) at the training inputs.
inline Matrix train_covariance(const NsgpModel& m, const HyperValues& hv) {
  Matrix ky = gram(m.train_x, gibbs_inputs(hv));
  for (std::size_t i = 0; i < ky.rows(); ++i) ky(i, i) += hv.omega[i] * hv.omega[i];
  return ky;
}

inline double nlml_from_factor(const CholFactor& f, const Vector& y) {
  const Vector alpha = solve_chol(f, y);
  double quad = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) quad += y[i] * alpha[i];
  return 0.5 * quad + 0.5 * logdet(f) +
         0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

// Negative log marginal likelihood of y under the main GP with the latent
// function integrated out.
inline double nlml(const NsgpModel& m) {
  m.validate();
  const HyperValues hv = hyper_values_at(m, m.train_x);
  const CholFactor f = cholesky_psd(train_covariance(m, hv), 0.0);
  return nlml_from_factor(f, m.train_y);
}

inline double log_prior(const NsgpModel& m) {
  double lp = 0.0;
  auto add = [&](const HyperFunction& h) {
    if (!h.is_latent()) return;
    const LatentGp& g = h.gp();
    lp += gamma_log_pdf(g.rbf.lengthscale, m.priors.latent_lengthscale_shape,
                        m.priors.latent_lengthscale_rate);
    lp += gamma_log_pdf(g.rbf.amplitude, m.priors.latent_amplitude_shape,
                        m.priors.latent_amplitude_rate);
    for (std::size_t i = 0; i < g.gamma.rows(); ++i)
      for (std::size_t j = 0; j < g.gamma.cols(); ++j) lp += normal_log_pdf(g.gamma(i, j));
  };
  add(m.ell);
  add(m.sigma);
  add(m.omega);
  return lp;
}

// MAP type-II objective: nlml minus the log prior over latent kernel
// parameters and whitened vectors.
inline double objective(const NsgpModel& m) { return nlml(m) - log_prior(m); }

inline ParamVector pack(const NsgpModel& m) {
  m.validate();
  const Variant v = m.variant();
  const std::size_t d = m.d();
  ParamVector pv{make_layout(v, v.any_latent() ? m.m() : 1, d), {}};
  pv.values.assign(pv.layout.size, 0.0);
  auto put = [&](const std::string& name, std::size_t i, double val) {
    const Segment& s = pv.layout.find(name);
    if (i >= s.length) throw LayoutMismatch("pack: overflow in segment " + name);
    pv.values[s.offset + i] = val;
  };
  if (v.any_latent())
    for (std::size_t i = 0; i < m.xbar.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) put("xbar", i * d + j, m.xbar(i, j));
  auto put_hyper = [&](const HyperFunction& h, const char* tag) {
    const std::string t(tag);
    if (h.is_latent()) {
      const LatentGp& g = h.gp();
      for (std::size_t i = 0; i < g.gamma.rows(); ++i)
        for (std::size_t j = 0; j < g.gamma.cols(); ++j)
          put("gamma_" + t, i * g.gamma.cols() + j, g.gamma(i, j));
      put("mu_" + t, 0, g.mean);
      put("phi_" + t + "_lengthscale", 0, std::log(g.rbf.lengthscale));
      put("phi_" + t + "_amplitude", 0, std::log(g.rbf.amplitude));
    } else {
      put("const_" + t, 0, h.constant().log_value);
    }
  };
  put_hyper(m.ell, "ell");
  put_hyper(m.sigma, "sigma");
  put_hyper(m.omega, "omega");
  return pv;
}

inline NsgpModel unpack(const ParamVector& pv, const Matrix& train_x,
                        const Vector& train_y) {
  const ParamLayout& layout = pv.layout;
  if (pv.values.size() != layout.size)
    throw LayoutMismatch("unpack: value count differs from layout size");
  const std::size_t d = layout.d;
  if (train_x.cols() != d) throw LayoutMismatch("unpack: data dimension differs from layout");
  auto get = [&](const std::string& name, std::size_t i) {
    const Segment& s = layout.find(name);
    return pv.values[s.offset + i];
  };
  NsgpModel m;
  m.train_x = train_x;
  m.train_y = train_y;
  if (layout.variant.any_latent()) {
    m.xbar = Matrix(layout.m, d);
    for (std::size_t i = 0; i < layout.m; ++i)
      for (std::size_t j = 0; j < d; ++j) m.xbar(i, j) = get("xbar", i * d + j);
  } else {
    m.xbar = Matrix(0, d);
  }
  auto get_hyper = [&](HyperTag tag, bool latent, std::size_t n_out) {
    const std::string t(to_string(tag));
    HyperFunction h;
    h.tag = tag;
    if (latent) {
      LatentGp g;
      g.gamma = Matrix(layout.m, n_out);
      for (std::size_t i = 0; i < layout.m; ++i)
        for (std::size_t j = 0; j < n_out; ++j) g.gamma(i, j) = get("gamma_" + t, i * n_out + j);
      g.mean = get("mu_" + t, 0);
      g.rbf.lengthscale = std::exp(get("phi_" + t + "_lengthscale", 0));
      g.rbf.amplitude = std::exp(get("phi_" + t + "_amplitude", 0));
      h.fn = g;
    } else {
      h.fn = LatentConstant{get("const_" + t, 0)};
    }
    return h;
  };
  m.ell = get_hyper(HyperTag::lengthscale, layout.variant.ell_latent, d);
  m.sigma = get_hyper(HyperTag::signal, layout.variant.sigma_latent, 1);
  m.omega = get_hyper(HyperTag::noise, layout.variant.omega_latent, 1);
  return m;
}

// Round-off can push the epistemic variance a hair below zero; anything
// materially negative signals a broken factorization.
inline double clamp_variance(double v) {
  if (v >= 0.0) return v;
  if (v > -1e-8) return 0.0;
  throw NotPositiveDefinite("predict: negative epistemic variance beyond round-off");
}

inline Prediction predict(const NsgpModel& m, const Matrix& xstar) {
  m.validate();
  if (xstar.cols() != m.d()) throw DimensionMismatch("predict: query dimension differs");
  const HyperValues hv = hyper_values_at(m, m.train_x);
  const HyperValues hs = hyper_values_at(m, xstar);
  const CholFactor f = cholesky_psd(train_covariance(m, hv), 0.0);
  const Matrix ks = cross_gram(m.train_x, gibbs_inputs(hv), xstar, gibbs_inputs(hs));
  const Vector alpha = solve_chol(f, m.train_y);

  Prediction p;
  p.mean = matvec_t(ks, alpha);
  const Matrix t = solve_lower_multi(f.lower, ks);
  p.var_f.resize(xstar.rows());
  p.var_noise.resize(xstar.rows());
  p.var_y.resize(xstar.rows());
  for (std::size_t j = 0; j < xstar.rows(); ++j) {
    double q = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) q += t(i, j) * t(i, j);
    p.var_f[j] = clamp_variance(hs.sigma[j] * hs.sigma[j] - q);
    p.var_noise[j] = hs.omega[j] * hs.omega[j];
    p.var_y[j] = p.var_f[j] + p.var_noise[j];
  }
  return p;
}

// Same hyper-functions and inducing inputs, different conditioning set.
// Used by the active-learning loop, which grows the labeled set without
// retraining.
inline NsgpModel condition_on(const NsgpModel& m, const Matrix& x, const Vector& y) {
  NsgpModel out = m;
  out.train_x = x;
  out.train_y = y;
  out.validate();
  return out;
}

}  // namespace nsgp
