#pragma once

// Gradient-based MAP training: Adam on the flat unconstrained parameter
// vector, data-driven initialization, and a bounded restart policy when an
// iterate leaves the region where the objective is finite.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "nsgp/errors.hpp"
#include "nsgp/gradient.hpp"
#include "nsgp/model.hpp"
#include "nsgp/numerics.hpp"
#include "nsgp/rng.hpp"

namespace nsgp {

struct AdamParams {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Vector m;
  Vector v;
  std::size_t step = 0;
};

inline void adam_step(Vector& params, const Vector& grad, AdamState& st,
                      const AdamParams& ap) {
  if (grad.size() != params.size())
    throw DimensionMismatch("adam_step: gradient length differs from parameters");
  if (st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size())
    throw DimensionMismatch("adam_step: state length differs from parameters");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(ap.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(ap.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = ap.beta1 * st.m[i] + (1.0 - ap.beta1) * grad[i];
    st.v[i] = ap.beta2 * st.v[i] + (1.0 - ap.beta2) * grad[i] * grad[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= ap.lr * mhat / (std::sqrt(vhat) + ap.eps);
  }
}

struct FitConfig {
  std::size_t epochs = 1000;
  std::size_t m = 10;
  std::uint64_t seed = 0;
  AdamParams adam;
  std::size_t retries = 3;  // learning-rate halvings allowed after divergence
  PriorSet priors;
};

struct FitReport {
  Vector objective_trace;   // epochs + 1 entries, final iterate included
  Vector grad_norm_trace;
  double final_objective = 0.0;
  std::size_t jitter_events = 0;
  std::size_t divergence_retries = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct FitResult {
  NsgpModel model;
  FitReport report;
};

namespace detail {

inline double median_pairwise_distance(const Matrix& x) {
  std::vector<double> dists;
  dists.reserve(x.rows() * (x.rows() - 1) / 2);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.rows(); ++j)
      dists.push_back(std::sqrt(squared_distance(x.row(i), x.row(j))));
  if (dists.empty()) return 1.0;
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  double med = dists[mid];
  if (dists.size() % 2 == 0) {
    const double lo = *std::max_element(dists.begin(), dists.begin() + mid);
    med = 0.5 * (med + lo);
  }
  return med > 0.0 ? med : 1.0;
}

inline double std_dev(const Vector& y) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(y.size()));
  return sd > 0.0 ? sd : 1.0;
}

}  // namespace detail

// Seeded data-driven start: inducing inputs on distinct training rows, log
// length scale at the median pairwise distance, log signal at the response
// scale, log noise a tenth of it, latent kernel parameters drawn from their
// priors, whitened vectors standard normal.
inline ParamVector init_params(const Variant& variant, const Matrix& x,
                               const Vector& y, std::size_t m,
                               std::uint64_t seed, const PriorSet& priors = {}) {
  if (x.rows() != y.size())
    throw DimensionMismatch("init: x rows differ from y length");
  if (x.rows() < 2) throw DimensionMismatch("init: at least two training rows required");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (variant.any_latent()) {
    if (m < 1) throw MTooLarge("init: at least one inducing point required");
    if (m > n) throw MTooLarge("init: more inducing points than training rows");
  }
  auto gen = rng::substream(seed, "init");

  NsgpModel model;
  model.train_x = x;
  model.train_y = y;
  model.priors = priors;

  if (variant.any_latent()) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(gen)]);
    }
    model.xbar = Matrix(m, d);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) model.xbar(i, j) = x(idx[i], j);
  } else {
    model.xbar = Matrix(0, d);
  }

  const double log_len = std::log(detail::median_pairwise_distance(x));
  const double sd = detail::std_dev(y);
  const double log_sig = std::log(sd);
  const double log_omg = std::log(0.1 * sd);

  auto make_hyper = [&](HyperTag tag, bool latent, std::size_t n_out, double center) {
    HyperFunction h;
    h.tag = tag;
    if (!latent) {
      h.fn = LatentConstant{center};
      return h;
    }
    LatentGp g;
    g.mean = center;
    std::gamma_distribution<double> len_prior(priors.latent_lengthscale_shape,
                                              1.0 / priors.latent_lengthscale_rate);
    std::gamma_distribution<double> amp_prior(priors.latent_amplitude_shape,
                                              1.0 / priors.latent_amplitude_rate);
    g.rbf.lengthscale = std::max(len_prior(gen), 1e-12);
    g.rbf.amplitude = std::max(amp_prior(gen), 1e-12);
    g.gamma = Matrix(m, n_out);
    std::normal_distribution<double> unit;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n_out; ++j) g.gamma(i, j) = unit(gen);
    h.fn = g;
    return h;
  };
  model.ell = make_hyper(HyperTag::lengthscale, variant.ell_latent, d, log_len);
  model.sigma = make_hyper(HyperTag::signal, variant.sigma_latent, 1, log_sig);
  model.omega = make_hyper(HyperTag::noise, variant.omega_latent, 1, log_omg);
  return pack(model);
}

inline FitResult fit_from(ParamVector params, const Matrix& x, const Vector& y,
                          const FitConfig& cfg) {
  if (x.rows() < 2) throw DimensionMismatch("fit: at least two training rows required");
  const auto start = std::chrono::steady_clock::now();
  FitReport report;
  report.seed = cfg.seed;
  report.objective_trace.reserve(cfg.epochs + 1);
  report.grad_norm_trace.reserve(cfg.epochs + 1);

  AdamParams adam = cfg.adam;
  AdamState state;
  Vector last_good = params.values;
  AdamState last_good_state;
  std::size_t retries_left = cfg.retries;

  double best_value = std::numeric_limits<double>::infinity();
  Vector best_values = params.values;

  for (std::size_t e = 0; e <= cfg.epochs; ++e) {
    ObjectiveResult res;
    for (;;) {
      try {
        res = objective_value_and_gradient(params, x, y, cfg.priors);
        break;
      } catch (const NonFinite&) {
        if (retries_left == 0)
          throw Diverged("fit: objective stayed non-finite after retries");
      } catch (const NotPositiveDefinite&) {
        if (retries_left == 0)
          throw Diverged("fit: covariance stayed indefinite after retries");
      }
      retries_left -= 1;
      report.divergence_retries += 1;
      adam.lr *= 0.5;
      params.values = last_good;
      state = last_good_state;
    }
    if (res.ky_jitter > 0.0) report.jitter_events += 1;
    double gn = 0.0;
    for (double g : res.gradient) gn += g * g;
    report.objective_trace.push_back(res.value);
    report.grad_norm_trace.push_back(std::sqrt(gn));
    if (res.value < best_value) {
      best_value = res.value;
      best_values = params.values;
    }
    last_good = params.values;
    last_good_state = state;
    if (e < cfg.epochs) adam_step(params.values, res.gradient, state, adam);
  }

  report.final_objective = best_value;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  params.values = best_values;
  FitResult out{unpack(params, x, y), std::move(report)};
  out.model.priors = cfg.priors;
  return out;
}

inline FitResult fit(const Variant& variant, const Matrix& x, const Vector& y,
                     const FitConfig& cfg) {
  return fit_from(init_params(variant, x, y, cfg.m, cfg.seed, cfg.priors), x, y, cfg);
}

// Central finite differences, the reference the analytic gradient is tested
// against.
template <typename F>
Vector fd_gradient(F&& f, const Vector& at, double step = 1e-5) {
  Vector g(at.size());
  Vector p = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    p[i] = at[i] + step;
    const double fp = f(p);
    p[i] = at[i] - step;
    const double fm = f(p);
    p[i] = at[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace nsgp
