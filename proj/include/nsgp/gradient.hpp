#pragma once

// Reverse-mode gradient of the MAP objective, hand-derived. The chain runs
// marginal likelihood -> train covariance -> log hyper-values at the
// training inputs -> latent GP predictions -> whitened vectors, kernel
// parameters, and inducing inputs. Verified against central finite
// differences in the test suite.

#include <cmath>
#include <string>
#include <vector>

#include "nsgp/errors.hpp"
#include "nsgp/kernels.hpp"
#include "nsgp/latent.hpp"
#include "nsgp/model.hpp"
#include "nsgp/numerics.hpp"

namespace nsgp {

struct ObjectiveResult {
  double value = 0.0;      // nlml - log_prior
  double nlml = 0.0;
  double log_prior = 0.0;
  Vector gradient;
  double ky_jitter = 0.0;  // jitter the train covariance factorization needed
};

namespace detail {

struct HyperWork {
  bool latent = false;
  std::size_t n_out = 1;
  std::string tag;
  double mean = 0.0;
  RbfParams rbf;
  Matrix gamma;     // M x n_out
  Matrix a;         // latent gram including the jitter actually used
  CholFactor chol;
  Matrix usol;      // L^{-T} gamma
  Matrix kx;        // N x M cross gram against the inducing inputs
  double log_value = 0.0;
  Matrix htilde;    // N x n_out log-scale outputs
};

inline HyperWork forward_hyper(const ParamLayout& layout, const Vector& values,
                               bool latent, const char* tag, std::size_t n_out,
                               const Matrix& x, const Matrix& xbar) {
  HyperWork w;
  w.latent = latent;
  w.n_out = n_out;
  w.tag = tag;
  if (!latent) {
    w.log_value = values[layout.find("const_" + w.tag).offset];
    w.htilde = Matrix(x.rows(), n_out, w.log_value);
    return w;
  }
  const std::size_t m = layout.m;
  w.mean = values[layout.find("mu_" + w.tag).offset];
  w.rbf.lengthscale = std::exp(values[layout.find("phi_" + w.tag + "_lengthscale").offset]);
  w.rbf.amplitude = std::exp(values[layout.find("phi_" + w.tag + "_amplitude").offset]);
  w.rbf.validate();
  w.gamma = Matrix(m, n_out);
  {
    const Segment& s = layout.find("gamma_" + w.tag);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n_out; ++j)
        w.gamma(i, j) = values[s.offset + i * n_out + j];
  }
  w.a = gram(xbar, w.rbf);
  w.chol = cholesky_psd(w.a, kLatentJitterScale * w.rbf.amplitude);
  for (std::size_t i = 0; i < m; ++i) w.a(i, i) += w.chol.jitter_used;
  w.usol = solve_lower_transpose_multi(w.chol.lower, w.gamma);
  w.kx = cross_gram(x, xbar, w.rbf);
  w.htilde = matmul(w.kx, w.usol);
  for (std::size_t i = 0; i < w.htilde.rows(); ++i)
    for (std::size_t j = 0; j < n_out; ++j) w.htilde(i, j) += w.mean;
  return w;
}

inline double hyper_log_prior(const HyperWork& w, const PriorSet& priors) {
  if (!w.latent) return 0.0;
  double lp = gamma_log_pdf(w.rbf.lengthscale, priors.latent_lengthscale_shape,
                            priors.latent_lengthscale_rate) +
              gamma_log_pdf(w.rbf.amplitude, priors.latent_amplitude_shape,
                            priors.latent_amplitude_rate);
  for (std::size_t i = 0; i < w.gamma.rows(); ++i)
    for (std::size_t j = 0; j < w.gamma.cols(); ++j)
      lp += normal_log_pdf(w.gamma(i, j));
  return lp;
}

// Pushes the adjoint of the log-scale outputs back onto this hyper-function's
// parameters, and onto the shared inducing inputs when latent.
inline void backward_hyper(const ParamLayout& layout, const HyperWork& w,
                           const Matrix& hbar, const Matrix& x,
                           const Matrix& xbar, const PriorSet& priors,
                           Vector& grad, Matrix& xbar_bar) {
  if (!w.latent) {
    double s = 0.0;
    for (std::size_t i = 0; i < hbar.rows(); ++i)
      for (std::size_t j = 0; j < hbar.cols(); ++j) s += hbar(i, j);
    grad[layout.find("const_" + w.tag).offset] += s;
    return;
  }
  const std::size_t m = layout.m;
  const double ell2 = w.rbf.lengthscale * w.rbf.lengthscale;

  double mean_sum = 0.0;
  for (std::size_t i = 0; i < hbar.rows(); ++i)
    for (std::size_t j = 0; j < hbar.cols(); ++j) mean_sum += hbar(i, j);
  grad[layout.find("mu_" + w.tag).offset] += mean_sum;

  const Matrix ubar = matmul(transpose(w.kx), hbar);           // M x n_out
  const Matrix kxbar = matmul(hbar, transpose(w.usol));        // N x M
  const Matrix gammabar = solve_lower_multi(w.chol.lower, ubar);
  {
    const Segment& s = layout.find("gamma_" + w.tag);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w.n_out; ++j)
        grad[s.offset + i * w.n_out + j] += gammabar(i, j) + w.gamma(i, j);
  }

  // usol = L^{-T} gamma, so the factor adjoint is -usol gammabar^T on the
  // lower triangle only.
  Matrix lbar(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < w.n_out; ++c) s -= w.usol(i, c) * gammabar(j, c);
      lbar(i, j) = s;
    }

  // Cholesky reverse: abar = L^{-T} Phi(L^T lbar) L^{-1}, Phi keeping the
  // lower triangle with a halved diagonal, then symmetrized.
  Matrix p = matmul(transpose(w.chol.lower), lbar);
  for (std::size_t i = 0; i < m; ++i) {
    p(i, i) *= 0.5;
    for (std::size_t j = i + 1; j < m; ++j) p(i, j) = 0.0;
  }
  const Matrix tmp = solve_lower_transpose_multi(w.chol.lower, p);
  Matrix abar = transpose(solve_lower_transpose_multi(w.chol.lower, transpose(tmp)));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double s = 0.5 * (abar(i, j) + abar(j, i));
      abar(i, j) = s;
      abar(j, i) = s;
    }

  // The jitter scales with the amplitude, so d a / d log amplitude is the
  // jittered gram itself, diagonal included.
  double glogamp = 0.0;
  double gloglen = 0.0;
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t j = 0; j < m; ++j) {
      const double r2 = squared_distance(xbar.row(k), xbar.row(j));
      const double aa = abar(k, j) * w.a(k, j);
      glogamp += aa;
      gloglen += aa * r2 / ell2;
      if (k != j)
        for (std::size_t dd = 0; dd < xbar.cols(); ++dd)
          xbar_bar(k, dd) -= 2.0 / ell2 * aa * (xbar(k, dd) - xbar(j, dd));
    }
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < m; ++k) {
      const double r2 = squared_distance(x.row(i), xbar.row(k));
      const double kk = kxbar(i, k) * w.kx(i, k);
      glogamp += kk;
      gloglen += kk * r2 / ell2;
      for (std::size_t dd = 0; dd < xbar.cols(); ++dd)
        xbar_bar(k, dd) += kk * (x(i, dd) - xbar(k, dd)) / ell2;
    }

  gloglen += w.rbf.lengthscale * priors.latent_lengthscale_rate -
             (priors.latent_lengthscale_shape - 1.0);
  glogamp += w.rbf.amplitude * priors.latent_amplitude_rate -
             (priors.latent_amplitude_shape - 1.0);
  grad[layout.find("phi_" + w.tag + "_lengthscale").offset] += gloglen;
  grad[layout.find("phi_" + w.tag + "_amplitude").offset] += glogamp;
}

}  // namespace detail

inline ObjectiveResult objective_value_and_gradient(const ParamVector& pv,
                                                    const Matrix& x,
                                                    const Vector& y,
                                                    const PriorSet& priors = {}) {
  const ParamLayout& layout = pv.layout;
  if (pv.values.size() != layout.size)
    throw LayoutMismatch("objective: value count differs from layout size");
  if (x.rows() != y.size())
    throw DimensionMismatch("objective: x rows differ from y length");
  if (x.rows() < 1) throw DimensionMismatch("objective: empty training set");
  if (x.cols() != layout.d)
    throw LayoutMismatch("objective: data dimension differs from layout");
  const std::size_t n = x.rows();
  const std::size_t d = layout.d;

  Matrix xbar(layout.variant.any_latent() ? layout.m : 0, d);
  if (layout.variant.any_latent()) {
    const Segment& s = layout.find("xbar");
    for (std::size_t i = 0; i < layout.m; ++i)
      for (std::size_t j = 0; j < d; ++j) xbar(i, j) = pv.values[s.offset + i * d + j];
    if (!xbar.all_finite()) throw NonFinite("objective: non-finite inducing inputs");
  }

  detail::HyperWork well = detail::forward_hyper(
      layout, pv.values, layout.variant.ell_latent, "ell", d, x, xbar);
  detail::HyperWork wsig = detail::forward_hyper(
      layout, pv.values, layout.variant.sigma_latent, "sigma", 1, x, xbar);
  detail::HyperWork womg = detail::forward_hyper(
      layout, pv.values, layout.variant.omega_latent, "omega", 1, x, xbar);

  Matrix ellv(n, d);
  Vector sigv(n), omgv(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ellv(i, j) = std::exp(well.htilde(i, j));
    sigv[i] = std::exp(wsig.htilde(i, 0));
    omgv[i] = std::exp(womg.htilde(i, 0));
    if (!std::isfinite(sigv[i]) || !std::isfinite(omgv[i]))
      throw NonFinite("objective: hyper-value overflow");
  }
  if (!ellv.all_finite()) throw NonFinite("objective: hyper-value overflow");

  const Matrix kf = gram(x, GibbsInputs{ellv, sigv});
  Matrix ky = kf;
  for (std::size_t i = 0; i < n; ++i) ky(i, i) += omgv[i] * omgv[i];
  const CholFactor fky = cholesky_psd(ky, 0.0);
  const Vector alpha = solve_chol(fky, y);

  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) quad += y[i] * alpha[i];
  const double nlml_value =
      0.5 * quad + 0.5 * logdet(fky) + 0.5 * static_cast<double>(n) * kLog2Pi;
  const double log_prior_value = detail::hyper_log_prior(well, priors) +
                                 detail::hyper_log_prior(wsig, priors) +
                                 detail::hyper_log_prior(womg, priors);

  // w = d nlml / d ky, treating all entries as independent.
  Matrix w = chol_inverse(fky);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      w(i, j) = 0.5 * (w(i, j) - alpha[i] * alpha[j]);

  // Adjoints of the log hyper-values at the training inputs. The length
  // scale factor is d log k / d log ell at fixed partner, zero on the
  // diagonal where both arguments move together.
  Matrix hbar_ell(n, d);
  Matrix hbar_sig(n, 1);
  Matrix hbar_omg(n, 1);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const double wk = w(k, j) * kf(k, j);
      hbar_sig(k, 0) += 2.0 * wk;
      for (std::size_t dd = 0; dd < d; ++dd) {
        const double u = ellv(k, dd);
        const double v = ellv(j, dd);
        const double s = u * u + v * v;
        const double diff = x(k, dd) - x(j, dd);
        const double g = 0.5 * (v * v - u * u) / s + 2.0 * u * u * diff * diff / (s * s);
        hbar_ell(k, dd) += 2.0 * wk * g;
      }
    }
    hbar_omg(k, 0) = 2.0 * w(k, k) * omgv[k] * omgv[k];
  }

  Vector grad(layout.size, 0.0);
  Matrix xbar_bar(xbar.rows(), d);
  detail::backward_hyper(layout, well, hbar_ell, x, xbar, priors, grad, xbar_bar);
  detail::backward_hyper(layout, wsig, hbar_sig, x, xbar, priors, grad, xbar_bar);
  detail::backward_hyper(layout, womg, hbar_omg, x, xbar, priors, grad, xbar_bar);
  if (layout.variant.any_latent()) {
    const Segment& s = layout.find("xbar");
    for (std::size_t i = 0; i < layout.m; ++i)
      for (std::size_t j = 0; j < d; ++j) grad[s.offset + i * d + j] = xbar_bar(i, j);
  }

  ObjectiveResult res;
  res.nlml = nlml_value;
  res.log_prior = log_prior_value;
  res.value = nlml_value - log_prior_value;
  res.gradient = std::move(grad);
  res.ky_jitter = fky.jitter_used;
  if (!std::isfinite(res.value)) throw NonFinite("objective: non-finite value");
  for (double g : res.gradient)
    if (!std::isfinite(g)) throw NonFinite("objective: non-finite gradient");
  return res;
}

}  // namespace nsgp
