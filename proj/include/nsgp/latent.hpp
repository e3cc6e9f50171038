#pragma once

// Latent log-hyper-functions: a hyper-parameter of the main GP (length
// scale, signal amplitude, or noise scale) is either a learned constant or
// the mean of an inducing-point GP on the log scale. The inducing outputs
// use a non-centered parameterization: a whitened vector gamma with a
// standard-normal prior, mapped through the Cholesky factor of the latent
// gram, plus the latent mean.

#include <cmath>
#include <variant>

#include "nsgp/errors.hpp"
#include "nsgp/kernels.hpp"
#include "nsgp/numerics.hpp"

namespace nsgp {

// Noise-free latent GPs get a small diagonal jitter proportional to the
// latent amplitude.
inline constexpr double kLatentJitterScale = 1e-6;

enum class HyperTag { lengthscale, signal, noise };

inline const char* to_string(HyperTag t) {
  switch (t) {
    case HyperTag::lengthscale: return "ell";
    case HyperTag::signal: return "sigma";
    default: return "omega";
  }
}

struct LatentConstant {
  double log_value = 0.0;
};

struct LatentGp {
  double mean = 0.0;      // mu_h, log space
  RbfParams rbf;          // phi_h
  Matrix gamma;           // M x n_out whitened outputs (n_out = D for ARD ell)
};

struct HyperFunction {
  HyperTag tag = HyperTag::lengthscale;
  std::variant<LatentConstant, LatentGp> fn;

  bool is_latent() const { return std::holds_alternative<LatentGp>(fn); }
  const LatentGp& gp() const { return std::get<LatentGp>(fn); }
  LatentGp& gp() { return std::get<LatentGp>(fn); }
  const LatentConstant& constant() const { return std::get<LatentConstant>(fn); }
  LatentConstant& constant() { return std::get<LatentConstant>(fn); }
};

inline CholFactor latent_chol(const LatentGp& g, const Matrix& xbar) {
  return cholesky_psd(gram(xbar, g.rbf), kLatentJitterScale * g.rbf.amplitude);
}

// z_bar = L gamma + mu, the latent outputs at the inducing inputs. The mean
// is added after whitening so gamma ~ N(0, I) corresponds to
// z_bar ~ N(mu, K_h).
inline Matrix latent_outputs(const LatentGp& g, const Matrix& xbar) {
  if (g.gamma.rows() != xbar.rows())
    throw DimensionMismatch("latent_outputs: gamma rows differ from inducing count");
  const CholFactor f = latent_chol(g, xbar);
  Matrix z = matmul(f.lower, g.gamma);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += g.mean;
  return z;
}

// Log-scale prediction at xstar: the GP conditional mean
// mu + K(xstar, xbar) K(xbar, xbar)^{-1} (z_bar - mu), which simplifies to
// mu + K(xstar, xbar) L^{-T} gamma under the whitened parameterization.
// Constants broadcast to every point and requested output column.
inline Matrix predict_log(const HyperFunction& h, const Matrix& xstar, const Matrix& xbar,
                          std::size_t n_out = 1) {
  if (!h.is_latent()) {
    return Matrix(xstar.rows(), n_out, h.constant().log_value);
  }
  const LatentGp& g = h.gp();
  if (g.gamma.cols() != n_out)
    throw DimensionMismatch("predict_log: gamma columns differ from requested outputs");
  if (xstar.cols() != xbar.cols())
    throw DimensionMismatch("predict_log: query dimension differs from inducing inputs");
  const CholFactor f = latent_chol(g, xbar);
  const Matrix u = solve_lower_transpose_multi(f.lower, g.gamma);
  const Matrix kx = cross_gram(xstar, xbar, g.rbf);
  Matrix out = matmul(kx, u);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += g.mean;
  return out;
}

inline Matrix predict_value(const HyperFunction& h, const Matrix& xstar, const Matrix& xbar,
                            std::size_t n_out = 1) {
  Matrix out = predict_log(h, xstar, xbar, n_out);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = std::exp(out(i, j));
  return out;
}

}  // namespace nsgp
