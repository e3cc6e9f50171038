#pragma once

// Stationary RBF kernel (used by the latent GPs) and the non-stationary
// Gibbs kernel with input-dependent length scale and amplitude.
//
// Conventions: the RBF amplitude multiplies directly, so the diagonal of an
// RBF gram is the amplitude itself. The Gibbs kernel multiplies the two
// per-point amplitudes, so its diagonal is sigma(x)^2. With constant
// hyper-values, Gibbs(l, s) reduces entrywise to Rbf(l, s^2).

#include <cmath>
#include <span>

#include "nsgp/errors.hpp"
#include "nsgp/numerics.hpp"

namespace nsgp {

struct RbfParams {
  double lengthscale = 1.0;
  double amplitude = 1.0;

  void validate() const {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale) || !(amplitude > 0.0) ||
        !std::isfinite(amplitude))
      throw NonPositiveParam("RbfParams: lengthscale and amplitude must be positive");
  }
};

// Per-point hyper-values feeding the Gibbs kernel at a fixed point set:
// ell is n x D (one length scale per input dimension), sigma has length n.
struct GibbsInputs {
  Matrix ell;
  Vector sigma;

  std::size_t n() const { return sigma.size(); }

  void validate() const {
    if (ell.rows() != sigma.size())
      throw DimensionMismatch("GibbsInputs: ell rows and sigma length differ");
    for (double v : sigma)
      if (!(v > 0.0) || !std::isfinite(v))
        throw NonPositiveParam("GibbsInputs: sigma must be positive");
    for (std::size_t i = 0; i < ell.rows(); ++i)
      for (std::size_t d = 0; d < ell.cols(); ++d)
        if (!(ell(i, d) > 0.0) || !std::isfinite(ell(i, d)))
          throw NonPositiveParam("GibbsInputs: ell must be positive");
  }
};

inline double rbf(std::span<const double> x, std::span<const double> xp,
                  const RbfParams& p) {
  if (x.size() != xp.size()) throw DimensionMismatch("rbf: point dimensions differ");
  p.validate();
  const double r2 = squared_distance(x, xp);
  return p.amplitude * std::exp(-r2 / (2.0 * p.lengthscale * p.lengthscale));
}

// Gibbs kernel value between x and xp given per-point, per-dimension length
// scales and per-point amplitudes. Each dimension contributes a prefactor
// sqrt(2 l l' / (l^2 + l'^2)) and a term (x_d - x'_d)^2 / (l^2 + l'^2) in
// the exponent; at equal constant scales this is the RBF with amplitude
// s(x) s(x').
inline double gibbs(std::span<const double> x, std::span<const double> xp,
                    std::span<const double> ell, std::span<const double> ellp,
                    double sigma, double sigmap) {
  const std::size_t d = x.size();
  if (xp.size() != d || ell.size() != d || ellp.size() != d)
    throw DimensionMismatch("gibbs: dimensions differ");
  if (!(sigma > 0.0) || !(sigmap > 0.0))
    throw NonPositiveParam("gibbs: amplitudes must be positive");
  double prefactor = 1.0;
  double expo = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double u = ell[k];
    const double v = ellp[k];
    if (!(u > 0.0) || !(v > 0.0))
      throw NonPositiveParam("gibbs: length scales must be positive");
    const double s = u * u + v * v;
    prefactor *= std::sqrt(2.0 * u * v / s);
    const double diff = x[k] - xp[k];
    expo += diff * diff / s;
  }
  return sigma * sigmap * prefactor * std::exp(-expo);
}

inline Matrix gram(const Matrix& points, const RbfParams& p) {
  p.validate();
  const std::size_t n = points.rows();
  Matrix k(n, n);
  const double inv2l2 = 1.0 / (2.0 * p.lengthscale * p.lengthscale);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = p.amplitude;
    for (std::size_t j = 0; j < i; ++j) {
      const double v =
          p.amplitude * std::exp(-squared_distance(points.row(i), points.row(j)) * inv2l2);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

inline Matrix gram(const Matrix& points, const GibbsInputs& g) {
  if (g.n() != points.rows()) throw DimensionMismatch("gram: inputs not aligned with points");
  if (g.ell.cols() != points.cols())
    throw DimensionMismatch("gram: ell dimension differs from points");
  g.validate();
  const std::size_t n = points.rows();
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = g.sigma[i] * g.sigma[i];
    for (std::size_t j = 0; j < i; ++j) {
      const double v = gibbs(points.row(i), points.row(j), g.ell.row(i), g.ell.row(j),
                             g.sigma[i], g.sigma[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

inline Matrix cross_gram(const Matrix& a, const Matrix& b, const RbfParams& p) {
  if (a.cols() != b.cols()) throw DimensionMismatch("cross_gram: point dimensions differ");
  p.validate();
  Matrix k(a.rows(), b.rows());
  const double inv2l2 = 1.0 / (2.0 * p.lengthscale * p.lengthscale);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      k(i, j) = p.amplitude * std::exp(-squared_distance(a.row(i), b.row(j)) * inv2l2);
  return k;
}

inline Matrix cross_gram(const Matrix& a, const GibbsInputs& ga, const Matrix& b,
                         const GibbsInputs& gb) {
  if (a.cols() != b.cols()) throw DimensionMismatch("cross_gram: point dimensions differ");
  if (ga.n() != a.rows() || gb.n() != b.rows())
    throw DimensionMismatch("cross_gram: inputs not aligned with points");
  Matrix k(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      k(i, j) = gibbs(a.row(i), b.row(j), ga.ell.row(i), gb.ell.row(j), ga.sigma[i],
                      gb.sigma[j]);
  return k;
}

}  // namespace nsgp
