#pragma once

// Randomized finite-difference battery over all 8 variants. Each partial
// must satisfy |analytic - fd| <= max(1e-4 |fd|, 1e-6); worst_ratio is the
// largest observed ratio against that bound.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nsgp/gradient.hpp"
#include "nsgp/model.hpp"
#include "nsgp/numerics.hpp"
#include "nsgp/rng.hpp"
#include "nsgp/train.hpp"

namespace nsgp {

struct GradCheckCase {
  std::size_t index = 0;
  Variant variant;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t d = 0;
  double max_abs_diff = 0.0;
  double worst_ratio = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double worst_ratio = 0.0;
  bool all_pass = true;
};

// `perturb` deliberately corrupts one analytic partial so callers can verify
// the check actually fails when the gradient is wrong.
inline GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t count = 20,
                                     bool perturb = false) {
  GradCheckReport rep;
  const auto variants = Variant::all();
  for (std::size_t c = 0; c < count; ++c) {
    auto gen = rng::substream(seed, "gradcheck/" + std::to_string(c));
    GradCheckCase cs;
    cs.index = c;
    cs.variant = variants[c % variants.size()];
    std::uniform_int_distribution<std::size_t> npick(5, 20);
    std::uniform_int_distribution<std::size_t> mpick(2, 5);
    std::uniform_int_distribution<std::size_t> dpick(1, 2);
    cs.d = dpick(gen);
    cs.n = npick(gen);
    cs.m = mpick(gen);
    Matrix x(cs.n, cs.d);
    std::uniform_real_distribution<double> ux(-2.0, 2.0);
    std::normal_distribution<double> uy;
    for (std::size_t i = 0; i < cs.n; ++i)
      for (std::size_t j = 0; j < cs.d; ++j) x(i, j) = ux(gen);
    Vector y(cs.n);
    for (double& v : y) v = uy(gen);

    const ParamVector pv = init_params(
        cs.variant, x, y, cs.m,
        rng::substream_seed(seed, "gradcheck/init/" + std::to_string(c)));
    ObjectiveResult res = objective_value_and_gradient(pv, x, y);
    if (perturb && !res.gradient.empty()) res.gradient[0] += 1e-2;
    auto value_at = [&](const Vector& p) {
      return objective_value_and_gradient({pv.layout, p}, x, y).value;
    };
    const Vector fd = fd_gradient(value_at, pv.values, 1e-5);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      const double diff = std::abs(res.gradient[i] - fd[i]);
      const double tol = std::max(1e-4 * std::abs(fd[i]), 1e-6);
      cs.max_abs_diff = std::max(cs.max_abs_diff, diff);
      cs.worst_ratio = std::max(cs.worst_ratio, diff / tol);
    }
    cs.pass = cs.worst_ratio <= 1.0;
    rep.worst_ratio = std::max(rep.worst_ratio, cs.worst_ratio);
    rep.all_pass = rep.all_pass && cs.pass;
    rep.cases.push_back(cs);
  }
  return rep;
}

}  // namespace nsgp
