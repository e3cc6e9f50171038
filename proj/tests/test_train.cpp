#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nsgp/gradient.hpp"
#include "nsgp/rng.hpp"
#include "nsgp/train.hpp"

using namespace nsgp;

namespace {

Matrix grid1d(double lo, double hi, std::size_t n) {
  Matrix x(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    x(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return x;
}

struct Problem {
  Matrix x;
  Vector y;
};

Problem noisy_sine(std::size_t n, std::uint64_t seed) {
  Problem p;
  p.x = grid1d(-3.0, 3.0, n);
  p.y.resize(n);
  auto gen = rng::substream(seed, "test/noisy_sine");
  std::normal_distribution<double> unit;
  for (std::size_t i = 0; i < n; ++i)
    p.y[i] = std::sin(1.5 * p.x(i, 0)) + 0.1 * unit(gen);
  return p;
}

}  // namespace

TEST_CASE("adam takes the documented first step") {
  AdamParams ap;
  AdamState st;
  Vector params{0.0, 1.0};
  adam_step(params, {1.0, -1.0}, st, ap);
  const double expect = 0.05 / (1.0 + 1e-8);
  REQUIRE(params[0] == Catch::Approx(-expect).margin(1e-15));
  REQUIRE(params[1] == Catch::Approx(1.0 + expect).margin(1e-15));
  REQUIRE(st.step == 1);
}

TEST_CASE("adam leaves parameters alone on a zero gradient") {
  AdamParams ap;
  AdamState st;
  Vector params{2.0, -3.0};
  adam_step(params, {0.0, 0.0}, st, ap);
  REQUIRE(params == Vector{2.0, -3.0});
}

TEST_CASE("adam step size is scale-free under a constant gradient") {
  AdamParams ap;
  AdamState st;
  Vector params{0.0, 0.0};
  // bias correction makes mhat=g and vhat=g^2, so both coordinates move by
  // nearly lr regardless of gradient magnitude
  adam_step(params, {100.0, 1e-3}, st, ap);
  REQUIRE(std::abs(params[0]) == Catch::Approx(0.05).epsilon(1e-4));
  REQUIRE(std::abs(params[1]) == Catch::Approx(0.05).epsilon(1e-4));

  const double first = params[0];
  adam_step(params, {100.0, 1e-3}, st, ap);
  REQUIRE(params[0] - first == Catch::Approx(first).epsilon(1e-4));
}

TEST_CASE("adam rejects mismatched gradient lengths") {
  AdamParams ap;
  AdamState st;
  Vector params{0.0};
  REQUIRE_THROWS_AS(adam_step(params, {1.0, 2.0}, st, ap), DimensionMismatch);
}

TEST_CASE("finite differences recover a quadratic gradient") {
  auto f = [](const Vector& v) { return v[0] * v[0] + 3.0 * v[1]; };
  const Vector g = fd_gradient(f, {2.0, -1.0});
  REQUIRE(g[0] == Catch::Approx(4.0).margin(1e-8));
  REQUIRE(g[1] == Catch::Approx(3.0).margin(1e-8));
}

TEST_CASE("finite differences report zero for unused parameters") {
  auto f = [](const Vector& v) { return std::sin(v[0]); };
  const Vector g = fd_gradient(f, {0.5, 7.0, -2.0});
  REQUIRE(g[1] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(g[2] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("analytic gradient matches finite differences on the full variant") {
  const Problem p = noisy_sine(12, 99);
  const ParamVector pv = init_params(Variant{true, true, true}, p.x, p.y, 4, 7);
  const ObjectiveResult res = objective_value_and_gradient(pv, p.x, p.y, {});

  auto f = [&](const Vector& v) {
    ParamVector q{pv.layout, v};
    return objective_value_and_gradient(q, p.x, p.y, {}).value;
  };
  const Vector fd = fd_gradient(f, pv.values);
  REQUIRE(fd.size() == res.gradient.size());
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double tol = std::max(1e-4 * std::abs(fd[i]), 1e-6);
    REQUIRE(std::abs(res.gradient[i] - fd[i]) <= tol);
  }
}

TEST_CASE("analytic gradient matches finite differences on mixed variants") {
  const Problem p = noisy_sine(10, 5);
  for (const Variant v : {Variant{false, false, false}, Variant{true, false, true},
                          Variant{false, true, false}}) {
    const ParamVector pv = init_params(v, p.x, p.y, 3, 11);
    const ObjectiveResult res = objective_value_and_gradient(pv, p.x, p.y, {});
    auto f = [&](const Vector& vals) {
      ParamVector q{pv.layout, vals};
      return objective_value_and_gradient(q, p.x, p.y, {}).value;
    };
    const Vector fd = fd_gradient(f, pv.values);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      const double tol = std::max(1e-4 * std::abs(fd[i]), 1e-6);
      REQUIRE(std::abs(res.gradient[i] - fd[i]) <= tol);
    }
  }
}

TEST_CASE("objective value equals the model objective after unpack") {
  const Problem p = noisy_sine(9, 13);
  const ParamVector pv = init_params(Variant{true, true, true}, p.x, p.y, 3, 3);
  const ObjectiveResult res = objective_value_and_gradient(pv, p.x, p.y, {});
  const NsgpModel m = unpack(pv, p.x, p.y);
  REQUIRE(res.value == Catch::Approx(objective(m)).margin(1e-10));
  REQUIRE(res.value == Catch::Approx(res.nlml - res.log_prior).margin(1e-12));
}

TEST_CASE("initialization is a deterministic function of the seed") {
  const Problem p = noisy_sine(15, 21);
  const Variant v{true, true, true};
  const ParamVector a = init_params(v, p.x, p.y, 5, 42);
  const ParamVector b = init_params(v, p.x, p.y, 5, 42);
  REQUIRE(a.values == b.values);
  const ParamVector c = init_params(v, p.x, p.y, 5, 43);
  REQUIRE(a.values != c.values);
}

TEST_CASE("initial constants come from data statistics") {
  const Problem p = noisy_sine(14, 2);
  const ParamVector pv = init_params(Variant{false, false, false}, p.x, p.y, 1, 0);
  double mean = 0.0;
  for (double v : p.y) mean += v;
  mean /= static_cast<double>(p.y.size());
  double ss = 0.0;
  for (double v : p.y) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(p.y.size()));

  Vector dists;
  for (std::size_t i = 0; i < p.x.rows(); ++i)
    for (std::size_t j = i + 1; j < p.x.rows(); ++j)
      dists.push_back(std::abs(p.x(i, 0) - p.x(j, 0)));
  std::sort(dists.begin(), dists.end());
  const std::size_t mid = dists.size() / 2;
  const double med = dists.size() % 2 == 1
                         ? dists[mid]
                         : 0.5 * (dists[mid - 1] + dists[mid]);

  REQUIRE(pv.values[pv.layout.find("const_ell").offset] ==
          Catch::Approx(std::log(med)).margin(1e-12));
  REQUIRE(pv.values[pv.layout.find("const_sigma").offset] ==
          Catch::Approx(std::log(sd)).margin(1e-12));
  REQUIRE(pv.values[pv.layout.find("const_omega").offset] ==
          Catch::Approx(std::log(0.1 * sd)).margin(1e-12));
}

TEST_CASE("inducing inputs are drawn from training rows without replacement") {
  const Problem p = noisy_sine(8, 77);
  const ParamVector pv = init_params(Variant{true, true, true}, p.x, p.y, 8, 5);
  const Segment seg = pv.layout.find("xbar");
  Vector xs(8);
  for (std::size_t i = 0; i < 8; ++i) xs[i] = pv.values[seg.offset + i];
  std::sort(xs.begin(), xs.end());
  Vector expect = p.x.col(0);
  std::sort(expect.begin(), expect.end());
  for (std::size_t i = 0; i < 8; ++i)
    REQUIRE(xs[i] == Catch::Approx(expect[i]).margin(1e-15));
}

TEST_CASE("latent amplitude hyper-draws follow their prior mean") {
  const Problem p = noisy_sine(10, 1);
  double sum = 0.0;
  const int reps = 10000;
  for (int s = 0; s < reps; ++s) {
    const ParamVector pv =
        init_params(Variant{true, false, false}, p.x, p.y, 2, static_cast<std::uint64_t>(s));
    sum += std::exp(pv.values[pv.layout.find("phi_ell_lengthscale").offset]);
  }
  // Gamma(5,1) has mean 5
  REQUIRE(sum / reps == Catch::Approx(5.0).epsilon(0.05));
}

TEST_CASE("initialization rejects degenerate requests") {
  const Problem p = noisy_sine(6, 3);
  REQUIRE_THROWS_AS(init_params(Variant{true, true, true}, p.x, p.y, 7, 0), MTooLarge);
  REQUIRE_THROWS_AS(init_params(Variant{true, true, true}, p.x, p.y, 0, 0), MTooLarge);
  Matrix one(1, 1, 0.0);
  REQUIRE_THROWS_AS(init_params(Variant{false, false, false}, one, Vector{0.0}, 1, 0),
                    DimensionMismatch);
}

TEST_CASE("zero-epoch fits return the initialization unchanged") {
  const Problem p = noisy_sine(12, 8);
  FitConfig cfg;
  cfg.epochs = 0;
  cfg.m = 3;
  cfg.seed = 4;
  const ParamVector init = init_params(Variant{true, true, true}, p.x, p.y, 3, 4);
  const FitResult r = fit(Variant{true, true, true}, p.x, p.y, cfg);
  REQUIRE(r.report.objective_trace.size() == 1);
  REQUIRE(r.report.grad_norm_trace.size() == 1);
  const ParamVector packed = pack(r.model);
  REQUIRE(packed.values == init.values);
  REQUIRE(r.report.final_objective ==
          Catch::Approx(objective(unpack(init, p.x, p.y))).margin(1e-12));
}

TEST_CASE("training lowers the objective") {
  const Problem p = noisy_sine(20, 15);
  FitConfig cfg;
  cfg.epochs = 60;
  cfg.m = 4;
  cfg.seed = 9;
  const ParamVector init = init_params(Variant{true, true, true}, p.x, p.y, 4, 9);
  const double before = objective(unpack(init, p.x, p.y));
  const FitResult r = fit(Variant{true, true, true}, p.x, p.y, cfg);
  REQUIRE(r.report.objective_trace.size() == cfg.epochs + 1);
  REQUIRE(r.report.objective_trace.front() == Catch::Approx(before).margin(1e-10));
  REQUIRE(r.report.final_objective <= before);
  REQUIRE(objective(r.model) == Catch::Approx(r.report.final_objective).margin(1e-8));
}

TEST_CASE("a longer budget never returns a worse best-seen objective") {
  const Problem p = noisy_sine(15, 33);
  FitConfig short_cfg;
  short_cfg.epochs = 30;
  short_cfg.m = 3;
  short_cfg.seed = 6;
  FitConfig long_cfg = short_cfg;
  long_cfg.epochs = 90;
  const Variant v{false, true, true};
  const double short_best = fit(v, p.x, p.y, short_cfg).report.final_objective;
  const double long_best = fit(v, p.x, p.y, long_cfg).report.final_objective;
  REQUIRE(long_best <= short_best + 1e-12);
}

TEST_CASE("fits are reproducible from the seed") {
  const Problem p = noisy_sine(14, 50);
  FitConfig cfg;
  cfg.epochs = 25;
  cfg.m = 3;
  cfg.seed = 31;
  const FitResult a = fit(Variant{true, true, true}, p.x, p.y, cfg);
  const FitResult b = fit(Variant{true, true, true}, p.x, p.y, cfg);
  REQUIRE(pack(a.model).values == pack(b.model).values);
  REQUIRE(a.report.objective_trace == b.report.objective_trace);
}

TEST_CASE("stationary fits recover known hyperparameters within a factor of two") {
  // draw from a stationary GP with ell=1, sigma=1.5, omega=0.2 and refit
  const std::size_t n = 200;
  Matrix x = grid1d(-8.0, 8.0, n);
  const Matrix k = gram(x, RbfParams{1.0, 1.5 * 1.5});
  const CholFactor f = cholesky_psd(k, 1e-10);
  auto gen = rng::substream(123, "test/stationary");
  std::normal_distribution<double> unit;
  Vector xi(n);
  for (double& v : xi) v = unit(gen);
  Vector y = matvec(f.lower, xi);
  for (double& v : y) v += 0.2 * unit(gen);

  FitConfig cfg;
  cfg.epochs = 300;
  cfg.seed = 1;
  const FitResult r = fit(Variant{false, false, false}, x, y, cfg);
  const ParamVector pv = pack(r.model);
  const double ell = std::exp(pv.values[pv.layout.find("const_ell").offset]);
  const double sig = std::exp(pv.values[pv.layout.find("const_sigma").offset]);
  const double omg = std::exp(pv.values[pv.layout.find("const_omega").offset]);
  REQUIRE(ell > 0.5);
  REQUIRE(ell < 2.0);
  REQUIRE(sig > 0.75);
  REQUIRE(sig < 3.0);
  REQUIRE(omg > 0.1);
  REQUIRE(omg < 0.4);
}

TEST_CASE("non-finite starting points exhaust retries and report divergence") {
  const Problem p = noisy_sine(8, 60);
  ParamVector pv = init_params(Variant{false, false, false}, p.x, p.y, 1, 0);
  pv.values[0] = std::nan("");
  FitConfig cfg;
  cfg.epochs = 5;
  cfg.retries = 3;
  REQUIRE_THROWS_AS(fit_from(pv, p.x, p.y, cfg), Diverged);
}
