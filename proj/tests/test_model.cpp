#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nsgp/model.hpp"
#include "oracles.hpp"

using namespace nsgp;

namespace {

Matrix grid1d(double lo, double hi, std::size_t n) {
  Matrix x(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    x(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return x;
}

NsgpModel constant_model(const Matrix& x, const Vector& y, double ell, double sigma,
                         double omega) {
  NsgpModel m;
  m.xbar = Matrix(0, x.cols());
  m.ell = HyperFunction{HyperTag::lengthscale, LatentConstant{std::log(ell)}};
  m.sigma = HyperFunction{HyperTag::signal, LatentConstant{std::log(sigma)}};
  m.omega = HyperFunction{HyperTag::noise, LatentConstant{std::log(omega)}};
  m.train_x = x;
  m.train_y = y;
  return m;
}

NsgpModel full_latent_model(const Matrix& x, const Vector& y, std::size_t m_count,
                            std::uint64_t seed) {
  const std::size_t d = x.cols();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> unit;
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  NsgpModel m;
  m.xbar = Matrix(m_count, d);
  for (std::size_t i = 0; i < m_count; ++i)
    for (std::size_t j = 0; j < d; ++j) m.xbar(i, j) = unit(gen);
  auto latent = [&](HyperTag tag, std::size_t n_out) {
    LatentGp g;
    g.mean = 0.3 * unit(gen);
    g.rbf = {pos(gen), pos(gen)};
    g.gamma = Matrix(m_count, n_out);
    for (std::size_t i = 0; i < m_count; ++i)
      for (std::size_t j = 0; j < n_out; ++j) g.gamma(i, j) = 0.3 * unit(gen);
    return HyperFunction{tag, g};
  };
  m.ell = latent(HyperTag::lengthscale, d);
  m.sigma = latent(HyperTag::signal, 1);
  m.omega = latent(HyperTag::noise, 1);
  m.train_x = x;
  m.train_y = y;
  return m;
}

}  // namespace

TEST_CASE("parameter counts follow the closed form") {
  const Variant full{true, true, true};
  REQUIRE(param_count(full, 10, 1) == 49);
  for (std::size_t m = 1; m <= 50; ++m)
    for (std::size_t d = 1; d <= 5; ++d)
      REQUIRE(param_count(full, m, d) == 2 * m * d + 2 * m + 9);

  const Variant none{false, false, false};
  REQUIRE(param_count(none, 10, 1) == 3);
  REQUIRE(param_count(none, 1, 4) == 3);

  // swapping one latent block for a constant drops (m*n_out + 3) - 1 entries
  const Variant no_omega{true, true, false};
  REQUIRE(param_count(no_omega, 10, 1) == 49 - (10 + 3) + 1);
  const Variant only_ell{true, false, false};
  REQUIRE(param_count(only_ell, 4, 2) == 4 * 2 + 4 * 2 + 3 + 1 + 1);
}

TEST_CASE("the variant table enumerates all eight combinations") {
  const auto all = Variant::all();
  REQUIRE(all.size() == 8);
  REQUIRE(all[0] == Variant{false, false, false});
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = i + 1; j < 8; ++j) REQUIRE_FALSE(all[i] == all[j]);
  REQUIRE(all[0].label() == "Stationary Homoskedastic GP");
  REQUIRE(Variant{true, true, true}.label() == "(ell,sigma,omega)-GP");
  REQUIRE(Variant{false, false, true}.label() == "(omega)-GP");
}

TEST_CASE("prior densities match closed forms") {
  // Gamma(5,1) at 1: log pdf = -1 - log(4!) = -1 - log 24
  REQUIRE(gamma_log_pdf(1.0, 5.0, 1.0) == Catch::Approx(-1.0 - std::log(24.0)));
  REQUIRE(gamma_log_pdf(0.0, 5.0, 1.0) == -std::numeric_limits<double>::infinity());
  REQUIRE(gamma_log_pdf(-2.0, 0.5, 1.0) == -std::numeric_limits<double>::infinity());
  // rate enters as shape*log(rate) and -rate*x
  REQUIRE(gamma_log_pdf(1.0, 2.0, 3.0) ==
          Catch::Approx(std::log(1.0) - 3.0 + 2.0 * std::log(3.0) - std::lgamma(2.0)));
  REQUIRE(normal_log_pdf(0.0) == Catch::Approx(-0.5 * kLog2Pi));
  REQUIRE(normal_log_pdf(2.0) == Catch::Approx(-2.0 - 0.5 * kLog2Pi));
}

TEST_CASE("layout places segments deterministically") {
  const Variant full{true, true, true};
  const ParamLayout lay = make_layout(full, 3, 2);
  REQUIRE(lay.size == param_count(full, 3, 2));
  REQUIRE(lay.find("xbar").offset == 0);
  REQUIRE(lay.find("xbar").length == 6);
  REQUIRE(lay.find("gamma_ell").length == 6);
  REQUIRE(lay.find("gamma_sigma").length == 3);
  REQUIRE(lay.find("phi_omega_lengthscale").transform == Transform::log);
  REQUIRE(lay.find("mu_sigma").transform == Transform::identity);
  REQUIRE(lay.has("gamma_omega"));
  REQUIRE_FALSE(lay.has("const_ell"));
  REQUIRE_THROWS_AS(lay.find("const_ell"), LayoutMismatch);

  const ParamLayout constant = make_layout(Variant{false, false, false}, 1, 1);
  REQUIRE(constant.size == 3);
  REQUIRE(constant.find("const_ell").transform == Transform::log);
  REQUIRE_FALSE(constant.has("xbar"));
}

TEST_CASE("nlml on a single observation has closed form") {
  Matrix x(1, 1, 0.0);
  // k_y = sigma^2 + omega^2 = 1
  NsgpModel unit_var = constant_model(x, {0.0}, 1.0, 0.8, 0.6);
  REQUIRE(nlml(unit_var) == Catch::Approx(0.5 * kLog2Pi).margin(1e-12));

  // k_y = 4, y = 2: 0.5*4/4 + 0.5*log 4 + 0.5*log 2pi
  NsgpModel var4 = constant_model(x, {2.0}, 1.0, std::sqrt(2.0), std::sqrt(2.0));
  REQUIRE(nlml(var4) ==
          Catch::Approx(0.5 + std::log(2.0) + 0.5 * kLog2Pi).margin(1e-12));
}

TEST_CASE("all-constant nlml matches a naive dense oracle") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> unit;
  Matrix x(9, 2);
  Vector y(9);
  for (std::size_t i = 0; i < 9; ++i) {
    y[i] = unit(gen);
    for (std::size_t j = 0; j < 2; ++j) x(i, j) = unit(gen);
  }
  const double ell = 1.1;
  const double sigma = 1.4;
  const double omega = 0.35;
  NsgpModel m = constant_model(x, y, ell, sigma, omega);
  const double mine = nlml(m);
  // the gibbs signal sigma corresponds to rbf amplitude sigma^2
  const double theirs =
      oracle::naive_rbf_nlml(x, y, ell, sigma * sigma, omega * omega);
  REQUIRE(std::abs(mine - theirs) < 1e-10);
}

TEST_CASE("all-constant models have a flat prior") {
  Matrix x = grid1d(-1.0, 1.0, 6);
  Vector y(6, 0.5);
  NsgpModel m = constant_model(x, y, 1.0, 1.0, 0.3);
  REQUIRE(log_prior(m) == 0.0);
  REQUIRE(objective(m) == nlml(m));
}

TEST_CASE("latent priors sum gamma, lengthscale, and amplitude terms") {
  Matrix x = grid1d(0.0, 1.0, 5);
  Vector y(5, 0.0);
  NsgpModel m = constant_model(x, y, 1.0, 1.0, 0.3);
  LatentGp g;
  g.mean = 0.0;
  g.rbf = {1.0, 1.0};
  g.gamma = Matrix(2, 1, 0.0);
  m.xbar = Matrix(2, 1);
  m.xbar(1, 0) = 1.0;
  m.omega = HyperFunction{HyperTag::noise, g};
  const double expect = gamma_log_pdf(1.0, m.priors.latent_lengthscale_shape,
                                      m.priors.latent_lengthscale_rate) +
                        gamma_log_pdf(1.0, m.priors.latent_amplitude_shape,
                                      m.priors.latent_amplitude_rate) +
                        2.0 * normal_log_pdf(0.0);
  REQUIRE(log_prior(m) == Catch::Approx(expect).margin(1e-12));
  REQUIRE(objective(m) == Catch::Approx(nlml(m) - expect).margin(1e-12));
}

TEST_CASE("pack and unpack round-trip every variant") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> unit;
  Matrix x(7, 2);
  Vector y(7);
  for (std::size_t i = 0; i < 7; ++i) {
    y[i] = unit(gen);
    for (std::size_t j = 0; j < 2; ++j) x(i, j) = unit(gen);
  }
  NsgpModel m = full_latent_model(x, y, 3, 5);
  const ParamVector pv = pack(m);
  REQUIRE(pv.values.size() == param_count(m.variant(), 3, 2));
  const NsgpModel back = unpack(pv, x, y);
  const ParamVector pv2 = pack(back);
  REQUIRE(pv.values.size() == pv2.values.size());
  for (std::size_t i = 0; i < pv.values.size(); ++i)
    REQUIRE(pv.values[i] == Catch::Approx(pv2.values[i]).margin(1e-15));
  REQUIRE(objective(m) == Catch::Approx(objective(back)).margin(1e-12));
}

TEST_CASE("constants are stored on the log scale") {
  Matrix x = grid1d(0.0, 1.0, 4);
  Vector y(4, 0.0);
  NsgpModel m = constant_model(x, y, 1.0, std::exp(1.0), 0.5);
  const ParamVector pv = pack(m);
  const Segment ell = pv.layout.find("const_ell");
  const Segment sig = pv.layout.find("const_sigma");
  const Segment omg = pv.layout.find("const_omega");
  REQUIRE(pv.values[ell.offset] == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(pv.values[sig.offset] == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(pv.values[omg.offset] == Catch::Approx(std::log(0.5)).margin(1e-15));
}

TEST_CASE("hyper values at points reflect the latent functions") {
  Matrix x = grid1d(-1.0, 1.0, 5);
  Vector y(5, 0.0);
  NsgpModel m = constant_model(x, y, 0.7, 1.3, 0.2);
  const HyperValues hv = hyper_values_at(m, x);
  for (std::size_t i = 0; i < 5; ++i) {
    REQUIRE(hv.ell(i, 0) == Catch::Approx(0.7));
    REQUIRE(hv.sigma[i] == Catch::Approx(1.3));
    REQUIRE(hv.omega[i] == Catch::Approx(0.2));
  }
}

TEST_CASE("prediction interpolates nearly noise-free data") {
  Matrix x = grid1d(-2.0, 2.0, 9);
  Vector y(9);
  for (std::size_t i = 0; i < 9; ++i) y[i] = std::sin(x(i, 0));
  NsgpModel m = constant_model(x, y, 1.0, 1.0, 1e-4);
  const Prediction p = predict(m, x);
  for (std::size_t i = 0; i < 9; ++i) {
    REQUIRE(p.mean[i] == Catch::Approx(y[i]).margin(1e-4));
    REQUIRE(p.var_f[i] < 1e-4);
  }
}

TEST_CASE("prediction reverts to the prior far from data") {
  Matrix x = grid1d(-1.0, 1.0, 6);
  Vector y(6, 1.0);
  NsgpModel m = constant_model(x, y, 0.5, 1.5, 0.1);
  Matrix far(1, 1, 50.0);
  const Prediction p = predict(m, far);
  REQUIRE(std::abs(p.mean[0]) < 1e-8);
  REQUIRE(p.var_f[0] == Catch::Approx(1.5 * 1.5).margin(1e-8));
  REQUIRE(p.var_noise[0] == Catch::Approx(0.01));
}

TEST_CASE("variance decomposition is exact by construction") {
  Matrix x = grid1d(-2.0, 2.0, 12);
  std::mt19937_64 gen(17);
  std::normal_distribution<double> unit;
  Vector y(12);
  for (double& v : y) v = unit(gen);
  NsgpModel m = full_latent_model(x, y, 4, 23);
  Matrix xstar = grid1d(-3.0, 3.0, 25);
  const Prediction p = predict(m, xstar);
  for (std::size_t i = 0; i < 25; ++i) {
    REQUIRE(p.var_f[i] >= 0.0);
    REQUIRE(p.var_noise[i] > 0.0);
    REQUIRE(p.var_y[i] == p.var_f[i] + p.var_noise[i]);
  }
}

TEST_CASE("adding an observation cannot raise epistemic variance") {
  Matrix x = grid1d(-1.0, 1.0, 5);
  Vector y(5, 0.2);
  NsgpModel m = constant_model(x, y, 0.8, 1.0, 0.3);
  Matrix query(1, 1, 0.4);
  const double before = predict(m, query).var_f[0];

  Matrix x2(6, 1);
  Vector y2(6);
  for (std::size_t i = 0; i < 5; ++i) {
    x2(i, 0) = x(i, 0);
    y2[i] = y[i];
  }
  x2(5, 0) = 0.35;
  y2[5] = 0.1;
  const double after = predict(condition_on(m, x2, y2), query).var_f[0];
  REQUIRE(after <= before + 1e-12);
}

TEST_CASE("clamp_variance forgives round-off but not real negatives") {
  REQUIRE(clamp_variance(0.5) == 0.5);
  REQUIRE(clamp_variance(0.0) == 0.0);
  REQUIRE(clamp_variance(-1e-9) == 0.0);
  REQUIRE_THROWS_AS(clamp_variance(-1e-7), NotPositiveDefinite);
}

TEST_CASE("model validation catches inconsistent shapes") {
  Matrix x = grid1d(0.0, 1.0, 4);
  Vector y(3, 0.0);
  NsgpModel m = constant_model(x, y, 1.0, 1.0, 0.1);
  REQUIRE_THROWS_AS(m.validate(), DimensionMismatch);

  NsgpModel empty = constant_model(Matrix(0, 1), Vector{}, 1.0, 1.0, 0.1);
  REQUIRE_THROWS_AS(empty.validate(), DimensionMismatch);

  Vector y4(4, 0.0);
  NsgpModel latent = full_latent_model(x, y4, 2, 3);
  latent.xbar = Matrix(0, 1);
  REQUIRE_THROWS_AS(latent.validate(), DimensionMismatch);
}

TEST_CASE("prediction rejects queries of the wrong dimension") {
  Matrix x = grid1d(0.0, 1.0, 4);
  Vector y(4, 0.0);
  NsgpModel m = constant_model(x, y, 1.0, 1.0, 0.1);
  REQUIRE_THROWS_AS(predict(m, Matrix(2, 2, 0.0)), DimensionMismatch);
}
