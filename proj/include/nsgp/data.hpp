#pragma once

// Datasets: synthetic generators with ground-truth hyper-function traces,
// headered CSV in/out, per-column standardization, and seeded k-fold plans.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nsgp/errors.hpp"
#include "nsgp/kernels.hpp"
#include "nsgp/numerics.hpp"
#include "nsgp/rng.hpp"

namespace nsgp {

// Ground truth for synthetic data; natural (not log) scale.
struct TruthTraces {
  std::optional<Vector> ell;
  std::optional<Vector> sigma;
  std::optional<Vector> omega;
  std::optional<Vector> f;
};

struct Dataset {
  Matrix x;
  Vector y;
  std::string name;
  TruthTraces truth;

  std::size_t n() const { return x.rows(); }
  std::size_t d() const { return x.cols(); }
};

inline Vector linspace(double lo, double hi, std::size_t n) {
  Vector v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out.good()) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path);
}

namespace detail {

// Draw f ~ GP(0, gram) by factoring with a relative jitter floor.
inline Vector gp_draw(const Matrix& x, const GibbsInputs& gi, std::mt19937_64& gen) {
  const Matrix k = gram(x, gi);
  double mean_diag = 0.0;
  for (std::size_t i = 0; i < k.rows(); ++i) mean_diag += k(i, i);
  mean_diag /= static_cast<double>(k.rows());
  const CholFactor f = cholesky_psd(k, 1e-10 * mean_diag);
  std::normal_distribution<double> unit;
  Vector xi(x.rows());
  for (double& v : xi) v = unit(gen);
  Vector out(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += f.lower(i, j) * xi[j];
    out[i] = s;
  }
  return out;
}

}  // namespace detail

// 200 equally spaced 1-D inputs on [-30, 30] with smoothly varying length
// scale, signal, and noise fields; f drawn from the matching
// non-stationary GP, y = f + omega * standard normal noise.
inline Dataset gen_synth1d(std::uint64_t seed) {
  const std::size_t n = 200;
  const Vector grid = linspace(-30.0, 30.0, n);
  Dataset d;
  d.name = "synth1d";
  d.x = Matrix::from_column(grid);
  Vector ell(n), sigma(n), omega(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grid[i];
    ell[i] = 0.5 * std::sin(x / 8.0) + 1.5;
    sigma[i] = 1.5 * std::exp(std::sin(0.2 * x));
    omega[i] = 2.5 * std::log1p(std::exp(std::sin(-0.2 * x)));
  }
  auto fgen = rng::substream(seed, "synth1d/f");
  const Vector f = detail::gp_draw(d.x, {Matrix::from_column(ell), sigma}, fgen);
  auto ngen = rng::substream(seed, "synth1d/noise");
  std::normal_distribution<double> unit;
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.y[i] = f[i] + omega[i] * unit(ngen);
  d.truth = {ell, sigma, omega, f};
  return d;
}

// 1-D step at the origin plus a smooth GP component and homoskedastic
// noise. With an even point count the origin itself is not on the grid.
inline Dataset gen_jump1d(std::uint64_t seed, std::size_t n = 100,
                          double jump = 2.0, double noise = 0.3) {
  Dataset d;
  d.name = "jump1d";
  const Vector grid = linspace(-1.0, 1.0, n);
  d.x = Matrix::from_column(grid);
  auto fgen = rng::substream(seed, "jump1d/f");
  Matrix ell(n, 1, 0.4);
  Vector sig(n, 0.25);
  Vector f = detail::gp_draw(d.x, {ell, sig}, fgen);
  for (std::size_t i = 0; i < n; ++i)
    f[i] += jump * (grid[i] > 0.0 ? 1.0 : (grid[i] < 0.0 ? -1.0 : 0.0));
  auto ngen = rng::substream(seed, "jump1d/noise");
  std::normal_distribution<double> unit;
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.y[i] = f[i] + noise * unit(ngen);
  d.truth.f = f;
  d.truth.omega = Vector(n, noise);
  return d;
}

// 2-D grid on [0, 1]^2: short length scale in a central bump, long outside;
// noise std rises linearly along the first coordinate between the bounds.
inline Dataset gen_nonstat2d(std::uint64_t seed, std::size_t side = 15,
                             double noise_lo = 0.01, double noise_hi = 0.1) {
  const std::size_t n = side * side;
  Dataset d;
  d.name = "nonstat2d";
  d.x = Matrix(n, 2);
  const Vector axis = linspace(0.0, 1.0, side);
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      d.x(i * side + j, 0) = axis[i];
      d.x(i * side + j, 1) = axis[j];
    }
  Vector ell(n), sigma(n, 1.0), omega(n);
  Matrix ell_mat(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = d.x(i, 0) - 0.5;
    const double dy = d.x(i, 1) - 0.5;
    ell[i] = 0.5 - 0.4 * std::exp(-(dx * dx + dy * dy) / (2.0 * 0.15 * 0.15));
    ell_mat(i, 0) = ell[i];
    ell_mat(i, 1) = ell[i];
    omega[i] = noise_lo + (noise_hi - noise_lo) * d.x(i, 0);
  }
  auto fgen = rng::substream(seed, "nonstat2d/f");
  const Vector f = detail::gp_draw(d.x, {ell_mat, sigma}, fgen);
  auto ngen = rng::substream(seed, "nonstat2d/noise");
  std::normal_distribution<double> unit;
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.y[i] = f[i] + omega[i] * unit(ngen);
  d.truth = {ell, sigma, omega, f};
  return d;
}

// Headered CSV with named x columns and one y column. Rows with missing or
// non-numeric fields are rejected by file line number.
inline Dataset load_csv(const std::string& path,
                        const std::vector<std::string>& x_cols,
                        const std::string& y_col) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw EmptyDataset(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ParseError(path + ": column " + name + " not found");
  };
  std::vector<std::size_t> xi;
  for (const auto& c : x_cols) xi.push_back(column_index(c));
  const std::size_t yi = column_index(y_col);

  std::vector<Vector> rows;
  Vector ys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    line_no += 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (cells.size() != header.size())
      throw ParseError(path + ": row " + std::to_string(line_no) +
                       " has " + std::to_string(cells.size()) + " fields, expected " +
                       std::to_string(header.size()));
    auto parse = [&](std::size_t col) {
      const std::string& s = cells[col];
      if (s.empty())
        throw ParseError(path + ": row " + std::to_string(line_no) + " has a missing value");
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        throw ParseError(path + ": row " + std::to_string(line_no) +
                         " has a non-numeric value '" + s + "'");
      }
      if (used != s.size() || !std::isfinite(v))
        throw ParseError(path + ": row " + std::to_string(line_no) +
                         " has a non-numeric value '" + s + "'");
      return v;
    };
    Vector xrow(xi.size());
    for (std::size_t j = 0; j < xi.size(); ++j) xrow[j] = parse(xi[j]);
    ys.push_back(parse(yi));
    rows.push_back(std::move(xrow));
  }
  if (rows.empty()) throw EmptyDataset(path + ": no data rows");
  Dataset d;
  d.name = std::filesystem::path(path).stem().string();
  d.x = Matrix(rows.size(), xi.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < xi.size(); ++j) d.x(i, j) = rows[i][j];
  d.y = std::move(ys);
  return d;
}

// Truth columns are appended when the trace exists, so synthetic exports
// round-trip their ground truth.
inline std::string to_csv(const Dataset& d) {
  std::string out;
  for (std::size_t j = 0; j < d.d(); ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "y";
  if (d.truth.ell) out += ",truth_ell";
  if (d.truth.sigma) out += ",truth_sigma";
  if (d.truth.omega) out += ",truth_omega";
  if (d.truth.f) out += ",truth_f";
  out += "\n";
  for (std::size_t i = 0; i < d.n(); ++i) {
    for (std::size_t j = 0; j < d.d(); ++j) out += format_double(d.x(i, j)) + ",";
    out += format_double(d.y[i]);
    if (d.truth.ell) out += "," + format_double((*d.truth.ell)[i]);
    if (d.truth.sigma) out += "," + format_double((*d.truth.sigma)[i]);
    if (d.truth.omega) out += "," + format_double((*d.truth.omega)[i]);
    if (d.truth.f) out += "," + format_double((*d.truth.f)[i]);
    out += "\n";
  }
  return out;
}

inline void save_csv(const std::string& path, const Dataset& d) {
  write_text_atomic(path, to_csv(d));
}

inline Dataset subset(const Dataset& d, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.name = d.name;
  out.x = Matrix(rows.size(), d.d());
  out.y.resize(rows.size());
  auto pick = [&](const std::optional<Vector>& src) -> std::optional<Vector> {
    if (!src) return std::nullopt;
    Vector v(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) v[i] = (*src)[rows[i]];
    return v;
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= d.n()) throw DimensionMismatch("subset: row index out of range");
    for (std::size_t j = 0; j < d.d(); ++j) out.x(i, j) = d.x(rows[i], j);
    out.y[i] = d.y[rows[i]];
  }
  out.truth.ell = pick(d.truth.ell);
  out.truth.sigma = pick(d.truth.sigma);
  out.truth.omega = pick(d.truth.omega);
  out.truth.f = pick(d.truth.f);
  return out;
}

// Per-column affine map to zero mean, unit variance; kept so predictions can
// be carried back to the original scale.
struct ColumnTransform {
  Vector x_mean;
  Vector x_std;
  double y_mean = 0.0;
  double y_std = 1.0;

  Matrix apply_x(const Matrix& x) const {
    if (x.cols() != x_mean.size()) throw DimensionMismatch("transform: column count differs");
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j)
        out(i, j) = (x(i, j) - x_mean[j]) / x_std[j];
    return out;
  }
  Matrix invert_x(const Matrix& x) const {
    if (x.cols() != x_mean.size()) throw DimensionMismatch("transform: column count differs");
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j)
        out(i, j) = x(i, j) * x_std[j] + x_mean[j];
    return out;
  }
  Vector apply_y(const Vector& y) const {
    Vector out = y;
    for (double& v : out) v = (v - y_mean) / y_std;
    return out;
  }
  double invert_y_mean(double m) const { return m * y_std + y_mean; }
  double invert_y_var(double v) const { return v * y_std * y_std; }
};

struct StandardizeResult {
  Dataset data;
  ColumnTransform transform;
};

inline StandardizeResult standardize(const Dataset& d) {
  if (d.n() == 0) throw EmptyDataset("standardize: empty dataset");
  ColumnTransform t;
  t.x_mean.assign(d.d(), 0.0);
  t.x_std.assign(d.d(), 0.0);
  const double n = static_cast<double>(d.n());
  for (std::size_t j = 0; j < d.d(); ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) m += d.x(i, j);
    m /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) ss += (d.x(i, j) - m) * (d.x(i, j) - m);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0))
      throw DegenerateColumn("standardize: x column " + std::to_string(j + 1) +
                             " has zero variance");
    t.x_mean[j] = m;
    t.x_std[j] = sd;
  }
  {
    double m = 0.0;
    for (double v : d.y) m += v;
    m /= n;
    double ss = 0.0;
    for (double v : d.y) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) throw DegenerateColumn("standardize: y has zero variance");
    t.y_mean = m;
    t.y_std = sd;
  }
  StandardizeResult out;
  out.transform = t;
  out.data = d;
  out.data.x = t.apply_x(d.x);
  out.data.y = t.apply_y(d.y);
  return out;
}

// Seeded shuffle then round-robin assignment, so fold sizes differ by at
// most one and every index lands in exactly one test fold.
struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] != fold) out.push_back(i);
    return out;
  }
};

inline FoldPlan kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || n < k) throw DimensionMismatch("kfold: need n >= k >= 2");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto gen = rng::substream(seed, "folds");
  std::shuffle(order.begin(), order.end(), gen);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) plan.assignment[order[i]] = i % k;
  return plan;
}

}  // namespace nsgp
