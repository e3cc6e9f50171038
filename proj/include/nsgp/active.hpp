#pragma once

// Pool-based active learning: train once on a seeded initial subset, then
// repeatedly condition on the growing labeled set (hyper-functions fixed by
// default), acquire the pool point with the largest epistemic or overall
// variance, and track error against the ground-truth latent function.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nsgp/data.hpp"
#include "nsgp/errors.hpp"
#include "nsgp/model.hpp"
#include "nsgp/rng.hpp"
#include "nsgp/train.hpp"

namespace nsgp {

enum class Acquisition { var_f, var_y };
enum class RetrainPolicy { none, full };

inline std::string to_string(Acquisition a) {
  return a == Acquisition::var_f ? "var_f" : "var_y";
}

struct AlConfig {
  std::size_t initial_n = 30;
  std::size_t acquisitions = 50;
  Acquisition acquisition = Acquisition::var_f;
  RetrainPolicy retrain = RetrainPolicy::none;
  std::uint64_t seed = 0;
  Variant variant;  // all-latent by default
  FitConfig fit;
};

struct AlStep {
  std::size_t index = 0;  // into the dataset grid
  double acq_value = 0.0;
  double mae = 0.0;
  double mse = 0.0;
};

struct AlTrace {
  double initial_mae = 0.0;
  double initial_mse = 0.0;
  std::vector<AlStep> steps;
  std::vector<std::size_t> initial_indices;
  Prediction final_grid;
};

// Argmax over the chosen variance channel; ties go to the lowest index.
inline std::size_t acquire(const Prediction& pool_pred, Acquisition kind) {
  if (pool_pred.size() == 0) throw EmptyPool("acquire: empty pool");
  const Vector& v = kind == Acquisition::var_f ? pool_pred.var_f : pool_pred.var_y;
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

namespace detail {

inline void grid_error(const Prediction& pred, const Vector& truth_f, double& mae,
                       double& mse) {
  mae = 0.0;
  mse = 0.0;
  for (std::size_t i = 0; i < truth_f.size(); ++i) {
    const double r = pred.mean[i] - truth_f[i];
    mae += std::abs(r);
    mse += r * r;
  }
  mae /= static_cast<double>(truth_f.size());
  mse /= static_cast<double>(truth_f.size());
}

}  // namespace detail

inline AlTrace run_al(const Dataset& d, const AlConfig& cfg) {
  if (!d.truth.f)
    throw MissingTruth("active: dataset has no ground-truth latent function");
  const std::size_t n = d.n();
  if (cfg.initial_n < 2) throw EmptyPool("active: initial set needs at least two points");
  if (cfg.initial_n + cfg.acquisitions > n)
    throw EmptyPool("active: initial set plus acquisitions exceeds the grid");
  const Vector& truth_f = *d.truth.f;

  auto gen = rng::substream(cfg.seed, "al/init");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < cfg.initial_n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(gen)]);
  }
  std::vector<std::size_t> labeled(order.begin(), order.begin() + cfg.initial_n);
  std::vector<std::size_t> pool(order.begin() + cfg.initial_n, order.end());
  std::sort(labeled.begin(), labeled.end());
  std::sort(pool.begin(), pool.end());

  auto gather = [&](const std::vector<std::size_t>& idx) {
    Matrix x(idx.size(), d.d());
    Vector y(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < d.d(); ++j) x(i, j) = d.x(idx[i], j);
      y[i] = d.y[idx[i]];
    }
    return std::pair<Matrix, Vector>{std::move(x), std::move(y)};
  };

  FitConfig fit_cfg = cfg.fit;
  fit_cfg.seed = rng::substream_seed(cfg.seed, "al/fit");
  auto [lx, ly] = gather(labeled);
  NsgpModel model = fit(cfg.variant, lx, ly, fit_cfg).model;

  AlTrace trace;
  trace.initial_indices = labeled;
  detail::grid_error(predict(model, d.x), truth_f, trace.initial_mae, trace.initial_mse);

  for (std::size_t t = 0; t < cfg.acquisitions; ++t) {
    Matrix pool_x(pool.size(), d.d());
    for (std::size_t i = 0; i < pool.size(); ++i)
      for (std::size_t j = 0; j < d.d(); ++j) pool_x(i, j) = d.x(pool[i], j);
    const Prediction pool_pred = predict(model, pool_x);
    const std::size_t local = acquire(pool_pred, cfg.acquisition);
    const std::size_t chosen = pool[local];

    AlStep step;
    step.index = chosen;
    step.acq_value = cfg.acquisition == Acquisition::var_f ? pool_pred.var_f[local]
                                                           : pool_pred.var_y[local];
    labeled.push_back(chosen);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(local));

    auto [nx, ny] = gather(labeled);
    if (cfg.retrain == RetrainPolicy::full) {
      FitConfig refit_cfg = cfg.fit;
      refit_cfg.seed = rng::substream_seed(cfg.seed, "al/refit" + std::to_string(t));
      model = fit(cfg.variant, nx, ny, refit_cfg).model;
    } else {
      model = condition_on(model, nx, ny);
    }
    detail::grid_error(predict(model, d.x), truth_f, step.mae, step.mse);
    trace.steps.push_back(step);
  }
  trace.final_grid = predict(model, d.x);
  return trace;
}

// Sum of per-step MAE, the scalar the two acquisition arms are compared on.
inline double mae_auc(const AlTrace& trace) {
  double s = 0.0;
  for (const AlStep& st : trace.steps) s += st.mae;
  return s;
}

inline std::string trace_to_csv(const AlTrace& trace, const Dataset& d) {
  std::string out = "step,chosen_x,acquisition_value,mae,mse\n";
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const AlStep& st = trace.steps[t];
    std::string x;
    for (std::size_t j = 0; j < d.d(); ++j) {
      if (j > 0) x += ";";
      x += format_double(d.x(st.index, j));
    }
    out += std::to_string(t + 1) + "," + x + "," + format_double(st.acq_value) + "," +
           format_double(st.mae) + "," + format_double(st.mse) + "\n";
  }
  return out;
}

inline std::string final_prediction_csv(const AlTrace& trace, const Dataset& d) {
  std::string out;
  for (std::size_t j = 0; j < d.d(); ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "mean,var_f,var_y\n";
  for (std::size_t i = 0; i < d.n(); ++i) {
    for (std::size_t j = 0; j < d.d(); ++j) out += format_double(d.x(i, j)) + ",";
    out += format_double(trace.final_grid.mean[i]) + "," +
           format_double(trace.final_grid.var_f[i]) + "," +
           format_double(trace.final_grid.var_y[i]) + "\n";
  }
  return out;
}

}  // namespace nsgp
