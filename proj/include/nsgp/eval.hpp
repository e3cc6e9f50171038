#pragma once

// Held-out metrics and the cross-validated ablation harness over the 8
// latent/constant variants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "nsgp/data.hpp"
#include "nsgp/errors.hpp"
#include "nsgp/model.hpp"
#include "nsgp/rng.hpp"
#include "nsgp/train.hpp"

namespace nsgp {

// Negative log predictive density, summed over the fold rather than
// averaged, so values scale with fold size.
inline double nlpd(const Prediction& pred, const Vector& y) {
  if (pred.size() != y.size()) throw DimensionMismatch("nlpd: lengths differ");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = pred.var_y[i];
    if (!(v > 0.0)) throw NonPositiveVariance("nlpd: predictive variance must be positive");
    const double r = y[i] - pred.mean[i];
    total += 0.5 * std::log(2.0 * std::numbers::pi * v) + r * r / (2.0 * v);
  }
  return total;
}

inline double rmse(const Prediction& pred, const Vector& y) {
  if (pred.size() != y.size()) throw DimensionMismatch("rmse: lengths differ");
  if (y.empty()) return 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - pred.mean[i];
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(y.size()));
}

struct MetricRow {
  std::string dataset;
  std::string variant_label;
  Variant variant;
  double nlpd_mean = 0.0;
  double rmse_mean = 0.0;
  Vector nlpd_folds;
  Vector rmse_folds;
  std::uint64_t seed = 0;
  std::size_t m = 0;
  std::size_t epochs = 0;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

// Five-fold protocol: standardize on each fold's train split, fit there,
// score the held-out split on the standardized scale, average across folds.
inline MetricRow cross_validate(const Dataset& d, const Variant& variant,
                                std::size_t k, const FitConfig& cfg) {
  MetricRow row;
  row.dataset = d.name;
  row.variant = variant;
  row.variant_label = variant.label();
  row.seed = cfg.seed;
  row.m = cfg.m;
  row.epochs = cfg.epochs;

  const FoldPlan plan = kfold(d.n(), k, cfg.seed);
  for (std::size_t fold = 0; fold < k; ++fold) {
    const Dataset train = subset(d, plan.train_indices(fold));
    const Dataset test = subset(d, plan.test_indices(fold));
    const StandardizeResult sr = standardize(train);
    const Matrix test_x = sr.transform.apply_x(test.x);
    const Vector test_y = sr.transform.apply_y(test.y);

    FitConfig fold_cfg = cfg;
    fold_cfg.seed = rng::substream_seed(cfg.seed, "fit/fold" + std::to_string(fold));
    const FitResult fr = fit(variant, sr.data.x, sr.data.y, fold_cfg);
    const Prediction pred = predict(fr.model, test_x);
    row.nlpd_folds.push_back(nlpd(pred, test_y));
    row.rmse_folds.push_back(rmse(pred, test_y));
  }
  for (double v : row.nlpd_folds) row.nlpd_mean += v;
  row.nlpd_mean /= static_cast<double>(k);
  for (double v : row.rmse_folds) row.rmse_mean += v;
  row.rmse_mean /= static_cast<double>(k);
  return row;
}

inline std::size_t default_inducing_count(const Dataset& d) {
  return d.d() >= 2 ? 25 : 10;
}

// All 8 variants on each dataset. A failing cell keeps its error message in
// the row instead of aborting the table.
inline std::vector<MetricRow> ablation(const std::vector<Dataset>& datasets,
                                       std::size_t k, const FitConfig& cfg) {
  std::vector<MetricRow> rows;
  for (const Dataset& d : datasets) {
    FitConfig dcfg = cfg;
    if (dcfg.m == 0) dcfg.m = default_inducing_count(d);
    for (const Variant& v : Variant::all()) {
      try {
        rows.push_back(cross_validate(d, v, k, dcfg));
      } catch (const std::exception& e) {
        MetricRow row;
        row.dataset = d.name;
        row.variant = v;
        row.variant_label = v.label();
        row.seed = dcfg.seed;
        row.m = dcfg.m;
        row.epochs = dcfg.epochs;
        row.error = e.what();
        rows.push_back(row);
      }
    }
  }
  return rows;
}

namespace detail {

inline std::string join_folds(const Vector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ";";
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace detail

inline std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
  std::string out = "dataset,variant,nlpd_mean,rmse_mean,nlpd_folds,rmse_folds,seed,m,epochs,error\n";
  for (const MetricRow& r : rows) {
    out += r.dataset + "," + r.variant_label + ",";
    if (r.ok()) {
      out += format_double(r.nlpd_mean) + "," + format_double(r.rmse_mean) + "," +
             detail::join_folds(r.nlpd_folds) + "," + detail::join_folds(r.rmse_folds);
    } else {
      out += ",,,";
    }
    out += "," + std::to_string(r.seed) + "," + std::to_string(r.m) + "," +
           std::to_string(r.epochs) + "," + r.error + "\n";
  }
  return out;
}

// Human-readable ranking, grouped by dataset and ordered by mean NLPD with
// failed cells last.
inline std::string metrics_to_table(const std::vector<MetricRow>& rows) {
  std::vector<std::string> datasets;
  for (const MetricRow& r : rows)
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end())
      datasets.push_back(r.dataset);
  std::string out;
  char buf[160];
  for (const std::string& ds : datasets) {
    std::vector<MetricRow> group;
    for (const MetricRow& r : rows)
      if (r.dataset == ds) group.push_back(r);
    std::stable_sort(group.begin(), group.end(), [](const MetricRow& a, const MetricRow& b) {
      if (a.ok() != b.ok()) return a.ok();
      return a.nlpd_mean < b.nlpd_mean;
    });
    out += "dataset: " + ds + "\n";
    std::snprintf(buf, sizeof(buf), "  %-4s %-28s %12s %12s\n", "rank", "variant", "NLPD",
                  "RMSE");
    out += buf;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const MetricRow& r = group[i];
      if (r.ok())
        std::snprintf(buf, sizeof(buf), "  %-4zu %-28s %12.4f %12.4f\n", i + 1,
                      r.variant_label.c_str(), r.nlpd_mean, r.rmse_mean);
      else
        std::snprintf(buf, sizeof(buf), "  %-4zu %-28s %12s %12s  (%s)\n", i + 1,
                      r.variant_label.c_str(), "failed", "failed", r.error.c_str());
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace nsgp
