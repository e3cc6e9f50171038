#pragma once

// Command-line front end. Every command takes --seed and --out, validates
// its flags before touching the filesystem, writes outputs atomically, and
// drops a manifest.json recording the resolved configuration (minus the
// output path itself) so runs can be reproduced byte for byte.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 IO.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nsgp/active.hpp"
#include "nsgp/data.hpp"
#include "nsgp/errors.hpp"
#include "nsgp/eval.hpp"
#include "nsgp/gradcheck.hpp"
#include "nsgp/model_io.hpp"
#include "nsgp/train.hpp"

namespace nsgp::cli {

inline constexpr const char* kManifestSchema = "nsgp-manifest-v1";

inline void write_manifest(const std::string& out_dir, const std::string& command,
                           const nlohmann::json& config) {
  nlohmann::json j;
  j["schema"] = kManifestSchema;
  j["command"] = command;
  j["config"] = config;
  write_text_atomic(out_dir + "/manifest.json", j.dump(2) + "\n");
}

struct DatasetSpec {
  std::string name;
  std::string data_dir = "data";
  std::vector<std::string> x_cols;
  std::string y_col;
};

inline Dataset resolve_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.name == "synth1d") return gen_synth1d(seed);
  if (spec.name == "jump1d") return gen_jump1d(seed);
  if (spec.name == "nonstat2d") return gen_nonstat2d(seed);
  if (spec.name == "motorcycle")
    return load_csv(spec.data_dir + "/motorcycle.csv", {"times"}, "accel");
  if (spec.name.size() > 4 && spec.name.substr(spec.name.size() - 4) == ".csv") {
    if (spec.x_cols.empty() || spec.y_col.empty())
      throw UnknownDataset("csv datasets need --x-col and --y-col");
    return load_csv(spec.name, spec.x_cols, spec.y_col);
  }
  throw UnknownDataset("unknown dataset '" + spec.name +
                       "' (expected synth1d, jump1d, nonstat2d, motorcycle, or a .csv path)");
}

namespace detail {

inline std::string fit_report_csv(const FitReport& r) {
  std::string out = "epoch,objective,grad_norm\n";
  for (std::size_t i = 0; i < r.objective_trace.size(); ++i)
    out += std::to_string(i) + "," + format_double(r.objective_trace[i]) + "," +
           format_double(r.grad_norm_trace[i]) + "\n";
  return out;
}

// "lo:hi:count" on the original input scale.
inline Matrix parse_grid(const std::string& s) {
  double lo = 0.0, hi = 0.0;
  unsigned long n = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%lf:%lf:%lu%c", &lo, &hi, &n, &tail) != 3 || n < 1)
    throw UnknownDataset("bad --grid '" + s + "', expected lo:hi:count");
  return Matrix::from_column(linspace(lo, hi, n));
}

inline Matrix parse_query_csv(const std::string& path, std::vector<std::string> cols,
                              std::size_t d) {
  if (cols.empty())
    for (std::size_t j = 0; j < d; ++j) cols.push_back("x" + std::to_string(j + 1));
  if (cols.size() != d)
    throw UnknownDataset("query columns do not match the model dimension");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw EmptyDataset(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) header.push_back(cell);
  std::vector<std::size_t> idx;
  for (const auto& c : cols) {
    bool found = false;
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == c) {
        idx.push_back(i);
        found = true;
        break;
      }
    if (!found) throw ParseError(path + ": column " + c + " not found");
  }
  std::vector<Vector> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    line_no += 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    Vector row(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (idx[j] >= cells.size())
        throw ParseError(path + ": row " + std::to_string(line_no) + " is too short");
      try {
        row[j] = std::stod(cells[idx[j]]);
      } catch (const std::exception&) {
        throw ParseError(path + ": row " + std::to_string(line_no) +
                         " has a non-numeric value");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyDataset(path + ": no data rows");
  Matrix q(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) q(i, j) = rows[i][j];
  return q;
}

inline nlohmann::json dataset_config(const DatasetSpec& spec) {
  nlohmann::json j;
  j["dataset"] = spec.name;
  j["data_dir"] = spec.data_dir;
  j["x_cols"] = spec.x_cols;
  j["y_col"] = spec.y_col;
  return j;
}

}  // namespace detail

inline int run(std::vector<std::string> args) {
  CLI::App app{"non-stationary heteroscedastic GP toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset CSV");
  std::string synth_name;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--name", synth_name, "synth1d, jump1d, or nonstat2d")->required();
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  // fit
  auto* fitc = app.add_subcommand("fit", "train a model and save it");
  DatasetSpec fit_spec;
  bool fit_ell = false, fit_sigma = false, fit_omega = false, fit_std = false;
  FitConfig fit_cfg;
  std::string fit_out;
  fitc->add_option("--dataset", fit_spec.name, "named dataset or .csv path")->required();
  fitc->add_option("--data-dir", fit_spec.data_dir, "bundled data directory");
  fitc->add_option("--x-col", fit_spec.x_cols, "input column name (repeatable)");
  fitc->add_option("--y-col", fit_spec.y_col, "target column name");
  fitc->add_flag("--latent-ell", fit_ell, "input-dependent length scale");
  fitc->add_flag("--latent-sigma", fit_sigma, "input-dependent signal amplitude");
  fitc->add_flag("--latent-omega", fit_omega, "input-dependent noise scale");
  fitc->add_flag("--standardize", fit_std, "standardize inputs and targets before fitting");
  fitc->add_option("--m", fit_cfg.m, "inducing point count");
  fitc->add_option("--epochs", fit_cfg.epochs, "optimizer epochs");
  fitc->add_option("--lr", fit_cfg.adam.lr, "learning rate");
  fitc->add_option("--seed", fit_cfg.seed, "random seed");
  fitc->add_option("--out", fit_out, "output directory")->required();

  // predict
  auto* predc = app.add_subcommand("predict", "evaluate a saved model on a query set");
  std::string pred_model, pred_grid, pred_query, pred_out;
  std::vector<std::string> pred_cols;
  predc->add_option("--model", pred_model, "model.json path")->required();
  predc->add_option("--grid", pred_grid, "1-D query grid lo:hi:count");
  predc->add_option("--query", pred_query, "query CSV path");
  predc->add_option("--x-col", pred_cols, "query column name (repeatable)");
  predc->add_option("--out", pred_out, "output directory")->required();

  // ablate
  auto* ablc = app.add_subcommand("ablate", "cross-validated table over all 8 variants");
  std::vector<std::string> abl_names{"synth1d"};
  DatasetSpec abl_spec;
  std::size_t abl_k = 5;
  FitConfig abl_cfg;
  abl_cfg.m = 0;  // per-dataset default
  std::string abl_out;
  ablc->add_option("--datasets", abl_names, "dataset names")->delimiter(',');
  ablc->add_option("--data-dir", abl_spec.data_dir, "bundled data directory");
  ablc->add_option("--x-col", abl_spec.x_cols, "input column name for csv datasets");
  ablc->add_option("--y-col", abl_spec.y_col, "target column name for csv datasets");
  ablc->add_option("--k", abl_k, "fold count");
  ablc->add_option("--m", abl_cfg.m, "inducing point count (0 = per-dataset default)");
  ablc->add_option("--epochs", abl_cfg.epochs, "optimizer epochs");
  ablc->add_option("--lr", abl_cfg.adam.lr, "learning rate");
  ablc->add_option("--seed", abl_cfg.seed, "random seed");
  ablc->add_option("--out", abl_out, "output directory")->required();

  // active
  auto* actc = app.add_subcommand("active", "pool-based active learning");
  DatasetSpec act_spec;
  AlConfig act_cfg;
  std::string act_arm = "both";
  std::string act_retrain = "none";
  std::string act_out;
  actc->add_option("--dataset", act_spec.name, "synthetic dataset name")->required();
  actc->add_option("--data-dir", act_spec.data_dir, "bundled data directory");
  actc->add_option("--initial-n", act_cfg.initial_n, "initial labeled count");
  actc->add_option("--acquisitions", act_cfg.acquisitions, "points to acquire");
  actc->add_option("--arm", act_arm, "var_f, var_y, or both")
      ->check(CLI::IsMember({"var_f", "var_y", "both"}));
  actc->add_option("--retrain", act_retrain, "none or full")
      ->check(CLI::IsMember({"none", "full"}));
  actc->add_option("--m", act_cfg.fit.m, "inducing point count");
  actc->add_option("--epochs", act_cfg.fit.epochs, "optimizer epochs");
  actc->add_option("--lr", act_cfg.fit.adam.lr, "learning rate");
  actc->add_option("--seed", act_cfg.seed, "random seed");
  actc->add_option("--out", act_out, "output directory")->required();

  // gradcheck
  auto* gradc = app.add_subcommand("gradcheck", "finite-difference gradient battery");
  std::uint64_t grad_seed = 0;
  std::size_t grad_count = 20;
  bool grad_perturb = false;
  std::string grad_out;
  gradc->add_option("--seed", grad_seed, "random seed");
  gradc->add_option("--configs", grad_count, "number of random configurations");
  gradc->add_flag("--perturb", grad_perturb, "corrupt one partial (self-test hook)");
  gradc->add_option("--out", grad_out, "output directory")->required();

  std::vector<std::string> full = std::move(args);
  full.insert(full.begin(), "nsgp");
  std::vector<char*> argv;
  argv.reserve(full.size());
  for (auto& s : full) argv.push_back(s.data());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }

    if (synth->parsed()) {
      Dataset d = resolve_dataset({synth_name, "", {}, ""}, synth_seed);
      save_csv(synth_out + "/dataset.csv", d);
      write_manifest(synth_out, "synth",
                     {{"name", synth_name}, {"seed", synth_seed}});
      std::cout << "wrote " << synth_out << "/dataset.csv (" << d.n() << " rows)\n";
      return 0;
    }

    if (fitc->parsed()) {
      const Variant variant{fit_ell, fit_sigma, fit_omega};
      Dataset d = resolve_dataset(fit_spec, fit_cfg.seed);
      std::optional<ColumnTransform> transform;
      Matrix fx = d.x;
      Vector fy = d.y;
      if (fit_std) {
        StandardizeResult sr = standardize(d);
        transform = sr.transform;
        fx = std::move(sr.data.x);
        fy = std::move(sr.data.y);
      }
      FitResult res = fit(variant, fx, fy, fit_cfg);
      save_model(fit_out + "/model.json", res.model, transform);
      write_text_atomic(fit_out + "/fit_report.csv", detail::fit_report_csv(res.report));
      nlohmann::json cfg = detail::dataset_config(fit_spec);
      cfg["variant"] = variant.label();
      cfg["standardize"] = fit_std;
      cfg["m"] = fit_cfg.m;
      cfg["epochs"] = fit_cfg.epochs;
      cfg["lr"] = fit_cfg.adam.lr;
      cfg["seed"] = fit_cfg.seed;
      write_manifest(fit_out, "fit", cfg);
      std::cout << "fit " << variant.label() << " on " << d.name
                << ": objective " << format_double(res.report.final_objective) << " in "
                << res.report.wall_seconds << "s\n";
      return 0;
    }

    if (predc->parsed()) {
      if (!pred_grid.empty() && !pred_query.empty())
        throw UnknownDataset("--grid and --query are mutually exclusive");
      LoadedModel lm = load_model(pred_model);
      const std::size_t d = lm.model.d();
      Matrix query_orig(0, d);
      if (!pred_grid.empty()) {
        if (d != 1) throw UnknownDataset("--grid requires a 1-D model");
        query_orig = detail::parse_grid(pred_grid);
      } else if (!pred_query.empty()) {
        query_orig = detail::parse_query_csv(pred_query, pred_cols, d);
      } else {
        query_orig = lm.transform ? lm.transform->invert_x(lm.model.train_x)
                                  : lm.model.train_x;
      }
      const Matrix query =
          lm.transform ? lm.transform->apply_x(query_orig) : query_orig;
      Prediction p = predict(lm.model, query);
      if (lm.transform) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          p.mean[i] = lm.transform->invert_y_mean(p.mean[i]);
          p.var_f[i] = lm.transform->invert_y_var(p.var_f[i]);
          p.var_noise[i] = lm.transform->invert_y_var(p.var_noise[i]);
          p.var_y[i] = lm.transform->invert_y_var(p.var_y[i]);
        }
      }
      std::string csv;
      for (std::size_t j = 0; j < d; ++j) csv += "x" + std::to_string(j + 1) + ",";
      csv += "mean,var_f,var_noise,var_y\n";
      for (std::size_t i = 0; i < query_orig.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) csv += format_double(query_orig(i, j)) + ",";
        csv += format_double(p.mean[i]) + "," + format_double(p.var_f[i]) + "," +
               format_double(p.var_noise[i]) + "," + format_double(p.var_y[i]) + "\n";
      }
      write_text_atomic(pred_out + "/predictions.csv", csv);
      write_manifest(pred_out, "predict",
                     {{"model", pred_model},
                      {"grid", pred_grid},
                      {"query", pred_query},
                      {"x_cols", pred_cols}});
      std::cout << "wrote " << pred_out << "/predictions.csv (" << p.size() << " rows)\n";
      return 0;
    }

    if (ablc->parsed()) {
      std::vector<Dataset> datasets;
      for (const std::string& name : abl_names) {
        DatasetSpec spec = abl_spec;
        spec.name = name;
        datasets.push_back(resolve_dataset(spec, abl_cfg.seed));
      }
      const std::vector<MetricRow> rows = ablation(datasets, abl_k, abl_cfg);
      write_text_atomic(abl_out + "/ablation.csv", metrics_to_csv(rows));
      const std::string table = metrics_to_table(rows);
      write_text_atomic(abl_out + "/ablation.txt", table);
      nlohmann::json cfg;
      cfg["datasets"] = abl_names;
      cfg["data_dir"] = abl_spec.data_dir;
      cfg["k"] = abl_k;
      cfg["m"] = abl_cfg.m;
      cfg["epochs"] = abl_cfg.epochs;
      cfg["lr"] = abl_cfg.adam.lr;
      cfg["seed"] = abl_cfg.seed;
      write_manifest(abl_out, "ablate", cfg);
      std::cout << table;
      return 0;
    }

    if (actc->parsed()) {
      Dataset d = resolve_dataset(act_spec, act_cfg.seed);
      act_cfg.retrain =
          act_retrain == "full" ? RetrainPolicy::full : RetrainPolicy::none;
      act_cfg.fit.seed = act_cfg.seed;
      std::vector<Acquisition> arms;
      if (act_arm == "var_f" || act_arm == "both") arms.push_back(Acquisition::var_f);
      if (act_arm == "var_y" || act_arm == "both") arms.push_back(Acquisition::var_y);
      for (Acquisition arm : arms) {
        AlConfig cfg = act_cfg;
        cfg.acquisition = arm;
        const AlTrace trace = run_al(d, cfg);
        const std::string tag = to_string(arm);
        write_text_atomic(act_out + "/trace_" + tag + ".csv", trace_to_csv(trace, d));
        write_text_atomic(act_out + "/final_" + tag + ".csv",
                          final_prediction_csv(trace, d));
        std::cout << "arm " << tag << ": initial MAE "
                  << format_double(trace.initial_mae) << ", MAE sum over "
                  << trace.steps.size() << " acquisitions "
                  << format_double(mae_auc(trace)) << "\n";
      }
      nlohmann::json cfg = detail::dataset_config(act_spec);
      cfg["initial_n"] = act_cfg.initial_n;
      cfg["acquisitions"] = act_cfg.acquisitions;
      cfg["arm"] = act_arm;
      cfg["retrain"] = act_retrain;
      cfg["m"] = act_cfg.fit.m;
      cfg["epochs"] = act_cfg.fit.epochs;
      cfg["lr"] = act_cfg.fit.adam.lr;
      cfg["seed"] = act_cfg.seed;
      write_manifest(act_out, "active", cfg);
      return 0;
    }

    if (gradc->parsed()) {
      const GradCheckReport rep = run_gradcheck(grad_seed, grad_count, grad_perturb);
      std::string csv = "case,variant,n,m,d,max_abs_diff,worst_ratio,pass\n";
      for (const GradCheckCase& c : rep.cases)
        csv += std::to_string(c.index) + "," + c.variant.label() + "," +
               std::to_string(c.n) + "," + std::to_string(c.m) + "," +
               std::to_string(c.d) + "," + format_double(c.max_abs_diff) + "," +
               format_double(c.worst_ratio) + "," + (c.pass ? "1" : "0") + "\n";
      write_text_atomic(grad_out + "/gradcheck.csv", csv);
      write_manifest(grad_out, "gradcheck",
                     {{"seed", grad_seed},
                      {"configs", grad_count},
                      {"perturb", grad_perturb}});
      std::cout << "gradcheck: " << rep.cases.size() << " configurations, worst ratio "
                << format_double(rep.worst_ratio) << " against tolerance, "
                << (rep.all_pass ? "pass" : "FAIL") << "\n";
      return rep.all_pass ? 0 : 3;
    }

    std::cerr << "no subcommand\n";
    return 2;
  } catch (const NonFinite& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const NotPositiveDefinite& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const Diverged& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const NonPositiveVariance& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const NonSymmetric& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const NonPositiveParam& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace nsgp::cli
