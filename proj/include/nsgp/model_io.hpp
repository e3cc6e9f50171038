#pragma once

// JSON round-trip for trained models. The file keeps the flat parameter
// vector plus its layout, the training data the model conditions on, and
// the standardization record when the fit ran on standardized data.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"

#include "nsgp/data.hpp"
#include "nsgp/errors.hpp"
#include "nsgp/model.hpp"

namespace nsgp {

inline constexpr const char* kModelSchema = "nsgp-model-v1";

struct LoadedModel {
  NsgpModel model;
  std::optional<ColumnTransform> transform;
};

namespace detail {

inline const char* transform_name(Transform t) {
  return t == Transform::log ? "log" : "identity";
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t cols) {
  Matrix m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != cols) throw ParseError("model file: ragged train matrix");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline std::string serialize_model(const NsgpModel& m,
                                   const std::optional<ColumnTransform>& transform) {
  const ParamVector pv = pack(m);
  nlohmann::json j;
  j["schema"] = kModelSchema;
  j["variant"] = {{"ell_latent", pv.layout.variant.ell_latent},
                  {"sigma_latent", pv.layout.variant.sigma_latent},
                  {"omega_latent", pv.layout.variant.omega_latent}};
  j["m"] = pv.layout.m;
  j["d"] = pv.layout.d;
  nlohmann::json segs = nlohmann::json::array();
  for (const Segment& s : pv.layout.segments)
    segs.push_back({{"name", s.name},
                    {"offset", s.offset},
                    {"length", s.length},
                    {"transform", detail::transform_name(s.transform)}});
  j["layout"] = std::move(segs);
  j["params"] = pv.values;
  if (transform) {
    j["standardization"] = {{"x_mean", transform->x_mean},
                            {"x_std", transform->x_std},
                            {"y_mean", transform->y_mean},
                            {"y_std", transform->y_std}};
  } else {
    j["standardization"] = nullptr;
  }
  j["train"] = {{"x", detail::matrix_to_json(m.train_x)}, {"y", m.train_y}};
  return j.dump(2) + "\n";
}

inline LoadedModel deserialize_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file: invalid JSON: ") + e.what());
  }
  try {
    if (!j.contains("schema") || j["schema"].get<std::string>() != kModelSchema)
      throw ParseError("model file: unknown schema");
    Variant v{j["variant"]["ell_latent"].get<bool>(),
              j["variant"]["sigma_latent"].get<bool>(),
              j["variant"]["omega_latent"].get<bool>()};
    const std::size_t m = j["m"].get<std::size_t>();
    const std::size_t d = j["d"].get<std::size_t>();
    ParamVector pv{make_layout(v, v.any_latent() ? m : 1, d), {}};
    if (j["layout"].size() != pv.layout.segments.size())
      throw ParseError("model file: layout does not match variant");
    for (std::size_t i = 0; i < pv.layout.segments.size(); ++i) {
      const Segment& s = pv.layout.segments[i];
      const auto& js = j["layout"][i];
      if (js["name"].get<std::string>() != s.name ||
          js["offset"].get<std::size_t>() != s.offset ||
          js["length"].get<std::size_t>() != s.length ||
          js["transform"].get<std::string>() != detail::transform_name(s.transform))
        throw ParseError("model file: layout does not match variant");
    }
    pv.values = j["params"].get<Vector>();
    if (pv.values.size() != pv.layout.size)
      throw ParseError("model file: parameter count does not match layout");
    const Matrix train_x = detail::matrix_from_json(j["train"]["x"], d);
    const Vector train_y = j["train"]["y"].get<Vector>();
    LoadedModel out{unpack(pv, train_x, train_y), std::nullopt};
    if (!j["standardization"].is_null()) {
      ColumnTransform t;
      t.x_mean = j["standardization"]["x_mean"].get<Vector>();
      t.x_std = j["standardization"]["x_std"].get<Vector>();
      t.y_mean = j["standardization"]["y_mean"].get<double>();
      t.y_std = j["standardization"]["y_std"].get<double>();
      out.transform = t;
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file: missing or mistyped field: ") + e.what());
  }
}

inline void save_model(const std::string& path, const NsgpModel& m,
                       const std::optional<ColumnTransform>& transform = std::nullopt) {
  write_text_atomic(path, serialize_model(m, transform));
}

inline LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace nsgp
