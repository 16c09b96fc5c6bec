#pragma once

// Model documents. JSON, one object per file:
//
//   {"format": "anfis-model", "version": 1, "kind": "anfis" | "mlp", ...}
//
// Doubles are written in shortest round-trip form, so save -> load
// reproduces every parameter bit for bit. FORMATS.md has the full schema.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "anfis/ann_baseline.hpp"
#include "anfis/error.hpp"
#include "anfis/forecast_pipeline.hpp"
#include "anfis/fuzzy_core.hpp"

namespace anfis {

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::ordered_json to_json(const AnfisModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "anfis-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = "anfis";
  j["input_names"] = model.input_names;
  auto pools = nlohmann::ordered_json::array();
  for (const auto& pool : model.mf_pools) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& mf : pool) arr.push_back({{"center", mf.center}, {"sigma", mf.sigma}});
    pools.push_back(std::move(arr));
  }
  j["mf_pools"] = std::move(pools);
  auto rules = nlohmann::ordered_json::array();
  for (const auto& r : model.rules) rules.push_back({{"antecedent", r.antecedent}, {"consequent", r.consequent}});
  j["rules"] = std::move(rules);
  j["metadata"] = model.metadata;
  return j;
}

inline nlohmann::ordered_json to_json(const MlpModel& m) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::ordered_json j;
  j["format"] = "anfis-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = "mlp";
  j["input_names"] = m.input_names;
  auto hidden = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.w_hidden.rows(); ++i) hidden.push_back(vec(m.w_hidden.row(i).transpose()));
  j["hidden_weights"] = std::move(hidden);
  j["hidden_biases"] = vec(m.b_hidden);
  j["output_weights"] = vec(m.w_out);
  j["output_bias"] = m.b_out;
  j["input_offset"] = vec(m.in_offset);
  j["input_scale"] = vec(m.in_scale);
  j["activation"] = "tanh";
  j["metadata"] = m.metadata;
  return j;
}

namespace detail {

inline void check_header(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "anfis-model")
    fail(ErrorCode::ParseError, "not an anfis-model document");
  if (j.value("version", 0) != kModelFormatVersion)
    fail(ErrorCode::ParseError, "unsupported model version " + j.value("version", nlohmann::json()).dump());
}

inline Eigen::VectorXd to_vector(const nlohmann::json& a) {
  const auto v = a.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline Predictor predictor_from_json(const nlohmann::json& j) {
  detail::check_header(j);
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "anfis") {
      AnfisModel m;
      m.input_names = j.at("input_names").get<std::vector<std::string>>();
      for (const auto& pool : j.at("mf_pools")) {
        std::vector<GaussianMf> p;
        for (const auto& mf : pool) p.push_back({mf.at("center").get<double>(), mf.at("sigma").get<double>()});
        m.mf_pools.push_back(std::move(p));
      }
      for (const auto& r : j.at("rules"))
        m.rules.push_back({r.at("antecedent").get<std::vector<std::size_t>>(),
                           r.at("consequent").get<std::vector<double>>()});
      m.metadata = j.at("metadata").get<Metadata>();
      validate(m);
      return m;
    }
    if (kind == "mlp") {
      MlpModel m;
      m.input_names = j.at("input_names").get<std::vector<std::string>>();
      const auto& hidden = j.at("hidden_weights");
      const auto h = static_cast<Eigen::Index>(hidden.size());
      const auto d = h > 0 ? static_cast<Eigen::Index>(hidden.at(0).size()) : 0;
      m.w_hidden.resize(h, d);
      for (Eigen::Index i = 0; i < h; ++i) {
        const auto row = detail::to_vector(hidden.at(static_cast<std::size_t>(i)));
        if (row.size() != d) fail(ErrorCode::ParseError, "ragged hidden weight matrix");
        m.w_hidden.row(i) = row.transpose();
      }
      m.b_hidden = detail::to_vector(j.at("hidden_biases"));
      m.w_out = detail::to_vector(j.at("output_weights"));
      m.b_out = j.at("output_bias").get<double>();
      m.in_offset = detail::to_vector(j.at("input_offset"));
      m.in_scale = detail::to_vector(j.at("input_scale"));
      m.metadata = j.at("metadata").get<Metadata>();
      validate(m);
      return m;
    }
    fail(ErrorCode::ParseError, "unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, e.what());
  }
}

inline std::string dump_model(const Predictor& p) {
  return std::visit([](const auto& m) { return to_json(m).dump(2); }, p) + "\n";
}

inline Predictor parse_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, e.what());
  }
  return predictor_from_json(j);
}

inline Predictor load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingFile, "cannot open model '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace anfis
