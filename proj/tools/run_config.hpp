#pragma once

// Run configuration for the anfis command-line tool. See FORMATS.md for the
// documented key hierarchy; every key except `seed`, `signals` and
// `subsystems` has a default.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anfis/ann_baseline.hpp"
#include "anfis/error.hpp"
#include "anfis/forecast_pipeline.hpp"
#include "anfis/metrics.hpp"
#include "anfis/rule_induction.hpp"
#include "anfis/training.hpp"

namespace anfis::cli {

struct SignalSource {
  std::string name;
  std::filesystem::path path;
  std::string date_column = "date";
  std::string value_column = "close";
};

struct GradcheckSettings {
  std::size_t cases = 100;
  double threshold = 1e-6;
  double h = 1e-6;
};

struct AnnSettings {
  std::size_t hidden = 10;
  LmConfig lm;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::filesystem::path output_dir = "out";
  std::vector<SignalSource> signals;
  std::vector<SubsystemSpec> subsystems;
  double split_fraction = 0.9;
  std::size_t horizon = 7;
  RelativeTo rmsre_denominator = RelativeTo::Predicted;
  std::vector<InductionMethod> induction_methods{InductionMethod::Grid};
  std::vector<TrainMethod> training_methods{TrainMethod::Hybrid};
  InductionConfig induction;
  TrainConfig training;
  AnnSettings ann;
  std::optional<std::string> forecast_anchor;
  std::size_t plot_history = 30;
  GradcheckSettings gradcheck;
};

namespace detail {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class Enum, class Parse>
std::vector<Enum> read_methods(const nlohmann::json& j, Parse parse) {
  std::vector<Enum> out;
  if (j.is_string()) {
    out.push_back(parse(j.get<std::string>()));
  } else {
    for (const auto& m : j) out.push_back(parse(m.get<std::string>()));
  }
  if (out.empty()) fail(ErrorCode::InvalidArgument, "method list is empty");
  return out;
}

}  // namespace detail

/// Relative signal paths resolve against `base_dir` (the config file's directory).
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = base_dir / j.at("output_dir").get<std::string>();
    else c.output_dir = base_dir / "out";

    for (const auto& s : j.at("signals")) {
      SignalSource src;
      src.name = s.at("name").get<std::string>();
      src.path = base_dir / s.at("path").get<std::string>();
      detail::read(s, "date_column", src.date_column);
      detail::read(s, "value_column", src.value_column);
      c.signals.push_back(std::move(src));
    }
    for (const auto& s : j.at("subsystems")) {
      SubsystemSpec sub;
      sub.name = s.at("name").get<std::string>();
      for (const auto& ref : s.at("inputs")) sub.inputs.push_back(parse_signal_ref(ref.get<std::string>()));
      if (sub.inputs.empty()) fail(ErrorCode::InvalidArgument, "subsystem '" + sub.name + "' has no inputs");
      c.subsystems.push_back(std::move(sub));
    }
    if (c.signals.empty() || c.subsystems.empty())
      fail(ErrorCode::InvalidArgument, "config needs at least one signal and one subsystem");

    detail::read(j, "split_fraction", c.split_fraction);
    detail::read(j, "horizon", c.horizon);
    if (j.contains("rmsre_denominator")) {
      const auto d = j.at("rmsre_denominator").get<std::string>();
      if (d == "predicted") c.rmsre_denominator = RelativeTo::Predicted;
      else if (d == "actual") c.rmsre_denominator = RelativeTo::Actual;
      else fail(ErrorCode::InvalidArgument, "rmsre_denominator must be 'predicted' or 'actual'");
    }

    if (j.contains("induction")) {
      const auto& ind = j.at("induction");
      if (ind.contains("method"))
        c.induction_methods = detail::read_methods<InductionMethod>(ind.at("method"), parse_induction_method);
      detail::read(ind, "grid_mfs_per_input", c.induction.grid_mfs_per_input);
      detail::read(ind, "max_rules", c.induction.max_rules);
      if (ind.contains("subtractive")) {
        const auto& s = ind.at("subtractive");
        detail::read(s, "radius", c.induction.subtractive.radius);
        detail::read(s, "squash", c.induction.subtractive.squash);
        detail::read(s, "accept_ratio", c.induction.subtractive.accept_ratio);
        detail::read(s, "reject_ratio", c.induction.subtractive.reject_ratio);
      }
      if (ind.contains("fcm")) {
        const auto& f = ind.at("fcm");
        detail::read(f, "clusters", c.induction.fcm.clusters);
        detail::read(f, "m", c.induction.fcm.m);
        detail::read(f, "tol", c.induction.fcm.tol);
        detail::read(f, "max_iter", c.induction.fcm.max_iter);
      }
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      if (t.contains("method"))
        c.training_methods = detail::read_methods<TrainMethod>(t.at("method"), parse_train_method);
      detail::read(t, "epochs", c.training.epochs);
      detail::read(t, "error_goal", c.training.error_goal);
      detail::read(t, "initial_step", c.training.initial_step);
      detail::read(t, "increase_factor", c.training.increase_factor);
      detail::read(t, "decrease_factor", c.training.decrease_factor);
      detail::read(t, "lse_ridge", c.training.lse_ridge);
    }
    if (j.contains("ann")) {
      const auto& a = j.at("ann");
      detail::read(a, "hidden", c.ann.hidden);
      detail::read(a, "max_iter", c.ann.lm.max_iter);
      detail::read(a, "lambda0", c.ann.lm.lambda0);
      detail::read(a, "lambda_up", c.ann.lm.lambda_up);
      detail::read(a, "lambda_down", c.ann.lm.lambda_down);
      detail::read(a, "tol", c.ann.lm.tol);
    }
    if (j.contains("forecast")) {
      const auto& f = j.at("forecast");
      if (f.contains("anchor")) c.forecast_anchor = f.at("anchor").get<std::string>();
      detail::read(f, "plot_history", c.plot_history);
    }
    if (j.contains("gradcheck")) {
      const auto& g = j.at("gradcheck");
      detail::read(g, "cases", c.gradcheck.cases);
      detail::read(g, "threshold", c.gradcheck.threshold);
      detail::read(g, "h", c.gradcheck.h);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  if (c.horizon < 1) fail(ErrorCode::InvalidArgument, "horizon must be at least 1");
  validate(c.induction);
  validate(c.training);
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingFile, "cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, "config '" + path.string() + "': " + e.what());
  }
  return parse_run_config(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace anfis::cli
