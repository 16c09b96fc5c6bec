// anfis: batch front end for ingesting candle data, inducing and training
// ANFIS subsystems, evaluating them and running multi-day forecasts.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "anfis/anfis.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace anfis;
using anfis::cli::RunConfig;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCheckFailed = 3;

// Fixed model structure; recorded in every model file.
const Metadata kStructure = {
    {"fis.type", "sugeno"}, {"fis.mf", "gaussmf"},        {"fis.and", "prod"},
    {"fis.output", "linear"}, {"fis.defuzz", "wtaver"}, {"data.frequency", "daily"},
};

/// Outputs are staged in memory and written only once the command succeeds.
class Outputs {
 public:
  explicit Outputs(fs::path root) : root_(std::move(root)) {}

  void add(const fs::path& rel, std::string content) { staged_[rel] = std::move(content); }

  void commit() {
    std::vector<fs::path> written;
    try {
      for (const auto& [rel, content] : staged_) {
        const fs::path path = root_ / rel;
        fs::create_directories(path.parent_path());
        write_file_atomic(path, content);
        written.push_back(path);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) fs::remove(p, ec);
      throw;
    }
  }

 private:
  fs::path root_;
  std::map<fs::path, std::string> staged_;
};

struct Data {
  std::vector<TimeSeries> aligned;

  const TimeSeries& series(const std::string& name) const {
    for (const auto& s : aligned)
      if (s.name == name) return s;
    fail(ErrorCode::UnknownSignal, "no signal named '" + name + "'");
  }
};

Data load_data(const RunConfig& config) {
  for (const auto& src : config.signals)
    if (!fs::exists(src.path)) fail(ErrorCode::MissingFile, "data file not found: " + src.path.string());
  std::vector<TimeSeries> raw;
  for (const auto& src : config.signals)
    raw.push_back(load_candles(src.path, src.date_column, src.value_column, src.name));
  return {align(raw)};
}

SupervisedSet supervised_for(const Data& data, const SubsystemSpec& sub) {
  std::vector<TimeSeries> inputs;
  std::vector<int> leads;
  for (const auto& ref : sub.inputs) {
    inputs.push_back(data.series(ref.signal));
    leads.push_back(ref.predicted ? 1 : 0);
  }
  return make_supervised(inputs, data.series(sub.name), leads);
}

std::string inputs_label(const SubsystemSpec& sub) {
  std::string out;
  for (const auto& ref : sub.inputs) {
    if (!out.empty()) out += " ";
    out += ref.predicted ? ref.signal + "(k+1)" : ref.signal + "(k)";
  }
  return out;
}

std::uint64_t fingerprint(const SupervisedSet& set) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& d : set.dates) mix(static_cast<std::uint64_t>(d.time_since_epoch().count()));
  for (Eigen::Index i = 0; i < set.inputs.size(); ++i) mix(std::bit_cast<std::uint64_t>(set.inputs.data()[i]));
  for (Eigen::Index i = 0; i < set.targets.size(); ++i) mix(std::bit_cast<std::uint64_t>(set.targets(i)));
  return h;
}

void stamp(Metadata& meta, const RunConfig& config, const SubsystemSpec& sub, const SupervisedSet& train) {
  for (const auto& [k, v] : kStructure) meta[k] = v;
  meta["data.target"] = sub.name;
  meta["data.train_rows"] = std::to_string(train.rows());
  meta["data.first_date"] = format_date(train.dates.front());
  meta["data.split_fraction"] = fmt::format("{}", config.split_fraction);
  meta["data.fingerprint"] = fmt::format("{:016x}", fingerprint(train));
  meta["seed"] = std::to_string(*config.seed);
  const auto stats = minmax_stats(train);
  for (std::size_t j = 0; j < stats.inputs.size(); ++j)
    meta["data.range." + train.input_names[j]] = fmt::format("{} {}", stats.inputs[j].min, stats.inputs[j].max);
  meta["data.range.target"] = fmt::format("{} {}", stats.target.min, stats.target.max);
}

Eigen::VectorXd predict_rows(const Predictor& p, const Eigen::MatrixXd& inputs) {
  if (const auto* a = std::get_if<AnfisModel>(&p)) return forward_batch(*a, inputs);
  return mlp_forward_batch(std::get<MlpModel>(p), inputs);
}

InductionConfig induction_for(const RunConfig& config, InductionMethod method) {
  InductionConfig c = config.induction;
  c.method = method;
  c.fcm.seed = *config.seed;
  return c;
}

TrainConfig training_for(const RunConfig& config, TrainMethod method) {
  TrainConfig c = config.training;
  c.method = method;
  c.seed = *config.seed;
  return c;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::string split_plot_csv(const SupervisedSet& set, const Eigen::VectorXd& predicted) {
  std::string out = "date,actual,predicted\n";
  for (Eigen::Index k = 0; k < set.rows(); ++k)
    out += fmt::format("{},{},{}\n", format_date(set.dates[static_cast<std::size_t>(k)] + std::chrono::days{1}),
                       set.targets(k), predicted(k));
  return out;
}

std::string model_file(const std::string& name) { return "models/" + name + ".json"; }

std::map<std::string, Predictor> load_models(const RunConfig& config, const fs::path& dir) {
  std::map<std::string, Predictor> models;
  for (const auto& sub : config.subsystems) {
    const fs::path path = dir / (sub.name + ".json");
    if (fs::exists(path)) models.emplace(sub.name, load_model(path));
  }
  return models;
}

// ---- commands ----

int cmd_ingest(const RunConfig& config, Outputs& out) {
  const Data data = load_data(config);
  for (const auto& sub : config.subsystems) {
    const auto set = supervised_for(data, sub);
    out.add("supervised_" + sub.name + ".csv", supervised_csv(set));
    fmt::print("{}: {} rows, inputs {}\n", sub.name, set.rows(), inputs_label(sub));
  }
  out.commit();
  return 0;
}

int cmd_train(const RunConfig& config, Outputs& out) {
  const Data data = load_data(config);
  EvalReport report{{}, config.rmsre_denominator};
  for (const auto& sub : config.subsystems) {
    const auto [train, test] = split_chronological(supervised_for(data, sub), config.split_fraction);
    bool first = true;
    for (InductionMethod im : config.induction_methods) {
      const AnfisModel initial = induce(train, induction_for(config, im));
      for (TrainMethod tm : config.training_methods) {
        auto result = anfis::train(initial, train, training_for(config, tm));
        stamp(result.model.metadata, config, sub, train);
        const Eigen::VectorXd p_train = forward_batch(result.model, train.inputs);
        const Eigen::VectorXd p_test = forward_batch(result.model, test.inputs);
        report.rows.push_back(score_split(sub.name, inputs_label(sub), std::string(to_string(im)),
                                          std::string(to_string(tm)), train.targets, p_train, test.targets, p_test,
                                          config.rmsre_denominator));

        const std::string tag = fmt::format("{}.{}.{}", sub.name, to_string(im), to_string(tm));
        const std::string text = dump_model(result.model);
        out.add("models/" + tag + ".json", text);
        out.add("curves/" + tag + ".csv", train_report_csv(result.report));
        if (first) {
          out.add(model_file(sub.name), text);
          out.add("plots/" + sub.name + "_test.csv", split_plot_csv(test, p_test));
          out.add("plots/" + sub.name + "_test.svg",
                  svg_line_chart(sub.name + " next-day forecast, test split",
                                 {{"actual", to_vec(test.targets), "#1f77b4"},
                                  {"predicted", to_vec(p_test), "#d62728"}},
                                 "test day", sub.name));
          first = false;
        }
      }
    }
  }
  out.add("report.csv", eval_report_csv(report));
  out.add("report.txt", eval_report_table(report));
  out.commit();
  fmt::print("{}", eval_report_table(report));
  return 0;
}

int cmd_evaluate(const RunConfig& config, Outputs& out, const fs::path& model_dir) {
  const Data data = load_data(config);
  const Pipeline pipeline = build_pipeline({config.subsystems, config.horizon}, load_models(config, model_dir));

  EvalReport report{{}, config.rmsre_denominator};
  std::size_t test_begin = 0;
  for (std::size_t i = 0; i < pipeline.size(); ++i) {
    const auto& sub = config.subsystems[i];
    const auto [train, test] = split_chronological(supervised_for(data, sub), config.split_fraction);
    test_begin = static_cast<std::size_t>(train.rows());
    const Predictor& p = pipeline.predictor(i);
    const Metadata& meta = std::visit([](const auto& m) -> const Metadata& { return m.metadata; }, p);
    auto get = [&](const char* key, const char* fallback) {
      auto it = meta.find(key);
      return it == meta.end() ? std::string(fallback) : it->second;
    };
    report.rows.push_back(score_split(sub.name, inputs_label(sub), get("induction.method", "-"),
                                      get("training.method", "lm"), train.targets, predict_rows(p, train.inputs),
                                      test.targets, predict_rows(p, test.inputs), config.rmsre_denominator));
  }

  // The rollout is scored on the days the one-step test split covers.
  std::vector<TimeSeries> span;
  for (const auto& sub : config.subsystems) {
    const auto& s = data.series(sub.name);
    TimeSeries t{s.name, {s.dates.begin() + static_cast<std::ptrdiff_t>(test_begin), s.dates.end()},
                 {s.values.begin() + static_cast<std::ptrdiff_t>(test_begin), s.values.end()}};
    span.push_back(std::move(t));
  }
  const auto ev = evaluate_rollout(pipeline, span, config.horizon, config.rmsre_denominator);

  out.add("evaluate.csv", eval_report_csv(report));
  out.add("evaluate.txt", eval_report_table(report));
  out.add("rollout_eval.csv", rollout_evaluation_csv(ev));
  out.commit();
  fmt::print("{}", eval_report_table(report));
  fmt::print("rollout over {} anchors written to rollout_eval.csv\n", ev.anchors);
  return 0;
}

int cmd_forecast(const RunConfig& config, Outputs& out, const fs::path& model_dir) {
  const Data data = load_data(config);
  const Pipeline pipeline = build_pipeline({config.subsystems, config.horizon}, load_models(config, model_dir));

  const auto& dates = data.aligned.front().dates;
  std::size_t anchor = dates.size() - 1;
  if (config.forecast_anchor) {
    const auto d = parse_date(*config.forecast_anchor);
    if (!d) fail(ErrorCode::ParseError, "bad forecast anchor '" + *config.forecast_anchor + "'");
    auto it = std::find(dates.begin(), dates.end(), *d);
    if (it == dates.end()) fail(ErrorCode::InvalidArgument, "anchor " + *config.forecast_anchor + " is not a data day");
    anchor = static_cast<std::size_t>(it - dates.begin());
  }

  std::map<std::string, double> initial;
  for (const auto& sub : config.subsystems) initial[sub.name] = data.series(sub.name).values[anchor];
  RolloutResult r = rollout(pipeline, initial, config.horizon);

  // Actuals are known when the anchor leaves a full horizon of data behind it.
  const std::size_t n = config.subsystems.size();
  const bool has_actual = anchor + config.horizon < dates.size();
  if (has_actual) {
    Eigen::MatrixXd actual(r.predicted.rows(), r.predicted.cols());
    for (std::size_t c = 0; c < config.horizon; ++c)
      for (std::size_t i = 0; i < n; ++i)
        actual(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) =
            data.series(config.subsystems[i].name).values[anchor + c + 1];
    attach_actuals(r, actual, config.rmsre_denominator);
  }

  std::string wide = "cycle,date";
  for (const auto& sub : config.subsystems) wide += "," + sub.name;
  wide += "\n";
  for (std::size_t c = 0; c < config.horizon; ++c) {
    wide += fmt::format("{},{}", c + 1, format_date(dates[anchor] + std::chrono::days{c + 1}));
    for (std::size_t i = 0; i < n; ++i)
      wide += fmt::format(",{}", r.predicted(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)));
    wide += "\n";
  }
  out.add("forecast.csv", wide);
  out.add("forecast_detail.csv", rollout_csv(r));

  const std::size_t history = std::min(config.plot_history, anchor + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = data.series(config.subsystems[i].name);
    std::string csv = "date,actual,predicted\n";
    std::vector<double> act, pred;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = anchor + 1 - history; k <= anchor; ++k) {
      csv += fmt::format("{},{},\n", format_date(s.dates[k]), s.values[k]);
      act.push_back(s.values[k]);
      pred.push_back(k == anchor ? s.values[k] : nan);
    }
    for (std::size_t c = 0; c < config.horizon; ++c) {
      const double p = r.predicted(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i));
      const bool known = anchor + c + 1 < s.size();
      const double a = known ? s.values[anchor + c + 1] : nan;
      csv += known ? fmt::format("{},{},{}\n", format_date(s.dates[anchor] + std::chrono::days{c + 1}), a, p)
                   : fmt::format("{},,{}\n", format_date(s.dates[anchor] + std::chrono::days{c + 1}), p);
      act.push_back(a);
      pred.push_back(p);
    }
    const auto& name = config.subsystems[i].name;
    out.add("plots/forecast_" + name + ".csv", csv);
    out.add("plots/forecast_" + name + ".svg",
            svg_line_chart(fmt::format("{} {}-day rollout from {}", name, config.horizon, format_date(dates[anchor])),
                           {{"actual", act, "#1f77b4"}, {"predicted", pred, "#d62728"}}, "day", name));
  }
  out.commit();
  fmt::print("{}", wide);
  return 0;
}

int cmd_compare(const RunConfig& config, Outputs& out) {
  const Data data = load_data(config);
  std::string csv = "target,method,train_rmse,test_rmse\n";
  std::string table = fmt::format("{:<10}  {:<22}  {:>14}  {:>14}\n", "Target", "Method", "RMSE train", "RMSE test");
  table += std::string(66, '-') + "\n";
  for (const auto& sub : config.subsystems) {
    const auto [train, test] = split_chronological(supervised_for(data, sub), config.split_fraction);

    const AnfisModel initial = induce(train, induction_for(config, InductionMethod::Fcm));
    auto fis = anfis::train(initial, train, training_for(config, TrainMethod::Backprop));
    stamp(fis.model.metadata, config, sub, train);
    const double fis_train = rmse(to_vec(train.targets), to_vec(forward_batch(fis.model, train.inputs)));
    const double fis_test = rmse(to_vec(test.targets), to_vec(forward_batch(fis.model, test.inputs)));
    if (fis_train > fis.report.rmse.front())
      fail(ErrorCode::InvalidModel, sub.name + ": trained ANFIS is worse than its starting point");

    MlpModel start = make_mlp(static_cast<std::size_t>(train.dims()), config.ann.hidden, *config.seed);
    start.input_names = train.input_names;
    fit_input_scaling(start, train.inputs);
    auto ann = train_lm(start, train, config.ann.lm);
    stamp(ann.model.metadata, config, sub, train);
    const double ann_train = rmse(to_vec(train.targets), to_vec(mlp_forward_batch(ann.model, train.inputs)));
    const double ann_test = rmse(to_vec(test.targets), to_vec(mlp_forward_batch(ann.model, test.inputs)));

    const std::string fis_label = "ANFIS (fcm, backprop)";
    const std::string ann_label = fmt::format("ANN ({} hidden, LM)", config.ann.hidden);
    csv += fmt::format("{},anfis,{},{}\n", sub.name, fis_train, fis_test);
    csv += fmt::format("{},ann,{},{}\n", sub.name, ann_train, ann_test);
    table += fmt::format("{:<10}  {:<22}  {:>14.6g}  {:>14.6g}\n", sub.name, fis_label, fis_train, fis_test);
    table += fmt::format("{:<10}  {:<22}  {:>14.6g}  {:>14.6g}\n", "", ann_label, ann_train, ann_test);

    out.add("models/" + sub.name + ".compare.anfis.json", dump_model(fis.model));
    out.add("models/" + sub.name + ".compare.ann.json", dump_model(ann.model));
    out.add("curves/" + sub.name + ".compare.anfis.csv", train_report_csv(fis.report));
    out.add("curves/" + sub.name + ".compare.ann.csv", train_report_csv(ann.report));
  }
  out.add("compare.csv", csv);
  out.add("compare.txt", table);
  out.commit();
  fmt::print("{}", table);
  return 0;
}

int cmd_cluster_info(const RunConfig& config, Outputs& out) {
  const Data data = load_data(config);
  std::string text;
  for (const auto& sub : config.subsystems) {
    const auto [train, test] = split_chronological(supervised_for(data, sub), config.split_fraction);
    const InductionMethod method = config.induction_methods.front();
    const AnfisModel model = induce(train, induction_for(config, method));
    const auto counts = hard_assignment_counts(model, train.inputs);

    text += fmt::format("{} ({}, {} rules, {} training rows)\n", sub.name, to_string(method), model.rule_count(),
                        train.rows());
    std::string header = fmt::format("{:>5}", "rule");
    for (const auto& name : model.input_names) header += fmt::format("  {:>14}  {:>12}", name + " c", "sigma");
    text += header + fmt::format("  {:>7}\n", "count");
    for (std::size_t i = 0; i < model.rule_count(); ++i) {
      std::string line = fmt::format("{:>5}", i + 1);
      for (std::size_t j = 0; j < model.inputs(); ++j) {
        const auto& mf = model.mf_pools[j][model.rules[i].antecedent[j]];
        line += fmt::format("  {:>14.6g}  {:>12.6g}", mf.center, mf.sigma);
      }
      text += line + fmt::format("  {:>7}\n", counts[i]);
    }
    text += "\n";
  }
  out.add("cluster_info.txt", text);
  out.commit();
  fmt::print("{}", text);
  return 0;
}

int cmd_gradcheck(std::size_t cases, std::uint64_t seed, double h, double threshold, Outputs* out) {
  const auto report = run_gradient_suite(cases, seed, h);
  const bool pass = report.max_error() < threshold;
  const std::string text = fmt::format(
      "cases {}\nmax relative error {:.3e} (premise {:.3e}, full {:.3e}, jacobian {:.3e})\nthreshold {:.3e}\n{}\n",
      report.cases, report.max_error(), report.max_premise_error, report.max_full_error, report.max_jacobian_error,
      threshold, pass ? "PASS" : "FAIL");
  if (out) {
    out->add("gradcheck.txt", text);
    out->commit();
  }
  fmt::print("{}", text);
  return pass ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ANFIS forecasting toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, model_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "run configuration (JSON)");
  app.add_option("--seed", seed, "random seed; overrides the config");
  app.add_option("--out", out_dir, "output directory; overrides the config");

  auto* ingest = app.add_subcommand("ingest", "load, align and dump supervised sets");
  auto* train = app.add_subcommand("train", "induce and train every configured combination");
  auto* evaluate = app.add_subcommand("evaluate", "score saved models one step and over the rollout horizon");
  auto* forecast = app.add_subcommand("forecast", "roll the saved pipeline forward from the last observed day");
  auto* compare = app.add_subcommand("compare", "ANFIS against the perceptron baseline");
  auto* cluster_info = app.add_subcommand("cluster-info", "show induced rules and their coverage");
  auto* gradcheck = app.add_subcommand("gradcheck", "check analytic gradients against finite differences");
  for (auto* cmd : {evaluate, forecast}) cmd->add_option("--models", model_dir, "model directory (default <out>/models)");

  std::optional<double> threshold;
  std::optional<std::size_t> cases;
  gradcheck->add_option("--threshold", threshold, "maximum relative error (default 1e-6)");
  gradcheck->add_option("--cases", cases, "number of random cases (default 100)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gradcheck->parsed()) {
      cli::GradcheckSettings g;
      std::optional<std::uint64_t> s = seed;
      std::optional<Outputs> out;
      if (!config_path.empty()) {
        const RunConfig config = cli::load_run_config(config_path);
        g = config.gradcheck;
        if (!s) s = config.seed;
        if (out_dir.empty()) out.emplace(config.output_dir);
      }
      if (!out_dir.empty()) out.emplace(out_dir);
      if (!s) fail(ErrorCode::InvalidArgument, "a seed is required (--seed or config 'seed')");
      if (threshold) g.threshold = *threshold;
      if (cases) g.cases = *cases;
      return cmd_gradcheck(g.cases, *s, g.h, g.threshold, out ? &*out : nullptr);
    }

    if (config_path.empty()) fail(ErrorCode::InvalidArgument, "--config is required");
    RunConfig config = cli::load_run_config(config_path);
    if (seed) config.seed = seed;
    if (!config.seed) fail(ErrorCode::InvalidArgument, "a seed is required (--seed or config 'seed')");
    if (!out_dir.empty()) config.output_dir = out_dir;
    const fs::path models = model_dir.empty() ? config.output_dir / "models" : fs::path(model_dir);
    Outputs out(config.output_dir);

    if (ingest->parsed()) return cmd_ingest(config, out);
    if (train->parsed()) return cmd_train(config, out);
    if (evaluate->parsed()) return cmd_evaluate(config, out, models);
    if (forecast->parsed()) return cmd_forecast(config, out, models);
    if (compare->parsed()) return cmd_compare(config, out);
    if (cluster_info->parsed()) return cmd_cluster_info(config, out);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
