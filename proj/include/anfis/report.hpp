#pragma once

// Text outputs: CSV dumps, evaluation tables, atomic file writes.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include <fmt/format.h>

#include "anfis/error.hpp"
#include "anfis/forecast_pipeline.hpp"
#include "anfis/market_data.hpp"
#include "anfis/metrics.hpp"
#include "anfis/training.hpp"

namespace anfis {

/// Writes `<path>.tmp` and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) fail(ErrorCode::IoError, "write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::IoError, "cannot move '" + tmp.string() + "' into place");
  }
}

inline std::string supervised_csv(const SupervisedSet& set) {
  std::string out = "date";
  for (const auto& n : set.input_names) out += "," + n;
  out += ",target\n";
  for (Eigen::Index k = 0; k < set.rows(); ++k) {
    out += format_date(set.dates[static_cast<std::size_t>(k)]);
    for (Eigen::Index j = 0; j < set.dims(); ++j) out += fmt::format(",{}", set.inputs(k, j));
    out += fmt::format(",{}\n", set.targets(k));
  }
  return out;
}

inline std::string train_report_csv(const TrainReport& report) {
  std::string out = "epoch,rmse,step\n";
  for (std::size_t e = 0; e < report.rmse.size(); ++e)
    out += fmt::format("{},{},{}\n", e + 1, report.rmse[e], report.step[e]);
  return out;
}

/// `cycle,subsystem,predicted,actual,abs_error,rel_error`; the last three
/// columns stay empty when no actuals are attached.
inline std::string rollout_csv(const RolloutResult& r) {
  std::string out = "cycle,subsystem,predicted,actual,abs_error,rel_error\n";
  const bool has_actual = r.actual.size() > 0;
  for (Eigen::Index c = 0; c < r.predicted.rows(); ++c)
    for (Eigen::Index i = 0; i < r.predicted.cols(); ++i) {
      out += fmt::format("{},{},{}", c + 1, r.subsystems[static_cast<std::size_t>(i)], r.predicted(c, i));
      if (has_actual)
        out += fmt::format(",{},{},{}\n", r.actual(c, i), r.abs_error(c, i), r.rel_error(c, i));
      else
        out += ",,,\n";
    }
  return out;
}

inline std::string rollout_evaluation_csv(const RolloutEvaluation& ev) {
  std::string out = fmt::format("step,subsystem,rmse,rmsre,anchors,rmsre_denominator\n");
  for (Eigen::Index s = 0; s < ev.rmse.rows(); ++s)
    for (Eigen::Index i = 0; i < ev.rmse.cols(); ++i)
      out += fmt::format("{},{},{},{},{},{}\n", s + 1, ev.subsystems[static_cast<std::size_t>(i)], ev.rmse(s, i),
                         ev.rmsre(s, i), ev.anchors, to_string(ev.denominator));
  return out;
}

/// One configuration's one-step errors on both splits.
struct EvalRow {
  std::string target;
  std::string inputs;
  std::string clustering;
  std::string training;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
  double train_rmsre = 0.0;
  double test_rmsre = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  RelativeTo denominator = RelativeTo::Predicted;
};

inline EvalRow score_split(std::string target, std::string inputs, std::string clustering, std::string training,
                           const Eigen::VectorXd& train_actual, const Eigen::VectorXd& train_pred,
                           const Eigen::VectorXd& test_actual, const Eigen::VectorXd& test_pred,
                           RelativeTo denominator) {
  auto span = [](const Eigen::VectorXd& v) { return std::span<const double>(v.data(), static_cast<std::size_t>(v.size())); };
  EvalRow row{std::move(target), std::move(inputs), std::move(clustering), std::move(training)};
  row.train_rmse = rmse(span(train_actual), span(train_pred));
  row.test_rmse = rmse(span(test_actual), span(test_pred));
  row.train_rmsre = rmsre(span(train_actual), span(train_pred), denominator);
  row.test_rmsre = rmsre(span(test_actual), span(test_pred), denominator);
  return row;
}

inline std::string eval_report_csv(const EvalReport& report) {
  std::string out = "target,inputs,clustering,training,train_rmse,test_rmse,train_rmsre,test_rmsre,rmsre_denominator\n";
  for (const auto& r : report.rows)
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.target, r.inputs, r.clustering, r.training, r.train_rmse,
                       r.test_rmse, r.train_rmsre, r.test_rmsre, to_string(report.denominator));
  return out;
}

/// Fixed-width table: rows are input set x clustering x trainer, columns
/// are RMSE and RMSRE on train and test.
inline std::string eval_report_table(const EvalReport& report) {
  std::size_t w_in = 5, w_cl = 10, w_tr = 8;
  for (const auto& r : report.rows) {
    w_in = std::max(w_in, r.inputs.size());
    w_cl = std::max(w_cl, r.clustering.size());
    w_tr = std::max(w_tr, r.training.size());
  }
  std::string out = fmt::format("{:<{}}  {:<{}}  {:<{}}  {:>12}  {:>12}  {:>12}  {:>12}\n", "Input", w_in,
                                "Clustering", w_cl, "Training", w_tr, "RMSE train", "RMSE test", "RMSRE train",
                                "RMSRE test");
  out += std::string(w_in + w_cl + w_tr + 4 + 4 * 14, '-') + "\n";
  std::string last_inputs;
  for (const auto& r : report.rows) {
    const std::string shown = r.inputs == last_inputs ? "" : r.inputs;
    last_inputs = r.inputs;
    out += fmt::format("{:<{}}  {:<{}}  {:<{}}  {:>12.6g}  {:>12.6g}  {:>12.7g}  {:>12.7g}\n", shown, w_in,
                       r.clustering, w_cl, r.training, w_tr, r.train_rmse, r.test_rmse, r.train_rmsre, r.test_rmsre);
  }
  out += fmt::format("RMSRE denominator: {}\n", to_string(report.denominator));
  return out;
}

}  // namespace anfis
