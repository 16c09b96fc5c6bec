#pragma once

// Coupled one-step predictors rolled forward with their own predictions fed
// back as inputs.
//
// Input references:
//   "X" or "X@k"                          value of signal X in the current state
//   "X+1", "predicted(X)", "predicted(X)@k+1"
//                                         output of subsystem X in the same cycle
// During supervised training the second form reads the historical X(k+1).

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "anfis/ann_baseline.hpp"
#include "anfis/error.hpp"
#include "anfis/fuzzy_core.hpp"
#include "anfis/market_data.hpp"
#include "anfis/metrics.hpp"

namespace anfis {

struct SignalRef {
  std::string signal;
  bool predicted = false;

  std::string str() const { return predicted ? "predicted(" + signal + ")@k+1" : signal + "@k"; }
  friend bool operator==(const SignalRef&, const SignalRef&) = default;
};

inline SignalRef parse_signal_ref(std::string_view text) {
  auto strip = [&](std::string_view suffix) {
    if (text.size() > suffix.size() && text.ends_with(suffix)) {
      text.remove_suffix(suffix.size());
      return true;
    }
    return false;
  };
  if (text.starts_with("predicted(")) {
    strip("@k+1");
    if (!text.ends_with(")") || text.size() <= 11)
      fail(ErrorCode::ParseError, "malformed reference '" + std::string(text) + "'");
    return {std::string(text.substr(10, text.size() - 11)), true};
  }
  if (strip("@k+1") || strip("+1")) return {std::string(text), true};
  strip("@k");
  if (text.empty()) fail(ErrorCode::ParseError, "empty signal reference");
  return {std::string(text), false};
}

/// One predictor; `name` is the signal it predicts.
struct SubsystemSpec {
  std::string name;
  std::vector<SignalRef> inputs;
};

struct PipelineSpec {
  std::vector<SubsystemSpec> subsystems;
  std::size_t horizon = 7;
};

using Predictor = std::variant<AnfisModel, MlpModel>;

inline std::size_t predictor_inputs(const Predictor& p) {
  return std::visit([](const auto& m) { return m.inputs(); }, p);
}

inline double predictor_eval(const Predictor& p, std::span<const double> x) {
  if (const auto* a = std::get_if<AnfisModel>(&p)) return predict(*a, x);
  return mlp_forward(std::get<MlpModel>(p), x);
}

class Pipeline {
 public:
  const PipelineSpec& spec() const { return spec_; }
  /// Subsystem indices in evaluation order.
  const std::vector<std::size_t>& order() const { return order_; }
  const Predictor& predictor(std::size_t i) const { return predictors_[i]; }
  std::size_t size() const { return spec_.subsystems.size(); }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < spec_.subsystems.size(); ++i)
      if (spec_.subsystems[i].name == name) return i;
    fail(ErrorCode::UnknownSignal, "no subsystem predicts '" + std::string(name) + "'");
  }

 private:
  friend Pipeline build_pipeline(const PipelineSpec&, const std::map<std::string, Predictor>&);
  PipelineSpec spec_;
  std::vector<Predictor> predictors_;
  std::vector<std::size_t> order_;
};

/// Resolves wiring, checks model widths and fixes a topological order
/// (lowest spec index first among ready subsystems). Every referenced
/// signal must be produced by some subsystem so the state can be fed back.
inline Pipeline build_pipeline(const PipelineSpec& spec, const std::map<std::string, Predictor>& models) {
  if (spec.subsystems.empty()) fail(ErrorCode::InvalidArgument, "pipeline has no subsystems");
  if (spec.horizon < 1) fail(ErrorCode::InvalidArgument, "horizon must be at least 1");
  Pipeline p;
  p.spec_ = spec;
  const std::size_t n = spec.subsystems.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i)
    if (!index.emplace(spec.subsystems[i].name, i).second)
      fail(ErrorCode::InvalidArgument, "subsystem '" + spec.subsystems[i].name + "' defined twice");

  std::vector<std::vector<std::size_t>> consumers(n);
  std::vector<std::size_t> pending(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sub = spec.subsystems[i];
    auto model = models.find(sub.name);
    if (model == models.end()) fail(ErrorCode::UnknownSignal, "no model for subsystem '" + sub.name + "'");
    if (predictor_inputs(model->second) != sub.inputs.size())
      fail(ErrorCode::DimensionMismatch, "model for '" + sub.name + "' expects " +
                                             std::to_string(predictor_inputs(model->second)) + " inputs, wiring has " +
                                             std::to_string(sub.inputs.size()));
    p.predictors_.push_back(model->second);
    for (const auto& ref : sub.inputs) {
      auto src = index.find(ref.signal);
      if (src == index.end())
        fail(ErrorCode::UnknownSignal, "'" + ref.str() + "' wired into '" + sub.name + "' has no subsystem");
      if (ref.predicted) {
        consumers[src->second].push_back(i);
        ++pending[i];
      }
    }
  }

  std::vector<bool> done(n, false);
  while (p.order_.size() < n) {
    std::size_t next = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!done[i] && pending[i] == 0) {
        next = i;
        break;
      }
    if (next == n) fail(ErrorCode::CyclicWiring, "predicted(...) references form a cycle");
    done[next] = true;
    p.order_.push_back(next);
    for (std::size_t c : consumers[next]) --pending[c];
  }
  return p;
}

struct RolloutResult {
  std::vector<std::string> subsystems;
  Eigen::MatrixXd predicted;  // horizon x subsystems
  Eigen::MatrixXd actual;     // empty unless attach_actuals was called
  Eigen::MatrixXd abs_error;
  Eigen::MatrixXd rel_error;
};

/// Receives every subsystem evaluation: cycle (1-based), subsystem index and
/// the exact input vector it saw.
using RolloutObserver = std::function<void(std::size_t, std::size_t, std::span<const double>)>;

/// Cycle t evaluates each subsystem on the cycle t-1 state (the observed
/// state for t = 1) plus same-cycle predictions, then replaces the state
/// with the predictions.
inline RolloutResult rollout(const Pipeline& pipeline, const std::map<std::string, double>& initial,
                             std::size_t horizon, const RolloutObserver& observer = {}) {
  if (horizon < 1) fail(ErrorCode::InvalidArgument, "horizon must be at least 1");
  const auto& subs = pipeline.spec().subsystems;
  const std::size_t n = subs.size();
  std::vector<double> state(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = initial.find(subs[i].name);
    if (it == initial.end()) fail(ErrorCode::UnknownSignal, "no initial value for '" + subs[i].name + "'");
    state[i] = it->second;
  }

  RolloutResult result;
  for (const auto& s : subs) result.subsystems.push_back(s.name);
  result.predicted.resize(static_cast<Eigen::Index>(horizon), static_cast<Eigen::Index>(n));

  std::vector<double> next(n), x;
  for (std::size_t cycle = 1; cycle <= horizon; ++cycle) {
    for (std::size_t i : pipeline.order()) {
      x.clear();
      for (const auto& ref : subs[i].inputs) {
        const std::size_t src = pipeline.index_of(ref.signal);
        x.push_back(ref.predicted ? next[src] : state[src]);
      }
      if (observer) observer(cycle, i, x);
      try {
        next[i] = predictor_eval(pipeline.predictor(i), x);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroFiring) throw;
        fail(ErrorCode::ZeroFiring, "cycle " + std::to_string(cycle) + ", subsystem '" + subs[i].name + "'", cycle);
      }
    }
    state = next;
    for (std::size_t i = 0; i < n; ++i)
      result.predicted(static_cast<Eigen::Index>(cycle - 1), static_cast<Eigen::Index>(i)) = state[i];
  }
  return result;
}

/// Fills actual/abs_error/rel_error; rel_error divides by the chosen denominator.
inline void attach_actuals(RolloutResult& result, const Eigen::MatrixXd& actual,
                           RelativeTo denominator = RelativeTo::Predicted) {
  if (actual.rows() != result.predicted.rows() || actual.cols() != result.predicted.cols())
    fail(ErrorCode::DimensionMismatch, "actuals do not match the rollout shape");
  result.actual = actual;
  result.abs_error = (actual - result.predicted).cwiseAbs();
  const Eigen::MatrixXd& den = denominator == RelativeTo::Predicted ? result.predicted : actual;
  result.rel_error = result.abs_error.array() / den.array().abs();
}

struct RolloutEvaluation {
  std::vector<std::string> subsystems;
  std::size_t anchors = 0;
  Eigen::MatrixXd rmse;   // horizon x subsystems
  Eigen::MatrixXd rmsre;  // horizon x subsystems
  RelativeTo denominator = RelativeTo::Predicted;
};

/// Rolls out from every anchor day a with a + horizon inside the span and
/// scores step s against the actual value on day a + s. `series` must be
/// aligned and include every subsystem's signal.
inline RolloutEvaluation evaluate_rollout(const Pipeline& pipeline, std::span<const TimeSeries> series,
                                          std::size_t horizon, RelativeTo denominator = RelativeTo::Predicted) {
  const auto& subs = pipeline.spec().subsystems;
  const std::size_t n = subs.size();
  std::vector<const TimeSeries*> source(n, nullptr);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& s : series)
      if (s.name == subs[i].name) source[i] = &s;
    if (!source[i]) fail(ErrorCode::UnknownSignal, "no series for '" + subs[i].name + "'");
    if (source[i]->dates != source[0]->dates) fail(ErrorCode::LengthMismatch, "evaluation series are not aligned");
  }
  const std::size_t length = source[0]->size();
  if (horizon < 1 || length < horizon + 1)
    fail(ErrorCode::InsufficientTestSpan,
         std::to_string(length) + " days cannot score a " + std::to_string(horizon) + "-step rollout");

  const std::size_t anchors = length - horizon;
  std::vector<std::vector<std::vector<double>>> pred(horizon, std::vector<std::vector<double>>(n)), act = pred;
  for (std::size_t a = 0; a < anchors; ++a) {
    std::map<std::string, double> initial;
    for (std::size_t i = 0; i < n; ++i) initial[subs[i].name] = source[i]->values[a];
    const auto r = rollout(pipeline, initial, horizon);
    for (std::size_t s = 0; s < horizon; ++s)
      for (std::size_t i = 0; i < n; ++i) {
        pred[s][i].push_back(r.predicted(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)));
        act[s][i].push_back(source[i]->values[a + s + 1]);
      }
  }

  RolloutEvaluation ev;
  for (const auto& s : subs) ev.subsystems.push_back(s.name);
  ev.anchors = anchors;
  ev.denominator = denominator;
  ev.rmse.resize(static_cast<Eigen::Index>(horizon), static_cast<Eigen::Index>(n));
  ev.rmsre.resizeLike(ev.rmse);
  for (std::size_t s = 0; s < horizon; ++s)
    for (std::size_t i = 0; i < n; ++i) {
      const auto si = static_cast<Eigen::Index>(s), ii = static_cast<Eigen::Index>(i);
      ev.rmse(si, ii) = rmse(act[s][i], pred[s][i]);
      ev.rmsre(si, ii) = rmsre(act[s][i], pred[s][i], denominator);
    }
  return ev;
}

}  // namespace anfis
