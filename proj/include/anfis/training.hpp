#pragma once

// Hybrid (least squares + gradient descent) and full backpropagation
// training of an AnfisModel, plus a finite-difference gradient checker.
//
// Parameter vector layout, used by every gradient routine here:
//   premises    for input j, for pool entry m: center, sigma
//   consequents for rule i: p_i1..p_id, r_i

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "anfis/error.hpp"
#include "anfis/fuzzy_core.hpp"
#include "anfis/market_data.hpp"
#include "anfis/metrics.hpp"

namespace anfis {

inline std::size_t premise_param_count(const AnfisModel& model) {
  std::size_t n = 0;
  for (const auto& pool : model.mf_pools) n += 2 * pool.size();
  return n;
}

inline std::size_t consequent_param_count(const AnfisModel& model) {
  return model.rule_count() * (model.inputs() + 1);
}

inline Eigen::VectorXd get_params(const AnfisModel& model, bool with_consequents) {
  const std::size_t np = premise_param_count(model);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(np + (with_consequents ? consequent_param_count(model) : 0)));
  Eigen::Index p = 0;
  for (const auto& pool : model.mf_pools)
    for (const auto& mf : pool) {
      theta(p++) = mf.center;
      theta(p++) = mf.sigma;
    }
  if (with_consequents)
    for (const auto& rule : model.rules)
      for (double c : rule.consequent) theta(p++) = c;
  return theta;
}

inline void set_params(AnfisModel& model, const Eigen::VectorXd& theta, bool with_consequents) {
  Eigen::Index p = 0;
  for (auto& pool : model.mf_pools)
    for (auto& mf : pool) {
      mf.center = theta(p++);
      mf.sigma = theta(p++);
    }
  if (with_consequents)
    for (auto& rule : model.rules)
      for (double& c : rule.consequent) c = theta(p++);
}

struct LossAndGradient {
  double sse = 0.0;
  Eigen::VectorXd gradient;
};

/// Sum of squared errors over the batch and its exact gradient with respect
/// to the premise parameters (and the consequents when requested).
inline LossAndGradient loss_and_gradient(const AnfisModel& model, const SupervisedSet& batch, bool with_consequents) {
  if (static_cast<std::size_t>(batch.dims()) != model.inputs())
    fail(ErrorCode::DimensionMismatch, "batch width differs from model inputs");
  const std::size_t d = model.inputs();
  const std::size_t np = premise_param_count(model);

  std::vector<std::size_t> pool_offset(d, 0);
  for (std::size_t j = 1; j < d; ++j) pool_offset[j] = pool_offset[j - 1] + 2 * model.mf_pools[j - 1].size();

  LossAndGradient out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(np + (with_consequents ? consequent_param_count(model) : 0)));
  std::vector<double> x(d);
  for (Eigen::Index k = 0; k < batch.rows(); ++k) {
    for (std::size_t j = 0; j < d; ++j) x[j] = batch.inputs(k, static_cast<Eigen::Index>(j));
    ForwardTrace t;
    try {
      t = forward(model, x);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroFiring) throw;
      fail(ErrorCode::ZeroFiring, "row " + std::to_string(k) + " fires no rule", static_cast<std::size_t>(k));
    }
    const double err = t.output - batch.targets(k);
    out.sse += err * err;
    const double dy = 2.0 * err;
    for (std::size_t i = 0; i < model.rule_count(); ++i) {
      const auto& rule = model.rules[i];
      // dE/dw_i * w_i, from y = sum w f / sum w
      const double coef = dy * t.normalized[i] * (t.rule_outputs[i] - t.output);
      for (std::size_t j = 0; j < d; ++j) {
        const auto& mf = model.mf_pools[j][rule.antecedent[j]];
        const double diff = x[j] - mf.center;
        const double s2 = mf.sigma * mf.sigma;
        const auto p = static_cast<Eigen::Index>(pool_offset[j] + 2 * rule.antecedent[j]);
        out.gradient(p) += coef * diff / s2;
        out.gradient(p + 1) += coef * diff * diff / (s2 * mf.sigma);
      }
      if (with_consequents) {
        const auto base = static_cast<Eigen::Index>(np + i * (d + 1));
        const double g = dy * t.normalized[i];
        for (std::size_t j = 0; j < d; ++j) out.gradient(base + static_cast<Eigen::Index>(j)) += g * x[j];
        out.gradient(base + static_cast<Eigen::Index>(d)) += g;
      }
    }
  }
  return out;
}

inline Eigen::VectorXd premise_gradient(const AnfisModel& model, const SupervisedSet& batch) {
  return loss_and_gradient(model, batch, false).gradient;
}

inline Eigen::VectorXd full_gradient(const AnfisModel& model, const SupervisedSet& batch) {
  return loss_and_gradient(model, batch, true).gradient;
}

inline double batch_sse(const AnfisModel& model, const SupervisedSet& batch) {
  return (forward_batch(model, batch.inputs) - batch.targets).squaredNorm();
}

inline double batch_rmse(const AnfisModel& model, const SupervisedSet& batch) {
  const Eigen::VectorXd y = forward_batch(model, batch.inputs);
  return rmse({batch.targets.data(), static_cast<std::size_t>(batch.rows())},
              {y.data(), static_cast<std::size_t>(y.size())});
}

using GradientFn = std::function<Eigen::VectorXd(const AnfisModel&, const SupervisedSet&)>;

namespace detail {

inline double compare_to_central_differences(const AnfisModel& model, const SupervisedSet& batch, double h,
                                             const Eigen::VectorXd& analytic, bool with_consequents) {
  if (!(h > 0.0)) fail(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  const Eigen::VectorXd theta = get_params(model, with_consequents);
  if (analytic.size() != theta.size()) fail(ErrorCode::DimensionMismatch, "gradient length differs from parameter count");
  AnfisModel probe = model;
  double worst = 0.0;
  for (Eigen::Index p = 0; p < theta.size(); ++p) {
    const double step = h * std::max(1.0, std::abs(theta(p)));
    Eigen::VectorXd t = theta;
    t(p) = theta(p) + step;
    set_params(probe, t, with_consequents);
    const double up = batch_sse(probe, batch);
    t(p) = theta(p) - step;
    set_params(probe, t, with_consequents);
    const double down = batch_sse(probe, batch);
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic(p) - numeric) / std::max(1.0, std::abs(analytic(p))));
  }
  return worst;
}

}  // namespace detail

/// Largest |analytic - central difference| / max(1, |analytic|) over every
/// premise and consequent parameter. Step per parameter is h * max(1, |theta|).
inline double finite_diff_check(const AnfisModel& model, const SupervisedSet& batch, double h,
                                const GradientFn& gradient = full_gradient) {
  return detail::compare_to_central_differences(model, batch, h, gradient(model, batch), true);
}

/// Same check restricted to premise_gradient and the premise parameters.
inline double finite_diff_check_premises(const AnfisModel& model, const SupervisedSet& batch, double h) {
  return detail::compare_to_central_differences(model, batch, h, premise_gradient(model, batch), false);
}

/// Least-squares consequents with premises held fixed. Each row of the
/// design matrix is [wbar_1 x, wbar_1, ..., wbar_R x, wbar_R]; the ridge
/// term enters as extra rows sqrt(ridge) * I so a single column-pivoted
/// Householder QR solves the whole problem.
inline AnfisModel lse_consequents(const AnfisModel& model, const SupervisedSet& train, double ridge) {
  validate(model);
  if (train.rows() < 1) fail(ErrorCode::EmptyData, "empty training set");
  if (static_cast<std::size_t>(train.dims()) != model.inputs())
    fail(ErrorCode::DimensionMismatch, "training width differs from model inputs");
  if (!(ridge >= 0.0)) fail(ErrorCode::InvalidArgument, "ridge must be non-negative");

  const std::size_t d = model.inputs();
  const auto cols = static_cast<Eigen::Index>(consequent_param_count(model));
  const Eigen::Index n = train.rows();
  const Eigen::Index extra = ridge > 0.0 ? cols : 0;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + extra, cols);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + extra);
  std::vector<double> x(d);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < d; ++j) x[j] = train.inputs(k, static_cast<Eigen::Index>(j));
    std::vector<double> wbar;
    try {
      wbar = normalize(fire_rules(model, x));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroFiring) throw;
      fail(ErrorCode::ZeroFiring, "row " + std::to_string(k) + " fires no rule", static_cast<std::size_t>(k));
    }
    for (std::size_t i = 0; i < wbar.size(); ++i) {
      const auto base = static_cast<Eigen::Index>(i * (d + 1));
      for (std::size_t j = 0; j < d; ++j) a(k, base + static_cast<Eigen::Index>(j)) = wbar[i] * x[j];
      a(k, base + static_cast<Eigen::Index>(d)) = wbar[i];
    }
    b(k) = train.targets(k);
  }
  if (extra > 0) a.bottomRows(extra).diagonal().setConstant(std::sqrt(ridge));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (ridge == 0.0 && qr.rank() < cols)
    fail(ErrorCode::SingularSystem,
         fmt::format("design matrix has rank {} for {} consequent parameters", qr.rank(), cols));
  const Eigen::VectorXd solution = qr.solve(b);

  AnfisModel out = model;
  Eigen::Index p = 0;
  for (auto& rule : out.rules)
    for (double& c : rule.consequent) c = solution(p++);
  return out;
}

enum class TrainMethod { Hybrid, Backprop };

constexpr std::string_view to_string(TrainMethod m) { return m == TrainMethod::Hybrid ? "hybrid" : "backprop"; }

inline TrainMethod parse_train_method(std::string_view s) {
  if (s == "hybrid") return TrainMethod::Hybrid;
  if (s == "backprop") return TrainMethod::Backprop;
  fail(ErrorCode::InvalidArgument, "unknown training method '" + std::string(s) + "'");
}

struct TrainConfig {
  TrainMethod method = TrainMethod::Hybrid;
  std::size_t epochs = 100;
  double error_goal = 0.0;
  double initial_step = 0.01;
  double increase_factor = 1.1;
  double decrease_factor = 0.9;
  double lse_ridge = 1e-8;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& c) {
  if (c.epochs < 1) fail(ErrorCode::InvalidArgument, "epochs must be at least 1");
  if (!(c.error_goal >= 0.0)) fail(ErrorCode::InvalidArgument, "error goal must be non-negative");
  if (!(c.initial_step > 0.0)) fail(ErrorCode::InvalidArgument, "initial step must be positive");
  if (!(c.increase_factor > 1.0)) fail(ErrorCode::InvalidArgument, "step increase factor must exceed 1");
  if (!(c.decrease_factor > 0.0 && c.decrease_factor < 1.0))
    fail(ErrorCode::InvalidArgument, "step decrease factor must lie in (0,1)");
  if (!(c.lse_ridge >= 0.0)) fail(ErrorCode::InvalidArgument, "ridge must be non-negative");
}

enum class StopReason { EpochsExhausted, ErrorGoalMet, StepUnderflow, Converged, DampingOverflow };

constexpr std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::EpochsExhausted: return "epochs_exhausted";
    case StopReason::ErrorGoalMet: return "error_goal_met";
    case StopReason::StepUnderflow: return "step_underflow";
    case StopReason::Converged: return "converged";
    case StopReason::DampingOverflow: return "damping_overflow";
  }
  return "?";
}

struct TrainReport {
  std::vector<double> rmse;  // one entry per epoch run
  std::vector<double> step;  // step size (or LM damping) used in that epoch
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based
  StopReason stop = StopReason::EpochsExhausted;
};

inline constexpr double kStepUnderflow = 1e-15;

/// Grows the step after four straight error decreases, shrinks it when an
/// increase follows directly on a decrease.
class StepController {
 public:
  StepController(double initial, double increase, double decrease)
      : step_(initial), increase_(increase), decrease_(decrease) {}

  double step() const { return step_; }

  void observe(double error) {
    if (has_prev_) {
      if (error < prev_) {
        last_ = -1;
        if (++decreases_ == 4) {
          step_ *= increase_;
          decreases_ = 0;
        }
      } else if (error > prev_) {
        if (last_ == -1) step_ *= decrease_;
        last_ = 1;
        decreases_ = 0;
      }
    }
    prev_ = error;
    has_prev_ = true;
  }

 private:
  double step_;
  double increase_;
  double decrease_;
  double prev_ = 0.0;
  bool has_prev_ = false;
  int decreases_ = 0;
  int last_ = 0;
};

namespace detail {

inline std::vector<double> safe_spans(const SupervisedSet& train, double& target_span) {
  const auto stats = minmax_stats(train);
  std::vector<double> spans;
  for (const auto& r : stats.inputs) spans.push_back(r.span() > 0.0 ? r.span() : 1.0);
  target_span = stats.target.span() > 0.0 ? stats.target.span() : 1.0;
  return spans;
}

/// Diagonal parameter scales expressing each parameter in units of the
/// data range it acts on.
inline Eigen::VectorXd parameter_scales(const AnfisModel& model, const SupervisedSet& train, bool with_consequents) {
  double tspan = 1.0;
  const auto spans = safe_spans(train, tspan);
  std::vector<double> s;
  for (std::size_t j = 0; j < model.inputs(); ++j)
    for (std::size_t m = 0; m < model.mf_pools[j].size(); ++m) {
      s.push_back(spans[j]);
      s.push_back(spans[j]);
    }
  if (with_consequents)
    for (std::size_t i = 0; i < model.rule_count(); ++i) {
      for (std::size_t j = 0; j < model.inputs(); ++j) s.push_back(tspan / spans[j]);
      s.push_back(tspan);
    }
  return Eigen::Map<Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

inline std::vector<double> sigma_floors(const SupervisedSet& train) {
  double tspan = 1.0;
  auto spans = safe_spans(train, tspan);
  for (double& s : spans) s *= kSigmaFloorRatio;
  return spans;
}

inline void clamp_sigmas(AnfisModel& model, const std::vector<double>& floors) {
  for (std::size_t j = 0; j < model.inputs(); ++j)
    for (auto& mf : model.mf_pools[j]) mf.sigma = std::max(mf.sigma, floors[j]);
}

/// theta <- theta - step * D (D g) / |D g|
inline void descend(AnfisModel& model, const Eigen::VectorXd& gradient, const Eigen::VectorXd& scales, double step,
                    bool with_consequents) {
  const Eigen::VectorXd scaled = scales.cwiseProduct(gradient);
  const double norm = scaled.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) return;
  const Eigen::VectorXd theta = get_params(model, with_consequents) - step * scales.cwiseProduct(scaled) / norm;
  set_params(model, theta, with_consequents);
}

inline void record_training(AnfisModel& model, const TrainConfig& config, const TrainReport& report) {
  model.metadata["training.method"] = std::string(to_string(config.method));
  model.metadata["training.epochs"] = std::to_string(config.epochs);
  model.metadata["training.epochs_run"] = std::to_string(report.epochs_run);
  model.metadata["training.best_epoch"] = std::to_string(report.best_epoch);
  model.metadata["training.stop"] = std::string(to_string(report.stop));
  model.metadata["training.error_goal"] = fmt::format("{}", config.error_goal);
  model.metadata["training.initial_step"] = fmt::format("{}", config.initial_step);
  model.metadata["training.lse_ridge"] = fmt::format("{}", config.lse_ridge);
  model.metadata["training.best_rmse"] = fmt::format("{}", report.rmse[report.best_epoch - 1]);
}

}  // namespace detail

struct TrainResult {
  AnfisModel model;
  TrainReport report;
};

/// Per epoch: least-squares consequents, then one premise descent step.
/// Returns the post-LSE model of the epoch with the lowest training RMSE.
inline TrainResult train_hybrid(const AnfisModel& initial, const SupervisedSet& train, const TrainConfig& config) {
  validate(config);
  validate(initial);
  const auto floors = detail::sigma_floors(train);
  const Eigen::VectorXd scales = detail::parameter_scales(initial, train, false);
  StepController controller(config.initial_step, config.increase_factor, config.decrease_factor);

  AnfisModel current = initial;
  detail::clamp_sigmas(current, floors);
  TrainResult best{current, {}};
  double best_rmse = std::numeric_limits<double>::infinity();
  auto& report = best.report;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    current = lse_consequents(current, train, config.lse_ridge);
    const auto lg = loss_and_gradient(current, train, false);
    const double e = std::sqrt(lg.sse / static_cast<double>(train.rows()));
    controller.observe(e);
    report.rmse.push_back(e);
    report.step.push_back(controller.step());
    report.epochs_run = epoch;
    if (e < best_rmse) {
      best_rmse = e;
      best.model = current;
      report.best_epoch = epoch;
    }
    if (e <= config.error_goal) {
      report.stop = StopReason::ErrorGoalMet;
      break;
    }
    if (controller.step() < kStepUnderflow) {
      report.stop = StopReason::StepUnderflow;
      break;
    }
    detail::descend(current, lg.gradient, scales, controller.step(), false);
    detail::clamp_sigmas(current, floors);
  }
  detail::record_training(best.model, config, report);
  return best;
}

/// Full-batch descent on premises and consequents together. Returns the
/// model of the epoch with the lowest training RMSE.
inline TrainResult train_backprop(const AnfisModel& initial, const SupervisedSet& train, const TrainConfig& config) {
  validate(config);
  validate(initial);
  const auto floors = detail::sigma_floors(train);
  const Eigen::VectorXd scales = detail::parameter_scales(initial, train, true);
  StepController controller(config.initial_step, config.increase_factor, config.decrease_factor);

  AnfisModel current = initial;
  detail::clamp_sigmas(current, floors);
  TrainResult best{current, {}};
  double best_rmse = std::numeric_limits<double>::infinity();
  auto& report = best.report;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto lg = loss_and_gradient(current, train, true);
    const double e = std::sqrt(lg.sse / static_cast<double>(train.rows()));
    controller.observe(e);
    report.rmse.push_back(e);
    report.step.push_back(controller.step());
    report.epochs_run = epoch;
    if (e < best_rmse) {
      best_rmse = e;
      best.model = current;
      report.best_epoch = epoch;
    }
    if (e <= config.error_goal) {
      report.stop = StopReason::ErrorGoalMet;
      break;
    }
    if (controller.step() < kStepUnderflow) {
      report.stop = StopReason::StepUnderflow;
      break;
    }
    detail::descend(current, lg.gradient, scales, controller.step(), true);
    detail::clamp_sigmas(current, floors);
  }
  detail::record_training(best.model, config, report);
  return best;
}

inline TrainResult train(const AnfisModel& initial, const SupervisedSet& data, const TrainConfig& config) {
  return config.method == TrainMethod::Hybrid ? train_hybrid(initial, data, config)
                                              : train_backprop(initial, data, config);
}

}  // namespace anfis
