#pragma once

// Single-hidden-layer tanh perceptron trained by Levenberg-Marquardt, the
// comparison model for the ANFIS forecasts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "anfis/error.hpp"
#include "anfis/fuzzy_core.hpp"
#include "anfis/market_data.hpp"
#include "anfis/training.hpp"

namespace anfis {

/// y = w_out . tanh(W_h s(x) + b_h) + b_out, with s(x) = (x - in_offset) * in_scale
/// mapping the training range onto [-1, 1].
struct MlpModel {
  Eigen::MatrixXd w_hidden;  // H x d
  Eigen::VectorXd b_hidden;  // H
  Eigen::VectorXd w_out;     // H
  double b_out = 0.0;
  Eigen::VectorXd in_offset;  // d
  Eigen::VectorXd in_scale;   // d
  std::vector<std::string> input_names;
  Metadata metadata;

  std::size_t inputs() const { return static_cast<std::size_t>(w_hidden.cols()); }
  std::size_t hidden() const { return static_cast<std::size_t>(w_hidden.rows()); }
  std::size_t param_count() const { return hidden() * (inputs() + 2) + 1; }
};

inline void validate(const MlpModel& m) {
  const auto h = m.w_hidden.rows(), d = m.w_hidden.cols();
  if (h < 1 || d < 1) fail(ErrorCode::InvalidModel, "perceptron needs at least one input and one hidden unit");
  if (m.b_hidden.size() != h || m.w_out.size() != h || m.in_offset.size() != d || m.in_scale.size() != d)
    fail(ErrorCode::InvalidModel, "perceptron parameter shapes disagree");
  if (!m.w_hidden.allFinite() || !m.b_hidden.allFinite() || !m.w_out.allFinite() || !std::isfinite(m.b_out) ||
      !m.in_offset.allFinite() || !m.in_scale.allFinite())
    fail(ErrorCode::InvalidModel, "non-finite perceptron parameter");
}

/// Uniform(-0.5, 0.5) / sqrt(fan-in) weights from a seeded 64-bit Mersenne
/// Twister; identity input scaling.
inline MlpModel make_mlp(std::size_t inputs, std::size_t hidden, std::uint64_t seed) {
  if (inputs < 1 || hidden < 1) fail(ErrorCode::InvalidArgument, "perceptron needs inputs and hidden units");
  std::mt19937_64 rng(seed);
  auto uniform = [&](double fan_in) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return (u - 0.5) / std::sqrt(fan_in);
  };
  const auto h = static_cast<Eigen::Index>(hidden), d = static_cast<Eigen::Index>(inputs);
  MlpModel m;
  m.w_hidden.resize(h, d);
  m.b_hidden.resize(h);
  m.w_out.resize(h);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m.w_hidden(i, j) = uniform(static_cast<double>(d));
    m.b_hidden(i) = uniform(static_cast<double>(d));
  }
  for (Eigen::Index i = 0; i < h; ++i) m.w_out(i) = uniform(static_cast<double>(h));
  m.b_out = uniform(static_cast<double>(h));
  m.in_offset = Eigen::VectorXd::Zero(d);
  m.in_scale = Eigen::VectorXd::Ones(d);
  return m;
}

/// Sets the input scaling so the columns of `inputs` span [-1, 1].
inline void fit_input_scaling(MlpModel& m, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != m.w_hidden.cols()) fail(ErrorCode::DimensionMismatch, "input width differs from perceptron");
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    const double lo = inputs.col(j).minCoeff(), hi = inputs.col(j).maxCoeff();
    m.in_offset(j) = 0.5 * (lo + hi);
    m.in_scale(j) = hi > lo ? 2.0 / (hi - lo) : 1.0;
  }
}

inline double mlp_forward(const MlpModel& m, std::span<const double> x) {
  if (x.size() != m.inputs())
    fail(ErrorCode::DimensionMismatch, "expected " + std::to_string(m.inputs()) + " inputs");
  Eigen::VectorXd s(static_cast<Eigen::Index>(x.size()));
  for (Eigen::Index j = 0; j < s.size(); ++j) s(j) = (x[static_cast<std::size_t>(j)] - m.in_offset(j)) * m.in_scale(j);
  const Eigen::VectorXd a = (m.w_hidden * s + m.b_hidden).array().tanh().matrix();
  return m.w_out.dot(a) + m.b_out;
}

inline Eigen::VectorXd mlp_forward_batch(const MlpModel& m, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != m.inputs())
    fail(ErrorCode::DimensionMismatch, "input width differs from perceptron");
  const Eigen::MatrixXd s = (inputs.rowwise() - m.in_offset.transpose()).array().rowwise() * m.in_scale.transpose().array();
  const Eigen::MatrixXd a = ((s * m.w_hidden.transpose()).rowwise() + m.b_hidden.transpose()).array().tanh().matrix();
  return (a * m.w_out).array() + m.b_out;
}

/// Layout: W_h row-major, b_h, w_out, b_out.
inline Eigen::VectorXd mlp_params(const MlpModel& m) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(m.param_count()));
  Eigen::Index p = 0;
  for (Eigen::Index i = 0; i < m.w_hidden.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w_hidden.cols(); ++j) t(p++) = m.w_hidden(i, j);
  for (Eigen::Index i = 0; i < m.b_hidden.size(); ++i) t(p++) = m.b_hidden(i);
  for (Eigen::Index i = 0; i < m.w_out.size(); ++i) t(p++) = m.w_out(i);
  t(p) = m.b_out;
  return t;
}

inline void set_mlp_params(MlpModel& m, const Eigen::VectorXd& t) {
  Eigen::Index p = 0;
  for (Eigen::Index i = 0; i < m.w_hidden.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w_hidden.cols(); ++j) m.w_hidden(i, j) = t(p++);
  for (Eigen::Index i = 0; i < m.b_hidden.size(); ++i) m.b_hidden(i) = t(p++);
  for (Eigen::Index i = 0; i < m.w_out.size(); ++i) m.w_out(i) = t(p++);
  m.b_out = t(p);
}

/// d(y_k - t_k)/d theta, one row per sample, in the mlp_params layout.
inline Eigen::MatrixXd mlp_jacobian(const MlpModel& m, const Eigen::MatrixXd& inputs) {
  const auto h = m.w_hidden.rows(), d = m.w_hidden.cols();
  Eigen::MatrixXd jac(inputs.rows(), static_cast<Eigen::Index>(m.param_count()));
  for (Eigen::Index k = 0; k < inputs.rows(); ++k) {
    const Eigen::VectorXd s =
        (inputs.row(k).transpose() - m.in_offset).cwiseProduct(m.in_scale);
    const Eigen::VectorXd a = (m.w_hidden * s + m.b_hidden).array().tanh().matrix();
    Eigen::Index p = 0;
    for (Eigen::Index i = 0; i < h; ++i) {
      const double da = m.w_out(i) * (1.0 - a(i) * a(i));
      for (Eigen::Index j = 0; j < d; ++j) jac(k, p++) = da * s(j);
    }
    for (Eigen::Index i = 0; i < h; ++i) jac(k, p++) = m.w_out(i) * (1.0 - a(i) * a(i));
    for (Eigen::Index i = 0; i < h; ++i) jac(k, p++) = a(i);
    jac(k, p) = 1.0;
  }
  return jac;
}

/// Largest |analytic - central difference| / max(1, |analytic|) over the
/// residual Jacobian entries.
inline double mlp_jacobian_check(const MlpModel& m, const Eigen::MatrixXd& inputs, double h) {
  if (!(h > 0.0)) fail(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  const Eigen::MatrixXd analytic = mlp_jacobian(m, inputs);
  const Eigen::VectorXd theta = mlp_params(m);
  MlpModel probe = m;
  double worst = 0.0;
  for (Eigen::Index p = 0; p < theta.size(); ++p) {
    const double step = h * std::max(1.0, std::abs(theta(p)));
    Eigen::VectorXd t = theta;
    t(p) = theta(p) + step;
    set_mlp_params(probe, t);
    const Eigen::VectorXd up = mlp_forward_batch(probe, inputs);
    t(p) = theta(p) - step;
    set_mlp_params(probe, t);
    const Eigen::VectorXd down = mlp_forward_batch(probe, inputs);
    for (Eigen::Index k = 0; k < inputs.rows(); ++k) {
      const double numeric = (up(k) - down(k)) / (2.0 * step);
      worst = std::max(worst, std::abs(analytic(k, p) - numeric) / std::max(1.0, std::abs(analytic(k, p))));
    }
  }
  return worst;
}

struct LmConfig {
  std::size_t max_iter = 200;  // solve attempts, accepted or not
  double lambda0 = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double tol = 1e-12;          // relative SSE improvement that counts as converged
  double lambda_max = 1e10;
  double lambda_min = 1e-12;
};

/// Damped Gauss-Newton step: -(J'J + lambda I)^-1 J'r.
inline Eigen::VectorXd lm_step(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residual, double lambda) {
  Eigen::MatrixXd normal = jac.transpose() * jac;
  normal.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
    fail(ErrorCode::SingularNormalMatrix, "damped normal matrix is not positive definite");
  return ldlt.solve(-(jac.transpose() * residual));
}

struct MlpTrainResult {
  MlpModel model;
  TrainReport report;  // rmse after each accepted step (entry 0 = start), step = lambda
};

inline MlpTrainResult train_lm(const MlpModel& initial, const SupervisedSet& train, const LmConfig& config = {}) {
  validate(initial);
  if (train.rows() < 1) fail(ErrorCode::EmptyData, "empty training set");
  if (static_cast<std::size_t>(train.dims()) != initial.inputs())
    fail(ErrorCode::DimensionMismatch, "training width differs from perceptron");

  MlpTrainResult out{initial, {}};
  auto& report = out.report;
  const double n = static_cast<double>(train.rows());
  Eigen::VectorXd residual = mlp_forward_batch(out.model, train.inputs) - train.targets;
  double sse = residual.squaredNorm();
  double lambda = config.lambda0;
  report.rmse.push_back(std::sqrt(sse / n));
  report.step.push_back(lambda);
  report.stop = StopReason::EpochsExhausted;

  std::size_t attempts = 0;
  bool done = sse == 0.0;
  if (done) report.stop = StopReason::Converged;
  while (!done && attempts < config.max_iter) {
    const Eigen::MatrixXd jac = mlp_jacobian(out.model, train.inputs);
    const Eigen::VectorXd theta = mlp_params(out.model);
    for (;;) {
      ++attempts;
      MlpModel trial = out.model;
      set_mlp_params(trial, theta + lm_step(jac, residual, lambda));
      const Eigen::VectorXd r = mlp_forward_batch(trial, train.inputs) - train.targets;
      const double trial_sse = r.squaredNorm();
      if (std::isfinite(trial_sse) && trial_sse < sse) {
        const double improvement = (sse - trial_sse) / sse;
        out.model = std::move(trial);
        residual = r;
        sse = trial_sse;
        lambda = std::max(lambda / config.lambda_down, config.lambda_min);
        report.rmse.push_back(std::sqrt(sse / n));
        report.step.push_back(lambda);
        if (improvement < config.tol || sse == 0.0) {
          report.stop = StopReason::Converged;
          done = true;
        }
        break;
      }
      lambda *= config.lambda_up;
      if (lambda > config.lambda_max) {
        report.stop = StopReason::DampingOverflow;
        done = true;
        break;
      }
      if (attempts >= config.max_iter) break;
    }
  }
  report.epochs_run = attempts;
  report.best_epoch = report.rmse.size();
  out.model.metadata["training.method"] = "levenberg_marquardt";
  out.model.metadata["training.iterations"] = std::to_string(attempts);
  out.model.metadata["training.stop"] = std::string(to_string(report.stop));
  return out;
}

}  // namespace anfis
