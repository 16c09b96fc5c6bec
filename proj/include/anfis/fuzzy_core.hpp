#pragma once

// Sugeno-type ANFIS: Gaussian premises, product AND, linear consequents,
// weighted-average defuzzification.
//
// Layer 1  membership degrees mu(x_j) for every pool entry
// Layer 2  firing strength w_i = prod_j mu_{j, a_ij}(x_j)
// Layer 3  normalized strength wbar_i = w_i / sum w
// Layer 4  wbar_i * f_i with f_i = p_i . x + r_i
// Layer 5  y = sum_i wbar_i * f_i

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anfis/error.hpp"

namespace anfis {

/// Firing sums below this raise ZeroFiring instead of dividing.
inline constexpr double kZeroFiringFloor = 1e-300;
/// Sigmas below this fraction of the input range are treated as invalid.
inline constexpr double kSigmaFloorRatio = 1e-9;

struct GaussianMf {
  double center = 0.0;
  double sigma = 1.0;
};

inline double mf_eval(const GaussianMf& mf, double x) {
  const double z = (x - mf.center) / mf.sigma;
  return std::exp(-0.5 * z * z);
}

struct Rule {
  std::vector<std::size_t> antecedent;  // one pool index per input
  std::vector<double> consequent;       // p_1..p_d, r
};

using Metadata = std::map<std::string, std::string>;

struct AnfisModel {
  std::vector<std::string> input_names;
  std::vector<std::vector<GaussianMf>> mf_pools;  // one pool per input
  std::vector<Rule> rules;
  Metadata metadata;

  std::size_t inputs() const { return mf_pools.size(); }
  std::size_t rule_count() const { return rules.size(); }
};

inline void validate(const AnfisModel& model) {
  const std::size_t d = model.inputs();
  if (d == 0) fail(ErrorCode::InvalidModel, "model has no inputs");
  if (model.rules.empty()) fail(ErrorCode::InvalidModel, "model has no rules");
  if (!model.input_names.empty() && model.input_names.size() != d)
    fail(ErrorCode::InvalidModel, "input name count differs from pool count");
  for (const auto& pool : model.mf_pools) {
    if (pool.empty()) fail(ErrorCode::InvalidModel, "empty membership pool");
    for (const auto& mf : pool)
      if (!std::isfinite(mf.center) || !std::isfinite(mf.sigma) || !(mf.sigma > 0.0))
        fail(ErrorCode::InvalidModel, "membership function needs finite center and sigma > 0");
  }
  for (std::size_t i = 0; i < model.rules.size(); ++i) {
    const auto& rule = model.rules[i];
    if (rule.antecedent.size() != d || rule.consequent.size() != d + 1)
      fail(ErrorCode::InvalidModel, "rule shape does not match input count", i);
    for (std::size_t j = 0; j < d; ++j)
      if (rule.antecedent[j] >= model.mf_pools[j].size())
        fail(ErrorCode::InvalidModel, "antecedent index out of range", i);
    for (double c : rule.consequent)
      if (!std::isfinite(c)) fail(ErrorCode::InvalidModel, "non-finite consequent", i);
  }
}

namespace detail {
inline void check_dims(const AnfisModel& model, std::span<const double> x) {
  if (x.size() != model.inputs())
    fail(ErrorCode::DimensionMismatch, "expected " + std::to_string(model.inputs()) + " inputs, got " +
                                           std::to_string(x.size()));
}
}  // namespace detail

inline std::vector<std::vector<double>> memberships(const AnfisModel& model, std::span<const double> x) {
  detail::check_dims(model, x);
  std::vector<std::vector<double>> mu(model.inputs());
  for (std::size_t j = 0; j < model.inputs(); ++j) {
    mu[j].reserve(model.mf_pools[j].size());
    for (const auto& mf : model.mf_pools[j]) mu[j].push_back(mf_eval(mf, x[j]));
  }
  return mu;
}

namespace detail {
inline std::vector<double> fire_from(const AnfisModel& model, const std::vector<std::vector<double>>& mu) {
  std::vector<double> w;
  w.reserve(model.rules.size());
  for (const auto& rule : model.rules) {
    double p = 1.0;
    for (std::size_t j = 0; j < rule.antecedent.size(); ++j) p *= mu[j][rule.antecedent[j]];
    w.push_back(p);
  }
  return w;
}
}  // namespace detail

inline std::vector<double> fire_rules(const AnfisModel& model, std::span<const double> x) {
  return detail::fire_from(model, memberships(model, x));
}

inline std::vector<double> normalize(std::span<const double> w) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) fail(ErrorCode::InvalidArgument, "firing strengths must be non-negative");
    sum += v;
  }
  if (!(sum >= kZeroFiringFloor)) fail(ErrorCode::ZeroFiring, "total firing strength underflows");
  std::vector<double> out(w.begin(), w.end());
  for (double& v : out) v /= sum;
  return out;
}

inline double rule_output(const Rule& rule, std::span<const double> x) {
  if (rule.consequent.size() != x.size() + 1)
    fail(ErrorCode::DimensionMismatch, "consequent length must be input count + 1");
  double f = rule.consequent.back();
  for (std::size_t j = 0; j < x.size(); ++j) f += rule.consequent[j] * x[j];
  return f;
}

struct ForwardTrace {
  std::vector<std::vector<double>> memberships;  // layer 1, per input per pool entry
  std::vector<double> firing;                    // layer 2
  std::vector<double> normalized;                // layer 3
  std::vector<double> rule_outputs;              // f_i
  std::vector<double> weighted;                  // layer 4
  double output = 0.0;                           // layer 5
};

inline ForwardTrace forward(const AnfisModel& model, std::span<const double> x) {
  ForwardTrace t;
  t.memberships = memberships(model, x);
  t.firing = detail::fire_from(model, t.memberships);
  t.normalized = normalize(t.firing);
  t.rule_outputs.reserve(model.rules.size());
  t.weighted.reserve(model.rules.size());
  for (std::size_t i = 0; i < model.rules.size(); ++i) {
    t.rule_outputs.push_back(rule_output(model.rules[i], x));
    t.weighted.push_back(t.normalized[i] * t.rule_outputs[i]);
  }
  for (double v : t.weighted) t.output += v;
  return t;
}

inline double predict(const AnfisModel& model, std::span<const double> x) { return forward(model, x).output; }

/// Row-wise forward pass. ZeroFiring errors carry the offending row index.
inline Eigen::VectorXd forward_batch(const AnfisModel& model, const Eigen::MatrixXd& inputs) {
  Eigen::VectorXd out(inputs.rows());
  std::vector<double> x(static_cast<std::size_t>(inputs.cols()));
  for (Eigen::Index k = 0; k < inputs.rows(); ++k) {
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) x[static_cast<std::size_t>(j)] = inputs(k, j);
    try {
      out(k) = predict(model, x);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroFiring) throw;
      fail(ErrorCode::ZeroFiring, "row " + std::to_string(k) + " fires no rule", static_cast<std::size_t>(k));
    }
  }
  return out;
}

}  // namespace anfis
