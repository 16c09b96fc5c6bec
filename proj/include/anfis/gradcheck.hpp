#pragma once

// Randomized finite-difference validation of the analytic derivatives:
// ANFIS premise gradient, ANFIS full gradient and the perceptron Jacobian.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "anfis/ann_baseline.hpp"
#include "anfis/fuzzy_core.hpp"
#include "anfis/market_data.hpp"
#include "anfis/training.hpp"

namespace anfis {

struct GradcheckCase {
  AnfisModel model;
  SupervisedSet batch;
  MlpModel mlp;
};

struct GradcheckReport {
  std::size_t cases = 0;
  double max_premise_error = 0.0;
  double max_full_error = 0.0;
  double max_jacobian_error = 0.0;

  double max_error() const { return std::max({max_premise_error, max_full_error, max_jacobian_error}); }
};

/// Random model/batch pair: 1-3 inputs, 1-20 rules over pools of 1-4
/// Gaussians per input, centers and inputs in [-1, 1], sigma in [0.3, 1.5].
inline GradcheckCase random_gradcheck_case(std::mt19937_64& rng, std::size_t batch_rows = 12) {
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53); };
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng() % (hi - lo + 1)); };

  GradcheckCase c;
  const std::size_t d = pick(1, 3);
  const std::size_t rules = pick(1, 20);
  c.model.mf_pools.resize(d);
  for (auto& pool : c.model.mf_pools) {
    const std::size_t size = pick(1, 4);
    for (std::size_t m = 0; m < size; ++m) pool.push_back({uniform(-1.0, 1.0), uniform(0.3, 1.5)});
  }
  for (std::size_t i = 0; i < rules; ++i) {
    Rule r;
    for (std::size_t j = 0; j < d; ++j) r.antecedent.push_back(pick(0, c.model.mf_pools[j].size() - 1));
    for (std::size_t j = 0; j <= d; ++j) r.consequent.push_back(uniform(-2.0, 2.0));
    c.model.rules.push_back(std::move(r));
  }

  const auto n = static_cast<Eigen::Index>(batch_rows);
  c.batch.inputs.resize(n, static_cast<Eigen::Index>(d));
  c.batch.targets.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) c.batch.inputs(k, j) = uniform(-1.0, 1.0);
    c.batch.targets(k) = uniform(-2.0, 2.0);
  }

  c.mlp = make_mlp(d, pick(1, 10), rng());
  for (Eigen::Index i = 0; i < c.mlp.w_hidden.size(); ++i) c.mlp.w_hidden.data()[i] = uniform(-1.5, 1.5);
  for (Eigen::Index i = 0; i < c.mlp.w_out.size(); ++i) c.mlp.w_out(i) = uniform(-1.5, 1.5);
  fit_input_scaling(c.mlp, c.batch.inputs);
  return c;
}

inline GradcheckReport run_gradient_suite(std::size_t cases, std::uint64_t seed, double h = 1e-6) {
  std::mt19937_64 rng(seed);
  GradcheckReport report;
  for (std::size_t i = 0; i < cases; ++i) {
    const auto c = random_gradcheck_case(rng);
    report.max_premise_error = std::max(report.max_premise_error, finite_diff_check_premises(c.model, c.batch, h));
    report.max_full_error = std::max(report.max_full_error, finite_diff_check(c.model, c.batch, h));
    report.max_jacobian_error = std::max(report.max_jacobian_error, mlp_jacobian_check(c.mlp, c.batch.inputs, h));
    ++report.cases;
  }
  return report;
}

}  // namespace anfis
