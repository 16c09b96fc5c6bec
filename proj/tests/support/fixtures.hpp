#pragma once

// Shared builders for the test suites: hand-made teacher models, synthetic
// data sets and scratch directories.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anfis/anfis.hpp"

namespace anfis::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// 2-input, 2-rule Sugeno model with distinct premises per rule.
inline AnfisModel two_rule_teacher() {
  AnfisModel m;
  m.input_names = {"x1", "x2"};
  m.mf_pools = {{{-0.5, 0.6}, {0.5, 0.7}}, {{-0.4, 0.8}, {0.6, 0.5}}};
  m.rules = {{{0, 0}, {1.5, -0.5, 0.25}}, {{1, 1}, {-0.75, 2.0, 1.0}}};
  return m;
}

/// Rows drawn uniformly from [-1, 1]^d, targets from `teacher` plus
/// Gaussian noise.
inline SupervisedSet teacher_data(const AnfisModel& teacher, std::size_t rows, std::uint64_t seed,
                                  double noise = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(teacher.inputs());
  SupervisedSet set;
  set.input_names = teacher.input_names;
  set.target_name = "y";
  set.inputs.resize(static_cast<Eigen::Index>(rows), d);
  for (Eigen::Index k = 0; k < set.inputs.rows(); ++k)
    for (Eigen::Index j = 0; j < d; ++j) set.inputs(k, j) = uniform(rng, -1.0, 1.0);
  set.targets = forward_batch(teacher, set.inputs);
  if (noise > 0.0)
    for (Eigen::Index k = 0; k < set.targets.size(); ++k) set.targets(k) += noise * gauss(rng);
  for (std::size_t k = 0; k < rows; ++k) set.dates.push_back(Date{std::chrono::days{static_cast<int>(k)}});
  return set;
}

/// Same premises as `model`, all consequents zero.
inline AnfisModel zero_consequents(AnfisModel model) {
  for (auto& r : model.rules) std::fill(r.consequent.begin(), r.consequent.end(), 0.0);
  return model;
}

/// One-rule model computing x_j (the identity on input j).
inline AnfisModel identity_model(std::size_t inputs, std::size_t j) {
  AnfisModel m;
  for (std::size_t i = 0; i < inputs; ++i) {
    m.input_names.push_back("x" + std::to_string(i));
    m.mf_pools.push_back({{0.0, 1e6}});
  }
  Rule r{std::vector<std::size_t>(inputs, 0), std::vector<double>(inputs + 1, 0.0)};
  r.consequent[j] = 1.0;
  m.rules.push_back(r);
  return m;
}

/// One-rule model computing p . x + r.
inline AnfisModel affine_model(std::vector<double> consequent) {
  const std::size_t d = consequent.size() - 1;
  AnfisModel m;
  for (std::size_t i = 0; i < d; ++i) {
    m.input_names.push_back("x" + std::to_string(i));
    m.mf_pools.push_back({{0.0, 1e6}});
  }
  m.rules.push_back({std::vector<std::size_t>(d, 0), std::move(consequent)});
  return m;
}

inline SupervisedSet from_matrix(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) {
  SupervisedSet set;
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) set.input_names.push_back("x" + std::to_string(j));
  set.target_name = "y";
  set.inputs = inputs;
  set.targets = targets;
  for (Eigen::Index k = 0; k < inputs.rows(); ++k) set.dates.push_back(Date{std::chrono::days{static_cast<int>(k)}});
  return set;
}

/// Two isotropic blobs of `per_blob` points each, in 2-D.
inline Eigen::MatrixXd two_blobs(std::size_t per_blob, Eigen::Vector2d a, Eigen::Vector2d b, double spread,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, spread);
  Eigen::MatrixXd data(static_cast<Eigen::Index>(2 * per_blob), 2);
  for (std::size_t k = 0; k < 2 * per_blob; ++k) {
    const Eigen::Vector2d& c = k < per_blob ? a : b;
    data(static_cast<Eigen::Index>(k), 0) = c(0) + gauss(rng);
    data(static_cast<Eigen::Index>(k), 1) = c(1) + gauss(rng);
  }
  return data;
}

/// Mackey-Glass lag embedding: inputs x(t-18), x(t-12), x(t-6), x(t),
/// target x(t+6), for `rows` consecutive t starting at `start`.
inline SupervisedSet mackey_glass_set(const std::vector<double>& x, std::size_t start, std::size_t rows) {
  Eigen::MatrixXd in(static_cast<Eigen::Index>(rows), 4);
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows));
  for (std::size_t k = 0; k < rows; ++k) {
    const std::size_t t = start + k;
    const auto r = static_cast<Eigen::Index>(k);
    in(r, 0) = x[t - 18];
    in(r, 1) = x[t - 12];
    in(r, 2) = x[t - 6];
    in(r, 3) = x[t];
    out(r) = x[t + 6];
  }
  return from_matrix(in, out);
}

/// A fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("anfis_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Daily price and dominance candles with a smooth, learnable pattern.
inline void write_market_csvs(const std::filesystem::path& dir, std::size_t days) {
  std::string price = "date,open,close\n", dom = "time,close\n";
  double p = 10000.0, q = 60.0;
  const Date start = *parse_date("2020-01-01");
  for (std::size_t i = 0; i < days; ++i) {
    const double t = static_cast<double>(i);
    p *= 1.0 + 0.01 * std::sin(t / 9.0) + 0.004 * std::cos(t / 3.7);
    q += 0.2 * std::sin(t / 13.0);
    const std::string date = format_date(start + std::chrono::days{static_cast<int>(i)});
    price += date + "," + std::to_string(p) + "," + std::to_string(p) + "\n";
    dom += date + "," + std::to_string(q) + "\n";
  }
  write_text(dir / "btc.csv", price);
  write_text(dir / "btcd.csv", dom);
}

}  // namespace anfis::testing
