#pragma once

// Initial rule bases: grid partition, subtractive clustering, fuzzy c-means.
// Clustering works in min-max normalized joint (inputs, target) space and
// reports centers in raw units.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "anfis/error.hpp"
#include "anfis/fuzzy_core.hpp"
#include "anfis/market_data.hpp"

namespace anfis {

enum class InductionMethod { Grid, Subtractive, Fcm };

constexpr std::string_view to_string(InductionMethod m) {
  switch (m) {
    case InductionMethod::Grid: return "grid";
    case InductionMethod::Subtractive: return "subtractive";
    case InductionMethod::Fcm: return "fcm";
  }
  return "?";
}

inline InductionMethod parse_induction_method(std::string_view s) {
  if (s == "grid") return InductionMethod::Grid;
  if (s == "subtractive") return InductionMethod::Subtractive;
  if (s == "fcm") return InductionMethod::Fcm;
  fail(ErrorCode::InvalidArgument, "unknown induction method '" + std::string(s) + "'");
}

struct SubtractiveParams {
  double radius = 0.5;  // normalized units
  double squash = 1.25;
  double accept_ratio = 0.5;
  double reject_ratio = 0.15;
};

struct FcmParams {
  std::size_t clusters = 10;
  double m = 2.0;
  double tol = 1e-5;
  std::size_t max_iter = 200;
  std::uint64_t seed = 0;
};

struct InductionConfig {
  InductionMethod method = InductionMethod::Grid;
  std::size_t grid_mfs_per_input = 3;
  std::size_t max_rules = 10000;
  SubtractiveParams subtractive;
  FcmParams fcm;
};

inline void validate(const InductionConfig& c) {
  if (c.grid_mfs_per_input < 2) fail(ErrorCode::InvalidArgument, "grid needs at least 2 MFs per input");
  const auto& s = c.subtractive;
  if (!(s.radius > 0.0 && s.radius <= 1.0)) fail(ErrorCode::InvalidArgument, "subtractive radius must be in (0,1]");
  if (!(s.squash > 0.0)) fail(ErrorCode::InvalidArgument, "squash factor must be positive");
  if (!(s.accept_ratio > s.reject_ratio && s.reject_ratio >= 0.0))
    fail(ErrorCode::InvalidArgument, "need accept_ratio > reject_ratio >= 0");
  if (c.fcm.clusters < 1) fail(ErrorCode::InvalidArgument, "fcm needs at least one cluster");
  if (!(c.fcm.m > 1.0)) fail(ErrorCode::InvalidArgument, "fcm fuzzifier must exceed 1");
  if (!(c.fcm.tol > 0.0)) fail(ErrorCode::InvalidArgument, "fcm tolerance must be positive");
}

/// Column-wise min-max map to [0,1]. Constant columns map to 0.
struct Normalizer {
  Eigen::RowVectorXd min;
  Eigen::RowVectorXd span;

  static Normalizer fit(const Eigen::MatrixXd& data) {
    Normalizer n;
    n.min = data.colwise().minCoeff();
    n.span = data.colwise().maxCoeff() - n.min;
    for (Eigen::Index j = 0; j < n.span.size(); ++j)
      if (n.span(j) <= 0.0) n.span(j) = 1.0;
    return n;
  }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& data) const {
    return (data.rowwise() - min).array().rowwise() / span.array();
  }
  Eigen::MatrixXd invert(const Eigen::MatrixXd& data) const {
    return (data.array().rowwise() * span.array()).matrix().rowwise() + min;
  }
};

/// Inputs and target side by side, N x (d + 1).
inline Eigen::MatrixXd joint_data(const SupervisedSet& set) {
  Eigen::MatrixXd joint(set.rows(), set.dims() + 1);
  joint << set.inputs, set.targets;
  return joint;
}

namespace detail {

inline std::vector<double> column_spans(const SupervisedSet& train) {
  std::vector<double> spans;
  for (const auto& r : minmax_stats(train).inputs) spans.push_back(r.span());
  for (std::size_t j = 0; j < spans.size(); ++j)
    if (!(spans[j] > 0.0))
      fail(ErrorCode::DegenerateRange, "input column " + std::to_string(j) + " is constant", j);
  return spans;
}

inline void name_inputs(AnfisModel& model, const SupervisedSet& train) {
  model.input_names = train.input_names;
  if (model.input_names.size() != model.inputs()) {
    model.input_names.clear();
    for (std::size_t j = 0; j < model.inputs(); ++j) model.input_names.push_back("x" + std::to_string(j));
  }
}

}  // namespace detail

/// Evenly spaced Gaussians per input and one rule per combination; the
/// first input varies slowest. Consequents start at zero.
inline AnfisModel grid_partition(const SupervisedSet& train, std::size_t mfs_per_input,
                                 std::size_t max_rules = 10000) {
  if (mfs_per_input < 2) fail(ErrorCode::InvalidArgument, "grid needs at least 2 MFs per input");
  if (train.rows() < 1) fail(ErrorCode::EmptyData, "empty training set");
  const auto stats = minmax_stats(train);
  const auto spans = detail::column_spans(train);
  const std::size_t d = spans.size();

  double count = 1.0;
  for (std::size_t j = 0; j < d; ++j) count *= static_cast<double>(mfs_per_input);
  if (count > static_cast<double>(max_rules))
    fail(ErrorCode::RuleExplosion, fmt::format("{} rules exceed the cap of {}", count, max_rules));

  AnfisModel model;
  const double half_max_width = 2.0 * std::sqrt(2.0 * std::log(2.0));
  for (std::size_t j = 0; j < d; ++j) {
    const double spacing = spans[j] / static_cast<double>(mfs_per_input - 1);
    std::vector<GaussianMf> pool;
    for (std::size_t m = 0; m < mfs_per_input; ++m)
      pool.push_back({stats.inputs[j].min + spacing * static_cast<double>(m), spacing / half_max_width});
    pool.back().center = stats.inputs[j].max;
    model.mf_pools.push_back(std::move(pool));
  }

  std::vector<std::size_t> index(d, 0);
  for (std::size_t r = 0; r < static_cast<std::size_t>(count); ++r) {
    model.rules.push_back({index, std::vector<double>(d + 1, 0.0)});
    for (std::size_t j = d; j-- > 0;) {
      if (++index[j] < mfs_per_input) break;
      index[j] = 0;
    }
  }
  detail::name_inputs(model, train);
  return model;
}

struct SubtractiveResult {
  Eigen::MatrixXd centers;             // raw units, one row per center
  std::vector<std::size_t> indices;    // data row of each center
  Eigen::VectorXd initial_potential;   // before any suppression
};

/// Greedy potential-based center selection (Chiu's method).
inline SubtractiveResult subtractive_cluster(const Eigen::MatrixXd& data, const SubtractiveParams& params = {}) {
  if (data.rows() < 1 || data.cols() < 1) fail(ErrorCode::EmptyData, "subtractive clustering needs data");
  const auto norm = Normalizer::fit(data);
  const Eigen::MatrixXd z = norm.apply(data);
  const Eigen::Index n = z.rows();
  const double alpha = 4.0 / (params.radius * params.radius);
  const double rb = params.squash * params.radius;
  const double beta = 4.0 / (rb * rb);

  auto dist2 = [&](Eigen::Index a, Eigen::Index b) { return (z.row(a) - z.row(b)).squaredNorm(); };

  Eigen::VectorXd potential = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) potential(i) += std::exp(-alpha * dist2(i, j));

  SubtractiveResult result;
  result.initial_potential = potential;

  auto argmax = [&] {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (potential(i) > potential(best)) best = i;
    return best;
  };
  auto accept = [&](Eigen::Index k) {
    result.indices.push_back(static_cast<std::size_t>(k));
    const double pk = potential(k);
    for (Eigen::Index i = 0; i < n; ++i) potential(i) -= pk * std::exp(-beta * dist2(i, k));
    potential(k) = 0.0;
  };

  const Eigen::Index first = argmax();
  const double p1 = potential(first);
  accept(first);

  while (static_cast<Eigen::Index>(result.indices.size()) < n) {
    const Eigen::Index k = argmax();
    const double pk = potential(k);
    if (!(pk > 0.0) || pk < params.reject_ratio * p1) break;
    if (pk > params.accept_ratio * p1) {
      accept(k);
      continue;
    }
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t c : result.indices)
      dmin = std::min(dmin, std::sqrt(dist2(k, static_cast<Eigen::Index>(c))));
    if (dmin / params.radius + pk / p1 >= 1.0)
      accept(k);
    else
      potential(k) = 0.0;
  }

  result.centers.resize(static_cast<Eigen::Index>(result.indices.size()), data.cols());
  for (std::size_t c = 0; c < result.indices.size(); ++c)
    result.centers.row(static_cast<Eigen::Index>(c)) = data.row(static_cast<Eigen::Index>(result.indices[c]));
  return result;
}

struct FcmResult {
  Eigen::MatrixXd centers;      // c x p, raw units
  Eigen::MatrixXd memberships;  // c x N, columns sum to 1
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
};

/// Membership update for fixed centers (rows of `centers`, same space as
/// `data`). A point sitting exactly on a center belongs wholly to the
/// lowest-index such center.
inline Eigen::MatrixXd fcm_memberships(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centers, double m) {
  const Eigen::Index n = data.rows(), c = centers.rows();
  const double exponent = 1.0 / (m - 1.0);
  Eigen::MatrixXd u(c, n);
  Eigen::VectorXd d2(c);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index hit = -1;
    for (Eigen::Index i = 0; i < c; ++i) {
      d2(i) = (data.row(k) - centers.row(i)).squaredNorm();
      if (hit < 0 && d2(i) == 0.0) hit = i;
    }
    if (hit >= 0) {
      u.col(k).setZero();
      u(hit, k) = 1.0;
      continue;
    }
    // u_ik = 1 / sum_j (d_ik / d_jk)^(2/(m-1)) written with squared distances
    for (Eigen::Index i = 0; i < c; ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < c; ++j) s += std::pow(d2(i) / d2(j), exponent);
      u(i, k) = 1.0 / s;
    }
  }
  return u;
}

inline double fcm_objective(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centers,
                            const Eigen::MatrixXd& u, double m) {
  double j = 0.0;
  for (Eigen::Index i = 0; i < centers.rows(); ++i)
    for (Eigen::Index k = 0; k < data.rows(); ++k)
      j += std::pow(u(i, k), m) * (data.row(k) - centers.row(i)).squaredNorm();
  return j;
}

namespace detail {

/// c seeded starting rows, distinct by value whenever the data allows.
inline std::vector<Eigen::Index> pick_initial_rows(const Eigen::MatrixXd& data, std::size_t c, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(data.rows());
  std::vector<Eigen::Index> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<Eigen::Index>(i);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(order[i], order[j]);
  }
  std::vector<Eigen::Index> chosen, repeats;
  for (Eigen::Index row : order) {
    if (chosen.size() == c) break;
    bool duplicate = false;
    for (Eigen::Index prev : chosen)
      if (data.row(prev) == data.row(row)) {
        duplicate = true;
        break;
      }
    (duplicate ? repeats : chosen).push_back(row);
  }
  for (std::size_t i = 0; chosen.size() < c; ++i) chosen.push_back(repeats[i]);
  return chosen;
}

}  // namespace detail

/// Fuzzy c-means by alternating membership and center updates until the
/// largest center move (normalized units) drops below `tol`.
inline FcmResult fcm(const Eigen::MatrixXd& data, const FcmParams& params) {
  if (data.rows() < 1) fail(ErrorCode::EmptyData, "fcm needs data");
  if (params.clusters < 1) fail(ErrorCode::InvalidArgument, "fcm needs at least one cluster");
  if (params.clusters > static_cast<std::size_t>(data.rows()))
    fail(ErrorCode::TooManyClusters, fmt::format("{} clusters for {} points", params.clusters, data.rows()));
  if (!(params.m > 1.0)) fail(ErrorCode::InvalidArgument, "fcm fuzzifier must exceed 1");

  const auto norm = Normalizer::fit(data);
  const Eigen::MatrixXd z = norm.apply(data);
  const auto c = static_cast<Eigen::Index>(params.clusters);

  Eigen::MatrixXd v(c, z.cols());
  const auto rows = detail::pick_initial_rows(z, params.clusters, params.seed);
  for (Eigen::Index i = 0; i < c; ++i) v.row(i) = z.row(rows[static_cast<std::size_t>(i)]);

  FcmResult result;
  for (std::size_t it = 0; it < params.max_iter; ++it) {
    const Eigen::MatrixXd u = fcm_memberships(z, v, params.m);
    const Eigen::MatrixXd um = u.array().pow(params.m);
    Eigen::MatrixXd next = um * z;
    for (Eigen::Index i = 0; i < c; ++i) next.row(i) /= um.row(i).sum();
    const double shift = (next - v).rowwise().norm().maxCoeff();
    v = next;
    result.objective_trace.push_back(fcm_objective(z, v, u, params.m));
    result.iterations = it + 1;
    if (shift < params.tol) break;
  }
  result.memberships = fcm_memberships(z, v, params.m);
  result.centers = norm.invert(v);
  return result;
}

/// One rule per cluster, one Gaussian per rule and input. `centers` and
/// `sigmas` are c x d (target coordinate already dropped).
inline AnfisModel model_from_clusters(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& sigmas,
                                      const SupervisedSet& train) {
  if (centers.rows() < 1) fail(ErrorCode::InvalidArgument, "need at least one cluster");
  if (centers.cols() != train.dims() || sigmas.rows() != centers.rows() || sigmas.cols() != centers.cols())
    fail(ErrorCode::DimensionMismatch, "cluster matrices do not match the input dimension");
  const auto spans = detail::column_spans(train);
  const auto c = static_cast<std::size_t>(centers.rows());
  const auto d = static_cast<std::size_t>(centers.cols());

  AnfisModel model;
  model.mf_pools.assign(d, {});
  for (std::size_t j = 0; j < d; ++j) {
    const double floor = kSigmaFloorRatio * spans[j];
    for (std::size_t i = 0; i < c; ++i) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      model.mf_pools[j].push_back({centers(ii, jj), std::max(sigmas(ii, jj), floor)});
    }
  }
  for (std::size_t i = 0; i < c; ++i)
    model.rules.push_back({std::vector<std::size_t>(d, i), std::vector<double>(d + 1, 0.0)});
  detail::name_inputs(model, train);
  return model;
}

/// Subtractive clusters to rules; sigma = radius * column range / sqrt(8).
inline AnfisModel model_from_subtractive(const Eigen::MatrixXd& joint_centers, const SupervisedSet& train,
                                         double radius) {
  const auto spans = detail::column_spans(train);
  const Eigen::Index d = train.dims();
  Eigen::MatrixXd sigmas(joint_centers.rows(), d);
  for (Eigen::Index j = 0; j < d; ++j)
    sigmas.col(j).setConstant(radius * spans[static_cast<std::size_t>(j)] / std::sqrt(8.0));
  return model_from_clusters(joint_centers.leftCols(d), sigmas, train);
}

/// FCM clusters to rules; sigma is the membership-weighted standard
/// deviation sqrt(sum_k u^m (x_k - v)^2 / sum_k u^m) per input.
inline AnfisModel model_from_fcm(const FcmResult& result, const SupervisedSet& train, double m) {
  const Eigen::Index d = train.dims();
  if (result.memberships.cols() != train.rows())
    fail(ErrorCode::DimensionMismatch, "memberships do not cover the training rows");
  const Eigen::MatrixXd um = result.memberships.array().pow(m);
  Eigen::MatrixXd sigmas(result.centers.rows(), d);
  for (Eigen::Index i = 0; i < result.centers.rows(); ++i) {
    const double weight = um.row(i).sum();
    for (Eigen::Index j = 0; j < d; ++j) {
      const Eigen::ArrayXd dev = train.inputs.col(j).array() - result.centers(i, j);
      sigmas(i, j) = std::sqrt((um.row(i).transpose().array() * dev.square()).sum() / weight);
    }
  }
  return model_from_clusters(result.centers.leftCols(d), sigmas, train);
}

/// Builds the initial model for `train` with the configured method and
/// records the induction settings in the model metadata.
inline AnfisModel induce(const SupervisedSet& train, const InductionConfig& config) {
  validate(config);
  AnfisModel model;
  switch (config.method) {
    case InductionMethod::Grid:
      model = grid_partition(train, config.grid_mfs_per_input, config.max_rules);
      model.metadata["induction.mfs_per_input"] = std::to_string(config.grid_mfs_per_input);
      break;
    case InductionMethod::Subtractive: {
      detail::column_spans(train);
      const auto sc = subtractive_cluster(joint_data(train), config.subtractive);
      model = model_from_subtractive(sc.centers, train, config.subtractive.radius);
      model.metadata["induction.radius"] = fmt::format("{}", config.subtractive.radius);
      model.metadata["induction.squash"] = fmt::format("{}", config.subtractive.squash);
      model.metadata["induction.accept_ratio"] = fmt::format("{}", config.subtractive.accept_ratio);
      model.metadata["induction.reject_ratio"] = fmt::format("{}", config.subtractive.reject_ratio);
      break;
    }
    case InductionMethod::Fcm: {
      detail::column_spans(train);
      const auto result = fcm(joint_data(train), config.fcm);
      model = model_from_fcm(result, train, config.fcm.m);
      model.metadata["induction.clusters"] = std::to_string(config.fcm.clusters);
      model.metadata["induction.m"] = fmt::format("{}", config.fcm.m);
      model.metadata["induction.tol"] = fmt::format("{}", config.fcm.tol);
      model.metadata["induction.max_iter"] = std::to_string(config.fcm.max_iter);
      model.metadata["induction.seed"] = std::to_string(config.fcm.seed);
      model.metadata["induction.iterations"] = std::to_string(result.iterations);
      break;
    }
  }
  model.metadata["induction.method"] = std::string(to_string(config.method));
  model.metadata["induction.rules"] = std::to_string(model.rule_count());
  return model;
}

/// Per rule, how many rows fire it more strongly than any other rule
/// (ties to the lowest index).
inline std::vector<std::size_t> hard_assignment_counts(const AnfisModel& model, const Eigen::MatrixXd& inputs) {
  std::vector<std::size_t> counts(model.rule_count(), 0);
  std::vector<double> x(static_cast<std::size_t>(inputs.cols()));
  for (Eigen::Index k = 0; k < inputs.rows(); ++k) {
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) x[static_cast<std::size_t>(j)] = inputs(k, j);
    const auto w = fire_rules(model, x);
    ++counts[static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin())];
  }
  return counts;
}

}  // namespace anfis
