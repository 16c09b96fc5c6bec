#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>

#include "anfis/error.hpp"

namespace anfis {

enum class RelativeTo { Predicted, Actual };

constexpr std::string_view to_string(RelativeTo r) {
  return r == RelativeTo::Predicted ? "predicted" : "actual";
}

namespace detail {
inline void check_record(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.empty()) fail(ErrorCode::EmptyRecord, "no predictions to score");
  if (actual.size() != predicted.size())
    fail(ErrorCode::LengthMismatch, "actual and predicted lengths differ");
}
}  // namespace detail

/// sqrt(mean((d - z)^2))
inline double rmse(std::span<const double> actual, std::span<const double> predicted) {
  detail::check_record(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - predicted[i];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

/// sqrt(mean(((d - z) / den)^2)). The default denominator is the predicted
/// value z, which is the formula as usually printed; `RelativeTo::Actual`
/// divides by d instead.
inline double rmsre(std::span<const double> actual, std::span<const double> predicted,
                    RelativeTo denominator = RelativeTo::Predicted) {
  detail::check_record(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double den = denominator == RelativeTo::Predicted ? predicted[i] : actual[i];
    if (den == 0.0) fail(ErrorCode::ZeroDenominator, "relative error denominator is zero", i);
    const double e = (actual[i] - predicted[i]) / den;
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

}  // namespace anfis
