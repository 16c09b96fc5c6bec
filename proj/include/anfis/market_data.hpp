#pragma once

// Daily signal loading, calendar alignment and supervised-set assembly.
//
// CSV dialect: comma separated, one header row, UTF-8, '.' decimal
// separator, dates in ISO YYYY-MM-DD. Quoted fields are not supported.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "anfis/error.hpp"

namespace anfis {

using Date = std::chrono::sys_days;

inline std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto number = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc{} || ptr != text.data() + pos + len) return std::nullopt;
    return v;
  };
  auto y = number(0, 4), m = number(5, 2), d = number(8, 2);
  if (!y || !m || !d) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{*y},
                                  std::chrono::month{static_cast<unsigned>(*m)},
                                  std::chrono::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

inline std::string format_date(Date date) {
  std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// One daily signal (close price or dominance percentage).
struct TimeSeries {
  std::string name;
  std::vector<Date> dates;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Throws unless dates are strictly increasing, values finite and the two
/// vectors have equal, non-zero length.
inline void validate(const TimeSeries& s) {
  if (s.dates.size() != s.values.size())
    fail(ErrorCode::LengthMismatch, "series '" + s.name + "' has mismatched dates/values");
  if (s.values.empty()) fail(ErrorCode::EmptyData, "series '" + s.name + "' is empty");
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    if (!std::isfinite(s.values[i]))
      fail(ErrorCode::InvalidSeries, "series '" + s.name + "' has a non-finite value", i);
    if (i > 0 && s.dates[i] <= s.dates[i - 1])
      fail(ErrorCode::InvalidSeries, "series '" + s.name + "' dates are not strictly increasing", i);
  }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_real(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads one value column of a daily-candle CSV. Line numbers in errors are
/// 1-based file lines (the header is line 1). Blank lines are ignored.
inline TimeSeries load_candles(const std::filesystem::path& path, std::string_view date_column,
                               std::string_view value_column, std::string name = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingFile, "cannot open '" + path.string() + "'");

  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> date_idx, value_idx;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto header = detail::split_commas(line);
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].remove_prefix(3);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (!date_idx && header[i] == date_column) date_idx = i;
      if (!value_idx && header[i] == value_column) value_idx = i;
    }
    break;
  }
  if (!date_idx) fail(ErrorCode::MissingColumn, std::string(date_column));
  if (!value_idx) fail(ErrorCode::MissingColumn, std::string(value_column));

  std::vector<std::pair<Date, double>> rows;
  std::vector<std::size_t> row_lines;
  const std::size_t needed = std::max(*date_idx, *value_idx) + 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_commas(line);
    if (fields.size() < needed)
      fail(ErrorCode::UnparseableRow, "line " + std::to_string(line_no) + " has too few fields", line_no);
    auto date = parse_date(fields[*date_idx]);
    auto value = detail::parse_real(fields[*value_idx]);
    if (!date || !value)
      fail(ErrorCode::UnparseableRow, "line " + std::to_string(line_no) + " of '" + path.string() + "'",
           line_no);
    rows.emplace_back(*date, *value);
    row_lines.push_back(line_no);
  }
  if (rows.empty()) fail(ErrorCode::EmptyData, "'" + path.string() + "' has no data rows");

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].first < rows[b].first; });

  TimeSeries series;
  series.name = name.empty() ? std::string(value_column) : std::move(name);
  series.dates.reserve(rows.size());
  series.values.reserve(rows.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& [date, value] = rows[order[k]];
    if (!series.dates.empty() && series.dates.back() == date)
      fail(ErrorCode::DuplicateDate, "date " + format_date(date) + " repeated in '" + path.string() + "'",
           row_lines[order[k]]);
    series.dates.push_back(date);
    series.values.push_back(value);
  }
  return series;
}

/// Restricts every series to the dates they all share.
inline std::vector<TimeSeries> align(std::span<const TimeSeries> series) {
  if (series.empty()) fail(ErrorCode::InvalidArgument, "align needs at least one series");
  for (const auto& s : series) validate(s);

  std::vector<Date> common = series.front().dates;
  for (std::size_t i = 1; i < series.size(); ++i) {
    std::vector<Date> next;
    std::set_intersection(common.begin(), common.end(), series[i].dates.begin(),
                          series[i].dates.end(), std::back_inserter(next));
    common = std::move(next);
  }
  if (common.empty()) fail(ErrorCode::EmptyIntersection, "signals share no dates");

  std::vector<TimeSeries> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    TimeSeries r{s.name, common, {}};
    r.values.reserve(common.size());
    std::size_t j = 0;
    for (Date d : common) {
      while (s.dates[j] < d) ++j;
      r.values.push_back(s.values[j]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Input vectors x(k) with next-day targets t(k+1), in chronological order.
struct SupervisedSet {
  std::vector<std::string> input_names;
  std::string target_name;
  Eigen::MatrixXd inputs;   // N x d
  Eigen::VectorXd targets;  // N
  std::vector<Date> dates;  // date of each input row

  Eigen::Index rows() const { return inputs.rows(); }
  Eigen::Index dims() const { return inputs.cols(); }

  SupervisedSet slice(Eigen::Index begin, Eigen::Index end) const {
    SupervisedSet s;
    s.input_names = input_names;
    s.target_name = target_name;
    s.inputs = inputs.middleRows(begin, end - begin);
    s.targets = targets.segment(begin, end - begin);
    s.dates.assign(dates.begin() + begin, dates.begin() + end);
    return s;
  }
};

/// Builds the one-step-ahead set. `leads[i] == 1` reads input i at day k+1
/// (the historical value standing in for a predicted signal); 0 reads day k.
/// An empty `leads` means all zero.
inline SupervisedSet make_supervised(std::span<const TimeSeries> inputs, const TimeSeries& target,
                                     std::span<const int> leads = {}) {
  if (inputs.empty()) fail(ErrorCode::InvalidArgument, "no input signals");
  if (!leads.empty() && leads.size() != inputs.size())
    fail(ErrorCode::LengthMismatch, "one lead per input signal required");
  const std::size_t length = target.size();
  for (const auto& s : inputs)
    if (s.size() != length || s.dates != target.dates)
      fail(ErrorCode::LengthMismatch, "signal '" + s.name + "' is not aligned with '" + target.name + "'");
  if (length < 2) fail(ErrorCode::TooShort, "need at least two aligned days");
  for (int lead : leads)
    if (lead != 0 && lead != 1) fail(ErrorCode::InvalidArgument, "input lead must be 0 or 1");

  const auto n = static_cast<Eigen::Index>(length - 1);
  const auto d = static_cast<Eigen::Index>(inputs.size());
  SupervisedSet set;
  set.target_name = target.name;
  set.inputs.resize(n, d);
  set.targets.resize(n);
  for (Eigen::Index j = 0; j < d; ++j) {
    const int lead = leads.empty() ? 0 : leads[j];
    set.input_names.push_back(lead ? inputs[j].name + "+1" : inputs[j].name);
    for (Eigen::Index k = 0; k < n; ++k) set.inputs(k, j) = inputs[j].values[k + lead];
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    set.targets(k) = target.values[k + 1];
    set.dates.push_back(target.dates[k]);
  }
  return set;
}

/// First floor(fraction * N) rows train, the rest test. No shuffling.
inline std::pair<SupervisedSet, SupervisedSet> split_chronological(const SupervisedSet& set,
                                                                   double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "train fraction must lie in (0,1)");
  const Eigen::Index n = set.rows();
  const auto n_train = static_cast<Eigen::Index>(std::floor(train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n)
    fail(ErrorCode::DegenerateSplit,
         "split of " + std::to_string(n) + " rows leaves an empty side");
  return {set.slice(0, n_train), set.slice(n_train, n)};
}

struct Range {
  double min = 0.0;
  double max = 0.0;
  double span() const { return max - min; }
};

struct MinMaxStats {
  std::vector<Range> inputs;
  Range target;
};

inline MinMaxStats minmax_stats(const SupervisedSet& set) {
  if (set.rows() < 1) fail(ErrorCode::EmptyData, "empty supervised set");
  MinMaxStats stats;
  for (Eigen::Index j = 0; j < set.dims(); ++j)
    stats.inputs.push_back({set.inputs.col(j).minCoeff(), set.inputs.col(j).maxCoeff()});
  stats.target = {set.targets.minCoeff(), set.targets.maxCoeff()};
  return stats;
}

}  // namespace anfis
