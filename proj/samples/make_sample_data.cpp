#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "anfis/market_data.hpp"

// Writes a synthetic daily price series and a dominance series in the
// layouts the sample config expects.
int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : ".";
  const std::size_t days = argc > 2 ? std::stoul(argv[2]) : 730;
  std::mt19937_64 rng(2017);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::ofstream price(dir / "btc.csv"), dom(dir / "btcd.csv");
  price << "date,open,high,low,close\n";
  dom << "time,close\n";
  double p = 4300.0, d = 52.0;
  const anfis::Date start = *anfis::parse_date("2017-08-17");
  for (std::size_t i = 0; i < days; ++i) {
    const double t = static_cast<double>(i);
    const double open = p;
    p *= std::exp(0.0008 + 0.012 * std::sin(t / 45.0) * 0.2 + 0.025 * noise(rng));
    d = std::clamp(d + 0.15 * noise(rng) - 0.01 * (d - 50.0), 30.0, 75.0);
    const std::string date = anfis::format_date(start + std::chrono::days{static_cast<int>(i)});
    price << fmt::format("{},{:.2f},{:.2f},{:.2f},{:.2f}\n", date, open, std::max(open, p) * 1.01,
                         std::min(open, p) * 0.99, p);
    dom << fmt::format("{},{:.3f}\n", date, d);
  }
  fmt::print("wrote {} days to {} and {}\n", days, (dir / "btc.csv").string(), (dir / "btcd.csv").string());
  return 0;
}
