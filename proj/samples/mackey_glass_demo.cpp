#include <cstdio>

#include <fmt/format.h>

#include "anfis/anfis.hpp"

int main() {
  using namespace anfis;
  const auto x = mackey_glass(1200);

  // Inputs x(t-18), x(t-12), x(t-6), x(t); target x(t+6).
  auto embed = [&](std::size_t start, std::size_t rows) {
    SupervisedSet set;
    set.input_names = {"x(t-18)", "x(t-12)", "x(t-6)", "x(t)"};
    set.target_name = "x(t+6)";
    set.inputs.resize(static_cast<Eigen::Index>(rows), 4);
    set.targets.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t k = 0; k < rows; ++k) {
      const std::size_t t = start + k;
      const auto r = static_cast<Eigen::Index>(k);
      set.inputs.row(r) << x[t - 18], x[t - 12], x[t - 6], x[t];
      set.targets(r) = x[t + 6];
      set.dates.push_back(Date{std::chrono::days{static_cast<int>(t)}});
    }
    return set;
  };
  const auto train_set = embed(118, 500);
  const auto test_set = embed(618, 500);

  InductionConfig induction;
  induction.grid_mfs_per_input = 2;
  TrainConfig training;
  training.epochs = 10;
  const auto result = train(induce(train_set, induction), train_set, training);

  for (std::size_t e = 0; e < result.report.rmse.size(); ++e)
    fmt::print("epoch {:>2}  train RMSE {:.6f}  step {:.5f}\n", e + 1, result.report.rmse[e], result.report.step[e]);

  const Eigen::VectorXd p = forward_batch(result.model, test_set.inputs);
  const std::span<const double> actual(test_set.targets.data(), static_cast<std::size_t>(test_set.targets.size()));
  const std::span<const double> predicted(p.data(), static_cast<std::size_t>(p.size()));
  fmt::print("{} rules, test RMSE {:.6f}, test RMSRE {:.6f}\n", result.model.rule_count(), rmse(actual, predicted),
             rmsre(actual, predicted));
  return 0;
}
