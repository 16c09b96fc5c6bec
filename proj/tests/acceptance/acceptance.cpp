#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <random>
#include <sys/wait.h>

#include <fmt/format.h>

#include "anfis/anfis.hpp"
#include "support/fixtures.hpp"

namespace {

using namespace anfis;
namespace fs = std::filesystem;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

Outcome gradient_suite() {
  const auto r = run_gradient_suite(100, 20240601);
  return verdict(r.max_error() < 1e-6, fmt::format("{} cases, max rel error premise {:.3g} full {:.3g} jacobian {:.3g}",
                                                   r.cases, r.max_premise_error, r.max_full_error,
                                                   r.max_jacobian_error));
}

Outcome lse_recovery() {
  const auto teacher = testing::two_rule_teacher();
  const auto data = testing::teacher_data(teacher, 200, 3);
  const auto fit = lse_consequents(testing::zero_consequents(teacher), data, 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < teacher.rules.size(); ++i)
    for (std::size_t j = 0; j < teacher.rules[i].consequent.size(); ++j)
      worst = std::max(worst, std::abs(fit.rules[i].consequent[j] - teacher.rules[i].consequent[j]));
  const double rmse = batch_rmse(fit, data);
  return verdict(worst < 1e-8 && rmse < 1e-8, fmt::format("max coefficient error {:.3g}, train RMSE {:.3g}", worst, rmse));
}

Outcome layer_invariants() {
  std::mt19937_64 rng(77);
  std::size_t cases = 0;
  double unity = 0.0, bound = 0.0, collapse = 0.0, symmetry = 0.0;
  bool peak_ok = true;
  for (int n = 0; n < 10000; ++n, ++cases) {
    const auto c = random_gradcheck_case(rng, 1);
    std::vector<double> x(c.model.inputs());
    for (auto& v : x) v = testing::uniform(rng, -3.0, 3.0);
    const auto t = forward(c.model, x);
    double sum = 0.0;
    for (double w : t.normalized) sum += w;
    unity = std::max(unity, std::abs(sum - 1.0));
    const auto [lo, hi] = std::minmax_element(t.rule_outputs.begin(), t.rule_outputs.end());
    const double slack = 1e-12 * std::max(1.0, std::max(std::abs(*lo), std::abs(*hi)));
    bound = std::max({bound, *lo - t.output - slack, t.output - *hi - slack});

    AnfisModel one = c.model;
    one.rules.resize(1);
    collapse = std::max(collapse, std::abs(predict(one, x) - rule_output(one.rules[0], x)));

    const GaussianMf mf{testing::uniform(rng, -5, 5), testing::uniform(rng, 0.1, 3)};
    const double d = testing::uniform(rng, 0.0, 4.0);
    peak_ok = peak_ok && mf_eval(mf, mf.center) == 1.0 && mf_eval(mf, mf.center + d) <= 1.0;
    const double right = mf_eval(mf, mf.center + d), left = mf_eval(mf, mf.center - d);
    symmetry = std::max(symmetry, std::abs(right - left) / right);
  }
  const bool ok = unity < 1e-12 && bound <= 0.0 && collapse < 1e-12 && peak_ok && symmetry < 1e-12;
  return verdict(ok, fmt::format("{} cases, |sum-1| {:.3g}, bound excess {:.3g}, affine collapse {:.3g}, mf relative asymmetry {:.3g}{}",
                                 cases, unity, std::max(bound, 0.0), collapse, symmetry, peak_ok ? "" : ", peak violated"));
}

Outcome fcm_suite() {
  std::mt19937_64 rng(5);
  double stochastic = 0.0;
  std::size_t monotone_breaks = 0, runs = 0;
  for (int trial = 0; trial < 50; ++trial, ++runs) {
    Eigen::MatrixXd data(80, 1 + rng() % 3);
    for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = testing::uniform(rng, -2, 2);
    const auto r = fcm(data, {1 + rng() % 6, 1.5 + testing::uniform(rng, 0, 1.5), 1e-8, 200, rng()});
    stochastic = std::max(stochastic, (r.memberships.colwise().sum().array() - 1.0).abs().maxCoeff());
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      if (r.objective_trace[i] > r.objective_trace[i - 1] * (1.0 + 1e-12)) ++monotone_breaks;
  }

  Eigen::MatrixXd data(40, 3);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = testing::uniform(rng, -3, 3);
  const double mean_err = (fcm(data, {1, 2.0, 1e-9, 50, 1}).centers.row(0) - data.colwise().mean()).cwiseAbs().maxCoeff();

  const Eigen::MatrixXd blobs = testing::two_blobs(50, {0, 0}, {10, 10}, 0.3, 5);
  const auto r = fcm(blobs, {2, 2.0, 1e-9, 300, 17});
  const Eigen::Index own_a = r.memberships(0, 0) > r.memberships(1, 0) ? 0 : 1;
  double weakest = 1.0;
  for (Eigen::Index k = 0; k < 100; ++k) weakest = std::min(weakest, r.memberships(k < 50 ? own_a : 1 - own_a, k));

  const bool ok = stochastic < 1e-9 && monotone_breaks == 0 && mean_err < 1e-9 && weakest > 0.99;
  return verdict(ok, fmt::format("{} runs, column sum error {:.3g}, objective increases {}, c=1 mean error {:.3g}, "
                                 "weakest own membership {:.6f}",
                                 runs, stochastic, monotone_breaks, mean_err, weakest));
}

Outcome subtractive_suite() {
  const Eigen::MatrixXd data = testing::two_blobs(100, {0, 0}, {5, 5}, 0.15, 8);
  const auto r = subtractive_cluster(data);
  const Eigen::RowVectorXd lo = data.colwise().minCoeff(), span = data.colwise().maxCoeff() - lo;
  const Eigen::RowVectorXd a = (data.topRows(100).colwise().mean() - lo).cwiseQuotient(span);
  const Eigen::RowVectorXd b = (data.bottomRows(100).colwise().mean() - lo).cwiseQuotient(span);
  double worst = 0.0;
  for (Eigen::Index c = 0; c < r.centers.rows(); ++c) {
    const Eigen::RowVectorXd z = (r.centers.row(c) - lo).cwiseQuotient(span);
    worst = std::max(worst, std::min((z - a).norm(), (z - b).norm()));
  }

  const Eigen::MatrixXd z = (data.rowwise() - lo).array().rowwise() / span.array();
  const double alpha = 4.0 / (0.5 * 0.5);
  Eigen::VectorXd potential = Eigen::VectorXd::Zero(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.rows(); ++j) potential(i) += std::exp(-alpha * (z.row(i) - z.row(j)).squaredNorm());
  Eigen::Index best;
  potential.maxCoeff(&best);
  const bool argmax = !r.indices.empty() && r.indices.front() == static_cast<std::size_t>(best);

  return verdict(r.centers.rows() == 2 && worst < 0.1 && argmax,
                 fmt::format("{} centers, worst centroid distance {:.4f}, first center row {} (oracle {})",
                             r.centers.rows(), worst, r.indices.empty() ? -1 : static_cast<long>(r.indices.front()),
                             static_cast<long>(best)));
}

Outcome mackey_glass_benchmark() {
  const auto x = mackey_glass(1200);
  const auto train_set = testing::mackey_glass_set(x, 118, 500);
  const auto test_set = testing::mackey_glass_set(x, 618, 500);
  InductionConfig ind;
  ind.grid_mfs_per_input = 2;
  TrainConfig cfg;
  cfg.epochs = 10;
  const auto model = train_hybrid(induce(train_set, ind), train_set, cfg).model;
  const Eigen::VectorXd p = forward_batch(model, test_set.inputs);
  const std::span<const double> actual(test_set.targets.data(), static_cast<std::size_t>(test_set.targets.size()));
  const std::span<const double> predicted(p.data(), static_cast<std::size_t>(p.size()));
  const double e = rmse(actual, predicted), re = rmsre(actual, predicted);
  return verdict(model.rule_count() == 16 && e <= 0.05 && re <= 0.05,
                 fmt::format("{} rules, test RMSE {:.5f}, test RMSRE {:.5f}", model.rule_count(), e, re));
}

Outcome hybrid_vs_backprop() {
  const auto teacher = testing::two_rule_teacher();
  const auto data = testing::teacher_data(teacher, 200, 9, 0.01);
  const auto init = testing::zero_consequents(teacher);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 9;
  cfg.method = TrainMethod::Hybrid;
  const double hybrid = train(init, data, cfg).report.rmse.front();
  cfg.method = TrainMethod::Backprop;
  const double backprop = train(init, data, cfg).report.rmse.front();
  return verdict(hybrid <= backprop, fmt::format("epoch-1 RMSE hybrid {:.6g}, backprop {:.6g}", hybrid, backprop));
}

Outcome rollout_fixed_point() {
  auto sub = [](std::string name, std::vector<std::string> refs) {
    SubsystemSpec s{std::move(name), {}};
    for (const auto& r : refs) s.inputs.push_back(parse_signal_ref(r));
    return s;
  };
  const auto ident = build_pipeline({{sub("A", {"A", "B"}), sub("B", {"A", "B"})}, 7},
                                    {{"A", testing::identity_model(2, 0)}, {"B", testing::identity_model(2, 1)}});
  const auto fixed = rollout(ident, {{"A", 123.25}, {"B", -4.5}}, 7);
  const bool identity_ok = fixed.predicted.rows() == 7 && (fixed.predicted.col(0).array() == 123.25).all() &&
                           (fixed.predicted.col(1).array() == -4.5).all();

  const auto teacher = testing::two_rule_teacher();
  const auto one = build_pipeline({{sub("x1", {"x1", "x2"}), sub("x2", {"x2", "x1"})}, 1}, {{"x1", teacher}, {"x2", teacher}});
  const auto h1 = rollout(one, {{"x1", 0.3}, {"x2", -0.6}}, 1);
  const bool horizon_ok = h1.predicted(0, 0) == predict(teacher, std::vector<double>{0.3, -0.6}) &&
                          h1.predicted(0, 1) == predict(teacher, std::vector<double>{-0.6, 0.3});

  const auto coupled = build_pipeline({{sub("BTC", {"BTC@k", "predicted(D)@k+1"}), sub("D", {"D@k"})}, 7},
                                      {{"BTC", testing::affine_model({0.5, 0.5, 0.0})}, {"D", testing::affine_model({2.0, 0.0})}});
  const auto r = rollout(coupled, {{"BTC", 100.0}, {"D", 1.0}}, 2);
  const double dev = std::max({std::abs(r.predicted(0, 0) - 51.0), std::abs(r.predicted(1, 0) - 27.5),
                               std::abs(r.predicted(0, 1) - 2.0), std::abs(r.predicted(1, 1) - 4.0)});
  return verdict(identity_ok && horizon_ok && dev < 1e-12,
                 fmt::format("identity {}, horizon-1 {}, coupled example deviation {:.3g}", identity_ok ? "exact" : "drifted",
                             horizon_ok ? "exact" : "differs", dev));
}

Outcome ann_baseline() {
  Eigen::MatrixXd in(50, 1);
  Eigen::VectorXd out(50);
  for (Eigen::Index k = 0; k < 50; ++k) {
    in(k, 0) = -1.0 + 2.0 * static_cast<double>(k) / 49.0;
    out(k) = in(k, 0) * in(k, 0);
  }
  const auto data = testing::from_matrix(in, out);
  auto net = make_mlp(1, 10, 42);
  fit_input_scaling(net, data.inputs);
  LmConfig cfg;
  cfg.max_iter = 200;
  const auto r = train_lm(net, data, cfg);
  bool decreasing = true;
  for (std::size_t i = 1; i < r.report.rmse.size(); ++i) decreasing = decreasing && r.report.rmse[i] < r.report.rmse[i - 1];
  const double final_rmse = r.report.rmse.back();
  return verdict(final_rmse < 0.01 && decreasing && r.report.epochs_run <= 200,
                 fmt::format("train RMSE {:.3g} after {} iterations, {} accepted steps, trace {}", final_rmse,
                             r.report.epochs_run, r.report.rmse.size() - 1, decreasing ? "strictly decreasing" : "not monotone"));
}

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = fmt::format("cd '{}' && '{}' {} >/dev/null 2>&1", dir.string(), ANFIS_CLI_PATH, args);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const auto dir = testing::scratch_dir("acceptance_determinism");
  testing::write_market_csvs(dir, 300);
  testing::write_text(dir / "run.json", R"({
  "seed": 3,
  "signals": [
    {"name": "BTC", "path": "btc.csv"},
    {"name": "BTC.D", "path": "btcd.csv", "date_column": "time"}
  ],
  "subsystems": [
    {"name": "BTC", "inputs": ["BTC", "BTC.D+1"]},
    {"name": "BTC.D", "inputs": ["BTC.D"]}
  ],
  "induction": {"method": ["grid", "subtractive", "fcm"], "fcm": {"clusters": 4}},
  "training": {"method": ["hybrid", "backprop"], "epochs": 10},
  "ann": {"max_iter": 40}
})");
  const std::vector<std::string> commands{"ingest", "train", "evaluate", "forecast", "compare", "cluster-info", "gradcheck"};
  std::size_t compared = 0, differing = 0;
  std::string failed;
  for (const auto& cmd : commands) {
    for (const char* out : {"a", "b"}) {
      if (run_cli(dir, fmt::format("{} --config run.json --out {}", cmd, out)) != 0) failed += " " + cmd;
    }
  }
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir / "a");
    ++compared;
    if (!fs::exists(dir / "b" / rel) || testing::read_text(entry.path()) != testing::read_text(dir / "b" / rel)) ++differing;
  }
  return verdict(failed.empty() && differing == 0 && compared > 0,
                 fmt::format("{} commands run twice, {} files compared, {} differ{}", commands.size(), compared, differing,
                             failed.empty() ? "" : "; failed:" + failed));
}

std::optional<TimeSeries> load_any(const fs::path& path, const std::string& name) {
  for (const char* date : {"time", "date"}) {
    try {
      return load_candles(path, date, "close", name);
    } catch (const Error&) {
    }
  }
  return std::nullopt;
}

Outcome real_data_check() {
  const char* btc_path = std::getenv("ANFIS_BTC_CSV");
  const char* dom_path = std::getenv("ANFIS_BTCD_CSV");
  if (!btc_path || !dom_path) return {Status::Skip, "set ANFIS_BTC_CSV and ANFIS_BTCD_CSV to daily close exports"};
  auto btc = load_any(btc_path, "BTC");
  auto dom = load_any(dom_path, "BTC.D");
  if (!btc || !dom) return {Status::Fail, "could not read the supplied CSVs (need time|date and close columns)"};

  const Date first = *parse_date("2017-08-17"), last = *parse_date("2022-06-03");
  auto clip = [&](TimeSeries s) {
    TimeSeries out{s.name, {}, {}};
    for (std::size_t i = 0; i < s.dates.size(); ++i)
      if (s.dates[i] >= first && s.dates[i] <= last) {
        out.dates.push_back(s.dates[i]);
        out.values.push_back(s.values[i]);
      }
    return out;
  };
  const TimeSeries b = clip(*btc), d = clip(*dom);
  if (b.dates.empty() || b.dates.front() != first || b.dates.back() != last)
    return {Status::Skip, "supplied data does not cover 2017-08-17 to 2022-06-03"};

  const std::vector<TimeSeries> raw{b, d};
  const auto aligned = align(raw);
  const std::vector<int> leads{0, 1};
  const auto set = make_supervised(aligned, aligned[0], leads);
  const auto [train_set, test_set] = split_chronological(set, 0.9);
  InductionConfig ind;
  ind.method = InductionMethod::Fcm;
  ind.fcm.seed = 1;
  TrainConfig cfg;
  cfg.method = TrainMethod::Backprop;
  cfg.seed = 1;
  const auto model = train(induce(train_set, ind), train_set, cfg).model;
  const Eigen::VectorXd p = forward_batch(model, test_set.inputs);
  const double re = rmsre({test_set.targets.data(), static_cast<std::size_t>(test_set.targets.size())},
                          {p.data(), static_cast<std::size_t>(p.size())});
  return verdict(re <= 0.01, fmt::format("{} train / {} test rows, test RMSRE {:.6f} (target 0.01)", train_set.rows(),
                                         test_set.rows(), re));
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "gradient suite", 10, gradient_suite},
      {2, "LSE exact recovery", 1, lse_recovery},
      {3, "layer invariants", 30, layer_invariants},
      {4, "FCM suite", 10, fcm_suite},
      {5, "subtractive clustering", 5, subtractive_suite},
      {6, "Mackey-Glass benchmark", 60, mackey_glass_benchmark},
      {7, "hybrid vs backprop ordering", 5, hybrid_vs_backprop},
      {8, "rollout fixed point", 1, rollout_fixed_point},
      {9, "ANN baseline", 5, ann_baseline},
      {10, "CLI determinism", 300, determinism},
      {11, "real BTC history check", 300, real_data_check},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.status == Status::Pass && secs > c.budget_s) {
      o.status = Status::Fail;
      o.detail += fmt::format("; over the {} s budget", c.budget_s);
    }
    const char* label = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    if (o.status == Status::Fail) ++failures;
    fmt::print("[{}] criterion {:>2} {:<28} {:8.3f} s  {}\n", label, c.id, c.name, secs, o.detail);
    std::fflush(stdout);
  }
  fmt::print("{} failed\n", failures);
  return failures == 0 ? 0 : 1;
}
