#include "ggq/errors.hpp"
#include "ggq/features.hpp"
#include "ggq/ggq.hpp"
#include "tabular_mdp.hpp"

#include <doctest.h>

#include <cmath>

using namespace ggq;

namespace {

State st(int s) { return State({static_cast<double>(s)}); }

// Two subjects on a 2-state / 2-action chain with one-hot features.
//   subject 1: (0, a=1, r=1) -> 1, (1, a=0, r=0) -> 0
//   subject 2: (1, a=1, r=2) -> 0, (0, a=0, r=-1) -> absorbing
Dataset toy() {
  std::vector<Trajectory> trs{
      {"1", {{st(0), 1, 1.0, st(1), 0}, {st(1), 0, 0.0, st(0), 1}}},
      {"2", {{st(1), 1, 2.0, st(0), 0}, {st(0), 0, -1.0, State::absorbing(), 1}}},
  };
  return Dataset(TabularFeatureMap::schema(), std::move(trs));
}
TabularFeatureMap toy_map() { return TabularFeatureMap({{0, 1}, {0, 1}}); }

}  // namespace

TEST_SUITE("ggq") {
  TEST_CASE("D-hat and W-hat by hand") {
    const auto data = toy();
    const auto fmap = toy_map();
    Eigen::VectorXd theta(4);  // Q(0,0), Q(0,1), Q(1,0), Q(1,1)
    theta << 0.5, 1.0, -0.5, 2.0;
    const double g = 0.5;
    // deltas: 1 + g*2 - 1 = 1 ; 0 + g*1 + 0.5 = 1 ; 2 + g*1 - 2 = 0.5 ; -1 - 0.5 = -1.5
    Eigen::VectorXd expected(4);
    expected << -1.5 / 2.0, 1.0 / 2.0, 1.0 / 2.0, 0.5 / 2.0;
    CHECK((compute_D_hat(theta, data, g, fmap) - expected).norm() < 1e-12);
    const FeatureTable table(data, fmap);
    CHECK((compute_D_hat(theta, table, g) - expected).norm() < 1e-12);

    const Eigen::MatrixXd w = compute_W_hat(data, fmap);
    CHECK(w.isApprox(Eigen::MatrixXd(Eigen::VectorXd::Constant(4, 0.5).asDiagonal())));

    const double m = expected.dot(w.ldlt().solve(expected));
    CHECK(objective_M_hat(theta, data, g, fmap) == doctest::Approx(m));
  }

  TEST_CASE("C-hat times omega by hand") {
    const auto data = toy();
    const auto fmap = toy_map();
    Eigen::VectorXd theta(4), omega(4);
    theta << 0.5, 1.0, -0.5, 2.0;
    omega << 1.0, 2.0, 3.0, 4.0;
    // Greedy next actions: s'=1 -> a=1, s'=0 -> a=1, s'=0 -> a=1, absorbing -> none.
    // sum_t phi(S', pi) (phi(S,A)' omega) / n
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(4);
    expected[3] += 2.0;  // from step (0,1): omega[1] = 2
    expected[1] += 3.0;  // from step (1,0): omega[2] = 3
    expected[1] += 4.0;  // from step (1,1): omega[3] = 4
    expected /= 2.0;
    const FeatureTable table(data, fmap);
    CHECK((cross_times(theta, omega, table) - expected).norm() < 1e-12);
  }

  TEST_CASE("init_theta keeps the first grid point on ties and computes omega") {
    const auto data = toy();
    const auto fmap = toy_map();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
    const auto init = init_theta(data, 0.5, fmap, {zero, zero});
    CHECK(init.grid_index == 0);
    const FeatureTable table(data, fmap);
    const WeightSolver w(compute_W_hat(table));
    CHECK((init.omega - w.solve(compute_D_hat(zero, table, 0.5))).norm() < 1e-12);
    const auto grid = default_grid(4, 2.0);
    CHECK(grid.size() == 9);
    CHECK(grid[1][0] == 2.0);
    CHECK(grid[2][0] == -2.0);
  }

  TEST_CASE("weight solver ridge fallback is reported, or refused") {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
    w(0, 0) = 1.0;
    w(1, 1) = 2.0;
    const WeightSolver ridged(w);
    CHECK(ridged.ridge() > 0.0);
    CHECK(ridged.warning().has_value());
    CHECK_THROWS_AS(WeightSolver(w, false), NumericalError);
    const WeightSolver fine(Eigen::MatrixXd::Identity(3, 3));
    CHECK(fine.ridge() == 0.0);
    CHECK_FALSE(fine.warning().has_value());
  }

  TEST_CASE("configuration errors are listed together") {
    EstimatorConfig c;
    c.gamma = 1.5;
    c.schedule.nu = 0.0;
    c.max_sweeps = 0;
    try {
      c.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("gamma") != std::string::npos);
      CHECK(msg.find("nu") != std::string::npos);
      CHECK(msg.find("max_sweeps") != std::string::npos);
    }
    EstimatorConfig bad_schedule;
    bad_schedule.schedule.family = ScheduleFamily::kPower13;
    CHECK_THROWS_AS(bad_schedule.validate(), ConfigError);
    bad_schedule.allow_nonconforming_schedule = true;
    CHECK_NOTHROW(bad_schedule.validate());
  }

  TEST_CASE("fit on a tabular MDP reaches the estimating-equation root") {
    ggq_test::TabularMdp mdp;
    mdp.reward_sd = 0.5;
    const auto fmap = ggq_test::TabularMdp::features();
    const Dataset data = mdp.simulate(1000, 10, 3);
    EstimatorConfig config;
    config.gamma = 0.5;
    config.tolerance = 1e-4;
    config.max_sweeps = 1000;
    const auto est = ggq_fit(data, fmap, config);
    CHECK(est.converged);
    CHECK(est.objective <= est.initial_objective);
    CHECK(est.updates == static_cast<long>(est.sweeps) * 1000);
    CHECK(est.trace.size() == static_cast<std::size_t>(est.sweeps));

    const FeatureTable table(data, fmap);
    const WeightSolver w(compute_W_hat(table));
    const auto root = solve_estimating_equation(table, 0.5, w);
    CHECK(root.stable);
    CHECK(compute_D_hat(root.theta, table, 0.5).norm() < 1e-10);
    CHECK((est.theta - root.theta).cwiseAbs().maxCoeff() < 0.05);

    // Same input, same output.
    const auto again = ggq_fit(data, fmap, config);
    CHECK(again.theta == est.theta);
    CHECK(again.sweeps == est.sweeps);
  }

  TEST_CASE("a loose tolerance stops after one sweep") {
    ggq_test::TabularMdp mdp;
    const Dataset data = mdp.simulate(200, 5, 4);
    EstimatorConfig config;
    config.tolerance = 1e6;
    const auto est = ggq_fit(data, ggq_test::TabularMdp::features(), config);
    CHECK(est.sweeps == 1);
    CHECK(est.converged);
  }

  TEST_CASE("max_sweeps exhaustion is reported, not thrown") {
    ggq_test::TabularMdp mdp;
    mdp.reward_sd = 1.0;
    const Dataset data = mdp.simulate(200, 5, 4);
    EstimatorConfig config;
    config.tolerance = 1e-12;
    config.max_sweeps = 3;
    const auto est = ggq_fit(data, ggq_test::TabularMdp::features(), config);
    CHECK_FALSE(est.converged);
    CHECK(est.sweeps == 3);
  }

  TEST_CASE("per-update indexing shrinks the steps within a sweep") {
    ggq_test::TabularMdp mdp;
    mdp.reward_sd = 0.5;
    const Dataset data = mdp.simulate(500, 10, 9);
    EstimatorConfig sweep, update;
    sweep.gamma = update.gamma = 0.5;
    sweep.max_sweeps = update.max_sweeps = 1;
    update.schedule.index = StepIndex::kUpdate;
    const auto a = ggq_fit(data, ggq_test::TabularMdp::features(), sweep);
    const auto b = ggq_fit(data, ggq_test::TabularMdp::features(), update);
    CHECK(a.trace.front().step_norm > b.trace.front().step_norm);
  }

  TEST_CASE("variance of D-hat scales like 1/n") {
    ggq_test::TabularMdp mdp;
    mdp.reward_sd = 1.0;
    const auto fmap = ggq_test::TabularMdp::features();
    Eigen::VectorXd theta(6);
    theta << 0.3, -0.2, 0.8, 0.1, 1.2, 0.4;
    auto variance = [&](std::size_t n, std::uint64_t base) {
      const int reps = 300;
      Eigen::MatrixXd draws(reps, 6);
      for (int r = 0; r < reps; ++r)
        draws.row(r) = compute_D_hat(theta, mdp.simulate(n, 6, base + static_cast<std::uint64_t>(r)), 0.7, fmap);
      const Eigen::RowVectorXd mean = draws.colwise().mean();
      return ((draws.rowwise() - mean).array().square().colwise().sum() / (reps - 1)).sum();
    };
    const double ratio = variance(25, 1000) / variance(100, 5000);
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.3);
  }
}
