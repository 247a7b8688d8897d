#include "ggq/diabetes_sim.hpp"
#include "ggq/errors.hpp"
#include "ggq/experiments.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>

using namespace ggq;

namespace {

// Desk-check sizes: every study path runs in a few seconds.
StudySpec tiny(const std::string& study) {
  StudySpec spec;
  spec.study = study;
  spec.sample_sizes = {2000};  // keeps the sparse stage blocks populated
  spec.replicates = 3;
  spec.oracle_n = 1500;
  spec.reference_n = 1500;
  spec.pool_n = 60;
  spec.policy_replicates = 1;
  spec.rollouts = 40;
  spec.gammas = {0.3, 0.6};
  spec.nus = {0.05};
  spec.schedules = {ScheduleFamily::kKLogK};
  spec.estimator.tolerance = 0.05;
  spec.estimator.max_sweeps = 30;
  spec.out_dir = std::filesystem::temp_directory_path() / ("ggq_study_" + study);
  std::filesystem::remove_all(spec.out_dir);
  return spec;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("derived seeds are deterministic and tag-separated") {
    CHECK(derive_seed(1, "data", 0) == derive_seed(1, "data", 0));
    std::set<std::uint64_t> seen;
    for (const char* tag : {"data", "rollout", "oracle", "coverage"})
      for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(20240611, tag, i));
    CHECK(seen.size() == 200);
    CHECK(derive_seed(1, "data", 0) != derive_seed(2, "data", 0));
  }

  TEST_CASE("mean and standard error") {
    const auto m = mean_and_se({1.0, 2.0, 3.0, 4.0});
    CHECK(m.mean == doctest::Approx(2.5));
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  }

  TEST_CASE("representative state of an oracle cell") {
    SimParams params;
    params.n = 40;
    const Dataset data = simulate_cohort(params);
    const State s = representative_state(DiscreteState{false, {2, 1, 4}}, data);
    CHECK(s[0] == 2.0);
    CHECK(s[1] == 1.0);
    CHECK(s[2] == 7.6);
    CHECK(DiscretizerSpec::a1c_bins().bin(s[2]) == 4);
    for (int cat = 1; cat <= 7; ++cat)
      CHECK(DiscretizerSpec::a1c_bins().bin(representative_state(DiscreteState{false, {0, 0, cat}}, data)[2]) == cat);
    CHECK_THROWS_AS(representative_state(DiscreteState{false, {0, 0, 9}}, data), DomainError);
  }

  TEST_CASE("spec validation lists every problem") {
    StudySpec spec;
    spec.study = "fig9";
    spec.level = 1.2;
    spec.coverage_fit = "exact";
    try {
      spec.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("fig9") != std::string::npos);
      CHECK(msg.find("level") != std::string::npos);
      CHECK(msg.find("coverage_fit") != std::string::npos);
    }
  }

  TEST_CASE("manifest is deterministic JSON without timestamps") {
    const StudySpec spec = tiny("fig1");
    const auto a = study_manifest(spec, {"note"});
    CHECK(a == study_manifest(spec, {"note"}));
    const auto j = nlohmann::json::parse(a);
    CHECK(j.at("study") == "fig1");
    CHECK(j.at("seed") == spec.seed);
    CHECK(a.find("time") == std::string::npos);
  }

  TEST_CASE("policy comparison study writes its tables") {
    const auto spec = tiny("fig1");
    const auto files = run_study(spec);
    CHECK(std::filesystem::exists(spec.out_dir / "policy_comparison.csv"));
    CHECK(std::filesystem::exists(spec.out_dir / "manifest.json"));
    CHECK(files.size() >= 2);
    std::ifstream in(spec.out_dir / "policy_comparison.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.find("ggq_augment") != std::string::npos);
  }

  TEST_CASE("oracle is reproducible") {
    SimParams sim;
    const auto a = compute_oracle(sim, 1500, 0.6, 5);
    const auto b = compute_oracle(sim, 1500, 0.6, 5);
    CHECK(a.policy == b.policy);
    CHECK(a.compared > 0);
    CHECK(a.agreement() >= 0.0);
  }

  TEST_CASE("value comparison pairs every policy on the same draws") {
    auto spec = tiny("fig2");
    const auto result = run_value_comparison(spec);
    REQUIRE_FALSE(result.rows.empty());
    CHECK(result.horizon == rollout_horizon(spec.estimator.gamma));
    for (const auto& row : result.rows) {
      CHECK(row.difference == doctest::Approx(row.ggq - row.classical));
      CHECK(row.difference_se >= 0.0);
    }
  }

  TEST_CASE("policy value table uses the documented pool and rollout streams") {
    struct AlwaysContinue final : Policy {
      Action action(const State&) const override { return 0; }
    } policy;
    SimParams sim;
    const std::uint64_t seed = 99;
    const auto rows = policy_value_table(sim, policy, 80, 30, seed, 0.6, 1);
    REQUIRE(!rows.empty());
    CHECK(rows == policy_value_table(sim, policy, 80, 30, seed, 0.6, 3));

    SimParams pool = sim;
    pool.n = 80;
    pool.seed = derive_seed(seed, "pool", 0);
    std::map<DiscreteState, std::vector<PatientState>> starts;
    const Discretizer cells = oracle_discretizer();
    for (const auto& s : visited_states(pool)) starts[cells(s.observed())].push_back(s);
    REQUIRE(rows.size() == starts.size());
    std::size_t c = 0;
    for (const auto& [cell, from] : starts) {
      const auto returns = rollout_policy(sim, policy, from, rollout_horizon(0.6), 30, derive_seed(seed, "rollout", c), 0.6);
      const auto expected = mean_and_se(returns);
      CHECK(rows[c].cell == cell);
      CHECK(rows[c].starts == from.size());
      CHECK(rows[c].value == expected.mean);
      CHECK(rows[c].se == expected.se);
      ++c;
    }
    CHECK_THROWS_AS(policy_value_table(sim, policy, 80, 0, seed, 0.6), ConfigError);
  }

  TEST_CASE("coverage study structure") {
    auto spec = tiny("coverage");
    const auto result = run_coverage_study(spec, 150);
    CHECK(result.theta.size() == 75);
    CHECK(result.replicates + result.non_converged + result.failed == spec.replicates);
    for (const auto& row : result.theta) {
      CHECK(row.coverage >= 0.0);
      CHECK(row.coverage <= 1.0);
      CHECK(row.degenerate <= row.used);
    }
    spec.coverage_fit = "root";
    const auto root = run_coverage_study(spec, 150);
    CHECK(root.theta.size() == 75);
  }

  TEST_CASE("sensitivity studies produce one row per configuration") {
    auto spec = tiny("s4");
    const auto g = run_gamma_sensitivity(spec);
    CHECK(g.size() == 2);
    spec.study = "s5";
    spec.schedules = {ScheduleFamily::kKLogK, ScheduleFamily::kPower13};
    const auto t = run_tuning_sensitivity(spec);
    CHECK(t.size() == 2);
    CHECK(t[1].family == ScheduleFamily::kPower13);
  }

  TEST_CASE("small datasets that leave a feature block empty are redrawn and counted") {
    auto spec = tiny("s5");
    spec.sample_sizes = {300};
    spec.replicates = 4;
    const auto t = run_tuning_sensitivity(spec);
    REQUIRE(t.size() == 1);
    CHECK(t[0].redraws > 0);
    CHECK(t[0].replicates == 4);
    CHECK(run_tuning_sensitivity(spec).front().mean_objective == t[0].mean_objective);
  }
}
