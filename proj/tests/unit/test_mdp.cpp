#include "ggq/errors.hpp"
#include "ggq/features.hpp"
#include "ggq/mdp.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ggq;

namespace {

// Two states, two actions each, one-hot features: theta'phi(s, a) is just
// theta[2s + a], which makes every expected value a hand calculation.
TabularFeatureMap two_by_two() { return TabularFeatureMap({{0, 1}, {0, 1}}); }
State st(int s) { return State({static_cast<double>(s)}); }

}  // namespace

TEST_SUITE("mdp") {
  TEST_CASE("td_error with zero theta is the reward") {
    const auto fmap = two_by_two();
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(4);
    CHECK(td_error(theta, {st(0), 1, 0.7, st(1), 0}, 0.6, fmap) == doctest::Approx(0.7));
  }

  TEST_CASE("td_error into the absorbing state drops the max term") {
    const auto fmap = two_by_two();
    Eigen::VectorXd theta(4);
    theta << 0.3, 2.0, 5.0, 9.0;
    CHECK(td_error(theta, {st(0), 1, 1.5, State::absorbing(), 0}, 0.6, fmap) == doctest::Approx(1.5 - 2.0));
  }

  TEST_CASE("td_error toy evaluation") {
    const auto fmap = two_by_two();
    Eigen::VectorXd theta(4);
    theta << 1.0, 0.0, 1.0, 2.0;  // Q(s1, .) in {1, 2}
    CHECK(td_error(theta, {st(0), 0, 1.0, st(1), 0}, 0.6, fmap) == doctest::Approx(1.2));
  }

  TEST_CASE("td_error is affine in the reward") {
    const auto fmap = two_by_two();
    Eigen::VectorXd theta(4);
    theta << 0.4, -1.0, 2.5, 0.1;
    const double base = td_error(theta, {st(1), 0, 0.2, st(0), 0}, 0.9, fmap);
    CHECK(td_error(theta, {st(1), 0, 0.2 + 3.0, st(0), 0}, 0.9, fmap) == doctest::Approx(base + 3.0));
  }

  TEST_CASE("td_error rejects a theta of the wrong length") {
    const auto fmap = two_by_two();
    CHECK_THROWS_AS(td_error(Eigen::VectorXd::Zero(3), {st(0), 0, 0.0, st(1), 0}, 0.5, fmap), ConfigError);
  }

  TEST_CASE("greedy_action tie-breaking and strict comparison") {
    const auto fmap = two_by_two();
    CHECK(greedy_action(Eigen::VectorXd::Zero(4), st(0), fmap) == 0);
    Eigen::VectorXd theta(4);
    theta << 3.0, 3.0 + 1e-12, 0.0, 0.0;
    CHECK(greedy_action(theta, st(0), fmap) == 1);
    CHECK_THROWS_AS(greedy_action(theta, State::absorbing(), fmap), DomainError);
  }

  TEST_CASE("max_action_value is zero when absorbing") {
    const auto fmap = two_by_two();
    Eigen::VectorXd theta(4);
    theta << 3.0, -1.0, 7.0, 8.0;
    CHECK(max_action_value(theta, State::absorbing(), fmap) == 0.0);
    CHECK(max_action_value(theta, st(1), fmap) == 8.0);
  }

  TEST_CASE("greedy policy returns feasible actions") {
    TabularFeatureMap fmap({{0}, {0, 1, 2}});
    Eigen::VectorXd theta(4);
    theta << -5.0, 1.0, 4.0, 2.0;
    GreedyPolicy pi(fmap, theta);
    CHECK(pi.action(st(0)) == 0);
    CHECK(pi.action(st(1)) == 1);
  }

  TEST_CASE("dataset construction enforces chaining and absorbing closure") {
    const auto schema = TabularFeatureMap::schema();
    Trajectory good{"a", {{st(0), 1, 1.0, st(1), 0}, {st(1), 0, 0.0, State::absorbing(), 1},
                          {State::absorbing(), kNoAction, 0.0, State::absorbing(), 2}}};
    Dataset data(schema, {good});
    CHECK(data.size() == 1);
    CHECK(data.horizon() == 3);
    CHECK(data.live_transitions() == 2);

    Trajectory broken{"b", {{st(0), 1, 1.0, st(1), 0}, {st(0), 0, 0.0, st(1), 1}}};
    CHECK_THROWS_AS(Dataset(schema, {broken}), ParseError);

    Trajectory revived{"c", {{st(0), 1, 1.0, State::absorbing(), 0}, {State::absorbing(), kNoAction, 0.0, st(1), 1}}};
    CHECK_THROWS_AS(Dataset(schema, {revived}), ParseError);

    Trajectory paid{"d", {{st(0), 1, 1.0, State::absorbing(), 0}, {State::absorbing(), kNoAction, 2.0, State::absorbing(), 1}}};
    CHECK_THROWS_AS(Dataset(schema, {paid}), ParseError);

    Trajectory skipped{"e", {{st(0), 1, 1.0, st(1), 0}, {st(1), 0, 0.0, st(0), 2}}};
    CHECK_THROWS_AS(Dataset(schema, {skipped}), ParseError);
  }

  TEST_CASE("drop_leading re-indexes time") {
    const auto schema = TabularFeatureMap::schema();
    Trajectory tr{"a", {{st(0), 1, 1.0, st(1), 0}, {st(1), 0, 2.0, st(0), 1}, {st(0), 0, 3.0, st(1), 2}}};
    const Dataset data = Dataset(schema, {tr}).drop_leading(2);
    REQUIRE(data.trajectories()[0].steps.size() == 1);
    CHECK(data.trajectories()[0].steps[0].t == 0);
    CHECK(data.trajectories()[0].steps[0].reward == 3.0);
  }

  TEST_CASE("perturbation gap examples") {
    const double a[] = {1.0, 3.0, 3.0, 0.0};
    const double b[] = {5.0, 0.5, 1.0, 0.0};
    const auto g = greedy_perturbation_gap(a, b);
    // max(a+b) = 6 at i=0, argmax a = {1,2} with best a+b = 4; bound 5 - 1.
    CHECK(g.excess == doctest::Approx(2.0));
    CHECK(g.bound == doctest::Approx(4.0));
    const double z[] = {0.0, 0.0, 0.0, 0.0};
    CHECK(greedy_perturbation_gap(a, z).excess == 0.0);
  }
}
