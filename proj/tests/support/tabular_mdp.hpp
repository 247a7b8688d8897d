#pragma once
// A small fully specified MDP used as an oracle: exact transition
// probabilities and rewards are known, so the optimal action values can be
// computed by brute-force iteration independently of the library.

#include "ggq/features.hpp"
#include "ggq/mdp.hpp"

#include <Eigen/Dense>

#include <array>
#include <random>
#include <vector>

namespace ggq_test {

struct TabularMdp {
  static constexpr int kStates = 3;
  static constexpr int kActions = 2;
  // p[s][a][s']
  std::array<std::array<std::array<double, kStates>, kActions>, kStates> p{{
      {{{0.7, 0.2, 0.1}, {0.1, 0.6, 0.3}}},
      {{{0.3, 0.4, 0.3}, {0.2, 0.1, 0.7}}},
      {{{0.5, 0.3, 0.2}, {0.6, 0.2, 0.2}}},
  }};
  // Expected reward r[s][a]; observed rewards add N(0, reward_sd^2) noise.
  std::array<std::array<double, kActions>, kStates> r{{{0.0, -0.2}, {0.5, 0.1}, {1.0, 0.3}}};
  double reward_sd = 0.0;

  /// Optimal action values by plain iteration of the Bellman operator to
  /// machine precision.
  Eigen::MatrixXd q_star(double gamma) const {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(kStates, kActions);
    for (int it = 0; it < 5000; ++it) {
      Eigen::MatrixXd next(kStates, kActions);
      for (int s = 0; s < kStates; ++s)
        for (int a = 0; a < kActions; ++a) {
          double v = r[s][a];
          for (int t = 0; t < kStates; ++t) v += gamma * p[s][a][t] * q.row(t).maxCoeff();
          next(s, a) = v;
        }
      q = next;
    }
    return q;
  }

  /// n trajectories of `steps` transitions under the uniform behavior policy,
  /// starting uniformly.
  ggq::Dataset simulate(std::size_t n, int steps, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> start(0, kStates - 1), action(0, kActions - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<ggq::Trajectory> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      ggq::Trajectory tr;
      tr.id = std::to_string(i + 1);
      int s = start(rng);
      for (int t = 0; t < steps; ++t) {
        const int a = action(rng);
        const double draw = u(rng);
        int next = kStates - 1;
        double acc = 0.0;
        for (int c = 0; c < kStates; ++c) {
          acc += p[s][a][c];
          if (draw < acc) {
            next = c;
            break;
          }
        }
        const double reward = r[s][a] + reward_sd * noise(rng);
        tr.steps.push_back({state(s), a, reward, state(next), t});
        s = next;
      }
      out.push_back(std::move(tr));
    }
    return ggq::Dataset(ggq::TabularFeatureMap::schema(), std::move(out));
  }

  static ggq::State state(int s) { return ggq::State({static_cast<double>(s)}); }

  static ggq::TabularFeatureMap features() {
    return ggq::TabularFeatureMap(std::vector<std::vector<ggq::Action>>(kStates, {0, 1}));
  }
};

}  // namespace ggq_test
