#pragma once

#include "ggq/mdp.hpp"

#include <cstdint>
#include <vector>

namespace ggq {

/// Column-compressed storage for a sequence of feature vectors. Feature maps
/// with one active block per (s, a) are mostly zeros; only exact non-zeros are
/// kept.
class SparseColumns {
 public:
  explicit SparseColumns(Eigen::Index rows = 0) : rows_(rows) { start_.push_back(0); }

  void push_back(const Eigen::VectorXd& dense);

  Eigen::Index rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return start_.size() - 1; }

  double dot(std::size_t col, const Eigen::VectorXd& v) const {
    double acc = 0.0;
    for (auto i = start_[col]; i < start_[col + 1]; ++i) acc += value_[i] * v[index_[i]];
    return acc;
  }
  /// y += alpha * column
  void axpy(std::size_t col, double alpha, Eigen::VectorXd& y) const {
    for (auto i = start_[col]; i < start_[col + 1]; ++i) y[index_[i]] += alpha * value_[i];
  }
  /// m += alpha * column(a) * column(b)'
  void add_outer(std::size_t a, const SparseColumns& other, std::size_t b, double alpha,
                 Eigen::MatrixXd& m) const;
  Eigen::VectorXd dense(std::size_t col) const;

 private:
  Eigen::Index rows_;
  std::vector<std::size_t> start_;
  std::vector<Eigen::Index> index_;
  std::vector<double> value_;
};

/// Features of every live transition in a dataset, evaluated once: phi(S_t,
/// A_t) per step and phi(S_{t+1}, a') for each feasible a' of the next state
/// (none when S_{t+1} is absorbing). Transitions out of the absorbing state
/// contribute nothing to any estimating equation and are skipped.
class FeatureTable {
 public:
  struct Step {
    double reward;
    std::uint32_t next_begin;
    std::uint32_t next_end;
  };

  FeatureTable(const Dataset& data, const FeatureMap& fmap);

  Eigen::Index dimension() const noexcept { return current_.rows(); }
  /// Number of trajectories n (including fully absorbed ones).
  std::size_t trajectories() const noexcept { return trajectory_begin_.size() - 1; }
  std::size_t steps() const noexcept { return steps_.size(); }

  std::size_t trajectory_begin(std::size_t i) const { return trajectory_begin_[i]; }
  std::size_t trajectory_end(std::size_t i) const { return trajectory_begin_[i + 1]; }

  const Step& step(std::size_t j) const { return steps_[j]; }
  const SparseColumns& current() const noexcept { return current_; }
  const SparseColumns& next() const noexcept { return next_; }
  Action next_action(std::size_t candidate) const { return next_actions_[candidate]; }

  /// Candidate index of the greedy next action under theta (lowest code on
  /// ties), or -1 when the next state is absorbing. `value` receives the max.
  long greedy_next(std::size_t j, const Eigen::VectorXd& theta, double& value) const;
  /// Smallest gap between the best and second-best next-state action values;
  /// +inf when no next state has two actions.
  double min_greedy_gap(std::size_t j, const Eigen::VectorXd& theta) const;

  double max_abs_reward() const noexcept { return max_abs_reward_; }

 private:
  SparseColumns current_;
  SparseColumns next_;
  std::vector<Action> next_actions_;
  std::vector<Step> steps_;
  std::vector<std::size_t> trajectory_begin_;
  double max_abs_reward_ = 0.0;
};

}  // namespace ggq
