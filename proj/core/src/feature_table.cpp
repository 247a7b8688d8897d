#include "ggq/feature_table.hpp"

#include "ggq/errors.hpp"

#include <cmath>
#include <limits>

namespace ggq {

void SparseColumns::push_back(const Eigen::VectorXd& dense) {
  for (Eigen::Index i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      index_.push_back(i);
      value_.push_back(dense[i]);
    }
  }
  start_.push_back(index_.size());
}

void SparseColumns::add_outer(std::size_t a, const SparseColumns& other, std::size_t b, double alpha,
                              Eigen::MatrixXd& m) const {
  for (auto i = start_[a]; i < start_[a + 1]; ++i) {
    const double left = alpha * value_[i];
    for (auto k = other.start_[b]; k < other.start_[b + 1]; ++k)
      m(index_[i], other.index_[k]) += left * other.value_[k];
  }
}

Eigen::VectorXd SparseColumns::dense(std::size_t col) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rows_);
  for (auto i = start_[col]; i < start_[col + 1]; ++i) out[index_[i]] = value_[i];
  return out;
}

FeatureTable::FeatureTable(const Dataset& data, const FeatureMap& fmap)
    : current_(fmap.dimension()), next_(fmap.dimension()) {
  const Eigen::Index p = fmap.dimension();
  Eigen::VectorXd phi(p);
  trajectory_begin_.push_back(0);
  for (const auto& tr : data.trajectories()) {
    for (const auto& step : tr.steps) {
      if (step.s.is_absorbing()) continue;
      if (!fmap.is_feasible(step.s, step.a))
        throw DomainError("subject '" + tr.id + "', t=" + std::to_string(step.t) + ": action " +
                          std::to_string(step.a) + " is not feasible");
      fmap.features_into(step.s, step.a, phi);
      current_.push_back(phi);
      const auto begin = static_cast<std::uint32_t>(next_actions_.size());
      if (!step.next.is_absorbing()) {
        for (Action a : fmap.feasible_actions(step.next)) {
          fmap.features_into(step.next, a, phi);
          next_.push_back(phi);
          next_actions_.push_back(a);
        }
      }
      steps_.push_back({step.reward, begin, static_cast<std::uint32_t>(next_actions_.size())});
      max_abs_reward_ = std::max(max_abs_reward_, std::abs(step.reward));
    }
    trajectory_begin_.push_back(steps_.size());
  }
}

long FeatureTable::greedy_next(std::size_t j, const Eigen::VectorXd& theta, double& value) const {
  const Step& s = steps_[j];
  long best = -1;
  value = 0.0;
  for (std::uint32_t c = s.next_begin; c < s.next_end; ++c) {
    const double v = next_.dot(c, theta);
    if (best < 0 || v > value) {
      value = v;
      best = c;
    }
  }
  return best;
}

double FeatureTable::min_greedy_gap(std::size_t j, const Eigen::VectorXd& theta) const {
  const Step& s = steps_[j];
  if (s.next_end - s.next_begin < 2) return std::numeric_limits<double>::infinity();
  double first = -std::numeric_limits<double>::infinity(), second = first;
  for (std::uint32_t c = s.next_begin; c < s.next_end; ++c) {
    const double v = next_.dot(c, theta);
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

}  // namespace ggq
