#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ggq {

/// Treatment code. 0 continues the current treatment; k > 0 augments with
/// treatment k. kNoAction is the only action available in the absorbing state.
using Action = int;
inline constexpr Action kNoAction = -1;

/// A decision-point state: either the absorbing (post-death) state or a
/// fixed-arity vector of components described by a StateSchema.
class State {
 public:
  State() = default;  // absorbing
  explicit State(std::vector<double> components);

  static State absorbing() { return State{}; }

  bool is_absorbing() const noexcept { return absorbing_; }
  std::size_t size() const noexcept { return components_.size(); }
  double operator[](std::size_t i) const { return components_[i]; }
  std::span<const double> components() const noexcept { return components_; }

  friend bool operator==(const State&, const State&) = default;

 private:
  bool absorbing_ = true;
  std::vector<double> components_;
};

enum class ComponentKind { kInteger, kReal };

/// Names and kinds of the state components.
struct StateSchema {
  std::vector<std::string> names;
  std::vector<ComponentKind> kinds;

  std::size_t size() const noexcept { return names.size(); }
  /// Index of a named component; throws ConfigError when absent.
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const;

  /// (nat, d, a1c, bp, weight)
  static StateSchema diabetes();

  friend bool operator==(const StateSchema&, const StateSchema&) = default;
};

/// One observed step: action a taken in s, reward r_next received on the way
/// to s_next.
struct Transition {
  State s;
  Action a = kNoAction;
  double reward = 0.0;
  State next;
  int t = 0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct Trajectory {
  std::string id;
  std::vector<Transition> steps;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Immutable collection of n trajectories sharing one schema and horizon.
/// Construction validates chaining, absorbing closure and time indices.
class Dataset {
 public:
  Dataset() = default;
  Dataset(StateSchema schema, std::vector<Trajectory> trajectories);

  const StateSchema& schema() const noexcept { return schema_; }
  const std::vector<Trajectory>& trajectories() const noexcept { return trajectories_; }
  std::size_t size() const noexcept { return trajectories_.size(); }
  bool empty() const noexcept { return trajectories_.empty(); }
  /// Maximal number of decision points T (0 for an empty dataset).
  int horizon() const noexcept { return horizon_; }
  /// Number of transitions whose source state is not absorbing.
  std::size_t live_transitions() const;

  /// Drops the first `count` decision points of every trajectory and
  /// re-indexes t from zero.
  Dataset drop_leading(int count) const;
  /// First `count` trajectories.
  Dataset head(std::size_t count) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  StateSchema schema_;
  std::vector<Trajectory> trajectories_;
  int horizon_ = 0;
};

/// Throws ParseError naming the subject and step when the trajectory breaks
/// chaining, absorbing closure or the t = 0..T-1 indexing.
void validate_trajectory(const Trajectory& trajectory, std::size_t arity);

/// Linear action-value features phi(s, a) together with the feasible action
/// rule. phi(absorbing, .) is identically zero.
class FeatureMap {
 public:
  virtual ~FeatureMap() = default;

  virtual Eigen::Index dimension() const = 0;
  /// Feasible actions in ascending code order; {kNoAction} when absorbing.
  virtual std::vector<Action> feasible_actions(const State& s) const = 0;
  /// Writes phi(s, a) into `out` (length dimension()).
  virtual void features_into(const State& s, Action a, Eigen::Ref<Eigen::VectorXd> out) const = 0;

  Eigen::VectorXd features(const State& s, Action a) const;
  bool is_feasible(const State& s, Action a) const;
};

/// R + gamma * max_a' theta'phi(s', a') - theta'phi(s, a).
double td_error(const Eigen::VectorXd& theta, const Transition& tr, double gamma,
                const FeatureMap& fmap);

/// max_a theta'phi(s, a); zero in the absorbing state.
double max_action_value(const Eigen::VectorXd& theta, const State& s, const FeatureMap& fmap);

/// argmax_a theta'phi(s, a) with ties going to the lowest action code.
/// Throws DomainError for the absorbing state.
Action greedy_action(const Eigen::VectorXd& theta, const State& s, const FeatureMap& fmap);

/// For action values a and a perturbation b of equal length, `excess` is
/// max_i (a_i + b_i) - max_{i in argmax a} (a_i + b_i) and `bound` is
/// max_i b_i - max_{i in argmax a} b_i. The argmax set is exact (no
/// tolerance); 0 <= excess <= bound always holds.
struct PerturbationGap {
  double excess = 0.0;
  double bound = 0.0;
};
PerturbationGap greedy_perturbation_gap(std::span<const double> a, std::span<const double> b);

/// Deterministic decision rule over states.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action action(const State& s) const = 0;
};

/// pi(s) = argmax_a theta'phi(s, a).
class GreedyPolicy final : public Policy {
 public:
  GreedyPolicy(const FeatureMap& fmap, Eigen::VectorXd theta);

  Action action(const State& s) const override;
  const Eigen::VectorXd& theta() const noexcept { return theta_; }
  const FeatureMap& feature_map() const noexcept { return *fmap_; }

 private:
  const FeatureMap* fmap_;
  Eigen::VectorXd theta_;
};

}  // namespace ggq
