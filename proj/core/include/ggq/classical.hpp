#pragma once

#include "ggq/mdp.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ggq {

/// Cut points for one state component. Bins are left-open/right-closed with
/// the edges as right end points and 1-based labels: x <= e1 is bin 1,
/// e1 < x <= e2 is bin 2, ..., x > e_last is bin edges.size()+1. An empty
/// edge list passes an integer-valued component through unchanged.
struct VariableBins {
  std::string name;
  std::vector<double> edges;

  int bin(double x) const;
  friend bool operator==(const VariableBins&, const VariableBins&) = default;
};

struct DiscretizerSpec {
  std::vector<VariableBins> variables;

  /// A1c cut at (7, 7.2, 7.5, 7.7, 8, 9).
  static VariableBins a1c_bins();
  /// (NAT, D, Cat.BP, Cat.Weight, Cat.A1c), BP and Weight cut at their
  /// empirical 30th and 80th percentiles over live states of `data`.
  static DiscretizerSpec classical(const Dataset& data);
  /// (NAT, D, Cat.A1c).
  static DiscretizerSpec oracle();

  friend bool operator==(const DiscretizerSpec&, const DiscretizerSpec&) = default;
};

/// Discrete state label; `absorbing` has an empty value list.
struct DiscreteState {
  bool absorbing = false;
  std::vector<int> values;

  auto operator<=>(const DiscreteState&) const = default;
  std::string to_string() const;
};

class Discretizer {
 public:
  Discretizer(DiscretizerSpec spec, const StateSchema& schema);

  DiscreteState operator()(const State& s) const;
  const DiscretizerSpec& spec() const noexcept { return spec_; }

 private:
  DiscretizerSpec spec_;
  std::vector<std::size_t> columns_;
};

DiscreteState discretize(const Discretizer& discretizer, const State& s);

/// Empirical kernel P-hat(s'|s,a) and mean rewards r-bar(s,a,s') over discrete
/// states. State 0 is the absorbing state, which self-loops with probability 1.
class TransitionModel {
 public:
  struct Outcome {
    int next = 0;
    double count = 0.0;
    double reward_sum = 0.0;
  };
  struct ActionRow {
    Action action = kNoAction;
    double total = 0.0;
    std::vector<Outcome> outcomes;
  };
  struct MissingPair {
    DiscreteState state;
    Action action;
  };

  TransitionModel();

  int state_count() const noexcept { return static_cast<int>(states_.size()); }
  const DiscreteState& state(int index) const { return states_[static_cast<std::size_t>(index)]; }
  std::optional<int> find(const DiscreteState& s) const;
  int intern(const DiscreteState& s);

  /// Observed actions of a state in ascending code order.
  const std::vector<ActionRow>& rows(int state) const { return rows_[static_cast<std::size_t>(state)]; }
  void record(int state, Action a, int next, double reward);
  /// Declares the feasible action set of a discrete state (for coverage).
  void declare_feasible(int state, const std::vector<Action>& actions);

  double probability(int state, Action a, int next) const;
  /// Feasible (s, a) pairs never observed.
  std::vector<MissingPair> coverage_report() const;

 private:
  std::vector<DiscreteState> states_;
  std::map<DiscreteState, int> index_;
  std::vector<std::vector<ActionRow>> rows_;
  std::vector<std::vector<Action>> feasible_;
};

/// Feasible-action rule used for the coverage report.
using FeasibleRule = std::function<std::vector<Action>(const State&)>;

TransitionModel estimate_transitions(const Dataset& data, const Discretizer& discretizer,
                                     const FeasibleRule& feasible = {});

struct QTable {
  /// Per discrete state, (action, value) for observed actions only.
  std::vector<std::vector<std::pair<Action, double>>> values;
  int iterations = 0;
  double final_change = 0.0;
  /// Sup-norm change of each iteration.
  std::vector<double> changes;

  std::optional<double> value(int state, Action a) const;
  /// max over defined actions; 0 for states without any.
  double state_value(int state) const;
};

/// Synchronous action-value iteration from Q = 0 until the sup-norm change
/// drops below epsilon. Next states without any observed action (seen only at
/// the end of follow-up) contribute value 0.
QTable value_iteration(const TransitionModel& model, double gamma, double epsilon = 1e-8,
                       int max_iterations = 10000);

/// Deterministic tabular policy over discrete states.
class TabularPolicy final : public Policy {
 public:
  TabularPolicy(Discretizer discretizer, std::map<DiscreteState, Action> table,
                std::optional<Action> fallback = std::nullopt);

  Action action(const State& s) const override;
  /// Action for a discrete state; throws DomainError naming the state when
  /// the table has no entry and no fallback is set.
  Action action(const DiscreteState& s) const;
  bool covers(const DiscreteState& s) const { return table_.contains(s); }
  const std::map<DiscreteState, Action>& table() const noexcept { return table_; }
  const Discretizer& discretizer() const noexcept { return discretizer_; }
  void set_fallback(std::optional<Action> fallback) { fallback_ = fallback; }

 private:
  Discretizer discretizer_;
  std::map<DiscreteState, Action> table_;
  std::optional<Action> fallback_;
};

/// argmax_a Q(s, a) per live state with observed actions, lowest code on ties.
std::map<DiscreteState, Action> greedy_table(const TransitionModel& model, const QTable& q);
TabularPolicy policy_from_q(const TransitionModel& model, const QTable& q, const Discretizer& discretizer);

/// Value of a deterministic policy on the estimated model by a direct linear
/// solve of V = r_pi + gamma P_pi V. `choice[s]` must be an observed action
/// of s; states without observed actions have value 0.
Eigen::VectorXd evaluate_policy(const TransitionModel& model, const std::vector<Action>& choice, double gamma);
/// Same for the uniform mixture over observed actions.
Eigen::VectorXd evaluate_uniform_policy(const TransitionModel& model, double gamma);

/// The whole classical pipeline on one dataset: discretize, estimate the
/// kernel, run value iteration, take the greedy table.
struct ClassicalFit {
  DiscretizerSpec discretizer;
  TransitionModel model;
  QTable q;
  std::map<DiscreteState, Action> policy;
  std::vector<TransitionModel::MissingPair> missing;
};
ClassicalFit fit_classical(const Dataset& data, DiscretizerSpec spec, double gamma,
                           const FeasibleRule& feasible = {});

void write_qtable(const TransitionModel& model, const QTable& q, std::ostream& out);
void write_transitions(const TransitionModel& model, std::ostream& out);
void write_policy(const std::map<DiscreteState, Action>& table, std::ostream& out);

std::string discretizer_to_json(const DiscretizerSpec& spec);
DiscretizerSpec discretizer_from_json(const std::string& text);
std::map<DiscreteState, Action> read_policy(std::istream& in);

}  // namespace ggq
