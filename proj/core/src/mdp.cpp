#include "ggq/mdp.hpp"

#include "ggq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ggq {

State::State(std::vector<double> components)
    : absorbing_(false), components_(std::move(components)) {}

std::size_t StateSchema::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("state schema has no component '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

bool StateSchema::contains(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

StateSchema StateSchema::diabetes() {
  return {{"nat", "d", "a1c", "bp", "weight"},
          {ComponentKind::kInteger, ComponentKind::kInteger, ComponentKind::kReal,
           ComponentKind::kReal, ComponentKind::kReal}};
}

namespace {

[[noreturn]] void schema_violation(const Trajectory& tr, int t, const std::string& what) {
  std::ostringstream os;
  os << "subject '" << tr.id << "', t=" << t << ": " << what;
  throw ParseError(os.str());
}

void check_state(const Trajectory& tr, int t, const State& s, std::size_t arity) {
  if (s.is_absorbing()) return;
  if (s.size() != arity) schema_violation(tr, t, "state arity does not match schema");
  for (double v : s.components())
    if (!std::isfinite(v)) schema_violation(tr, t, "non-finite state component");
}

}  // namespace

void validate_trajectory(const Trajectory& tr, std::size_t arity) {
  for (std::size_t i = 0; i < tr.steps.size(); ++i) {
    const Transition& step = tr.steps[i];
    const int t = static_cast<int>(i);
    if (step.t != t) schema_violation(tr, step.t, "decision index out of sequence");
    check_state(tr, t, step.s, arity);
    check_state(tr, t, step.next, arity);
    if (!std::isfinite(step.reward)) schema_violation(tr, t, "non-finite reward");
    if (step.s.is_absorbing()) {
      if (step.a != kNoAction) schema_violation(tr, t, "action recorded in absorbing state");
      if (step.reward != 0.0) schema_violation(tr, t, "non-zero reward after absorption");
      if (!step.next.is_absorbing()) schema_violation(tr, t, "activity after absorption");
    } else if (step.a < 0) {
      schema_violation(tr, t, "unknown action code");
    }
    if (i + 1 < tr.steps.size() && !(step.next == tr.steps[i + 1].s))
      schema_violation(tr, t, "next state does not chain into t+1");
  }
}

Dataset::Dataset(StateSchema schema, std::vector<Trajectory> trajectories)
    : schema_(std::move(schema)), trajectories_(std::move(trajectories)) {
  if (schema_.names.size() != schema_.kinds.size())
    throw ConfigError("state schema names and kinds differ in length");
  if (!trajectories_.empty()) horizon_ = static_cast<int>(trajectories_.front().steps.size());
  for (const auto& tr : trajectories_) {
    if (static_cast<int>(tr.steps.size()) != horizon_)
      throw ParseError("subject '" + tr.id + "': trajectory length " +
                       std::to_string(tr.steps.size()) + " differs from T=" +
                       std::to_string(horizon_));
    validate_trajectory(tr, schema_.size());
  }
}

std::size_t Dataset::live_transitions() const {
  std::size_t count = 0;
  for (const auto& tr : trajectories_)
    for (const auto& step : tr.steps)
      if (!step.s.is_absorbing()) ++count;
  return count;
}

Dataset Dataset::drop_leading(int count) const {
  if (count < 0) throw ConfigError("burn_in must be non-negative");
  if (count == 0) return *this;
  if (count > horizon_ && !trajectories_.empty())
    throw ConfigError("burn_in exceeds trajectory horizon");
  std::vector<Trajectory> out;
  out.reserve(trajectories_.size());
  for (const auto& tr : trajectories_) {
    Trajectory kept{tr.id, {}};
    kept.steps.assign(tr.steps.begin() + count, tr.steps.end());
    for (std::size_t i = 0; i < kept.steps.size(); ++i) kept.steps[i].t = static_cast<int>(i);
    out.push_back(std::move(kept));
  }
  return Dataset(schema_, std::move(out));
}

Dataset Dataset::head(std::size_t count) const {
  count = std::min(count, trajectories_.size());
  return Dataset(schema_, std::vector<Trajectory>(trajectories_.begin(),
                                                  trajectories_.begin() + static_cast<std::ptrdiff_t>(count)));
}

Eigen::VectorXd FeatureMap::features(const State& s, Action a) const {
  Eigen::VectorXd out(dimension());
  features_into(s, a, out);
  return out;
}

bool FeatureMap::is_feasible(const State& s, Action a) const {
  const auto actions = feasible_actions(s);
  return std::find(actions.begin(), actions.end(), a) != actions.end();
}

namespace {

void check_dimension(const Eigen::VectorXd& theta, const FeatureMap& fmap) {
  if (theta.size() != fmap.dimension())
    throw ConfigError("parameter length " + std::to_string(theta.size()) +
                      " does not match feature dimension " + std::to_string(fmap.dimension()));
}

}  // namespace

double max_action_value(const Eigen::VectorXd& theta, const State& s, const FeatureMap& fmap) {
  check_dimension(theta, fmap);
  if (s.is_absorbing()) return 0.0;
  Eigen::VectorXd phi(fmap.dimension());
  double best = -std::numeric_limits<double>::infinity();
  for (Action a : fmap.feasible_actions(s)) {
    fmap.features_into(s, a, phi);
    best = std::max(best, theta.dot(phi));
  }
  return best;
}

double td_error(const Eigen::VectorXd& theta, const Transition& tr, double gamma,
                const FeatureMap& fmap) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
  check_dimension(theta, fmap);
  if (tr.s.is_absorbing()) return 0.0;
  const double current = theta.dot(fmap.features(tr.s, tr.a));
  return tr.reward + gamma * max_action_value(theta, tr.next, fmap) - current;
}

Action greedy_action(const Eigen::VectorXd& theta, const State& s, const FeatureMap& fmap) {
  check_dimension(theta, fmap);
  if (s.is_absorbing()) throw DomainError("greedy action requested for the absorbing state");
  Eigen::VectorXd phi(fmap.dimension());
  Action best_action = kNoAction;
  double best = -std::numeric_limits<double>::infinity();
  for (Action a : fmap.feasible_actions(s)) {
    fmap.features_into(s, a, phi);
    const double v = theta.dot(phi);
    if (best_action == kNoAction || v > best) {
      best = v;
      best_action = a;
    }
  }
  if (best_action == kNoAction) throw DomainError("state has no feasible action");
  return best_action;
}

GreedyPolicy::GreedyPolicy(const FeatureMap& fmap, Eigen::VectorXd theta)
    : fmap_(&fmap), theta_(std::move(theta)) {
  check_dimension(theta_, fmap);
}

Action GreedyPolicy::action(const State& s) const { return greedy_action(theta_, s, *fmap_); }

PerturbationGap greedy_perturbation_gap(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ConfigError("perturbation gap needs two non-empty vectors of equal length");
  const double top = *std::max_element(a.begin(), a.end());
  double all_sum = -std::numeric_limits<double>::infinity(), arg_sum = all_sum;
  double all_b = all_sum, arg_b = all_sum;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_sum = std::max(all_sum, a[i] + b[i]);
    all_b = std::max(all_b, b[i]);
    if (a[i] == top) {
      arg_sum = std::max(arg_sum, a[i] + b[i]);
      arg_b = std::max(arg_b, b[i]);
    }
  }
  return {all_sum - arg_sum, all_b - arg_b};
}

}  // namespace ggq
