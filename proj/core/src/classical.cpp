#include "ggq/classical.hpp"

#include "ggq/errors.hpp"
#include "ggq/features.hpp"
#include "ggq/text_format.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace ggq {

int VariableBins::bin(double x) const {
  if (edges.empty()) return static_cast<int>(std::lround(x));
  const auto below = std::lower_bound(edges.begin(), edges.end(), x) - edges.begin();
  return 1 + static_cast<int>(below);
}

VariableBins DiscretizerSpec::a1c_bins() { return {"a1c", {7.0, 7.2, 7.5, 7.7, 8.0, 9.0}}; }

DiscretizerSpec DiscretizerSpec::classical(const Dataset& data) {
  const auto& schema = data.schema();
  const auto bp = schema.index_of("bp");
  const auto weight = schema.index_of("weight");
  std::vector<double> bp_values, weight_values;
  for (const auto& traj : data.trajectories())
    for (const auto& step : traj.steps)
      if (!step.s.is_absorbing()) {
        bp_values.push_back(step.s[bp]);
        weight_values.push_back(step.s[weight]);
      }
  if (bp_values.empty()) throw ConfigError("classical discretizer: dataset has no live states");
  auto cuts = [](std::vector<double>& v) {
    return std::vector<double>{empirical_quantile(v, 0.30), empirical_quantile(v, 0.80)};
  };
  return DiscretizerSpec{{{"nat", {}}, {"d", {}}, {"bp", cuts(bp_values)}, {"weight", cuts(weight_values)},
                          a1c_bins()}};
}

DiscretizerSpec DiscretizerSpec::oracle() { return DiscretizerSpec{{{"nat", {}}, {"d", {}}, a1c_bins()}}; }

std::string DiscreteState::to_string() const {
  if (absorbing) return "absorbing";
  std::string out = "(";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out + ")";
}

Discretizer::Discretizer(DiscretizerSpec spec, const StateSchema& schema) : spec_(std::move(spec)) {
  std::vector<std::string> problems;
  for (const auto& var : spec_.variables) {
    if (!std::is_sorted(var.edges.begin(), var.edges.end()) ||
        std::adjacent_find(var.edges.begin(), var.edges.end()) != var.edges.end())
      problems.push_back("edges of '" + var.name + "' are not strictly increasing");
    if (!schema.contains(var.name)) {
      problems.push_back("state has no component '" + var.name + "'");
      continue;
    }
    columns_.push_back(schema.index_of(var.name));
  }
  if (!problems.empty()) {
    std::string msg = "discretizer:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ConfigError(msg);
  }
}

DiscreteState Discretizer::operator()(const State& s) const {
  DiscreteState out;
  if (s.is_absorbing()) {
    out.absorbing = true;
    return out;
  }
  out.values.reserve(columns_.size());
  for (std::size_t i = 0; i < columns_.size(); ++i) out.values.push_back(spec_.variables[i].bin(s[columns_[i]]));
  return out;
}

DiscreteState discretize(const Discretizer& discretizer, const State& s) { return discretizer(s); }

// ---------------------------------------------------------------------------

TransitionModel::TransitionModel() {
  DiscreteState absorbing;
  absorbing.absorbing = true;
  intern(absorbing);
  rows_[0].push_back(ActionRow{kNoAction, 1.0, {Outcome{0, 1.0, 0.0}}});
}

std::optional<int> TransitionModel::find(const DiscreteState& s) const {
  auto it = index_.find(s);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int TransitionModel::intern(const DiscreteState& s) {
  auto [it, inserted] = index_.try_emplace(s, static_cast<int>(states_.size()));
  if (inserted) {
    states_.push_back(s);
    rows_.emplace_back();
    feasible_.emplace_back();
  }
  return it->second;
}

void TransitionModel::record(int state, Action a, int next, double reward) {
  if (state == 0) return;  // the absorbing self-loop is fixed
  auto& rows = rows_[static_cast<std::size_t>(state)];
  auto row = std::lower_bound(rows.begin(), rows.end(), a,
                              [](const ActionRow& r, Action code) { return r.action < code; });
  if (row == rows.end() || row->action != a) row = rows.insert(row, ActionRow{a, 0.0, {}});
  row->total += 1.0;
  auto out = std::find_if(row->outcomes.begin(), row->outcomes.end(),
                          [next](const Outcome& o) { return o.next == next; });
  if (out == row->outcomes.end()) {
    row->outcomes.push_back(Outcome{next, 0.0, 0.0});
    out = row->outcomes.end() - 1;
  }
  out->count += 1.0;
  out->reward_sum += reward;
}

void TransitionModel::declare_feasible(int state, const std::vector<Action>& actions) {
  auto& f = feasible_[static_cast<std::size_t>(state)];
  for (Action a : actions)
    if (std::find(f.begin(), f.end(), a) == f.end()) f.push_back(a);
  std::sort(f.begin(), f.end());
}

double TransitionModel::probability(int state, Action a, int next) const {
  for (const auto& row : rows(state)) {
    if (row.action != a) continue;
    for (const auto& o : row.outcomes)
      if (o.next == next) return o.count / row.total;
    return 0.0;
  }
  return 0.0;
}

std::vector<TransitionModel::MissingPair> TransitionModel::coverage_report() const {
  std::vector<MissingPair> missing;
  for (std::size_t s = 1; s < states_.size(); ++s)
    for (Action a : feasible_[s]) {
      const auto& rows = rows_[s];
      bool seen = std::any_of(rows.begin(), rows.end(), [a](const ActionRow& r) { return r.action == a; });
      if (!seen) missing.push_back({states_[s], a});
    }
  return missing;
}

TransitionModel estimate_transitions(const Dataset& data, const Discretizer& discretizer,
                                     const FeasibleRule& feasible) {
  TransitionModel model;
  for (const auto& traj : data.trajectories())
    for (const auto& step : traj.steps) {
      if (step.s.is_absorbing()) continue;
      const int s = model.intern(discretizer(step.s));
      const int next = model.intern(discretizer(step.next));
      model.record(s, step.a, next, step.reward);
      if (feasible) {
        model.declare_feasible(s, feasible(step.s));
        if (!step.next.is_absorbing()) model.declare_feasible(next, feasible(step.next));
      }
    }
  return model;
}

// ---------------------------------------------------------------------------

std::optional<double> QTable::value(int state, Action a) const {
  for (const auto& [code, v] : values[static_cast<std::size_t>(state)])
    if (code == a) return v;
  return std::nullopt;
}

double QTable::state_value(int state) const {
  const auto& row = values[static_cast<std::size_t>(state)];
  if (row.empty()) return 0.0;
  double best = row.front().second;
  for (const auto& [code, v] : row) best = std::max(best, v);
  return best;
}

QTable value_iteration(const TransitionModel& model, double gamma, double epsilon, int max_iterations) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("value iteration: gamma must lie in (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("value iteration: epsilon must be positive");
  const int n = model.state_count();

  QTable q;
  q.values.resize(static_cast<std::size_t>(n));
  for (int s = 1; s < n; ++s)
    for (const auto& row : model.rows(s)) q.values[static_cast<std::size_t>(s)].emplace_back(row.action, 0.0);
  // The absorbing state keeps no action values, so its state value is 0.

  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  auto next_values = q.values;
  for (int it = 1; it <= max_iterations; ++it) {
    for (int s = 0; s < n; ++s) v[static_cast<std::size_t>(s)] = q.state_value(s);
    double change = 0.0;
    for (int s = 1; s < n; ++s) {
      const auto& rows = model.rows(s);
      auto& out = next_values[static_cast<std::size_t>(s)];
      for (std::size_t r = 0; r < rows.size(); ++r) {
        double acc = 0.0;
        for (const auto& o : rows[r].outcomes)
          acc += o.reward_sum + o.count * gamma * v[static_cast<std::size_t>(o.next)];
        const double updated = acc / rows[r].total;
        change = std::max(change, std::abs(updated - out[r].second));
        out[r].second = updated;
      }
    }
    std::swap(q.values, next_values);
    next_values = q.values;
    q.iterations = it;
    q.final_change = change;
    q.changes.push_back(change);
    if (change < epsilon) break;
  }
  return q;
}

// ---------------------------------------------------------------------------

TabularPolicy::TabularPolicy(Discretizer discretizer, std::map<DiscreteState, Action> table,
                             std::optional<Action> fallback)
    : discretizer_(std::move(discretizer)), table_(std::move(table)), fallback_(fallback) {}

Action TabularPolicy::action(const State& s) const {
  if (s.is_absorbing()) throw DomainError("tabular policy: no decision in the absorbing state");
  return action(discretizer_(s));
}

Action TabularPolicy::action(const DiscreteState& s) const {
  auto it = table_.find(s);
  if (it != table_.end()) return it->second;
  if (fallback_) return *fallback_;
  throw DomainError("tabular policy: no action values for state " + s.to_string());
}

std::map<DiscreteState, Action> greedy_table(const TransitionModel& model, const QTable& q) {
  std::map<DiscreteState, Action> table;
  for (int s = 1; s < model.state_count(); ++s) {
    const auto& row = q.values[static_cast<std::size_t>(s)];
    if (row.empty()) continue;
    auto best = row.front();
    for (const auto& entry : row)
      if (entry.second > best.second) best = entry;  // rows are in ascending code order
    table.emplace(model.state(s), best.first);
  }
  return table;
}

TabularPolicy policy_from_q(const TransitionModel& model, const QTable& q, const Discretizer& discretizer) {
  return TabularPolicy(discretizer, greedy_table(model, q));
}

namespace {

Eigen::VectorXd solve_markov_chain(const TransitionModel& model, double gamma,
                                   const std::vector<std::vector<std::pair<std::size_t, double>>>& mix) {
  const int n = model.state_count();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int s = 1; s < n; ++s) {
    for (const auto& [r, weight] : mix[static_cast<std::size_t>(s)]) {
      const auto& row = model.rows(s)[r];
      for (const auto& o : row.outcomes) {
        const double p = weight * o.count / row.total;
        b[s] += weight * o.reward_sum / row.total;
        if (o.next != 0) a(s, o.next) -= gamma * p;
      }
    }
  }
  return a.partialPivLu().solve(b);
}

}  // namespace

Eigen::VectorXd evaluate_policy(const TransitionModel& model, const std::vector<Action>& choice, double gamma) {
  if (choice.size() != static_cast<std::size_t>(model.state_count()))
    throw ConfigError("evaluate_policy: one action per discrete state is required");
  std::vector<std::vector<std::pair<std::size_t, double>>> mix(choice.size());
  for (int s = 1; s < model.state_count(); ++s) {
    const auto& rows = model.rows(s);
    if (rows.empty()) continue;
    auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.action == choice[s]; });
    if (it == rows.end())
      throw DomainError("evaluate_policy: action " + std::to_string(choice[s]) + " unobserved in state " +
                        model.state(s).to_string());
    mix[static_cast<std::size_t>(s)].emplace_back(static_cast<std::size_t>(it - rows.begin()), 1.0);
  }
  return solve_markov_chain(model, gamma, mix);
}

Eigen::VectorXd evaluate_uniform_policy(const TransitionModel& model, double gamma) {
  std::vector<std::vector<std::pair<std::size_t, double>>> mix(static_cast<std::size_t>(model.state_count()));
  for (int s = 1; s < model.state_count(); ++s) {
    const auto k = model.rows(s).size();
    for (std::size_t r = 0; r < k; ++r) mix[static_cast<std::size_t>(s)].emplace_back(r, 1.0 / static_cast<double>(k));
  }
  return solve_markov_chain(model, gamma, mix);
}

// ---------------------------------------------------------------------------

namespace {

std::string state_fields(const DiscreteState& s) {
  if (s.absorbing) return "absorbing";
  std::string out;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(s.values[i]);
  }
  return out;
}

DiscreteState parse_state_field(std::string_view text) {
  DiscreteState s;
  text = trim(text);
  if (text == "absorbing") {
    s.absorbing = true;
    return s;
  }
  for (auto part : split_fields(text, ' '))
    if (!trim(part).empty()) s.values.push_back(static_cast<int>(parse_integer(trim(part))));
  return s;
}

}  // namespace

ClassicalFit fit_classical(const Dataset& data, DiscretizerSpec spec, double gamma, const FeasibleRule& feasible) {
  ClassicalFit out;
  out.discretizer = std::move(spec);
  const Discretizer disc(out.discretizer, data.schema());
  out.model = estimate_transitions(data, disc, feasible);
  out.q = value_iteration(out.model, gamma);
  out.policy = greedy_table(out.model, out.q);
  out.missing = out.model.coverage_report();
  return out;
}

void write_qtable(const TransitionModel& model, const QTable& q, std::ostream& out) {
  out << "state,action,q\n";
  for (int s = 1; s < model.state_count(); ++s)
    for (const auto& [a, v] : q.values[static_cast<std::size_t>(s)])
      out << state_fields(model.state(s)) << ',' << a << ',' << format_double(v) << '\n';
}

void write_transitions(const TransitionModel& model, std::ostream& out) {
  out << "state,action,next,count,probability,mean_reward\n";
  for (int s = 1; s < model.state_count(); ++s)
    for (const auto& row : model.rows(s))
      for (const auto& o : row.outcomes)
        out << state_fields(model.state(s)) << ',' << row.action << ',' << state_fields(model.state(o.next)) << ','
            << format_double(o.count) << ',' << format_double(o.count / row.total) << ','
            << format_double(o.reward_sum / o.count) << '\n';
}

void write_policy(const std::map<DiscreteState, Action>& table, std::ostream& out) {
  out << "state,action\n";
  for (const auto& [s, a] : table) out << state_fields(s) << ',' << a << '\n';
}

std::map<DiscreteState, Action> read_policy(std::istream& in) {
  std::map<DiscreteState, Action> table;
  std::string line;
  if (!std::getline(in, line) || trim(line) != "state,action") throw ParseError("policy table: missing header");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 2) throw ParseError("policy table line " + std::to_string(line_no) + ": expected 2 fields");
    table[parse_state_field(fields[0])] = static_cast<Action>(parse_integer(trim(fields[1])));
  }
  return table;
}

std::string discretizer_to_json(const DiscretizerSpec& spec) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& v : spec.variables) j.push_back({{"name", v.name}, {"edges", v.edges}});
  return nlohmann::json{{"variables", j}}.dump(2);
}

DiscretizerSpec discretizer_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    DiscretizerSpec spec;
    for (const auto& v : j.at("variables"))
      spec.variables.push_back({v.at("name").get<std::string>(), v.at("edges").get<std::vector<double>>()});
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("discretizer spec: ") + e.what());
  }
}

}  // namespace ggq
