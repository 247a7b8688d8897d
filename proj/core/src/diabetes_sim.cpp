#include "ggq/diabetes_sim.hpp"

#include "ggq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace ggq {

std::string_view to_string(RewardRule rule) { return rule == RewardRule::kMain ? "main" : "s4"; }

RewardRule reward_rule_from_string(std::string_view name) {
  if (name == "main") return RewardRule::kMain;
  if (name == "s4") return RewardRule::kS4;
  throw ConfigError("unknown reward rule '" + std::string(name) + "' (expected main or s4)");
}

void SimParams::validate() const {
  std::vector<std::string> bad;
  if (decision_points < 1) bad.push_back("decision_points must be >= 1");
  if (burn_in < 0 || burn_in >= decision_points) bad.push_back("burn_in must lie in [0, decision_points)");
  for (double p : discontinuation)
    if (!(p >= 0.0 && p <= 1.0)) bad.push_back("discontinuation probabilities must lie in [0,1]");
  for (double e : effects)
    if (!(e >= 0.0 && e < 1.0)) bad.push_back("treatment effects must lie in [0,1)");
  if (!(sigma_eps > 0.0)) bad.push_back("sigma_eps must be positive");
  if (!(behavior_low <= behavior_high)) bad.push_back("behavior_low must not exceed behavior_high");
  if (max_nat < 0 || max_nat > 4) bad.push_back("max_nat must lie in [0,4]");
  if (workers == 0) bad.push_back("workers must be >= 1");
  if (!bad.empty()) {
    std::string msg = "invalid simulation parameters:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw ConfigError(msg);
  }
}

State PatientState::observed() const {
  if (!alive) return State::absorbing();
  return State({static_cast<double>(nat), static_cast<double>(d), a1c, bp, weight});
}

StepNoise StepNoise::draw(std::mt19937_64& rng, double sigma_eps) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, sigma_eps);
  StepNoise n{};
  n.u_assign = unif(rng);
  n.u_discontinue = unif(rng);
  n.eps_a1c = normal(rng);
  n.eps_bp = normal(rng);
  n.eps_weight = normal(rng);
  n.u_death = unif(rng);
  return n;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::mt19937_64 subject_stream(std::uint64_t seed, std::uint64_t subject) {
  std::uint64_t state = seed;
  const std::uint64_t a = splitmix64(state);
  state = a ^ (subject * 0xd1b54a32d192ed03ULL);
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(state)), static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state)), static_cast<std::uint32_t>(splitmix64(state))};
  return std::mt19937_64(seq);
}

PatientState draw_baseline(const SimParams& params, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  PatientState s;
  s.bp = params.baseline_mean[0] + normal(rng);
  s.weight = params.baseline_mean[1] + normal(rng);
  s.a1c = params.baseline_mean[2] + normal(rng);
  s.mu = params.baseline_mean[2];
  return s;
}

std::vector<Action> feasible_actions(const SimParams& params, const PatientState& s) {
  if (!s.alive) return {kNoAction};
  if (s.nat < params.max_nat) return {0, s.nat + 1};
  return {0};
}

Action behavior_action(const SimParams& params, const PatientState& s, const StepNoise& noise) {
  if (s.nat >= params.max_nat || s.a1c <= params.behavior_low) return 0;
  if (s.a1c >= params.behavior_high) return s.nat + 1;
  const double p_continue = logistic(params.assign_intercept + params.assign_a1c * s.a1c +
                                     params.assign_nat * s.nat + params.assign_d * s.d);
  return noise.u_assign < p_continue ? 0 : s.nat + 1;
}

StepOutcome step(const SimParams& params, const PatientState& s, Action a, const StepNoise& noise) {
  if (!s.alive) {
    if (a != kNoAction) throw DomainError("simulator: only the empty action is available after death");
    return {s, 0.0};
  }
  const bool augment = a != 0;
  if (a != 0 && (s.nat >= params.max_nat || a != s.nat + 1))
    throw DomainError("simulator: action " + std::to_string(a) + " is infeasible at NAT=" + std::to_string(s.nat));

  PatientState next = s;
  next.d = augment && noise.u_discontinue < params.discontinuation[static_cast<std::size_t>(a - 1)] ? 1 : 0;
  next.nat = s.nat + (augment ? 1 : 0);
  if (s.a1c > 7.0 && s.nat < params.max_nat && augment && next.d != 1)
    next.mu = s.mu * (1.0 - params.effects[static_cast<std::size_t>(a - 1)]);
  const double scale = std::sqrt(1.0 + params.sigma_eps * params.sigma_eps);
  next.a1c = (s.a1c - s.mu + noise.eps_a1c) / scale + next.mu;
  next.bp = (s.bp + noise.eps_bp) / scale;
  next.weight = (s.weight + noise.eps_weight) / scale;

  if (params.deaths_enabled()) {
    const double high = s.a1c > 7.0 ? s.a1c * s.a1c : 0.0;
    const double p_death = logistic(params.death_intercept + params.death_a1c * high + params.death_nat * s.nat);
    if (noise.u_death < p_death) {
      next.alive = false;
      return {next, -10.0};
    }
  }

  double reward = 0.0;
  if (next.a1c < 7.0)
    reward = 1.0;
  else if (next.a1c > 7.0 && next.d == 1)
    reward = params.reward == RewardRule::kMain ? -2.0 : -5.0;
  return {next, reward};
}

std::vector<PatientState> simulate_subject(const SimParams& params, std::size_t subject, std::vector<Action>* actions,
                                           std::vector<double>* rewards) {
  auto rng = subject_stream(params.seed, subject);
  std::vector<PatientState> states;
  states.reserve(static_cast<std::size_t>(params.decision_points) + 1);
  states.push_back(draw_baseline(params, rng));
  for (int t = 0; t < params.decision_points; ++t) {
    const auto noise = StepNoise::draw(rng, params.sigma_eps);
    const auto& s = states.back();
    const Action a = s.alive ? behavior_action(params, s, noise) : kNoAction;
    auto out = step(params, s, a, noise);
    if (actions) actions->push_back(a);
    if (rewards) rewards->push_back(out.reward);
    states.push_back(out.next);
  }
  return states;
}

namespace {

Trajectory subject_trajectory(const SimParams& params, std::size_t subject) {
  std::vector<Action> actions;
  std::vector<double> rewards;
  const auto states = simulate_subject(params, subject, &actions, &rewards);
  Trajectory traj;
  traj.id = std::to_string(subject + 1);
  for (int t = params.burn_in; t < params.decision_points; ++t) {
    const auto k = static_cast<std::size_t>(t);
    traj.steps.push_back(Transition{states[k].observed(), actions[k], rewards[k], states[k + 1].observed(),
                                    t - params.burn_in});
  }
  return traj;
}

template <class F>
void parallel_for(std::size_t count, unsigned workers, F&& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

Dataset simulate_cohort(const SimParams& params) {
  params.validate();
  std::vector<Trajectory> trajectories(params.n);
  parallel_for(params.n, params.workers, [&](std::size_t i) { trajectories[i] = subject_trajectory(params, i); });
  return Dataset(StateSchema::diabetes(), std::move(trajectories));
}

std::vector<PatientState> visited_states(const SimParams& params) {
  params.validate();
  std::vector<PatientState> out;
  for (std::size_t i = 0; i < params.n; ++i) {
    const auto states = simulate_subject(params, i);
    for (int t = params.burn_in; t < params.decision_points; ++t)
      if (states[static_cast<std::size_t>(t)].alive) out.push_back(states[static_cast<std::size_t>(t)]);
  }
  return out;
}

int rollout_horizon(double gamma, double tolerance) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("rollout horizon: gamma must lie in (0,1)");
  if (!(tolerance > 0.0 && tolerance < 1.0)) throw ConfigError("rollout horizon: tolerance must lie in (0,1)");
  int h = 0;
  double g = 1.0;
  while (g >= tolerance) {
    g *= gamma;
    ++h;
  }
  return h;
}

std::vector<double> rollout_policy(const SimParams& params, const Policy& policy,
                                   const std::vector<PatientState>& starts, int horizon, std::size_t reps,
                                   std::uint64_t seed, double gamma) {
  if (starts.empty()) throw ConfigError("rollout: no start states");
  if (horizon < 1) throw ConfigError("rollout: horizon must be >= 1");
  std::vector<double> returns(reps, 0.0);
  for (std::size_t r = 0; r < reps; ++r) {
    auto rng = subject_stream(seed, r);
    PatientState s = starts[r % starts.size()];
    double discount = 1.0, total = 0.0;
    for (int k = 0; k < horizon && s.alive; ++k) {
      const auto noise = StepNoise::draw(rng, params.sigma_eps);
      const Action a = policy.action(s.observed());
      const auto feasible = feasible_actions(params, s);
      if (std::find(feasible.begin(), feasible.end(), a) == feasible.end())
        throw DomainError("rollout: policy chose infeasible action " + std::to_string(a) + " at NAT=" +
                          std::to_string(s.nat) + ", D=" + std::to_string(s.d) + ", A1c=" + std::to_string(s.a1c));
      auto out = step(params, s, a, noise);
      total += discount * out.reward;
      discount *= gamma;
      s = out.next;
    }
    returns[r] = total;
  }
  return returns;
}

}  // namespace ggq
