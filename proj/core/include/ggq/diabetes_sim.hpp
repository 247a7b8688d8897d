#pragma once

#include "ggq/mdp.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ggq {

enum class RewardRule {
  kMain,  ///< 1 if A1c < 7, -10 on death, -2 if A1c > 7 and D = 1, else 0
  kS4,    ///< 1 if A1c < 7, -5 if A1c > 7 and D = 1, else 0; no deaths
};

std::string_view to_string(RewardRule rule);
RewardRule reward_rule_from_string(std::string_view name);

/// Every constant of the cohort generative model. Treatments are indexed
/// 1..4 (metformin, sulfonylurea, glitazone*, insulin); arrays hold entry k-1.
struct SimParams {
  std::size_t n = 2000;
  int decision_points = 20;
  int burn_in = 4;
  /// Baseline means of (BP, Weight, A1c); unit variances.
  std::array<double, 3> baseline_mean{13.0, 160.0, 9.4};
  std::array<double, 4> effects{0.14, 0.20, 0.02, 0.14};
  std::array<double, 4> discontinuation{0.20, 0.20, 0.20, 0.35};
  double sigma_eps = 0.5;
  /// Behavior: continue at A1c <= low, augment at A1c >= high (while
  /// NAT < max_nat), otherwise continue with probability
  /// logistic(assign_intercept + assign_a1c A1c + assign_nat NAT + assign_d D).
  double behavior_low = 7.0;
  double behavior_high = 8.0;
  double assign_intercept = 0.0;
  double assign_a1c = -0.2;
  double assign_nat = 0.5;
  double assign_d = 0.5;
  /// Death probability logistic(intercept + a1c I(A1c > 7) A1c^2 + nat NAT).
  double death_intercept = -10.0;
  double death_a1c = 0.08;
  double death_nat = 0.5;
  RewardRule reward = RewardRule::kMain;
  int max_nat = 4;
  std::uint64_t seed = 1;
  /// Parallel workers for cohort simulation; results do not depend on it.
  unsigned workers = 1;

  /// Deaths happen only under the main reward rule.
  bool deaths_enabled() const { return reward == RewardRule::kMain; }
  /// Throws ConfigError listing every invalid field.
  void validate() const;
};

/// Full simulator state, including the latent A1c mean mu.
struct PatientState {
  bool alive = true;
  int nat = 0;
  int d = 0;
  double a1c = 0.0;
  double bp = 0.0;
  double weight = 0.0;
  double mu = 0.0;

  /// Observed state (nat, d, a1c, bp, weight), or absorbing.
  State observed() const;
};

/// Uniform and normal draws consumed by one step. Every step consumes the
/// same six draws whatever branch it takes, so paired runs under different
/// policies share random numbers step by step.
struct StepNoise {
  double u_assign;
  double u_discontinue;
  double eps_a1c;
  double eps_bp;
  double eps_weight;
  double u_death;

  static StepNoise draw(std::mt19937_64& rng, double sigma_eps);
};

struct StepOutcome {
  PatientState next;
  double reward = 0.0;
};

/// Per-subject random stream derived from (seed, subject index).
std::mt19937_64 subject_stream(std::uint64_t seed, std::uint64_t subject);

PatientState draw_baseline(const SimParams& params, std::mt19937_64& rng);

/// Behavior-policy action in a live state.
Action behavior_action(const SimParams& params, const PatientState& s, const StepNoise& noise);

/// Feasible actions {0, NAT+1} (or {0} at NAT = max_nat).
std::vector<Action> feasible_actions(const SimParams& params, const PatientState& s);

/// Applies action `a` in live state `s`: discontinuation, NAT, mean shift,
/// A1c/BP/Weight updates, death (from the pre-step state) and reward.
/// Throws DomainError for an infeasible action.
StepOutcome step(const SimParams& params, const PatientState& s, Action a, const StepNoise& noise);

/// n trajectories of `decision_points` decisions under the behavior policy,
/// with the first burn_in decision points dropped.
Dataset simulate_cohort(const SimParams& params);

/// Full simulator trace of one subject (before burn-in removal), for tests.
std::vector<PatientState> simulate_subject(const SimParams& params, std::size_t subject,
                                           std::vector<Action>* actions = nullptr,
                                           std::vector<double>* rewards = nullptr);

/// Smallest H with gamma^H < tolerance.
int rollout_horizon(double gamma, double tolerance = 1e-6);

/// Discounted returns sum_{k>=1} gamma^{k-1} R_k of `reps` rollouts under
/// `policy`, starting from starts[r % starts.size()] with rep r drawing from
/// subject_stream(seed, r). The policy must return feasible actions; an
/// infeasible one raises DomainError naming the state.
std::vector<double> rollout_policy(const SimParams& params, const Policy& policy,
                                   const std::vector<PatientState>& starts, int horizon, std::size_t reps,
                                   std::uint64_t seed, double gamma);

/// Simulator states of a cohort visited at decision points >= burn_in.
std::vector<PatientState> visited_states(const SimParams& params);

}  // namespace ggq
