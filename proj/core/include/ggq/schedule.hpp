#pragma once

#include <string>
#include <string_view>

namespace ggq {

/// Deterministic step size 1 / (k^power * (ln k)^log_power).
struct StepRate {
  double power = 1.0;
  double log_power = 0.0;

  double operator()(long k) const;
  /// Whether sum_k rate(k) diverges.
  bool sum_diverges() const;
  /// Whether sum_k rate(k)^2 converges.
  bool square_summable() const;
};

enum class ScheduleFamily {
  kKLogK,     ///< alpha = nu/(k ln k), beta = nu/k
  kPower34,   ///< alpha = nu/k,        beta = nu/k^{3/4}
  kPower13,   ///< alpha = nu/k,        beta = nu/k^{1/3}
};

std::string_view to_string(ScheduleFamily family);
ScheduleFamily schedule_family_from_string(std::string_view name);

/// Outcome of the closed-form checks of the step-size conditions:
/// deterministic rates, divergent sums, square-summable sums and
/// alpha_k / beta_k -> 0.
struct ScheduleConditions {
  bool deterministic = true;
  bool divergent = false;
  bool square_summable = false;
  bool timescale_separated = false;

  bool all() const { return deterministic && divergent && square_summable && timescale_separated; }
  std::string describe() const;
};

/// What the index k of alpha_k and beta_k counts. kSweep holds the rates
/// fixed through one pass over the trajectories and advances k once per pass,
/// so K passes use k = k0, ..., k0 + K - 1. kUpdate advances k after every
/// trajectory update.
enum class StepIndex { kSweep, kUpdate };

std::string_view to_string(StepIndex index);
StepIndex step_index_from_string(std::string_view name);

/// Two-timescale step sizes. The scale nu multiplies both rates at the point
/// of use: theta moves by nu * alpha_k, the auxiliary weights by nu * beta_k.
struct StepSchedule {
  ScheduleFamily family = ScheduleFamily::kKLogK;
  double nu = 0.05;
  StepIndex index = StepIndex::kSweep;

  StepRate alpha_rate() const;
  StepRate beta_rate() const;
  double alpha(long k) const { return alpha_rate()(k); }
  double beta(long k) const { return beta_rate()(k); }
  /// First update index; 2 whenever a rate involves ln k so that ln 1 = 0 is
  /// never hit.
  long first_index() const;
  ScheduleConditions check() const;
};

}  // namespace ggq
