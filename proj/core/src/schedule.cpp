#include "ggq/schedule.hpp"

#include "ggq/errors.hpp"

#include <cmath>

namespace ggq {

double StepRate::operator()(long k) const {
  const double kd = static_cast<double>(k);
  double denom = std::pow(kd, power);
  if (log_power != 0.0) denom *= std::pow(std::log(kd), log_power);
  return 1.0 / denom;
}

// sum 1/(k^a (ln k)^b) diverges iff a < 1, or a == 1 and b <= 1.
bool StepRate::sum_diverges() const { return power < 1.0 || (power == 1.0 && log_power <= 1.0); }

bool StepRate::square_summable() const {
  const StepRate squared{2.0 * power, 2.0 * log_power};
  return !squared.sum_diverges();
}

std::string_view to_string(ScheduleFamily family) {
  switch (family) {
    case ScheduleFamily::kKLogK: return "klogk";
    case ScheduleFamily::kPower34: return "power34";
    case ScheduleFamily::kPower13: return "power13";
  }
  return "unknown";
}

ScheduleFamily schedule_family_from_string(std::string_view name) {
  if (name == "klogk" || name == "1") return ScheduleFamily::kKLogK;
  if (name == "power34" || name == "2") return ScheduleFamily::kPower34;
  if (name == "power13" || name == "3") return ScheduleFamily::kPower13;
  throw ConfigError("unknown schedule family '" + std::string(name) + "'");
}

std::string_view to_string(StepIndex index) { return index == StepIndex::kSweep ? "sweep" : "update"; }

StepIndex step_index_from_string(std::string_view name) {
  if (name == "sweep") return StepIndex::kSweep;
  if (name == "update") return StepIndex::kUpdate;
  throw ConfigError("unknown step index '" + std::string(name) + "' (expected sweep or update)");
}

std::string ScheduleConditions::describe() const {
  std::string out;
  auto add = [&](bool ok, const char* what) {
    if (!out.empty()) out += "; ";
    out += std::string(what) + (ok ? " ok" : " violated");
  };
  add(deterministic, "deterministic");
  add(divergent, "sum alpha = sum beta = inf");
  add(square_summable, "sum alpha^2 + beta^2 < inf");
  add(timescale_separated, "alpha/beta -> 0");
  return out;
}

StepRate StepSchedule::alpha_rate() const {
  switch (family) {
    case ScheduleFamily::kKLogK: return {1.0, 1.0};
    case ScheduleFamily::kPower34:
    case ScheduleFamily::kPower13: return {1.0, 0.0};
  }
  return {};
}

StepRate StepSchedule::beta_rate() const {
  switch (family) {
    case ScheduleFamily::kKLogK: return {1.0, 0.0};
    case ScheduleFamily::kPower34: return {0.75, 0.0};
    case ScheduleFamily::kPower13: return {1.0 / 3.0, 0.0};
  }
  return {};
}

long StepSchedule::first_index() const {
  return (alpha_rate().log_power != 0.0 || beta_rate().log_power != 0.0) ? 2 : 1;
}

ScheduleConditions StepSchedule::check() const {
  const StepRate a = alpha_rate(), b = beta_rate();
  ScheduleConditions c;
  c.deterministic = true;
  c.divergent = a.sum_diverges() && b.sum_diverges();
  c.square_summable = a.square_summable() && b.square_summable();
  // alpha/beta = k^{b.power - a.power} (ln k)^{b.log - a.log} -> 0
  c.timescale_separated =
      a.power > b.power || (a.power == b.power && a.log_power > b.log_power);
  return c;
}

}  // namespace ggq
