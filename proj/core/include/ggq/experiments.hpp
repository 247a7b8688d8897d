#pragma once

#include "ggq/classical.hpp"
#include "ggq/diabetes_sim.hpp"
#include "ggq/features.hpp"
#include "ggq/ggq.hpp"
#include "ggq/inference.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace ggq {

/// Settings shared by all studies. Seeds of individual datasets are derived
/// from `seed`, a study tag and the replicate index, so every study is a
/// deterministic function of its spec.
struct StudySpec {
  std::string study = "fig1";  ///< oracle|fig1|fig2|fig3|fig4|coverage|s4|s5
  std::vector<std::size_t> sample_sizes{2000};
  std::size_t replicates = 200;
  double level = 0.95;
  std::vector<double> gammas{0.1, 0.3, 0.6, 0.8};
  std::vector<ScheduleFamily> schedules{ScheduleFamily::kKLogK, ScheduleFamily::kPower34, ScheduleFamily::kPower13};
  std::vector<double> nus{0.05, 0.025, 0.01};
  std::uint64_t seed = 20240611;
  std::size_t oracle_n = 100000;
  std::size_t reference_n = 50000;
  std::size_t pool_n = 2000;
  std::size_t policy_replicates = 10;
  std::size_t rollouts = 10000;
  double bandwidth = 0.5;
  /// Point estimate used by the coverage study: "ggq" (the stopped iterate)
  /// or "root" (the exact root of the empirical estimating equation).
  std::string coverage_fit = "ggq";
  GammaForm gamma_form = GammaForm::kDerived;
  unsigned workers = 1;
  EstimatorConfig estimator{};
  SimParams sim{};
  std::filesystem::path out_dir = "out";

  /// Throws ConfigError listing every problem.
  void validate() const;
};

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index);

/// Oracle cells are (NAT, D, Cat.A1c) triples.
Discretizer oracle_discretizer();

/// Classical value iteration on the oracle discretization of a large cohort,
/// repeated on a second seed to measure stability.
struct OracleResult {
  std::map<DiscreteState, Action> policy;
  std::map<DiscreteState, Action> replicate_policy;
  std::size_t compared = 0;
  std::size_t agreeing = 0;
  double agreement() const { return compared ? static_cast<double>(agreeing) / static_cast<double>(compared) : 1.0; }
};
OracleResult compute_oracle(const SimParams& sim, std::size_t n, double gamma, std::uint64_t seed);

/// GGQ and classical fits on one dataset.
struct FittedMethods {
  RbfSpec rbf;
  ThetaEstimate ggq;
  DiscretizerSpec discretizer;
  std::map<DiscreteState, Action> classical;
  std::size_t classical_missing_pairs = 0;
};
FittedMethods fit_methods(const Dataset& data, const EstimatorConfig& estimator, double bandwidth);

/// Counts for one oracle cell, summed over the replicate datasets.
struct PolicyComparisonRow {
  std::size_t n = 0;
  DiscreteState cell;
  std::size_t states = 0;               ///< observed live states in the cell
  std::size_t ggq_augment_states = 0;   ///< of which GGQ augments
  std::size_t classical_cells = 0;      ///< distinct classical states (BP/Weight categories)
  std::size_t classical_augment_cells = 0;
  std::size_t classical_augment_states = 0;
  std::size_t classical_unseen = 0;     ///< states without a classical decision
  Action oracle_action = kNoAction;

  double ggq_augment() const { return states ? double(ggq_augment_states) / double(states) : 0.0; }
  /// Averaged over the noise variables: share of classical states that augment.
  double classical_augment() const {
    return classical_cells ? double(classical_augment_cells) / double(classical_cells) : 0.0;
  }
  double classical_augment_weighted() const {
    return states ? double(classical_augment_states) / double(states) : 0.0;
  }
};
struct PolicyComparison {
  std::vector<PolicyComparisonRow> rows;
  OracleResult oracle;
  std::vector<FittedMethods> fits;  ///< first replicate of each sample size
  std::size_t redraws = 0;          ///< datasets replaced for leaving a feature block empty
};
/// How often each method augments within each oracle cell, over the observed
/// live states of `policy_replicates` datasets per sample size.
PolicyComparison run_policy_comparison(const StudySpec& spec);
PolicyComparison compare_policies(const Dataset& data, const FittedMethods& fit, const OracleResult& oracle,
                                  std::size_t n);

struct ValueComparisonRow {
  std::size_t n = 0;
  DiscreteState cell;
  std::size_t starts = 0;
  double ggq = 0.0, ggq_se = 0.0;
  double classical = 0.0, classical_se = 0.0;
  double difference = 0.0, difference_se = 0.0;  ///< GGQ minus classical, paired
  double oracle = 0.0;
  double oracle_gap = 0.0, oracle_gap_se = 0.0;  ///< oracle minus GGQ, paired
};
struct ValueComparison {
  std::vector<ValueComparisonRow> rows;
  OracleResult oracle;
  int horizon = 0;
  std::size_t redraws = 0;
};
/// Paired Monte Carlo values of the GGQ, classical and oracle policies from
/// simulator states grouped by oracle cell. Rollout r of every policy starts
/// from the same state and uses the same random stream.
ValueComparison run_value_comparison(const StudySpec& spec);

/// Monte Carlo value of one policy per oracle cell.
struct PolicyValueRow {
  DiscreteState cell;
  std::size_t starts = 0;
  double value = 0.0, se = 0.0;

  friend bool operator==(const PolicyValueRow&, const PolicyValueRow&) = default;
};
/// Start states come from a cohort of pool_n subjects simulated on
/// derive_seed(seed, "pool", 0), and cell c draws its rollouts from
/// derive_seed(seed, "rollout", c): the same streams run_value_comparison
/// uses, so values are directly comparable across policies.
std::vector<PolicyValueRow> policy_value_table(const SimParams& sim, const Policy& policy, std::size_t pool_n,
                                               std::size_t rollouts, std::uint64_t seed, double gamma,
                                               unsigned workers = 1);
void write_policy_values(const std::vector<PolicyValueRow>& rows, std::ostream& out);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_and_se(const std::vector<double>& values);

struct CoverageRow {
  std::string label;
  double truth = 0.0;
  double coverage = 0.0;
  double mean_estimate = 0.0;
  double empirical_sd = 0.0;
  double mean_se = 0.0;
  std::size_t used = 0;
  std::size_t degenerate = 0;  ///< replicates whose W-hat diagonal entry is numerically zero
};
struct CoverageResult {
  std::vector<CoverageRow> theta;
  std::vector<CoverageRow> contrasts;
  std::size_t replicates = 0;
  std::size_t non_converged = 0;
  std::size_t failed = 0;
  double reference_objective = 0.0;
  /// Coordinates whose feature (numerically) never fires on a live
  /// reference transition; the estimating equation says nothing about them.
  std::vector<Eigen::Index> unidentified;
};
/// Replicated fit and inference at each sample size against a reference
/// solution on a large cohort.
CoverageResult run_coverage_study(const StudySpec& spec, std::size_t n);
/// Representative continuous state of an oracle cell: A1c at the bin
/// midpoint (6.5 and 9.5 for the open end bins), BP and Weight at the
/// medians of `data`.
State representative_state(const DiscreteState& cell, const Dataset& data);

struct GammaSensitivityRow {
  double gamma = 0.0;
  std::size_t cells = 0;
  std::size_t augment_cells = 0;  ///< cells where most evaluation states augment
  double augment_fraction = 0.0;  ///< over all evaluation states
  std::size_t oracle_augment_cells = 0;
  bool converged = false;
};
/// Fits under the no-death, alternative-reward environment across gammas.
std::vector<GammaSensitivityRow> run_gamma_sensitivity(const StudySpec& spec);

struct TuningRow {
  ScheduleFamily family = ScheduleFamily::kKLogK;
  double nu = 0.0;
  std::size_t replicates = 0;
  double mean_objective = 0.0, sd_objective = 0.0;
  double mean_sweeps = 0.0, sd_sweeps = 0.0;
  std::size_t converged = 0;
  /// Datasets replaced because a feature block had no observations.
  std::size_t redraws = 0;
};
std::vector<TuningRow> run_tuning_sensitivity(const StudySpec& spec);

/// Runs spec.study and writes its tables and a manifest under spec.out_dir.
/// Returns the written file paths.
std::vector<std::filesystem::path> run_study(const StudySpec& spec);

void write_policy_comparison(const PolicyComparison& result, std::ostream& out);
void write_value_comparison(const ValueComparison& result, std::ostream& out);
void write_coverage(const std::vector<CoverageRow>& rows, double level, std::ostream& out);
void write_gamma_sensitivity(const std::vector<GammaSensitivityRow>& rows, std::ostream& out);
void write_tuning_sensitivity(const std::vector<TuningRow>& rows, std::ostream& out);
std::string study_manifest(const StudySpec& spec, const std::vector<std::string>& notes);

}  // namespace ggq
