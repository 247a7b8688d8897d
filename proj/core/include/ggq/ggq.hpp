#pragma once

#include "ggq/feature_table.hpp"
#include <Eigen/Dense>

#include "ggq/mdp.hpp"
#include "ggq/schedule.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ggq {

/// Factored empirical feature covariance W. Falls back to W + lambda I with
/// lambda = 1e-8 trace(W)/p when the condition number exceeds 1e12, and
/// records a warning; with the fallback disabled it throws NumericalError.
class WeightSolver {
 public:
  static constexpr double kMaxCondition = 1e12;

  explicit WeightSolver(Eigen::MatrixXd w, bool allow_ridge = true);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return ldlt_.solve(rhs); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return ldlt_.solve(rhs); }
  Eigen::MatrixXd inverse() const;

  /// W as factored (after any ridge).
  const Eigen::MatrixXd& matrix() const noexcept { return w_; }
  double condition_number() const noexcept { return condition_; }
  double ridge() const noexcept { return ridge_; }
  const std::optional<std::string>& warning() const noexcept { return warning_; }

 private:
  Eigen::MatrixXd w_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  double condition_ = 1.0;
  double ridge_ = 0.0;
  std::optional<std::string> warning_;
};

/// D-hat(theta) = P_n[sum_t delta_{t+1}(theta) phi(S_t, A_t)] (as a column).
Eigen::VectorXd compute_D_hat(const Eigen::VectorXd& theta, const FeatureTable& table, double gamma);
Eigen::VectorXd compute_D_hat(const Eigen::VectorXd& theta, const Dataset& data, double gamma,
                              const FeatureMap& fmap);

/// W-hat = P_n[sum_t phi phi'].
Eigen::MatrixXd compute_W_hat(const FeatureTable& table);
Eigen::MatrixXd compute_W_hat(const Dataset& data, const FeatureMap& fmap);

/// M-hat(theta) = D-hat W-hat^{-1} D-hat'.
double objective_M_hat(const Eigen::VectorXd& theta, const FeatureTable& table, double gamma,
                       const WeightSolver& weights);
double objective_M_hat(const Eigen::VectorXd& theta, const Dataset& data, double gamma,
                       const FeatureMap& fmap, bool allow_ridge = true);

/// C-hat(theta) omega with C-hat = P_n[sum_t phi(S_{t+1}, pi*_theta) phi(S_t, A_t)'].
Eigen::VectorXd cross_times(const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                            const FeatureTable& table);

/// Empirical subgradient -D-hat(theta) + gamma C-hat(theta) omega. With
/// omega = W-hat^{-1} D-hat(theta) it is half the gradient of M-hat wherever
/// the greedy next actions are unique.
Eigen::VectorXd subgradient_M(const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                              const FeatureTable& table, double gamma);
Eigen::VectorXd subgradient_M(const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                              const Dataset& data, double gamma, const FeatureMap& fmap);

struct EstimatorConfig {
  double gamma = 0.6;
  StepSchedule schedule{};
  /// Stop once a full sweep moves theta by less than this (Euclidean norm).
  double tolerance = 1e-3;
  int max_sweeps = 200;
  /// Candidate initial values; empty selects default_grid().
  std::vector<Eigen::VectorXd> grid;
  /// Scale of the default axis grid; <= 0 uses the largest |reward|.
  double grid_scale = 0.0;
  /// Run schedules that fail the step-size conditions instead of rejecting them.
  bool allow_nonconforming_schedule = false;
  bool allow_ridge = true;
  std::uint64_t seed = 0;

  /// Throws ConfigError listing every problem.
  void validate() const;
};

/// {0} followed by +scale e_j and -scale e_j for each coordinate j.
std::vector<Eigen::VectorXd> default_grid(Eigen::Index dimension, double scale);

struct InitialValues {
  Eigen::VectorXd theta;
  Eigen::VectorXd omega;
  double objective = 0.0;
  std::size_t grid_index = 0;
};

/// Grid point minimizing M-hat (first listed wins ties), and
/// omega_1 = W-hat^{-1} D-hat(theta_1).
InitialValues init_theta(const FeatureTable& table, double gamma, const WeightSolver& weights,
                         const std::vector<Eigen::VectorXd>& grid);
InitialValues init_theta(const Dataset& data, double gamma, const FeatureMap& fmap,
                         const std::vector<Eigen::VectorXd>& grid);

struct SweepRecord {
  int sweep = 0;
  double step_norm = 0.0;  ///< ||theta_end - theta_start||_2 over the sweep
  double objective = 0.0;  ///< M-hat at the end of the sweep
};

struct ThetaEstimate {
  Eigen::VectorXd theta;         ///< best-visited iterate (minimal M-hat)
  Eigen::VectorXd last_iterate;  ///< raw final iterate
  Eigen::VectorXd omega;         ///< final auxiliary weights
  Eigen::VectorXd initial;       ///< theta_1 from the grid search
  double objective = 0.0;        ///< M-hat(theta)
  double initial_objective = 0.0;
  bool converged = false;
  int sweeps = 0;
  long updates = 0;
  std::vector<SweepRecord> trace;
  EstimatorConfig config;
  std::vector<std::string> warnings;
};

/// Two-timescale stochastic subgradient minimization of M-hat. One (theta,
/// omega) update per trajectory, in dataset order; k advances per sweep or
/// per update as set by config.schedule.index:
///
///   theta <- theta + nu alpha_k sum_t [delta phi - gamma (omega'phi) phi(S', pi*_theta)]
///   omega <- omega + nu beta_k  sum_t [delta - phi'omega] phi
///
/// Sweeps repeat until one moves theta by less than config.tolerance or
/// max_sweeps is reached (converged = false, not an error). Returns the
/// sweep-end iterate with the smallest M-hat, never worse than theta_1.
/// Throws EstimationError on a non-finite iterate.
ThetaEstimate ggq_fit(const Dataset& data, const FeatureMap& fmap, const EstimatorConfig& config);
ThetaEstimate ggq_fit(const FeatureTable& table, const EstimatorConfig& config);

/// Direct root of D-hat(theta) = 0 by alternating the greedy next-action
/// assignment with the linear solve P_n[sum phi (phi - gamma phi(S', pi))'] theta
/// = P_n[sum r phi]. Used as a deterministic reference minimizer; it is not
/// the stochastic algorithm. Returns the iterate with the smallest M-hat.
struct DirectSolution {
  Eigen::VectorXd theta;
  double objective = 0.0;
  int iterations = 0;
  bool stable = false;  ///< the greedy assignment reached a fixed point
};
DirectSolution solve_estimating_equation(const FeatureTable& table, double gamma,
                                         const WeightSolver& weights, int max_iterations = 100,
                                         const Eigen::VectorXd* start = nullptr);

}  // namespace ggq
