#include "ggq/ggq.hpp"

#include "ggq/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace ggq {

WeightSolver::WeightSolver(Eigen::MatrixXd w, bool allow_ridge) : w_(std::move(w)) {
  if (w_.rows() != w_.cols() || w_.rows() == 0) throw ConfigError("weight matrix must be square and non-empty");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w_, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(condition_ <= kMaxCondition)) {
    std::ostringstream os;
    os << "W-hat condition number " << condition_ << " exceeds " << kMaxCondition;
    if (!allow_ridge) throw NumericalError(os.str());
    const double trace = w_.trace();
    ridge_ = 1e-8 * (trace > 0.0 ? trace : 1.0) / static_cast<double>(w_.rows());
    w_.diagonal().array() += ridge_;
    os << "; added ridge " << ridge_;
    warning_ = os.str();
  }
  ldlt_.compute(w_);
  if (ldlt_.info() != Eigen::Success) throw NumericalError("failed to factor W-hat");
}

Eigen::MatrixXd WeightSolver::inverse() const {
  return ldlt_.solve(Eigen::MatrixXd::Identity(w_.rows(), w_.cols()));
}

namespace {

void require_data(const FeatureTable& table) {
  if (table.trajectories() == 0) throw ConfigError("estimating equations need a non-empty dataset");
}

void require_dimension(const Eigen::VectorXd& v, const FeatureTable& table, const char* what) {
  if (v.size() != table.dimension())
    throw ConfigError(std::string(what) + " length " + std::to_string(v.size()) +
                      " does not match feature dimension " + std::to_string(table.dimension()));
}

double td_error_at(const FeatureTable& table, std::size_t j, const Eigen::VectorXd& theta, double gamma,
                   long& greedy) {
  double next_value = 0.0;
  greedy = table.greedy_next(j, theta, next_value);
  return table.step(j).reward + gamma * next_value - table.current().dot(j, theta);
}

}  // namespace

Eigen::VectorXd compute_D_hat(const Eigen::VectorXd& theta, const FeatureTable& table, double gamma) {
  require_data(table);
  require_dimension(theta, table, "theta");
  Eigen::VectorXd d = Eigen::VectorXd::Zero(table.dimension());
  long greedy = -1;
  for (std::size_t j = 0; j < table.steps(); ++j)
    table.current().axpy(j, td_error_at(table, j, theta, gamma, greedy), d);
  return d / static_cast<double>(table.trajectories());
}

Eigen::VectorXd compute_D_hat(const Eigen::VectorXd& theta, const Dataset& data, double gamma,
                              const FeatureMap& fmap) {
  return compute_D_hat(theta, FeatureTable(data, fmap), gamma);
}

Eigen::MatrixXd compute_W_hat(const FeatureTable& table) {
  require_data(table);
  const Eigen::Index p = table.dimension();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t j = 0; j < table.steps(); ++j) table.current().add_outer(j, table.current(), j, 1.0, w);
  return w / static_cast<double>(table.trajectories());
}

Eigen::MatrixXd compute_W_hat(const Dataset& data, const FeatureMap& fmap) {
  return compute_W_hat(FeatureTable(data, fmap));
}

double objective_M_hat(const Eigen::VectorXd& theta, const FeatureTable& table, double gamma,
                       const WeightSolver& weights) {
  const Eigen::VectorXd d = compute_D_hat(theta, table, gamma);
  return d.dot(weights.solve(d));
}

double objective_M_hat(const Eigen::VectorXd& theta, const Dataset& data, double gamma,
                       const FeatureMap& fmap, bool allow_ridge) {
  const FeatureTable table(data, fmap);
  const WeightSolver weights(compute_W_hat(table), allow_ridge);
  return objective_M_hat(theta, table, gamma, weights);
}

Eigen::VectorXd cross_times(const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                            const FeatureTable& table) {
  require_data(table);
  require_dimension(theta, table, "theta");
  require_dimension(omega, table, "omega");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(table.dimension());
  double ignored = 0.0;
  for (std::size_t j = 0; j < table.steps(); ++j) {
    const long greedy = table.greedy_next(j, theta, ignored);
    if (greedy < 0) continue;
    table.next().axpy(static_cast<std::size_t>(greedy), table.current().dot(j, omega), out);
  }
  return out / static_cast<double>(table.trajectories());
}

Eigen::VectorXd subgradient_M(const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                              const FeatureTable& table, double gamma) {
  return -compute_D_hat(theta, table, gamma) + gamma * cross_times(theta, omega, table);
}

Eigen::VectorXd subgradient_M(const Eigen::VectorXd& theta, const Eigen::VectorXd& omega,
                              const Dataset& data, double gamma, const FeatureMap& fmap) {
  return subgradient_M(theta, omega, FeatureTable(data, fmap), gamma);
}

void EstimatorConfig::validate() const {
  std::vector<std::string> problems;
  if (!(gamma > 0.0 && gamma < 1.0)) problems.push_back("gamma must lie in (0,1)");
  if (!(schedule.nu > 0.0 && schedule.nu < 1.0)) problems.push_back("nu must lie in (0,1)");
  if (!(tolerance > 0.0)) problems.push_back("tolerance must be positive");
  if (max_sweeps < 1) problems.push_back("max_sweeps must be at least 1");
  if (!allow_nonconforming_schedule) {
    const auto conditions = schedule.check();
    if (!conditions.all())
      problems.push_back("schedule " + std::string(to_string(schedule.family)) +
                         " fails the step-size conditions (" + conditions.describe() + ")");
  }
  if (problems.empty()) return;
  std::string message = "invalid estimator configuration: ";
  for (std::size_t i = 0; i < problems.size(); ++i) message += (i ? "; " : "") + problems[i];
  throw ConfigError(message);
}

std::vector<Eigen::VectorXd> default_grid(Eigen::Index dimension, double scale) {
  std::vector<Eigen::VectorXd> grid;
  grid.reserve(static_cast<std::size_t>(2 * dimension + 1));
  grid.push_back(Eigen::VectorXd::Zero(dimension));
  if (scale <= 0.0) return grid;
  for (Eigen::Index j = 0; j < dimension; ++j) {
    for (double sign : {1.0, -1.0}) {
      Eigen::VectorXd point = Eigen::VectorXd::Zero(dimension);
      point[j] = sign * scale;
      grid.push_back(std::move(point));
    }
  }
  return grid;
}

InitialValues init_theta(const FeatureTable& table, double gamma, const WeightSolver& weights,
                         const std::vector<Eigen::VectorXd>& grid) {
  if (grid.empty()) throw ConfigError("initialization grid is empty");
  InitialValues best;
  best.objective = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double m = objective_M_hat(grid[g], table, gamma, weights);
    if (m < best.objective) {
      best.objective = m;
      best.grid_index = g;
    }
  }
  best.theta = grid[best.grid_index];
  best.omega = weights.solve(compute_D_hat(best.theta, table, gamma));
  return best;
}

InitialValues init_theta(const Dataset& data, double gamma, const FeatureMap& fmap,
                         const std::vector<Eigen::VectorXd>& grid) {
  const FeatureTable table(data, fmap);
  const WeightSolver weights(compute_W_hat(table));
  return init_theta(table, gamma, weights, grid);
}

ThetaEstimate ggq_fit(const Dataset& data, const FeatureMap& fmap, const EstimatorConfig& config) {
  config.validate();
  if (data.empty()) throw ConfigError("cannot fit on an empty dataset");
  return ggq_fit(FeatureTable(data, fmap), config);
}

ThetaEstimate ggq_fit(const FeatureTable& table, const EstimatorConfig& config) {
  config.validate();
  require_data(table);
  const Eigen::Index p = table.dimension();
  const double gamma = config.gamma;
  const WeightSolver weights(compute_W_hat(table), config.allow_ridge);

  ThetaEstimate result;
  result.config = config;
  if (weights.warning()) result.warnings.push_back(*weights.warning());

  const auto grid = config.grid.empty()
                        ? default_grid(p, config.grid_scale > 0.0 ? config.grid_scale : table.max_abs_reward())
                        : config.grid;
  for (const auto& point : grid) require_dimension(point, table, "grid point");
  const InitialValues init = init_theta(table, gamma, weights, grid);

  Eigen::VectorXd theta = init.theta;
  Eigen::VectorXd omega = init.omega;
  result.initial = init.theta;
  result.initial_objective = init.objective;
  result.theta = init.theta;
  result.objective = init.objective;

  const double nu = config.schedule.nu;
  const StepRate alpha = config.schedule.alpha_rate();
  const StepRate beta = config.schedule.beta_rate();
  const long k0 = config.schedule.first_index();
  const bool per_sweep = config.schedule.index == StepIndex::kSweep;
  long updates = 0;

  Eigen::VectorXd theta_step(p), omega_step(p);
  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    const Eigen::VectorXd sweep_start = theta;
    for (std::size_t i = 0; i < table.trajectories(); ++i, ++updates) {
      const long k = per_sweep ? k0 + sweep - 1 : k0 + updates;
      theta_step.setZero();
      omega_step.setZero();
      for (std::size_t j = table.trajectory_begin(i); j < table.trajectory_end(i); ++j) {
        long greedy = -1;
        const double delta = td_error_at(table, j, theta, gamma, greedy);
        const double projected = table.current().dot(j, omega);
        table.current().axpy(j, delta, theta_step);
        if (greedy >= 0) table.next().axpy(static_cast<std::size_t>(greedy), -gamma * projected, theta_step);
        table.current().axpy(j, delta - projected, omega_step);
      }
      theta.noalias() += (nu * alpha(k)) * theta_step;
      omega.noalias() += (nu * beta(k)) * omega_step;
    }
    result.updates = updates;

    const double step_norm = (theta - sweep_start).norm();
    if (!theta.allFinite() || !omega.allFinite() || !std::isfinite(step_norm)) {
      std::ostringstream os;
      os << "GGQ iterate became non-finite during sweep " << sweep << "; trace:";
      for (const auto& r : result.trace) os << " [" << r.sweep << ": step " << r.step_norm << ", M " << r.objective << "]";
      throw EstimationError(os.str());
    }
    const double m = objective_M_hat(theta, table, gamma, weights);
    result.trace.push_back({sweep, step_norm, m});
    result.sweeps = sweep;
    if (m < result.objective) {
      result.objective = m;
      result.theta = theta;
    }
    if (step_norm < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.last_iterate = theta;
  result.omega = omega;
  return result;
}

DirectSolution solve_estimating_equation(const FeatureTable& table, double gamma,
                                         const WeightSolver& weights, int max_iterations,
                                         const Eigen::VectorXd* start) {
  require_data(table);
  const Eigen::Index p = table.dimension();
  const double n = static_cast<double>(table.trajectories());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  for (std::size_t j = 0; j < table.steps(); ++j) table.current().axpy(j, table.step(j).reward, b);
  b /= n;
  const Eigen::MatrixXd& w = weights.matrix();

  DirectSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd theta = start ? *start : Eigen::VectorXd::Zero(p);
  std::vector<long> assignment(table.steps(), -2);
  for (int it = 1; it <= max_iterations; ++it) {
    bool changed = false;
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(p, p);  // P_n[sum phi phi(S', pi)']
    double ignored = 0.0;
    for (std::size_t j = 0; j < table.steps(); ++j) {
      const long greedy = table.greedy_next(j, theta, ignored);
      if (greedy != assignment[j]) changed = true;
      assignment[j] = greedy;
      if (greedy >= 0) table.current().add_outer(j, table.next(), static_cast<std::size_t>(greedy), 1.0, cross);
    }
    cross /= n;
    if (!changed && it > 1) {
      best.stable = true;
      break;
    }
    const Eigen::MatrixXd a = w - gamma * cross;
    theta = a.partialPivLu().solve(b);
    const double m = objective_M_hat(theta, table, gamma, weights);
    best.iterations = it;
    if (m < best.objective) {
      best.objective = m;
      best.theta = theta;
    }
  }
  return best;
}

}  // namespace ggq
