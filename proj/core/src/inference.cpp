#include "ggq/inference.hpp"

#include "ggq/errors.hpp"
#include "ggq/text_format.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <ostream>

namespace ggq {

std::string_view to_string(GammaForm form) { return form == GammaForm::kDerived ? "derived" : "printed"; }

GammaForm gamma_form_from_string(std::string_view name) {
  if (name == "derived") return GammaForm::kDerived;
  if (name == "printed") return GammaForm::kPrinted;
  throw ConfigError("unknown gamma form '" + std::string(name) + "' (expected derived or printed)");
}

Eigen::MatrixXd compute_C_hat(const Eigen::VectorXd& theta, const FeatureTable& table) {
  if (table.trajectories() == 0) throw ConfigError("C-hat needs a non-empty dataset");
  const Eigen::Index p = table.dimension();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, p);
  double ignored = 0.0;
  for (std::size_t j = 0; j < table.steps(); ++j) {
    const long greedy = table.greedy_next(j, theta, ignored);
    if (greedy < 0) continue;
    table.next().add_outer(static_cast<std::size_t>(greedy), table.current(), j, 1.0, c);
  }
  return c / static_cast<double>(table.trajectories());
}

Eigen::MatrixXd estimate_sigma(const Eigen::VectorXd& theta, const FeatureTable& table, double gamma) {
  if (table.trajectories() == 0) throw ConfigError("Sigma-hat needs a non-empty dataset");
  if (theta.size() != table.dimension()) throw ConfigError("theta length does not match feature dimension");
  const Eigen::Index p = table.dimension();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd g(p);
  for (std::size_t i = 0; i < table.trajectories(); ++i) {
    g.setZero();
    for (std::size_t j = table.trajectory_begin(i); j < table.trajectory_end(i); ++j) {
      double next = 0.0;
      table.greedy_next(j, theta, next);
      const double delta = table.step(j).reward + gamma * next - table.current().dot(j, theta);
      table.current().axpy(j, delta, g);
    }
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(g);
  }
  sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
  return sigma / static_cast<double>(table.trajectories());
}

Eigen::MatrixXd estimate_sigma(const Eigen::VectorXd& theta, const Dataset& data, double gamma,
                               const FeatureMap& fmap) {
  return estimate_sigma(theta, FeatureTable(data, fmap), gamma);
}

Eigen::MatrixXd estimate_gamma_matrix(const Eigen::VectorXd& theta, const FeatureTable& table, double gamma,
                                      const WeightSolver& weights, GammaForm form) {
  const Eigen::MatrixXd c = compute_C_hat(theta, table);
  const Eigen::MatrixXd& w = weights.matrix();
  const Eigen::Index p = w.rows();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd cwc = c * weights.solve(Eigen::MatrixXd(c.transpose()));

  Eigen::MatrixXd left, bracket;
  if (form == GammaForm::kDerived) {
    left = identity - gamma * weights.solve(Eigen::MatrixXd(c.transpose()));
    bracket = w - gamma * (c + c.transpose()) + gamma * gamma * cwc;
  } else {
    left = (identity - gamma * weights.solve(c)).transpose();
    bracket = w + gamma * gamma * cwc - 2.0 * gamma * c.transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(bracket);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e14))
    throw NumericalError("Gamma-hat: inner matrix is singular (condition number " + format_double(cond) + ")");
  return left * bracket.partialPivLu().inverse();
}

Eigen::MatrixXd estimate_gamma_matrix(const Eigen::VectorXd& theta, const Dataset& data, double gamma,
                                      const FeatureMap& fmap, GammaForm form) {
  const FeatureTable table(data, fmap);
  const WeightSolver weights(compute_W_hat(table));
  return estimate_gamma_matrix(theta, table, gamma, weights, form);
}

InferenceResult infer(const Eigen::VectorXd& theta, const FeatureTable& table, double gamma, GammaForm form,
                      bool allow_ridge) {
  InferenceResult out;
  out.theta = theta;
  out.n = table.trajectories();
  out.form = form;
  const WeightSolver weights(compute_W_hat(table), allow_ridge);
  if (weights.warning()) out.warnings.push_back(*weights.warning());

  for (std::size_t j = 0; j < table.steps(); ++j)
    if (table.min_greedy_gap(j, theta) < 1e-8) ++out.near_ties;
  if (out.near_ties > 0)
    out.warnings.push_back("non-regular point: " + std::to_string(out.near_ties) +
                           " transitions have a near-tie in the greedy next action; ties resolved to the lowest code");

  out.sigma = estimate_sigma(theta, table, gamma);
  out.gamma_matrix = estimate_gamma_matrix(theta, table, gamma, weights, form);
  Eigen::MatrixXd cov = out.gamma_matrix.transpose() * out.sigma * out.gamma_matrix / static_cast<double>(out.n);
  out.covariance = 0.5 * (cov + cov.transpose());
  out.standard_errors.resize(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double v = out.covariance(j, j);
    if (v < 0.0) {
      if (v < -1e-12 * std::max(1.0, out.covariance.diagonal().cwiseAbs().maxCoeff()))
        throw NumericalError("covariance diagonal is negative at coordinate " + std::to_string(j));
      out.standard_errors[j] = 0.0;
    } else {
      out.standard_errors[j] = std::sqrt(v);
    }
  }
  return out;
}

InferenceResult infer(const Eigen::VectorXd& theta, const Dataset& data, double gamma, const FeatureMap& fmap,
                      GammaForm form, bool allow_ridge) {
  return infer(theta, FeatureTable(data, fmap), gamma, form, allow_ridge);
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - (1.0 - level) / 2.0);
}

std::vector<Interval> ci_theta(const InferenceResult& result, double level) {
  const double z = normal_critical_value(level);
  std::vector<Interval> out;
  for (Eigen::Index j = 0; j < result.theta.size(); ++j) {
    const double half = z * result.standard_errors[j];
    out.push_back({result.theta[j] - half, result.theta[j], result.theta[j] + half, level});
  }
  return out;
}

Interval ci_q_contrast(const InferenceResult& result, const FeatureMap& fmap, const State& s, Action a1, Action a0,
                       double level) {
  const double z = normal_critical_value(level);
  const Eigen::VectorXd c = fmap.features(s, a1) - fmap.features(s, a0);
  const double estimate = c.dot(result.theta);
  const double variance = c.dot(result.covariance * c);
  if (variance < -1e-12 * std::max(1.0, c.squaredNorm() * result.covariance.diagonal().cwiseAbs().maxCoeff()))
    throw NumericalError("contrast variance is negative");
  const double half = z * std::sqrt(std::max(variance, 0.0));
  return {estimate - half, estimate, estimate + half, level};
}

void write_inference(const InferenceResult& result, double level, std::ostream& out) {
  const auto intervals = ci_theta(result, level);
  out << "coordinate,estimate,se,lower,upper,level\n";
  for (std::size_t j = 0; j < intervals.size(); ++j)
    out << j << ',' << format_double(intervals[j].estimate) << ','
        << format_double(result.standard_errors[static_cast<Eigen::Index>(j)]) << ','
        << format_double(intervals[j].lower) << ',' << format_double(intervals[j].upper) << ','
        << format_double(level) << '\n';
}

void write_covariance(const Eigen::MatrixXd& m, std::ostream& out) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace ggq
