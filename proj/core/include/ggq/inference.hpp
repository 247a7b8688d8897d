#pragma once

#include "ggq/ggq.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ggq {

/// Which closed form to use for the sensitivity matrix Gamma.
///
/// kDerived is (I - g W^{-1} C')[W - g(C + C') + g^2 C W^{-1} C']^{-1}, the
/// minimizer of the limiting quadratic; it equals (W - g C)^{-1}.
/// kPrinted is [I - g W^{-1} C]'[W + g^2 C W^{-1} C' - 2 g C']^{-1}, which
/// coincides with kDerived only when C is symmetric.
///
/// Here C = P_n[sum_t phi(S_{t+1}, pi*) phi(S_t, A_t)'].
enum class GammaForm { kDerived, kPrinted };

std::string_view to_string(GammaForm form);
GammaForm gamma_form_from_string(std::string_view name);

/// C-hat under the greedy next actions of theta.
Eigen::MatrixXd compute_C_hat(const Eigen::VectorXd& theta, const FeatureTable& table);

/// Sigma-hat = P_n[g g'] with g = sum_t delta_{t+1}(theta) phi(S_t, A_t).
Eigen::MatrixXd estimate_sigma(const Eigen::VectorXd& theta, const FeatureTable& table, double gamma);
Eigen::MatrixXd estimate_sigma(const Eigen::VectorXd& theta, const Dataset& data, double gamma,
                               const FeatureMap& fmap);

/// Gamma-hat assembled from W-hat and C-hat at theta. Throws NumericalError
/// with the condition number when the bracketed matrix is singular.
Eigen::MatrixXd estimate_gamma_matrix(const Eigen::VectorXd& theta, const FeatureTable& table, double gamma,
                                      const WeightSolver& weights, GammaForm form = GammaForm::kDerived);
Eigen::MatrixXd estimate_gamma_matrix(const Eigen::VectorXd& theta, const Dataset& data, double gamma,
                                      const FeatureMap& fmap, GammaForm form = GammaForm::kDerived);

struct InferenceResult {
  Eigen::VectorXd theta;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd gamma_matrix;
  /// Gamma' Sigma Gamma / n.
  Eigen::MatrixXd covariance;
  Eigen::VectorXd standard_errors;
  std::size_t n = 0;
  GammaForm form = GammaForm::kDerived;
  /// Transitions whose greedy next action is within 1e-8 of a tie.
  std::size_t near_ties = 0;
  std::vector<std::string> warnings;
};

/// Plug-in sandwich inference at theta-hat. Near-ties of the greedy next
/// action are resolved by the usual lowest-code rule and reported as a
/// non-regularity warning.
InferenceResult infer(const Eigen::VectorXd& theta, const FeatureTable& table, double gamma,
                      GammaForm form = GammaForm::kDerived, bool allow_ridge = true);
InferenceResult infer(const Eigen::VectorXd& theta, const Dataset& data, double gamma, const FeatureMap& fmap,
                      GammaForm form = GammaForm::kDerived, bool allow_ridge = true);

struct Interval {
  double lower = 0.0;
  double estimate = 0.0;
  double upper = 0.0;
  double level = 0.95;

  bool contains(double x) const { return lower <= x && x <= upper; }
};

/// Two-sided standard normal critical value z_{1-(1-level)/2}.
double normal_critical_value(double level);

/// Per-coordinate Wald intervals theta_j +- z se_j.
std::vector<Interval> ci_theta(const InferenceResult& result, double level = 0.95);

/// Delta-method interval for Q(s, a1) - Q(s, a0) = c'theta with
/// c = phi(s, a1) - phi(s, a0).
Interval ci_q_contrast(const InferenceResult& result, const FeatureMap& fmap, const State& s, Action a1,
                       Action a0, double level = 0.95);

void write_inference(const InferenceResult& result, double level, std::ostream& out);
void write_covariance(const Eigen::MatrixXd& m, std::ostream& out);

}  // namespace ggq
