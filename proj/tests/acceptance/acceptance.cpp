// Acceptance checks. Prints one PASS/FAIL line per criterion; with no
// arguments all eight run, otherwise only the listed ones. Exit status is
// non-zero when any selected criterion fails.

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "ggq/classical.hpp"
#include "ggq/diabetes_sim.hpp"
#include "ggq/experiments.hpp"
#include "ggq/features.hpp"
#include "ggq/ggq.hpp"
#include "tabular_model.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

using namespace ggq;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

// 1. GGQ with indicator features recovers the tabular optimum; value
// iteration agrees with a direct linear solve.
Outcome oracle_equivalence() {
  ggq_test::TabularMdp mdp;
  mdp.reward_sd = 0.5;
  const double gamma = 0.5;
  const Eigen::MatrixXd q_star = mdp.q_star(gamma);
  const auto fmap = ggq_test::TabularMdp::features();

  double worst = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset data = mdp.simulate(5000, 10, seed);
    EstimatorConfig config;
    config.gamma = gamma;
    config.schedule.nu = 0.05;
    config.tolerance = 1e-4;
    config.max_sweeps = 1000;
    const auto est = ggq_fit(data, fmap, config);
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 2; ++a) worst = std::max(worst, std::abs(est.theta[fmap.index(s, a)] - q_star(s, a)));
  }

  const auto model = ggq_test::exact_model(mdp);
  const auto q = value_iteration(model, gamma, 1e-13);
  Eigen::MatrixXd p_pi(3, 3);
  Eigen::VectorXd r_pi(3);
  for (int s = 0; s < 3; ++s) {
    const int idx = *model.find(ggq_test::cell(s));
    const int best = *q.value(idx, 1) > *q.value(idx, 0) ? 1 : 0;
    r_pi[s] = mdp.r[s][best];
    for (int t = 0; t < 3; ++t) p_pi(s, t) = mdp.p[s][best][t];
  }
  const Eigen::VectorXd v = (Eigen::MatrixXd::Identity(3, 3) - gamma * p_pi).lu().solve(r_pi);
  double vi_gap = 0.0;
  for (int s = 0; s < 3; ++s) {
    const int idx = *model.find(ggq_test::cell(s));
    vi_gap = std::max(vi_gap, std::abs(q.state_value(idx) - v[s]));
    for (int a = 0; a < 2; ++a) {
      double qa = mdp.r[s][a];
      for (int t = 0; t < 3; ++t) qa += gamma * mdp.p[s][a][t] * v[t];
      vi_gap = std::max(vi_gap, std::abs(*q.value(idx, a) - qa));
    }
  }
  return {worst <= 0.05 && vi_gap <= 1e-8,
          "max |theta - Q*| = " + fmt(worst) + " (<= 0.05) over 3 datasets of n=5000; value iteration vs linear solve " +
              fmt(vi_gap, 3) + " (<= 1e-8)"};
}

StudySpec base_spec() {
  StudySpec spec;
  spec.workers = workers();
  spec.sample_sizes = {2000};
  return spec;
}

// 2. Objective value and sweep count of the k log k schedule.
Outcome convergence_diagnostics() {
  StudySpec spec = base_spec();
  spec.study = "s5";
  spec.replicates = 50;
  spec.schedules = {ScheduleFamily::kKLogK};
  spec.nus = {0.05};
  spec.estimator.tolerance = 0.025;  // calibrated stopping threshold, see README
  const auto rows = run_tuning_sensitivity(spec);
  const auto& r = rows.front();
  const bool m_ok = r.mean_objective >= 0.003 && r.mean_objective <= 0.015;
  const bool k_ok = r.mean_sweeps >= 8 && r.mean_sweeps <= 22;
  return {m_ok && k_ok, "mean M-hat " + fmt(r.mean_objective) + " (band [0.003, 0.015]) " + (m_ok ? "ok" : "out") +
                            "; mean sweeps " + fmt(r.mean_sweeps) + " (band [8, 22]) " + (k_ok ? "ok" : "out") +
                            "; converged " + std::to_string(r.converged) + "/50"};
}

// 3. Qualitative policy shape.
Outcome policy_shape() {
  StudySpec spec = base_spec();
  spec.study = "fig1";
  const auto result = run_policy_comparison(spec);
  std::size_t states = 0, augment = 0, cls_cells = 0, cls_aug = 0;
  for (const auto& row : result.rows) {
    const int nat = row.cell.values[0], d = row.cell.values[1], cat = row.cell.values[2];
    if (nat == 2 || nat == 3) {
      states += row.states;
      augment += row.ggq_augment_states;
    }
    if (nat == 3 && d == 1 && cat >= 2 && cat <= 4) {
      cls_cells += row.classical_cells;
      cls_aug += row.classical_augment_cells;
    }
  }
  const double cont = states ? 1.0 - double(augment) / double(states) : 0.0;
  const double insulin = cls_cells ? double(cls_aug) / double(cls_cells) : 0.0;
  const bool ok = cont >= 0.8 && insulin >= 0.35 && insulin <= 0.65 && cls_cells > 0;
  return {ok, "GGQ continue rate at NAT 2/3 " + fmt(cont) + " (>= 0.80); classical insulin rate at D=1, Cat.A1c 2-4 " +
                  fmt(insulin) + " over " + std::to_string(cls_cells) + " classical states (band [0.35, 0.65])"};
}

// 4. GGQ value is not worse than classical by more than one MC standard error.
Outcome value_dominance() {
  StudySpec spec = base_spec();
  spec.study = "fig2";
  spec.rollouts = 10000;
  const auto result = run_value_comparison(spec);
  std::size_t bad = 0;
  double worst = 0.0, mean = 0.0;
  std::string worst_cell;
  for (const auto& row : result.rows) {
    mean += row.difference / static_cast<double>(result.rows.size());
    const double z = row.difference_se > 0 ? row.difference / row.difference_se : (row.difference < 0 ? -1e9 : 0.0);
    if (row.difference < -row.difference_se) ++bad;
    if (z < worst) {
      worst = z;
      worst_cell = row.cell.to_string();
    }
  }
  return {bad == 0 && !result.rows.empty(),
          std::to_string(bad) + "/" + std::to_string(result.rows.size()) +
              " oracle cells below -1 SE; mean difference " + fmt(mean) + "; worst cell (" + worst_cell + ") at " +
              fmt(worst, 3) + " SE"};
}

// 5. Wald interval coverage for every coordinate and contrast.
Outcome coverage() {
  StudySpec spec = base_spec();
  spec.study = "coverage";
  spec.replicates = 200;
  const auto result = run_coverage_study(spec, 2000);
  auto count_in = [](const std::vector<CoverageRow>& rows) {
    std::size_t in = 0;
    for (const auto& r : rows) in += (r.coverage >= 0.91 && r.coverage <= 0.99) ? 1 : 0;
    return in;
  };
  std::size_t degenerate = 0;
  for (const auto& r : result.theta) degenerate += r.degenerate > 0 ? 1 : 0;
  const std::size_t theta_in = count_in(result.theta), contrast_in = count_in(result.contrasts);
  const bool ok = result.replicates == spec.replicates && theta_in == result.theta.size() &&
                  contrast_in == result.contrasts.size();
  return {ok, "theta coverage in [0.91, 0.99] for " + std::to_string(theta_in) + "/" +
                  std::to_string(result.theta.size()) + " coordinates (" + std::to_string(degenerate) +
                  " degenerate in some replicate); contrasts " + std::to_string(contrast_in) + "/" +
                  std::to_string(result.contrasts.size()) + "; replicates used " + std::to_string(result.replicates)};
}

// 6. No augmentation when myopic; augmentation grows with gamma.
Outcome gamma_sensitivity() {
  StudySpec spec = base_spec();
  spec.study = "s4";
  spec.gammas = {0.1, 0.3, 0.6, 0.8};
  const auto rows = run_gamma_sensitivity(spec);
  bool monotone = true;
  std::string trail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i && rows[i].augment_fraction < rows[i - 1].augment_fraction) monotone = false;
    trail += (i ? ", " : "") + fmt(rows[i].gamma, 2) + ": " + fmt(rows[i].augment_fraction, 3) + " (" +
             std::to_string(rows[i].augment_cells) + " cells)";
  }
  const bool zero = rows.front().augment_fraction == 0.0;
  return {zero && monotone, std::string("gamma=0.1 augments ") + (zero ? "nowhere" : "somewhere") +
                                "; augment share nondecreasing " + (monotone ? "yes" : "no") + " [" + trail + "]"};
}

// 7. Numerical property suite.
Outcome properties(const char* argv0) {
  doctest::Context context;
  const char* args[] = {argv0, "--test-suite=properties", "--no-intro", "--minimal"};
  context.applyCommandLine(4, args);
  const int failures = context.run();
  return {failures == 0, failures == 0 ? "all property checks hold" : "property failures reported above"};
}

// 8. Generative-law checks.
Outcome generative_law() {
  SimParams params;
  params.n = 5000;
  params.seed = derive_seed(20240611, "generative", 0);
  double base[3] = {0, 0, 0};
  long insulin = 0, dropped = 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long m = 0;
  for (std::size_t i = 0; i < params.n; ++i) {
    std::vector<Action> actions;
    const auto states = simulate_subject(params, i, &actions);
    base[0] += states[0].bp;
    base[1] += states[0].weight;
    base[2] += states[0].a1c;
    for (std::size_t t = 0; t < actions.size(); ++t) {
      const auto& s = states[t];
      if (!s.alive) break;
      if (actions[t] == 4) {
        ++insulin;
        dropped += states[t + 1].d;
      }
      // Z_t = 1 branch: a randomized decision that continued.
      if (s.a1c > 7.0 && s.a1c < 8.0 && s.nat < params.max_nat && actions[t] == 0 && states[t + 1].alive) {
        const double x = s.a1c, y = states[t + 1].a1c;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
      }
    }
  }
  const double n = static_cast<double>(params.n), se = 1.0 / std::sqrt(n);
  const double means[3] = {base[0] / n, base[1] / n, base[2] / n};
  const double targets[3] = {13.0, 160.0, 9.4};
  bool means_ok = true;
  for (int k = 0; k < 3; ++k) means_ok = means_ok && std::abs(means[k] - targets[k]) <= 3 * se;
  const double rate = double(dropped) / double(insulin);
  const bool rate_ok = std::abs(rate - 0.35) <= 3 * std::sqrt(0.35 * 0.65 / double(insulin));
  const double slope = (sxy - sx * sy / m) / (sxx - sx * sx / m);
  const bool slope_ok = std::abs(slope - 1.0) <= 0.02;
  return {means_ok && rate_ok && slope_ok,
          "insulin discontinuation " + fmt(rate) + " (" + (rate_ok ? "ok" : "out") + "); baseline means " +
              fmt(means[0]) + ", " + fmt(means[1]) + ", " + fmt(means[2]) + " (" + (means_ok ? "ok" : "out") +
              "); continue-branch A1c slope " + fmt(slope) + " over " + std::to_string(m) + " transitions (" +
              (slope_ok ? "ok" : "out of 1.00 +- 0.02") + ")"};
}

struct Criterion {
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion criteria[] = {
      {"oracle equivalence", 60, oracle_equivalence},
      {"objective and convergence diagnostics", 1200, convergence_diagnostics},
      {"policy qualitative reproduction", 1200, policy_shape},
      {"value dominance", 900, value_dominance},
      {"coverage (long suite)", 7200, coverage},
      {"gamma sensitivity", 1200, gamma_sensitivity},
      {"numerical property suite", 60, [argv] { return properties(argv[0]); }},
      {"generative-law checks", 600, generative_law},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (int c = 1; c <= 8; ++c) selected.push_back(c);

  bool all = true;
  for (int c : selected) {
    if (c < 1 || c > 8) {
      std::cerr << "error: unknown criterion " << c << '\n';
      return 2;
    }
    const auto& crit = criteria[c - 1];
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = crit.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= crit.budget_seconds;
    const bool pass = out.pass && in_time;
    all = all && pass;
    std::cout << "criterion " << c << " [" << crit.name << "]: " << (pass ? "PASS" : "FAIL") << " | " << out.detail
              << " | " << fmt(secs, 3) << " s (budget " << crit.budget_seconds << " s)" << std::endl;
  }
  return all ? 0 : 1;
}
