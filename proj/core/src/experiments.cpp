#include "ggq/experiments.hpp"

#include "ggq/errors.hpp"
#include "ggq/text_format.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

#ifndef GGQ_VERSION
#define GGQ_VERSION "unknown"
#endif

namespace ggq {

namespace {

// Relative to the largest diagonal entry of W-hat.
constexpr double kDegenerateDiagonal = 1e-10;

template <class F>
void parallel_for(std::size_t count, unsigned workers, F&& body) {
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (w == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (unsigned t = 0; t < w; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += w) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<Action> diabetes_rule(const State& s) {
  return diabetes_feasible_actions(s, StateSchema::diabetes().index_of("nat"));
}

SimParams with(const SimParams& base, std::size_t n, std::uint64_t seed) {
  SimParams p = base;
  p.n = n;
  p.seed = seed;
  return p;
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Streams a large cohort straight into an oracle transition model without
/// materializing the dataset.
TransitionModel oracle_model(const SimParams& sim, std::size_t n, std::uint64_t seed) {
  SimParams p = with(sim, n, seed);
  p.validate();
  const Discretizer disc = oracle_discretizer();
  TransitionModel model;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Action> actions;
    std::vector<double> rewards;
    const auto states = simulate_subject(p, i, &actions, &rewards);
    for (int t = p.burn_in; t < p.decision_points; ++t) {
      const auto k = static_cast<std::size_t>(t);
      if (!states[k].alive) break;
      const State s = states[k].observed();
      const State next = states[k + 1].observed();
      const int from = model.intern(disc(s));
      const int to = model.intern(disc(next));
      model.record(from, actions[k], to, rewards[k]);
      model.declare_feasible(from, diabetes_rule(s));
    }
  }
  return model;
}

OracleResult oracle_from_models(const TransitionModel& a, const TransitionModel& b, double gamma) {
  OracleResult out;
  out.policy = greedy_table(a, value_iteration(a, gamma));
  out.replicate_policy = greedy_table(b, value_iteration(b, gamma));
  for (const auto& [cell, action] : out.policy) {
    auto it = out.replicate_policy.find(cell);
    if (it == out.replicate_policy.end()) continue;
    ++out.compared;
    if (it->second == action) ++out.agreeing;
  }
  return out;
}

std::string cell_label(const DiscreteState& cell) {
  if (cell.absorbing) return "absorbing";
  std::string s;
  for (std::size_t i = 0; i < cell.values.size(); ++i) s += (i ? "," : "") + std::to_string(cell.values[i]);
  return s;
}

}  // namespace

void StudySpec::validate() const {
  std::vector<std::string> bad;
  static const std::set<std::string> known{"oracle", "fig1", "fig2", "fig3", "fig4", "coverage", "s4", "s5"};
  if (!known.contains(study)) bad.push_back("unknown study '" + study + "'");
  if (replicates < 1) bad.push_back("replicates must be >= 1");
  if (sample_sizes.empty()) bad.push_back("sample_sizes must not be empty");
  for (auto n : sample_sizes)
    if (n < 1) bad.push_back("sample sizes must be positive");
  if (!(level > 0.0 && level < 1.0)) bad.push_back("level must lie in (0,1)");
  for (double g : gammas)
    if (!(g > 0.0 && g < 1.0)) bad.push_back("every gamma must lie in (0,1)");
  for (double v : nus)
    if (!(v > 0.0 && v < 1.0)) bad.push_back("every nu must lie in (0,1)");
  if (!(bandwidth > 0.0)) bad.push_back("bandwidth must be positive");
  if (rollouts < 1) bad.push_back("rollouts must be >= 1");
  if (policy_replicates < 1) bad.push_back("policy_replicates must be >= 1");
  if (workers < 1) bad.push_back("workers must be >= 1");
  if (coverage_fit != "ggq" && coverage_fit != "root") bad.push_back("coverage_fit must be 'ggq' or 'root'");
  if (!bad.empty()) {
    std::string msg = "invalid study spec:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw ConfigError(msg);
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the tag
  for (unsigned char c : tag) h = (h ^ c) * 1099511628211ULL;
  std::uint64_t x = base ^ h ^ (index * 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Discretizer oracle_discretizer() { return Discretizer(DiscretizerSpec::oracle(), StateSchema::diabetes()); }

OracleResult compute_oracle(const SimParams& sim, std::size_t n, double gamma, std::uint64_t seed) {
  const auto a = oracle_model(sim, n, derive_seed(seed, "oracle", 0));
  const auto b = oracle_model(sim, n, derive_seed(seed, "oracle", 1));
  return oracle_from_models(a, b, gamma);
}

namespace {

// Fitting the radial basis needs every stage block observed at least once.
// A draw that leaves a block empty is replaced by the next draw of a separate
// stream, so the primary seeds stay untouched and the replacement is counted.
struct FittableDraw {
  Dataset data;
  RbfSpec rbf;
  std::size_t redraws = 0;
};

FittableDraw draw_fittable(SimParams params, std::uint64_t base, const std::string& tag, std::uint64_t index,
                           double bandwidth) {
  constexpr std::uint64_t kMaxRedraws = 25;
  for (std::uint64_t attempt = 0;; ++attempt) {
    Dataset data = simulate_cohort(params);
    try {
      RbfSpec rbf = fit_rbf_spec(data, bandwidth);
      return {std::move(data), std::move(rbf), attempt};
    } catch (const ConfigError&) {
      if (attempt + 1 == kMaxRedraws) throw;
    }
    params.seed = derive_seed(base, tag + "-redraw", index * kMaxRedraws + attempt);
  }
}

FittedMethods fit_methods_with(const Dataset& data, RbfSpec rbf, const EstimatorConfig& estimator) {
  FittedMethods out;
  out.rbf = std::move(rbf);
  const RbfFeatureMap fmap(out.rbf, data.schema());
  out.ggq = ggq_fit(FeatureTable(data, fmap), estimator);
  auto classical = fit_classical(data, DiscretizerSpec::classical(data), estimator.gamma, diabetes_rule);
  out.discretizer = std::move(classical.discretizer);
  out.classical = std::move(classical.policy);
  out.classical_missing_pairs = classical.missing.size();
  return out;
}

}  // namespace

FittedMethods fit_methods(const Dataset& data, const EstimatorConfig& estimator, double bandwidth) {
  return fit_methods_with(data, fit_rbf_spec(data, bandwidth), estimator);
}

PolicyComparison compare_policies(const Dataset& data, const FittedMethods& fit, const OracleResult& oracle,
                                  std::size_t n) {
  const RbfFeatureMap fmap(fit.rbf, data.schema());
  const Discretizer cells = oracle_discretizer();
  const Discretizer classical(fit.discretizer, data.schema());
  std::map<DiscreteState, PolicyComparisonRow> rows;
  std::map<DiscreteState, std::set<DiscreteState>> classical_seen;
  for (const auto& traj : data.trajectories())
    for (const auto& step : traj.steps) {
      if (step.s.is_absorbing()) continue;
      const DiscreteState cell = cells(step.s);
      auto& row = rows[cell];
      ++row.states;
      if (greedy_action(fit.ggq.theta, step.s, fmap) != 0) ++row.ggq_augment_states;
      const DiscreteState cs = classical(step.s);
      auto it = fit.classical.find(cs);
      if (it == fit.classical.end()) {
        ++row.classical_unseen;
        continue;
      }
      if (it->second != 0) ++row.classical_augment_states;
      if (classical_seen[cell].insert(cs).second) {
        ++row.classical_cells;
        if (it->second != 0) ++row.classical_augment_cells;
      }
    }
  PolicyComparison out;
  out.oracle = oracle;
  for (auto& [cell, row] : rows) {
    row.n = n;
    row.cell = cell;
    auto it = oracle.policy.find(cell);
    row.oracle_action = it == oracle.policy.end() ? kNoAction : it->second;
    out.rows.push_back(row);
  }
  return out;
}

PolicyComparison run_policy_comparison(const StudySpec& spec) {
  spec.validate();
  PolicyComparison out;
  out.oracle = compute_oracle(spec.sim, spec.oracle_n, spec.estimator.gamma, spec.seed);
  for (const std::size_t n : spec.sample_sizes) {
    std::vector<PolicyComparison> parts(spec.policy_replicates);
    std::vector<FittedMethods> fits(spec.policy_replicates);
    std::vector<std::size_t> redraws(spec.policy_replicates, 0);
    parallel_for(spec.policy_replicates, spec.workers, [&](std::size_t r) {
      auto draw = draw_fittable(with(spec.sim, n, derive_seed(spec.seed, "data", n) + r), spec.seed,
                                "data-" + std::to_string(n), r, spec.bandwidth);
      redraws[r] = draw.redraws;
      fits[r] = fit_methods_with(draw.data, std::move(draw.rbf), spec.estimator);
      parts[r] = compare_policies(draw.data, fits[r], out.oracle, n);
    });
    for (auto d : redraws) out.redraws += d;
    std::map<DiscreteState, PolicyComparisonRow> merged;
    for (const auto& part : parts)
      for (const auto& row : part.rows) {
        auto [it, fresh] = merged.try_emplace(row.cell, row);
        if (fresh) continue;
        auto& m = it->second;
        m.states += row.states;
        m.ggq_augment_states += row.ggq_augment_states;
        m.classical_cells += row.classical_cells;
        m.classical_augment_cells += row.classical_augment_cells;
        m.classical_augment_states += row.classical_augment_states;
        m.classical_unseen += row.classical_unseen;
      }
    for (const auto& [cell, row] : merged) out.rows.push_back(row);
    out.fits.push_back(std::move(fits.front()));
  }
  return out;
}

MeanSe mean_and_se(const std::vector<double>& values) {
  if (values.empty()) return {};
  return {mean_of(values), sample_sd(values) / std::sqrt(static_cast<double>(values.size()))};
}

ValueComparison run_value_comparison(const StudySpec& spec) {
  spec.validate();
  ValueComparison out;
  const double gamma = spec.estimator.gamma;
  out.horizon = rollout_horizon(gamma);
  out.oracle = compute_oracle(spec.sim, spec.oracle_n, gamma, spec.seed);

  const Discretizer cells = oracle_discretizer();
  std::map<DiscreteState, std::vector<PatientState>> pool;
  for (const auto& s : visited_states(with(spec.sim, spec.pool_n, derive_seed(spec.seed, "pool", 0))))
    pool[cells(s.observed())].push_back(s);
  const TabularPolicy oracle_policy(cells, out.oracle.policy, 0);

  for (const std::size_t n : spec.sample_sizes) {
    SimParams p = with(spec.sim, n, derive_seed(spec.seed, "data", n));
    p.workers = spec.workers;
    auto draw = draw_fittable(p, spec.seed, "data-" + std::to_string(n), 0, spec.bandwidth);
    out.redraws += draw.redraws;
    const Dataset& data = draw.data;
    const auto fit = fit_methods_with(data, std::move(draw.rbf), spec.estimator);
    const RbfFeatureMap fmap(fit.rbf, data.schema());
    const GreedyPolicy ggq_policy(fmap, fit.ggq.theta);
    const TabularPolicy classical_policy(Discretizer(fit.discretizer, data.schema()), fit.classical, 0);

    std::vector<std::pair<DiscreteState, const std::vector<PatientState>*>> work;
    for (const auto& [cell, starts] : pool) work.emplace_back(cell, &starts);
    std::vector<ValueComparisonRow> rows(work.size());
    parallel_for(work.size(), spec.workers, [&](std::size_t c) {
      const auto& starts = *work[c].second;
      const std::uint64_t seed = derive_seed(spec.seed, "rollout", c);
      const auto g = rollout_policy(spec.sim, ggq_policy, starts, out.horizon, spec.rollouts, seed, gamma);
      const auto k = rollout_policy(spec.sim, classical_policy, starts, out.horizon, spec.rollouts, seed, gamma);
      const auto o = rollout_policy(spec.sim, oracle_policy, starts, out.horizon, spec.rollouts, seed, gamma);
      std::vector<double> diff(g.size()), gap(g.size());
      for (std::size_t r = 0; r < g.size(); ++r) {
        diff[r] = g[r] - k[r];
        gap[r] = o[r] - g[r];
      }
      ValueComparisonRow row;
      row.n = n;
      row.cell = work[c].first;
      row.starts = starts.size();
      const auto gm = mean_and_se(g), km = mean_and_se(k), dm = mean_and_se(diff), om = mean_and_se(o),
                 gp = mean_and_se(gap);
      row.ggq = gm.mean, row.ggq_se = gm.se;
      row.classical = km.mean, row.classical_se = km.se;
      row.difference = dm.mean, row.difference_se = dm.se;
      row.oracle = om.mean;
      row.oracle_gap = gp.mean, row.oracle_gap_se = gp.se;
      rows[c] = row;
    });
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  return out;
}

std::vector<PolicyValueRow> policy_value_table(const SimParams& sim, const Policy& policy, std::size_t pool_n,
                                               std::size_t rollouts, std::uint64_t seed, double gamma,
                                               unsigned workers) {
  if (rollouts < 1) throw ConfigError("policy values: rollouts must be >= 1");
  const int horizon = rollout_horizon(gamma);
  const Discretizer cells = oracle_discretizer();
  std::map<DiscreteState, std::vector<PatientState>> pool;
  for (const auto& s : visited_states(with(sim, pool_n, derive_seed(seed, "pool", 0))))
    pool[cells(s.observed())].push_back(s);
  std::vector<std::pair<DiscreteState, const std::vector<PatientState>*>> work;
  for (const auto& [cell, starts] : pool) work.emplace_back(cell, &starts);
  std::vector<PolicyValueRow> rows(work.size());
  parallel_for(work.size(), workers, [&](std::size_t c) {
    const auto& starts = *work[c].second;
    const auto v = mean_and_se(
        rollout_policy(sim, policy, starts, horizon, rollouts, derive_seed(seed, "rollout", c), gamma));
    rows[c] = {work[c].first, starts.size(), v.mean, v.se};
  });
  return rows;
}

void write_policy_values(const std::vector<PolicyValueRow>& rows, std::ostream& out) {
  out << "cell,starts,value,se\n";
  for (const auto& r : rows)
    out << '"' << cell_label(r.cell) << '"' << ',' << r.starts << ',' << format_double(r.value) << ','
        << format_double(r.se) << '\n';
}

State representative_state(const DiscreteState& cell, const Dataset& data) {
  if (cell.absorbing || cell.values.size() != 3) throw DomainError("representative state needs a live oracle cell");
  static const std::vector<double> midpoints{6.5, 7.1, 7.35, 7.6, 7.85, 8.5, 9.5};
  const int cat = cell.values[2];
  if (cat < 1 || cat > 7) throw DomainError("A1c category out of range in cell " + cell.to_string());
  const auto& schema = data.schema();
  const auto bp = schema.index_of("bp"), weight = schema.index_of("weight");
  std::vector<double> bps, weights;
  for (const auto& traj : data.trajectories())
    for (const auto& step : traj.steps)
      if (!step.s.is_absorbing()) {
        bps.push_back(step.s[bp]);
        weights.push_back(step.s[weight]);
      }
  if (bps.empty()) throw ConfigError("representative state: dataset has no live states");
  return State({static_cast<double>(cell.values[0]), static_cast<double>(cell.values[1]),
                midpoints[static_cast<std::size_t>(cat - 1)], empirical_quantile(bps, 0.5),
                empirical_quantile(weights, 0.5)});
}

CoverageResult run_coverage_study(const StudySpec& spec, std::size_t n) {
  spec.validate();
  const double gamma = spec.estimator.gamma;
  CoverageResult out;

  SimParams ref_params = with(spec.sim, spec.reference_n, derive_seed(spec.seed, "reference", 0));
  ref_params.workers = spec.workers;
  const Dataset reference = simulate_cohort(ref_params);
  const RbfSpec rbf = fit_rbf_spec(reference, spec.bandwidth);
  const RbfFeatureMap fmap(rbf, reference.schema());
  Eigen::VectorXd truth;
  std::vector<std::pair<DiscreteState, State>> contrast_states;
  {
    const FeatureTable table(reference, fmap);
    const Eigen::MatrixXd w = compute_W_hat(table);
    const double floor = kDegenerateDiagonal * w.diagonal().maxCoeff();
    for (Eigen::Index j = 0; j < fmap.dimension(); ++j)
      if (w(j, j) <= floor) out.unidentified.push_back(j);
    const WeightSolver weights(w);
    const auto direct = solve_estimating_equation(table, gamma, weights);
    truth = direct.theta;
    out.reference_objective = direct.objective;

    const Discretizer cells = oracle_discretizer();
    std::set<DiscreteState> seen;
    for (const auto& traj : reference.trajectories())
      for (const auto& step : traj.steps)
        if (!step.s.is_absorbing() && static_cast<int>(step.s[0]) < spec.sim.max_nat) seen.insert(cells(step.s));
    for (const auto& cell : seen) contrast_states.emplace_back(cell, representative_state(cell, reference));
  }
  const Eigen::Index p = fmap.dimension();
  std::vector<double> contrast_truth;
  for (const auto& [cell, s] : contrast_states) {
    const Action aug = static_cast<Action>(s[0]) + 1;
    contrast_truth.push_back((fmap.features(s, aug) - fmap.features(s, 0)).dot(truth));
  }

  struct Replicate {
    bool ok = false, converged = false;
    Eigen::VectorXd theta, se;
    std::vector<bool> degenerate;
    std::vector<Interval> theta_ci, contrast_ci;
  };
  std::vector<Replicate> reps(spec.replicates);
  parallel_for(spec.replicates, spec.workers, [&](std::size_t r) {
    auto& rep = reps[r];
    try {
      const Dataset data = simulate_cohort(with(spec.sim, n, derive_seed(spec.seed, "coverage", r)));
      const FeatureTable table(data, fmap);
      const Eigen::MatrixXd w = compute_W_hat(table);
      const double floor = kDegenerateDiagonal * w.diagonal().maxCoeff();
      for (Eigen::Index j = 0; j < p; ++j) rep.degenerate.push_back(w(j, j) <= floor);
      Eigen::VectorXd theta;
      if (spec.coverage_fit == "root") {
        const auto direct = solve_estimating_equation(table, gamma, WeightSolver(w, spec.estimator.allow_ridge));
        rep.converged = direct.stable;
        theta = direct.theta;
      } else {
        const auto est = ggq_fit(table, spec.estimator);
        rep.converged = est.converged;
        theta = est.theta;
      }
      if (!rep.converged) return;
      const auto inf = infer(theta, table, gamma, spec.gamma_form, spec.estimator.allow_ridge);
      rep.theta = theta;
      rep.se = inf.standard_errors;
      rep.theta_ci = ci_theta(inf, spec.level);
      for (const auto& [cell, s] : contrast_states)
        rep.contrast_ci.push_back(ci_q_contrast(inf, fmap, s, static_cast<Action>(s[0]) + 1, 0, spec.level));
      rep.ok = true;
    } catch (const Error&) {
      rep.ok = false;
      rep.converged = true;  // counted as failed, not as non-converged
    }
  });

  std::vector<const Replicate*> used;
  for (const auto& rep : reps) {
    if (!rep.converged)
      ++out.non_converged;
    else if (!rep.ok)
      ++out.failed;
    else
      used.push_back(&rep);
  }
  out.replicates = used.size();

  auto summarize = [&](const std::string& label, double t, auto&& interval_of) {
    CoverageRow row;
    row.label = label;
    row.truth = t;
    std::vector<double> estimates, ses;
    std::size_t hits = 0;
    for (const auto* rep : used) {
      const Interval iv = interval_of(*rep);
      estimates.push_back(iv.estimate);
      ses.push_back((iv.upper - iv.lower) / (2.0 * normal_critical_value(spec.level)));
      if (iv.contains(t)) ++hits;
    }
    row.used = used.size();
    row.coverage = used.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(used.size());
    row.mean_estimate = mean_of(estimates);
    row.empirical_sd = sample_sd(estimates);
    row.mean_se = mean_of(ses);
    return row;
  };
  for (Eigen::Index j = 0; j < p; ++j) {
    auto row = summarize("theta" + std::to_string(j), truth[j],
                         [j](const Replicate& rep) { return rep.theta_ci[static_cast<std::size_t>(j)]; });
    for (const auto* rep : used) row.degenerate += rep->degenerate[static_cast<std::size_t>(j)] ? 1 : 0;
    out.theta.push_back(std::move(row));
  }
  for (std::size_t c = 0; c < contrast_states.size(); ++c)
    out.contrasts.push_back(summarize(cell_label(contrast_states[c].first), contrast_truth[c],
                                      [c](const Replicate& rep) { return rep.contrast_ci[c]; }));
  return out;
}

std::vector<GammaSensitivityRow> run_gamma_sensitivity(const StudySpec& spec) {
  spec.validate();
  SimParams sim = spec.sim;
  sim.reward = RewardRule::kS4;
  SimParams p = with(sim, spec.sample_sizes.front(), derive_seed(spec.seed, "s4", 0));
  p.workers = spec.workers;
  const Dataset data = simulate_cohort(p);
  const RbfSpec rbf = fit_rbf_spec(data, spec.bandwidth);
  const RbfFeatureMap fmap(rbf, data.schema());
  const FeatureTable table(data, fmap);
  const Discretizer cells = oracle_discretizer();
  const auto oracle = oracle_model(sim, spec.oracle_n, derive_seed(spec.seed, "s4-oracle", 0));

  std::vector<GammaSensitivityRow> rows(spec.gammas.size());
  parallel_for(spec.gammas.size(), spec.workers, [&](std::size_t g) {
    EstimatorConfig config = spec.estimator;
    config.gamma = spec.gammas[g];
    const auto est = ggq_fit(table, config);
    std::map<DiscreteState, std::pair<std::size_t, std::size_t>> tally;  // (states, augment)
    std::size_t states = 0, augments = 0;
    for (const auto& traj : data.trajectories())
      for (const auto& step : traj.steps) {
        if (step.s.is_absorbing() || static_cast<int>(step.s[0]) >= sim.max_nat) continue;
        auto& t = tally[cells(step.s)];
        ++t.first;
        ++states;
        if (greedy_action(est.theta, step.s, fmap) != 0) {
          ++t.second;
          ++augments;
        }
      }
    GammaSensitivityRow row;
    row.gamma = config.gamma;
    row.converged = est.converged;
    row.cells = tally.size();
    for (const auto& [cell, t] : tally)
      if (2 * t.second > t.first) ++row.augment_cells;
    row.augment_fraction = states ? static_cast<double>(augments) / static_cast<double>(states) : 0.0;
    for (const auto& [cell, a] : greedy_table(oracle, value_iteration(oracle, config.gamma)))
      if (a != 0 && cell.values[0] < sim.max_nat) ++row.oracle_augment_cells;
    rows[g] = row;
  });
  return rows;
}

std::vector<TuningRow> run_tuning_sensitivity(const StudySpec& spec) {
  spec.validate();
  struct Config {
    ScheduleFamily family;
    double nu;
  };
  std::vector<Config> configs;
  for (auto f : spec.schedules)
    for (double nu : spec.nus) configs.push_back({f, nu});
  const std::size_t n = spec.sample_sizes.front();
  std::vector<std::vector<double>> objective(configs.size(), std::vector<double>(spec.replicates));
  std::vector<std::vector<double>> sweeps = objective;
  std::vector<std::vector<char>> converged(configs.size(), std::vector<char>(spec.replicates, 0));
  std::vector<std::size_t> redraws(spec.replicates, 0);
  parallel_for(spec.replicates, spec.workers, [&](std::size_t r) {
    auto draw = draw_fittable(with(spec.sim, n, derive_seed(spec.seed, "s5", r)), spec.seed, "s5", r, spec.bandwidth);
    redraws[r] = draw.redraws;
    const Dataset& data = draw.data;
    const RbfFeatureMap fmap(std::move(draw.rbf), data.schema());
    const FeatureTable table(data, fmap);
    for (std::size_t c = 0; c < configs.size(); ++c) {
      EstimatorConfig config = spec.estimator;
      config.schedule.family = configs[c].family;
      config.schedule.nu = configs[c].nu;
      if (!config.schedule.check().all()) config.allow_nonconforming_schedule = true;
      const auto est = ggq_fit(table, config);
      objective[c][r] = est.objective;
      sweeps[c][r] = est.sweeps;
      converged[c][r] = est.converged;
    }
  });
  std::vector<TuningRow> rows;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    TuningRow row;
    row.family = configs[c].family;
    row.nu = configs[c].nu;
    row.replicates = spec.replicates;
    row.mean_objective = mean_of(objective[c]);
    row.sd_objective = sample_sd(objective[c]);
    row.mean_sweeps = mean_of(sweeps[c]);
    row.sd_sweeps = sample_sd(sweeps[c]);
    row.converged = static_cast<std::size_t>(std::count(converged[c].begin(), converged[c].end(), 1));
    row.redraws = std::accumulate(redraws.begin(), redraws.end(), std::size_t{0});
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

std::string action_label(Action a) { return a == kNoAction ? "NA" : std::to_string(a); }

}  // namespace

void write_policy_comparison(const PolicyComparison& result, std::ostream& out) {
  out << "n,nat,d,cat_a1c,states,ggq_augment,classical_cells,classical_augment,classical_augment_weighted,"
         "classical_unseen,oracle_action\n";
  for (const auto& r : result.rows)
    out << r.n << ',' << r.cell.values[0] << ',' << r.cell.values[1] << ',' << r.cell.values[2] << ',' << r.states
        << ',' << format_double(r.ggq_augment()) << ',' << r.classical_cells << ','
        << format_double(r.classical_augment()) << ',' << format_double(r.classical_augment_weighted()) << ','
        << r.classical_unseen << ',' << action_label(r.oracle_action) << '\n';
}

void write_value_comparison(const ValueComparison& result, std::ostream& out) {
  out << "n,nat,d,cat_a1c,starts,ggq,ggq_se,classical,classical_se,difference,difference_se,oracle,oracle_gap,"
         "oracle_gap_se\n";
  for (const auto& r : result.rows)
    out << r.n << ',' << r.cell.values[0] << ',' << r.cell.values[1] << ',' << r.cell.values[2] << ',' << r.starts
        << ',' << format_double(r.ggq) << ',' << format_double(r.ggq_se) << ',' << format_double(r.classical) << ','
        << format_double(r.classical_se) << ',' << format_double(r.difference) << ','
        << format_double(r.difference_se) << ',' << format_double(r.oracle) << ',' << format_double(r.oracle_gap)
        << ',' << format_double(r.oracle_gap_se) << '\n';
}

void write_coverage(const std::vector<CoverageRow>& rows, double level, std::ostream& out) {
  out << "label,truth,coverage,level,mean_estimate,empirical_sd,mean_se,replicates,degenerate\n";
  for (const auto& r : rows)
    out << '"' << r.label << '"' << ',' << format_double(r.truth) << ',' << format_double(r.coverage) << ','
        << format_double(level) << ',' << format_double(r.mean_estimate) << ',' << format_double(r.empirical_sd)
        << ',' << format_double(r.mean_se) << ',' << r.used << ',' << r.degenerate << '\n';
}

void write_gamma_sensitivity(const std::vector<GammaSensitivityRow>& rows, std::ostream& out) {
  out << "gamma,cells,augment_cells,augment_fraction,oracle_augment_cells,converged\n";
  for (const auto& r : rows)
    out << format_double(r.gamma) << ',' << r.cells << ',' << r.augment_cells << ','
        << format_double(r.augment_fraction) << ',' << r.oracle_augment_cells << ',' << (r.converged ? 1 : 0)
        << '\n';
}

void write_tuning_sensitivity(const std::vector<TuningRow>& rows, std::ostream& out) {
  out << "schedule,nu,replicates,mean_objective,sd_objective,mean_sweeps,sd_sweeps,converged,redraws\n";
  for (const auto& r : rows)
    out << to_string(r.family) << ',' << format_double(r.nu) << ',' << r.replicates << ','
        << format_double(r.mean_objective) << ',' << format_double(r.sd_objective) << ','
        << format_double(r.mean_sweeps) << ',' << format_double(r.sd_sweeps) << ',' << r.converged << ','
        << r.redraws << '\n';
}

std::string study_manifest(const StudySpec& spec, const std::vector<std::string>& notes) {
  nlohmann::ordered_json j;
  j["tool"] = "ggq";
  j["version"] = GGQ_VERSION;
  j["study"] = spec.study;
  j["seed"] = spec.seed;
  j["sample_sizes"] = spec.sample_sizes;
  j["replicates"] = spec.replicates;
  j["level"] = spec.level;
  j["gammas"] = spec.gammas;
  std::vector<std::string> families;
  for (auto f : spec.schedules) families.emplace_back(to_string(f));
  j["schedules"] = families;
  j["nus"] = spec.nus;
  j["oracle_n"] = spec.oracle_n;
  j["reference_n"] = spec.reference_n;
  j["pool_n"] = spec.pool_n;
  j["rollouts"] = spec.rollouts;
  j["policy_replicates"] = spec.policy_replicates;
  j["bandwidth"] = spec.bandwidth;
  j["gamma_form"] = to_string(spec.gamma_form);
  j["coverage_fit"] = spec.coverage_fit;
  j["estimator"] = {{"gamma", spec.estimator.gamma},
                    {"schedule", to_string(spec.estimator.schedule.family)},
                    {"step_index", to_string(spec.estimator.schedule.index)},
                    {"nu", spec.estimator.schedule.nu},
                    {"tolerance", spec.estimator.tolerance},
                    {"max_sweeps", spec.estimator.max_sweeps},
                    {"allow_ridge", spec.estimator.allow_ridge}};
  const auto& s = spec.sim;
  j["simulation"] = {{"decision_points", s.decision_points},
                     {"burn_in", s.burn_in},
                     {"baseline_mean", s.baseline_mean},
                     {"effects", s.effects},
                     {"discontinuation", s.discontinuation},
                     {"sigma_eps", s.sigma_eps},
                     {"reward", to_string(s.reward)},
                     {"death_intercept", s.death_intercept}};
  j["notes"] = notes;
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> run_study(const StudySpec& spec) {
  spec.validate();
  std::filesystem::create_directories(spec.out_dir);
  std::vector<std::filesystem::path> written;
  std::vector<std::string> notes;
  auto open = [&](const std::string& name) {
    written.push_back(spec.out_dir / name);
    std::ofstream f(written.back());
    if (!f) throw ConfigError("cannot write " + written.back().string());
    return f;
  };

  if (spec.study == "oracle") {
    const auto oracle = compute_oracle(spec.sim, spec.oracle_n, spec.estimator.gamma, spec.seed);
    auto f = open("oracle_policy.csv");
    write_policy(oracle.policy, f);
    notes.push_back("two-seed agreement " + format_double(oracle.agreement()) + " over " +
                    std::to_string(oracle.compared) + " cells");
  } else if (spec.study == "fig1") {
    const auto result = run_policy_comparison(spec);
    auto f = open("policy_comparison.csv");
    write_policy_comparison(result, f);
    notes.push_back("oracle two-seed agreement " + format_double(result.oracle.agreement()));
    notes.push_back("datasets redrawn for an empty feature block: " + std::to_string(result.redraws));
    for (std::size_t i = 0; i < result.fits.size(); ++i)
      notes.push_back("n=" + std::to_string(spec.sample_sizes[i]) + ", first replicate: GGQ sweeps " +
                      std::to_string(result.fits[i].ggq.sweeps) + (result.fits[i].ggq.converged ? "" : " (not converged)") +
                      ", classical missing pairs " + std::to_string(result.fits[i].classical_missing_pairs));
  } else if (spec.study == "fig2") {
    const auto result = run_value_comparison(spec);
    auto f = open("value_comparison.csv");
    write_value_comparison(result, f);
    notes.push_back("rollout horizon " + std::to_string(result.horizon));
    notes.push_back("datasets redrawn for an empty feature block: " + std::to_string(result.redraws));
  } else if (spec.study == "fig3" || spec.study == "fig4" || spec.study == "coverage") {
    for (const std::size_t n : spec.sample_sizes) {
      const auto result = run_coverage_study(spec, n);
      const std::string suffix = "_n" + std::to_string(n) + ".csv";
      if (spec.study != "fig4") {
        auto f = open("coverage_theta" + suffix);
        write_coverage(result.theta, spec.level, f);
      }
      if (spec.study != "fig3") {
        auto f = open("coverage_contrast" + suffix);
        write_coverage(result.contrasts, spec.level, f);
      }
      std::string unidentified;
      for (auto j : result.unidentified) unidentified += " " + std::to_string(j);
      notes.push_back("n=" + std::to_string(n) + ": " + std::to_string(result.replicates) + " replicates used, " +
                      std::to_string(result.non_converged) + " not converged, " + std::to_string(result.failed) +
                      " failed; unidentified coordinates:" + (unidentified.empty() ? " none" : unidentified));
    }
  } else if (spec.study == "s4") {
    auto f = open("gamma_sensitivity.csv");
    write_gamma_sensitivity(run_gamma_sensitivity(spec), f);
  } else if (spec.study == "s5") {
    auto f = open("tuning_sensitivity.csv");
    write_tuning_sensitivity(run_tuning_sensitivity(spec), f);
  }
  auto m = open("manifest.json");
  m << study_manifest(spec, notes);
  return written;
}

}  // namespace ggq
