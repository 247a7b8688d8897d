// ggq: command-line front end. Each subcommand resolves the layered
// configuration, echoes it to <out>/config.json and calls one library entry
// point. Failures print a single JSON line on stderr.

#include "run_config.hpp"

#include "ggq/classical.hpp"
#include "ggq/dataset_io.hpp"
#include "ggq/diabetes_sim.hpp"
#include "ggq/errors.hpp"
#include "ggq/experiments.hpp"
#include "ggq/features.hpp"
#include "ggq/ggq.hpp"
#include "ggq/inference.hpp"
#include "ggq/text_format.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

extern char** environ;

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ggq;
using ggq::cli::ConfigLoader;
using ggq::cli::RunConfig;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfig = 3,
  kParse = 4,
  kDomain = 5,
  kNumerical = 6,
  kEstimation = 7,
  kIo = 8,
};

class IoError : public Error {
 public:
  using Error::Error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

const std::string& require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("missing required key '") + key + "'");
  if (!fs::exists(value)) throw IoError(std::string(key) + " file " + value + " does not exist");
  return value;
}

std::vector<Action> diabetes_rule(const State& s) {
  return diabetes_feasible_actions(s, StateSchema::diabetes().index_of("nat"));
}

void print_warnings(std::vector<std::string> warnings) {
  std::sort(warnings.begin(), warnings.end());
  warnings.erase(std::unique(warnings.begin(), warnings.end()), warnings.end());
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

void echo_config(const RunConfig& config, const char* command) {
  fs::create_directories(config.spec.out_dir);
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = ConfigLoader::normalized(config);
  open_output(config.spec.out_dir / "config.json") << j.dump(2) << '\n';
}

/// theta.json: the coefficients plus everything needed to rebuild phi.
struct ThetaFile {
  RbfSpec rbf;
  Eigen::VectorXd theta;
  double gamma = 0.0;
};

ThetaFile load_theta(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
    ThetaFile f;
    f.rbf = rbf_spec_from_json(j.at("features").dump());
    const auto values = j.at("theta").get<std::vector<double>>();
    f.theta = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    f.gamma = j.at("gamma").get<double>();
    if (f.theta.size() != f.rbf.dimension())
      throw ParseError("theta has " + std::to_string(f.theta.size()) + " entries but the feature layout has " +
                       std::to_string(f.rbf.dimension()));
    return f;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void check_gamma(const ThetaFile& f, const RunConfig& config) {
  if (f.gamma != config.spec.estimator.gamma)
    throw ConfigError("theta file was fitted with gamma=" + format_double(f.gamma) + " but the config sets gamma=" +
                      format_double(config.spec.estimator.gamma));
}

void cmd_simulate(const RunConfig& config) {
  SimParams params = config.spec.sim;
  const Dataset data = simulate_cohort(params);
  write_dataset(data, config.spec.out_dir / "trajectories.csv");
  std::cout << (config.spec.out_dir / "trajectories.csv").string() << '\n';
}

void cmd_fit_ggq(const RunConfig& config) {
  const Dataset data = read_dataset(require_path(config.data, "data"));
  const RbfSpec rbf = fit_rbf_spec(data, config.spec.bandwidth);
  const RbfFeatureMap fmap(rbf, data.schema());
  const ThetaEstimate est = ggq_fit(data, fmap, config.spec.estimator);

  nlohmann::ordered_json j;
  j["gamma"] = config.spec.estimator.gamma;
  j["converged"] = est.converged;
  j["sweeps"] = est.sweeps;
  j["updates"] = est.updates;
  j["objective"] = est.objective;
  j["initial_objective"] = est.initial_objective;
  j["theta"] = std::vector<double>(est.theta.data(), est.theta.data() + est.theta.size());
  j["features"] = json::parse(rbf_spec_to_json(rbf));
  j["warnings"] = est.warnings;
  open_output(config.spec.out_dir / "theta.json") << j.dump(2) << '\n';

  auto trace = open_output(config.spec.out_dir / "trace.csv");
  trace << "sweep,step_norm,objective\n";
  for (const auto& r : est.trace)
    trace << r.sweep << ',' << format_double(r.step_norm) << ',' << format_double(r.objective) << '\n';
  print_warnings(est.warnings);
  std::cout << "converged=" << (est.converged ? "true" : "false") << " sweeps=" << est.sweeps
            << " objective=" << format_double(est.objective) << '\n';
}

void cmd_fit_classical(const RunConfig& config) {
  const Dataset data = read_dataset(require_path(config.data, "data"));
  const double gamma = config.spec.estimator.gamma;
  const ClassicalFit fit = fit_classical(data, DiscretizerSpec::classical(data), gamma, diabetes_rule);
  const fs::path& out = config.spec.out_dir;
  {
    auto f = open_output(out / "qtable.csv");
    write_qtable(fit.model, fit.q, f);
  }
  {
    auto f = open_output(out / "transitions.csv");
    write_transitions(fit.model, f);
  }
  {
    auto f = open_output(out / "policy.csv");
    write_policy(fit.policy, f);
  }
  open_output(out / "discretizer.json") << discretizer_to_json(fit.discretizer) << '\n';
  auto missing = open_output(out / "missing_pairs.csv");
  missing << "state,action\n";
  for (const auto& m : fit.missing) missing << '"' << m.state.to_string() << "\"," << m.action << '\n';
  std::cout << "states=" << fit.policy.size() << " missing_pairs=" << fit.missing.size() << '\n';
}

void cmd_infer(const RunConfig& config) {
  const Dataset data = read_dataset(require_path(config.data, "data"));
  const ThetaFile f = load_theta(require_path(config.theta, "theta"));
  check_gamma(f, config);
  const RbfFeatureMap fmap(f.rbf, data.schema());
  const InferenceResult result =
      infer(f.theta, data, f.gamma, fmap, config.spec.gamma_form, config.spec.estimator.allow_ridge);
  {
    auto out = open_output(config.spec.out_dir / "inference.csv");
    write_inference(result, config.spec.level, out);
  }
  auto cov = open_output(config.spec.out_dir / "covariance.csv");
  write_covariance(result.covariance, cov);
  print_warnings(result.warnings);
  std::cout << "n=" << result.n << " near_ties=" << result.near_ties << '\n';
}

void cmd_evaluate(const RunConfig& config) {
  const std::string& path = require_path(config.policy, "policy");
  const StudySpec& spec = config.spec;
  auto run = [&](const Policy& policy) {
    const auto rows = policy_value_table(spec.sim, policy, spec.pool_n, spec.rollouts, spec.seed,
                                         spec.estimator.gamma, spec.workers);
    auto out = open_output(spec.out_dir / "values.csv");
    write_policy_values(rows, out);
    std::cout << "cells=" << rows.size() << '\n';
  };
  if (fs::path(path).extension() == ".json") {
    const ThetaFile f = load_theta(path);
    check_gamma(f, config);
    const RbfFeatureMap fmap(f.rbf);
    run(GreedyPolicy(fmap, f.theta));
    return;
  }
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  auto table = read_policy(in);
  const DiscretizerSpec dspec = discretizer_from_json(read_text(require_path(config.discretizer, "discretizer")));
  // Cells never seen in the data fall back to continuing the current regimen.
  run(TabularPolicy(Discretizer(dspec, StateSchema::diabetes()), std::move(table), Action{0}));
}

void cmd_study(const RunConfig& config) {
  for (const auto& p : run_study(config.spec)) std::cout << p.string() << '\n';
}

int report(int code, std::string_view type, std::string_view message) {
  json j;
  j["error"] = type;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Greedy gradient Q-learning for batch treatment-policy estimation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string("ggq ") + GGQ_VERSION);

  std::string config_path;
  std::vector<std::string> assignments;
  std::map<std::string, std::string> flags;
  app.add_option("--config", config_path, "JSON config file of flat key/value pairs");
  for (const char* key : {"seed", "out", "workers", "data", "theta", "policy", "discretizer", "study"}) {
    app.add_option_function<std::string>(std::string("--") + key, [&flags, key](const std::string& v) { flags[key] = v; },
                                          std::string("sets config key '") + key + "'");
  }
  app.add_option("--set", assignments, "key=value override, repeatable");

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const RunConfig&);
  };
  const Command commands[] = {
      {"simulate", "simulate a cohort and write trajectories.csv", cmd_simulate},
      {"fit-ggq", "fit GGQ on --data; writes theta.json and trace.csv", cmd_fit_ggq},
      {"fit-classical", "fit the discretized value-iteration baseline on --data", cmd_fit_classical},
      {"infer", "sandwich covariance and Wald intervals for --theta on --data", cmd_infer},
      {"evaluate", "Monte Carlo value of --policy from the oracle start cells", cmd_evaluate},
      {"study", "run a named study (--study) into --out", cmd_study},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(kUsage, "UsageError", e.what());
  }

  try {
    ConfigLoader loader;
    if (!config_path.empty()) loader.merge_file(config_path);
    loader.merge_environment(environ);
    for (const auto& [key, value] : flags) loader.merge_assignment(key + "=" + value);
    for (const auto& a : assignments) loader.merge_assignment(a);
    const RunConfig config = loader.resolve();

    for (const auto& c : commands) {
      if (!app.got_subcommand(c.name)) continue;
      echo_config(config, c.name);
      c.run(config);
    }
    return kOk;
  } catch (const ConfigError& e) {
    return report(kConfig, "ConfigError", e.what());
  } catch (const ParseError& e) {
    return report(kParse, "ParseError", e.what());
  } catch (const DomainError& e) {
    return report(kDomain, "DomainError", e.what());
  } catch (const NumericalError& e) {
    return report(kNumerical, "NumericalError", e.what());
  } catch (const EstimationError& e) {
    return report(kEstimation, "EstimationError", e.what());
  } catch (const IoError& e) {
    return report(kIo, "IoError", e.what());
  } catch (const fs::filesystem_error& e) {
    return report(kIo, "IoError", e.what());
  } catch (const std::exception& e) {
    return report(kFailure, "Error", e.what());
  }
}
