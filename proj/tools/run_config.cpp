#include "run_config.hpp"

#include "ggq/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <thread>

namespace ggq::cli {

namespace {

using nlohmann::json;

struct Key {
  const char* name;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <class T>
Key field(const char* name, T RunConfig::*member) {
  return {name, [member](const RunConfig& c) { return json(c.*member); },
          [member](RunConfig& c, const json& v) { c.*member = v.get<T>(); }};
}
template <class T>
Key spec_field(const char* name, T StudySpec::*member) {
  return {name, [member](const RunConfig& c) { return json(c.spec.*member); },
          [member](RunConfig& c, const json& v) { c.spec.*member = v.get<T>(); }};
}
template <class T>
Key sim_field(const char* name, T SimParams::*member) {
  return {name, [member](const RunConfig& c) { return json(c.spec.sim.*member); },
          [member](RunConfig& c, const json& v) { c.spec.sim.*member = v.get<T>(); }};
}
template <class T>
Key est_field(const char* name, T EstimatorConfig::*member) {
  return {name, [member](const RunConfig& c) { return json(c.spec.estimator.*member); },
          [member](RunConfig& c, const json& v) { c.spec.estimator.*member = v.get<T>(); }};
}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    // Run plumbing.
    k.push_back({"seed", [](const RunConfig& c) { return json(c.spec.seed); },
                 [](RunConfig& c, const json& v) { c.spec.seed = c.spec.sim.seed = v.get<std::uint64_t>(); }});
    k.push_back({"workers", [](const RunConfig& c) { return json(c.spec.workers); },
                 [](RunConfig& c, const json& v) { c.spec.workers = c.spec.sim.workers = v.get<unsigned>(); }});
    k.push_back({"out", [](const RunConfig& c) { return json(c.spec.out_dir.string()); },
                 [](RunConfig& c, const json& v) { c.spec.out_dir = v.get<std::string>(); }});
    k.push_back(field("data", &RunConfig::data));
    k.push_back(field("theta", &RunConfig::theta));
    k.push_back(field("policy", &RunConfig::policy));
    k.push_back(field("discretizer", &RunConfig::discretizer));
    // Simulation.
    k.push_back(sim_field("n", &SimParams::n));
    k.push_back(sim_field("decision_points", &SimParams::decision_points));
    k.push_back(sim_field("burn_in", &SimParams::burn_in));
    k.push_back(sim_field("baseline_mean", &SimParams::baseline_mean));
    k.push_back(sim_field("effects", &SimParams::effects));
    k.push_back(sim_field("discontinuation", &SimParams::discontinuation));
    k.push_back(sim_field("sigma_eps", &SimParams::sigma_eps));
    k.push_back(sim_field("behavior_low", &SimParams::behavior_low));
    k.push_back(sim_field("behavior_high", &SimParams::behavior_high));
    k.push_back(sim_field("assign_intercept", &SimParams::assign_intercept));
    k.push_back(sim_field("assign_a1c", &SimParams::assign_a1c));
    k.push_back(sim_field("assign_nat", &SimParams::assign_nat));
    k.push_back(sim_field("assign_d", &SimParams::assign_d));
    k.push_back(sim_field("death_intercept", &SimParams::death_intercept));
    k.push_back(sim_field("death_a1c", &SimParams::death_a1c));
    k.push_back(sim_field("death_nat", &SimParams::death_nat));
    k.push_back(sim_field("max_nat", &SimParams::max_nat));
    k.push_back({"reward", [](const RunConfig& c) { return json(std::string(to_string(c.spec.sim.reward))); },
                 [](RunConfig& c, const json& v) { c.spec.sim.reward = reward_rule_from_string(v.get<std::string>()); }});
    // Estimator.
    k.push_back(est_field("gamma", &EstimatorConfig::gamma));
    k.push_back({"schedule",
                 [](const RunConfig& c) { return json(std::string(to_string(c.spec.estimator.schedule.family))); },
                 [](RunConfig& c, const json& v) {
                   c.spec.estimator.schedule.family = schedule_family_from_string(v.get<std::string>());
                 }});
    k.push_back({"nu", [](const RunConfig& c) { return json(c.spec.estimator.schedule.nu); },
                 [](RunConfig& c, const json& v) { c.spec.estimator.schedule.nu = v.get<double>(); }});
    k.push_back({"step_index",
                 [](const RunConfig& c) { return json(std::string(to_string(c.spec.estimator.schedule.index))); },
                 [](RunConfig& c, const json& v) {
                   c.spec.estimator.schedule.index = step_index_from_string(v.get<std::string>());
                 }});
    k.push_back(est_field("tolerance", &EstimatorConfig::tolerance));
    k.push_back(est_field("max_sweeps", &EstimatorConfig::max_sweeps));
    k.push_back(est_field("grid_scale", &EstimatorConfig::grid_scale));
    k.push_back(est_field("allow_nonconforming_schedule", &EstimatorConfig::allow_nonconforming_schedule));
    k.push_back(est_field("allow_ridge", &EstimatorConfig::allow_ridge));
    // Features and inference.
    k.push_back(spec_field("bandwidth", &StudySpec::bandwidth));
    k.push_back({"gamma_form", [](const RunConfig& c) { return json(std::string(to_string(c.spec.gamma_form))); },
                 [](RunConfig& c, const json& v) { c.spec.gamma_form = gamma_form_from_string(v.get<std::string>()); }});
    k.push_back(spec_field("level", &StudySpec::level));
    // Studies and evaluation.
    k.push_back(spec_field("study", &StudySpec::study));
    k.push_back(spec_field("sample_sizes", &StudySpec::sample_sizes));
    k.push_back(spec_field("replicates", &StudySpec::replicates));
    k.push_back(spec_field("gammas", &StudySpec::gammas));
    k.push_back({"schedules",
                 [](const RunConfig& c) {
                   json a = json::array();
                   for (auto f : c.spec.schedules) a.push_back(std::string(to_string(f)));
                   return a;
                 },
                 [](RunConfig& c, const json& v) {
                   c.spec.schedules.clear();
                   for (const auto& f : v) c.spec.schedules.push_back(schedule_family_from_string(f.get<std::string>()));
                 }});
    k.push_back(spec_field("nus", &StudySpec::nus));
    k.push_back(spec_field("oracle_n", &StudySpec::oracle_n));
    k.push_back(spec_field("reference_n", &StudySpec::reference_n));
    k.push_back(spec_field("pool_n", &StudySpec::pool_n));
    k.push_back(spec_field("policy_replicates", &StudySpec::policy_replicates));
    k.push_back(spec_field("rollouts", &StudySpec::rollouts));
    k.push_back(spec_field("coverage_fit", &StudySpec::coverage_fit));
    return k;
  }();
  return keys;
}

const Key* find_key(const std::string& name) {
  for (const auto& k : registry())
    if (name == k.name) return &k;
  return nullptr;
}

json parse_loose(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

}  // namespace

ConfigLoader::ConfigLoader() = default;

void ConfigLoader::set(const std::string& key, json value) {
  if (!find_key(key)) {
    if (std::find(unknown_.begin(), unknown_.end(), key) == unknown_.end()) unknown_.push_back(key);
    return;
  }
  values_[key] = std::move(value);
}

void ConfigLoader::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object of key/value pairs");
  for (auto it = j.begin(); it != j.end(); ++it) set(it.key(), it.value());
}

void ConfigLoader::merge_environment(char** env) {
  constexpr std::string_view prefix = "GGQ_";
  for (char** e = env; e && *e; ++e) {
    const std::string entry = *e;
    if (!entry.starts_with(prefix)) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(prefix.size(), eq - prefix.size());
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    set(key, parse_loose(entry.substr(eq + 1)));
  }
}

void ConfigLoader::merge_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must read key=value");
  set(assignment.substr(0, eq), parse_loose(assignment.substr(eq + 1)));
}

RunConfig ConfigLoader::resolve() const {
  RunConfig config;
  config.spec.workers = config.spec.sim.workers = std::max(1u, std::thread::hardware_concurrency());
  config.spec.sim.seed = config.spec.seed;

  std::vector<std::string> problems;
  for (const auto& u : unknown_) problems.push_back("unknown key '" + u + "'");
  for (const auto& k : registry()) {
    auto it = values_.find(k.name);
    if (it == values_.end()) continue;
    try {
      k.set(config, it->second);
    } catch (const json::exception&) {
      problems.push_back("key '" + std::string(k.name) + "' has the wrong type (" + it->second.dump() + ")");
    } catch (const ConfigError& e) {
      problems.push_back("key '" + std::string(k.name) + "': " + e.what());
    }
  }
  auto check = [&](auto&& validate) {
    try {
      validate();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  };
  check([&] { config.spec.sim.validate(); });
  check([&] { config.spec.estimator.validate(); });
  check([&] { config.spec.validate(); });
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " configuration problem(s): ";
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? " | " : "") + problems[i];
    throw ConfigError(msg);
  }
  return config;
}

nlohmann::ordered_json ConfigLoader::normalized(const RunConfig& config) {
  nlohmann::ordered_json j;
  for (const auto& k : registry()) j[k.name] = k.get(config);
  return j;
}

}  // namespace ggq::cli
