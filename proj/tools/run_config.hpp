#pragma once

#include "ggq/experiments.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace ggq::cli {

/// Everything one command needs: the study spec (which carries the
/// simulation and estimator settings) plus input paths.
struct RunConfig {
  StudySpec spec;
  std::string data;         ///< trajectory file
  std::string theta;        ///< theta.json from fit-ggq
  std::string policy;       ///< theta.json or a classical policy.csv
  std::string discretizer;  ///< discretizer.json for a classical policy
};

/// Layered configuration: built-in defaults, then the config file, then
/// GGQ_<KEY> environment variables, then command-line overrides. Unknown
/// keys, type errors and validation failures are gathered and reported
/// together in one ConfigError.
class ConfigLoader {
 public:
  ConfigLoader();

  void merge_file(const std::string& path);
  void merge_environment(char** environ);
  /// `key=value`; the value is read as JSON when it parses, else as a string.
  void merge_assignment(const std::string& assignment);
  void set(const std::string& key, nlohmann::json value);

  RunConfig resolve() const;

  /// Every key with its resolved value, in registry order.
  static nlohmann::ordered_json normalized(const RunConfig& config);

 private:
  std::map<std::string, nlohmann::json> values_;
  std::vector<std::string> unknown_;
};

}  // namespace ggq::cli
