#include "ggq/features.hpp"

#include "ggq/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ggq {

double empirical_quantile(std::vector<double> values, double probability) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError("quantile probability outside [0,1]");
  std::sort(values.begin(), values.end());
  const double position = probability * static_cast<double>(values.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(position));
  const std::size_t upper = std::min(lower + 1, values.size() - 1);
  const double fraction = position - static_cast<double>(lower);
  return values[lower] + fraction * (values[upper] - values[lower]);
}

RbfCenter RbfCenter::fixed(double v) {
  std::ostringstream os;
  os << v;
  return RbfCenter{os.str(), 0, v};
}

RbfCenter RbfCenter::quantile(std::string label, int quartile) {
  return RbfCenter{std::move(label), quartile, 0.0};
}

Eigen::Index RbfSpec::dimension() const {
  Eigen::Index p = 0;
  for (const auto& block : blocks) p += block.width();
  return p;
}

std::vector<RbfBlock> RbfSpec::diabetes_layout() {
  using C = RbfCenter;
  return {
      {"phi1", 0, 0, {C::quantile("q11", 1), C::quantile("q12", 2)}, false},
      {"phi2", 0, 1, {C::quantile("q21", 1), C::quantile("q22", 2), C::fixed(8.0)}, true},
      {"phi3", 0, 2, {C::quantile("q31", 1), C::quantile("q33", 3)}, true},
      {"phi4", 0, 3, {C::quantile("q41", 1), C::quantile("q42", 2), C::fixed(8.5)}, true},
      {"phi5", 0, 4, {C::quantile("q51", 1), C::quantile("q52", 2), C::fixed(8.0)}, true},
      {"phi6", 1, 0, {C::fixed(6.5), C::fixed(7.5)}, false},
      {"phi7", 2, 1, {C::fixed(6.5), C::quantile("q71", 1), C::quantile("q73", 3)}, true},
      {"phi8", 3, 2, {C::quantile("q82", 2), C::fixed(8.5)}, true},
      {"phi9", 4, 3, {C::fixed(6.5), C::quantile("q92", 2), C::fixed(8.5)}, true},
  };
}

RbfSpec fit_rbf_spec(const Dataset& data, double bandwidth, std::vector<RbfBlock> layout) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ConfigError("bandwidth h must be positive");
  if (data.empty()) throw ConfigError("cannot fit feature centers on an empty dataset");
  const auto& schema = data.schema();
  const std::size_t nat = schema.index_of("nat"), a1c = schema.index_of("a1c"),
                    bp = schema.index_of("bp"), weight = schema.index_of("weight");

  std::map<std::pair<Action, int>, std::vector<double>> a1c_by_block;
  std::vector<double> bp_values, weight_values;
  for (const auto& tr : data.trajectories()) {
    for (const auto& step : tr.steps) {
      if (step.s.is_absorbing()) continue;
      a1c_by_block[{step.a, static_cast<int>(std::lround(step.s[nat]))}].push_back(step.s[a1c]);
      bp_values.push_back(step.s[bp]);
      weight_values.push_back(step.s[weight]);
    }
  }
  if (bp_values.empty()) throw ConfigError("dataset has no live transitions");

  RbfSpec spec;
  spec.bandwidth = bandwidth;
  for (auto& block : layout) {
    const bool needs_data = std::any_of(block.a1c_centers.begin(), block.a1c_centers.end(),
                                        [](const RbfCenter& c) { return c.quartile > 0; });
    auto it = a1c_by_block.find({block.action, block.nat});
    if (needs_data && (it == a1c_by_block.end() || it->second.empty()))
      throw ConfigError("feature block " + block.name + " (A=" + std::to_string(block.action) +
                        ", NAT=" + std::to_string(block.nat) + ") has no observations");
    for (auto& center : block.a1c_centers)
      if (center.quartile > 0) center.value = empirical_quantile(it->second, 0.25 * center.quartile);
  }
  spec.blocks = std::move(layout);
  spec.bp_centers = {empirical_quantile(bp_values, 0.25), empirical_quantile(bp_values, 0.75)};
  spec.weight_centers = {empirical_quantile(weight_values, 0.25), empirical_quantile(weight_values, 0.75)};
  return spec;
}

std::string rbf_spec_to_json(const RbfSpec& spec) {
  nlohmann::json j;
  j["kind"] = "rbf";
  j["bandwidth"] = spec.bandwidth;
  j["bp_centers"] = spec.bp_centers;
  j["weight_centers"] = spec.weight_centers;
  j["blocks"] = nlohmann::json::array();
  for (const auto& block : spec.blocks) {
    nlohmann::json b;
    b["name"] = block.name;
    b["action"] = block.action;
    b["nat"] = block.nat;
    b["discontinuation"] = block.has_discontinuation;
    b["a1c_centers"] = nlohmann::json::array();
    for (const auto& c : block.a1c_centers)
      b["a1c_centers"].push_back({{"label", c.label}, {"quartile", c.quartile}, {"value", c.value}});
    j["blocks"].push_back(std::move(b));
  }
  return j.dump(2);
}

RbfSpec rbf_spec_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RbfSpec spec;
    spec.bandwidth = j.at("bandwidth").get<double>();
    spec.bp_centers = j.at("bp_centers").get<std::array<double, 2>>();
    spec.weight_centers = j.at("weight_centers").get<std::array<double, 2>>();
    for (const auto& b : j.at("blocks")) {
      RbfBlock block;
      block.name = b.at("name").get<std::string>();
      block.action = b.at("action").get<int>();
      block.nat = b.at("nat").get<int>();
      block.has_discontinuation = b.at("discontinuation").get<bool>();
      for (const auto& c : b.at("a1c_centers"))
        block.a1c_centers.push_back(
            {c.at("label").get<std::string>(), c.at("quartile").get<int>(), c.at("value").get<double>()});
      spec.blocks.push_back(std::move(block));
    }
    if (!(spec.bandwidth > 0.0)) throw ConfigError("bandwidth h must be positive");
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("feature spec: ") + e.what());
  }
}

void save_rbf_spec(const RbfSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << rbf_spec_to_json(spec) << '\n';
}

RbfSpec load_rbf_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return rbf_spec_from_json(buffer.str());
}

std::vector<Action> diabetes_feasible_actions(const State& s, std::size_t nat_index, int max_nat) {
  if (s.is_absorbing()) return {kNoAction};
  const int nat = static_cast<int>(std::lround(s[nat_index]));
  if (nat < max_nat) return {0, nat + 1};
  return {0};
}

RbfFeatureMap::RbfFeatureMap(RbfSpec spec, const StateSchema& schema)
    : spec_(std::move(spec)),
      nat_(schema.index_of("nat")),
      d_(schema.index_of("d")),
      a1c_(schema.index_of("a1c")),
      bp_(schema.index_of("bp")),
      weight_(schema.index_of("weight")) {
  if (!(spec_.bandwidth > 0.0)) throw ConfigError("bandwidth h must be positive");
  for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
    const auto& block = spec_.blocks[b];
    if (!lookup_.emplace(std::pair{block.action, block.nat}, static_cast<int>(b)).second)
      throw ConfigError("duplicate feature block for (A=" + std::to_string(block.action) +
                        ", NAT=" + std::to_string(block.nat) + ")");
    offsets_.push_back(dimension_);
    dimension_ += block.width();
  }
}

std::vector<Action> RbfFeatureMap::feasible_actions(const State& s) const {
  return diabetes_feasible_actions(s, nat_);
}

int RbfFeatureMap::block_index(Action a, int nat) const {
  auto it = lookup_.find({a, nat});
  return it == lookup_.end() ? -1 : it->second;
}

void RbfFeatureMap::features_into(const State& s, Action a, Eigen::Ref<Eigen::VectorXd> out) const {
  out.setZero();
  if (s.is_absorbing()) return;
  const int nat = static_cast<int>(std::lround(s[nat_]));
  const int b = block_index(a, nat);
  if (b < 0 || !is_feasible(s, a))
    throw DomainError("no feature block for action " + std::to_string(a) + " at NAT=" + std::to_string(nat));
  const RbfBlock& block = spec_.blocks[static_cast<std::size_t>(b)];
  const double h = spec_.bandwidth;
  auto kernel = [h](double x, double center) { return std::exp(-h * (x - center) * (x - center)); };

  Eigen::Index i = offsets_[static_cast<std::size_t>(b)];
  out[i++] = 1.0;
  for (const auto& c : block.a1c_centers) out[i++] = kernel(s[a1c_], c.value);
  if (block.has_discontinuation) out[i++] = s[d_];
  out[i++] = kernel(s[bp_], spec_.bp_centers[0]);
  out[i++] = kernel(s[bp_], spec_.bp_centers[1]);
  out[i++] = kernel(s[weight_], spec_.weight_centers[0]);
  out[i++] = kernel(s[weight_], spec_.weight_centers[1]);
}

TabularFeatureMap::TabularFeatureMap(std::vector<std::vector<Action>> actions_per_state)
    : actions_(std::move(actions_per_state)) {
  for (std::size_t s = 0; s < actions_.size(); ++s) {
    auto& actions = actions_[s];
    if (actions.empty()) throw ConfigError("state " + std::to_string(s) + " has no feasible action");
    std::sort(actions.begin(), actions.end());
    for (Action a : actions) {
      if (a < 0) throw ConfigError("action codes must be non-negative");
      if (!index_.emplace(std::pair{static_cast<int>(s), a}, dimension_).second)
        throw ConfigError("duplicate action in state " + std::to_string(s));
      ++dimension_;
    }
  }
}

StateSchema TabularFeatureMap::schema() { return {{"s"}, {ComponentKind::kInteger}}; }

int TabularFeatureMap::state_of(const State& s) const {
  const long idx = std::lround(s[0]);
  if (idx < 0 || static_cast<std::size_t>(idx) >= actions_.size())
    throw DomainError("state index " + std::to_string(idx) + " is not enumerated");
  return static_cast<int>(idx);
}

std::vector<Action> TabularFeatureMap::feasible_actions(const State& s) const {
  if (s.is_absorbing()) return {kNoAction};
  return actions_[static_cast<std::size_t>(state_of(s))];
}

Eigen::Index TabularFeatureMap::index(int state, Action a) const {
  auto it = index_.find({state, a});
  if (it == index_.end())
    throw DomainError("pair (s=" + std::to_string(state) + ", a=" + std::to_string(a) + ") is not enumerated");
  return it->second;
}

void TabularFeatureMap::features_into(const State& s, Action a, Eigen::Ref<Eigen::VectorXd> out) const {
  out.setZero();
  if (s.is_absorbing()) return;
  out[index(state_of(s), a)] = 1.0;
}

}  // namespace ggq
