#pragma once

#include "ggq/mdp.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ggq {

/// Empirical quantile with linear interpolation between order statistics
/// (R type 7). `probability` in [0,1]; `values` must be non-empty.
double empirical_quantile(std::vector<double> values, double probability);

/// A Gaussian-kernel center. Quantile centers carry the quartile index j they
/// were fitted from (j = 1, 2, 3 for the 25/50/75% points); fixed centers have
/// quartile 0.
struct RbfCenter {
  std::string label;
  int quartile = 0;
  double value = 0.0;

  static RbfCenter fixed(double v);
  static RbfCenter quantile(std::string label, int quartile);

  friend bool operator==(const RbfCenter&, const RbfCenter&) = default;
};

/// One indicator block I(A = action, NAT = nat) * (1, A1c kernels, [d],
/// BP kernels, Weight kernels).
struct RbfBlock {
  std::string name;
  Action action = 0;
  int nat = 0;
  std::vector<RbfCenter> a1c_centers;
  bool has_discontinuation = false;

  Eigen::Index width() const {
    return 1 + static_cast<Eigen::Index>(a1c_centers.size()) + (has_discontinuation ? 1 : 0) + 4;
  }

  friend bool operator==(const RbfBlock&, const RbfBlock&) = default;
};

/// Radial-basis feature layout plus fitted centers and bandwidth h.
struct RbfSpec {
  double bandwidth = 0.5;
  std::vector<RbfBlock> blocks;
  /// First and third quartiles of BP and Weight.
  std::array<double, 2> bp_centers{};
  std::array<double, 2> weight_centers{};

  Eigen::Index dimension() const;

  /// The nine-block diabetes layout with unresolved quantile centers. Center
  /// indices are kept exactly as laid out (e.g. block 3 uses quartiles 1 and 3,
  /// block 8 uses quartile 2 only).
  static std::vector<RbfBlock> diabetes_layout();

  friend bool operator==(const RbfSpec&, const RbfSpec&) = default;
};

/// Resolves quantile centers from data: A1c quartiles conditional on each
/// block's (A, NAT) over live transitions, BP/Weight quartiles marginally.
/// Throws ConfigError for h <= 0 or a block with no observations.
RbfSpec fit_rbf_spec(const Dataset& data, double bandwidth,
                     std::vector<RbfBlock> layout = RbfSpec::diabetes_layout());

std::string rbf_spec_to_json(const RbfSpec& spec);
RbfSpec rbf_spec_from_json(const std::string& text);
void save_rbf_spec(const RbfSpec& spec, const std::filesystem::path& path);
RbfSpec load_rbf_spec(const std::filesystem::path& path);

/// Feasible set for the diabetes state: {0, NAT+1} while NAT < max_nat,
/// {0} afterwards.
std::vector<Action> diabetes_feasible_actions(const State& s, std::size_t nat_index, int max_nat = 4);

/// phi(s, a) built from an RbfSpec over a schema containing
/// nat, d, a1c, bp and weight.
class RbfFeatureMap final : public FeatureMap {
 public:
  RbfFeatureMap(RbfSpec spec, const StateSchema& schema = StateSchema::diabetes());

  Eigen::Index dimension() const override { return dimension_; }
  std::vector<Action> feasible_actions(const State& s) const override;
  void features_into(const State& s, Action a, Eigen::Ref<Eigen::VectorXd> out) const override;

  const RbfSpec& spec() const noexcept { return spec_; }
  /// Index of the block active for (a, nat), or -1.
  int block_index(Action a, int nat) const;
  /// Starting coordinate of each block.
  const std::vector<Eigen::Index>& block_offsets() const noexcept { return offsets_; }

 private:
  RbfSpec spec_;
  Eigen::Index dimension_ = 0;
  std::vector<Eigen::Index> offsets_;
  std::map<std::pair<Action, int>, int> lookup_;
  std::size_t nat_, d_, a1c_, bp_, weight_;
};

/// One-hot indicator of an enumerated (state index, action) pair. States carry
/// a single integer component: the state index.
class TabularFeatureMap final : public FeatureMap {
 public:
  /// actions_per_state[s] lists the feasible actions of state s.
  explicit TabularFeatureMap(std::vector<std::vector<Action>> actions_per_state);

  Eigen::Index dimension() const override { return dimension_; }
  std::vector<Action> feasible_actions(const State& s) const override;
  void features_into(const State& s, Action a, Eigen::Ref<Eigen::VectorXd> out) const override;

  /// Coordinate of (state, action); throws DomainError when not enumerated.
  Eigen::Index index(int state, Action a) const;
  std::size_t num_states() const noexcept { return actions_.size(); }

  static StateSchema schema();

 private:
  int state_of(const State& s) const;

  std::vector<std::vector<Action>> actions_;
  std::map<std::pair<int, Action>, Eigen::Index> index_;
  Eigen::Index dimension_ = 0;
};

}  // namespace ggq
