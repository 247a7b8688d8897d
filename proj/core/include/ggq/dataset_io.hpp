#pragma once

#include "ggq/mdp.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace ggq {

/// Trajectory files are comma-delimited text with a mandatory header
///
///   id,t,<state columns...>,action,reward,absorbing
///
/// and one row per decision point t = 0..T. Row t carries S_t, A_t and the
/// reward R_{t+1}; the closing row t = T carries S_T with action and reward
/// "NA". Absorbing rows print NA for every state column and action. Rows of
/// one subject are contiguous and file order is preserved.
///
/// State columns default to the diabetes schema kinds when their names match
/// it; any other schema is described by a sidecar `<file>.schema` with one
/// `name,integer|real` line per column.
struct ReadOptions {
  /// Leading decision points dropped from every trajectory.
  int burn_in = 0;
};

Dataset read_dataset(const std::filesystem::path& path, const ReadOptions& options = {});
void write_dataset(const Dataset& data, const std::filesystem::path& path);

Dataset parse_dataset(std::istream& in, const std::optional<StateSchema>& schema = std::nullopt,
                      const ReadOptions& options = {});
void write_dataset(const Dataset& data, std::ostream& out);

std::filesystem::path schema_sidecar_path(const std::filesystem::path& data_path);
StateSchema read_schema(const std::filesystem::path& path);
void write_schema(const StateSchema& schema, const std::filesystem::path& path);

}  // namespace ggq
