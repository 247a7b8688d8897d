#include "ggq/dataset_io.hpp"

#include "ggq/errors.hpp"
#include "ggq/text_format.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace ggq {

namespace {

constexpr std::string_view kMissing = "NA";

struct Row {
  std::string id;
  int t = 0;
  State state;
  Action action = kNoAction;
  std::optional<double> reward;
  std::size_t line = 0;
};

[[noreturn]] void row_error(const std::string& id, long long t, const std::string& what) {
  std::ostringstream os;
  os << "subject '" << id << "', t=" << t << ": " << what;
  throw ParseError(os.str());
}

StateSchema schema_from_header(const std::vector<std::string>& names) {
  const StateSchema reference = StateSchema::diabetes();
  StateSchema schema;
  for (const auto& name : names) {
    schema.names.push_back(name);
    schema.kinds.push_back(reference.contains(name) ? reference.kinds[reference.index_of(name)]
                                                    : ComponentKind::kReal);
  }
  return schema;
}

}  // namespace

Dataset parse_dataset(std::istream& in, const std::optional<StateSchema>& given,
                      const ReadOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trajectory file is missing its header row");
  const auto header = split_fields(line);
  if (header.size() < 5 || header[0] != "id" || header[1] != "t" ||
      header[header.size() - 3] != "action" || header[header.size() - 2] != "reward" ||
      header[header.size() - 1] != "absorbing")
    throw ParseError("header must read id,t,<state columns>,action,reward,absorbing");
  std::vector<std::string> state_names;
  for (std::size_t i = 2; i + 3 < header.size(); ++i) state_names.emplace_back(header[i]);
  StateSchema schema = given ? *given : schema_from_header(state_names);
  if (schema.names != state_names)
    throw ParseError("header state columns do not match the schema descriptor");
  const std::size_t arity = schema.size();

  std::vector<Trajectory> trajectories;
  std::vector<Row> group;

  auto flush = [&]() {
    if (group.empty()) return;
    Trajectory tr{group.front().id, {}};
    for (std::size_t i = 0; i < group.size(); ++i)
      if (group[i].t != static_cast<int>(i)) row_error(tr.id, group[i].t, "rows out of sequence");
    for (std::size_t i = 0; i + 1 < group.size(); ++i) {
      const Row& row = group[i];
      if (!row.reward) row_error(tr.id, row.t, "missing reward before the final row");
      if (!row.state.is_absorbing() && row.action == kNoAction)
        row_error(tr.id, row.t, "missing action in a live state");
      tr.steps.push_back(Transition{row.state, row.action, *row.reward, group[i + 1].state, row.t});
    }
    const Row& last = group.back();
    if (last.reward || last.action != kNoAction)
      row_error(tr.id, last.t, "final row must carry NA action and reward");
    trajectories.push_back(std::move(tr));
    group.clear();
  };

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields");
    Row row;
    row.id = std::string(fields[0]);
    row.line = line_no;
    long long t = 0;
    try {
      t = parse_integer(fields[1]);
    } catch (const ParseError&) {
      row_error(row.id, -1, "bad decision index '" + std::string(fields[1]) + "'");
    }
    row.t = static_cast<int>(t);
    const auto absorbing_field = fields[header.size() - 1];
    if (absorbing_field != "0" && absorbing_field != "1")
      row_error(row.id, t, "absorbing flag must be 0 or 1");
    const bool absorbing = absorbing_field == "1";
    try {
      if (absorbing) {
        for (std::size_t c = 0; c < arity; ++c)
          if (fields[2 + c] != kMissing) row_error(row.id, t, "absorbing row carries state values");
        row.state = State::absorbing();
      } else {
        std::vector<double> values(arity);
        for (std::size_t c = 0; c < arity; ++c) values[c] = parse_double(fields[2 + c]);
        row.state = State(std::move(values));
      }
      const auto action_field = fields[2 + arity];
      if (action_field != kMissing) {
        const long long code = parse_integer(action_field);
        if (code < 0) row_error(row.id, t, "unknown action code " + std::string(action_field));
        row.action = static_cast<Action>(code);
      }
      const auto reward_field = fields[3 + arity];
      if (reward_field != kMissing) row.reward = parse_double(reward_field);
    } catch (const ParseError& e) {
      if (std::string_view(e.what()).starts_with("subject")) throw;
      row_error(row.id, t, e.what());
    }
    if (absorbing && row.action != kNoAction) row_error(row.id, t, "action recorded in absorbing state");
    if (!group.empty() && group.front().id != row.id) flush();
    group.push_back(std::move(row));
  }
  flush();
  Dataset data(std::move(schema), std::move(trajectories));
  return options.burn_in > 0 ? data.drop_leading(options.burn_in) : data;
}

void write_dataset(const Dataset& data, std::ostream& out) {
  const auto& schema = data.schema();
  out << "id,t";
  for (const auto& name : schema.names) out << ',' << name;
  out << ",action,reward,absorbing\n";
  auto write_state = [&](const State& s) {
    for (std::size_t c = 0; c < schema.size(); ++c)
      out << ',' << (s.is_absorbing() ? std::string(kMissing) : format_double(s[c]));
  };
  for (const auto& tr : data.trajectories()) {
    if (tr.id.find_first_of(",\n\r") != std::string::npos)
      throw ConfigError("subject id '" + tr.id + "' contains a delimiter");
    for (const auto& step : tr.steps) {
      out << tr.id << ',' << step.t;
      write_state(step.s);
      out << ',' << (step.a == kNoAction ? std::string(kMissing) : std::to_string(step.a));
      out << ',' << format_double(step.reward) << ',' << (step.s.is_absorbing() ? 1 : 0) << '\n';
    }
    if (!tr.steps.empty()) {
      const State& last = tr.steps.back().next;
      out << tr.id << ',' << tr.steps.size();
      write_state(last);
      out << ",NA,NA," << (last.is_absorbing() ? 1 : 0) << '\n';
    }
  }
}

std::filesystem::path schema_sidecar_path(const std::filesystem::path& data_path) {
  auto p = data_path;
  p += ".schema";
  return p;
}

StateSchema read_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open schema file " + path.string());
  StateSchema schema;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty() || trim(line).starts_with('#')) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) throw ParseError("schema line must read name,kind: " + line);
    schema.names.emplace_back(fields[0]);
    if (fields[1] == "integer") schema.kinds.push_back(ComponentKind::kInteger);
    else if (fields[1] == "real") schema.kinds.push_back(ComponentKind::kReal);
    else throw ParseError("unknown component kind '" + std::string(fields[1]) + "'");
  }
  return schema;
}

void write_schema(const StateSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < schema.size(); ++i)
    out << schema.names[i] << ','
        << (schema.kinds[i] == ComponentKind::kInteger ? "integer" : "real") << '\n';
}

Dataset read_dataset(const std::filesystem::path& path, const ReadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trajectory file " + path.string());
  std::optional<StateSchema> schema;
  const auto sidecar = schema_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) schema = read_schema(sidecar);
  return parse_dataset(in, schema, options);
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_dataset(data, out);
  if (!(data.schema() == StateSchema::diabetes())) write_schema(data.schema(), schema_sidecar_path(path));
}

}  // namespace ggq
