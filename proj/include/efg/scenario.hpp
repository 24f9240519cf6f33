#pragma once

#include "efg/constructions.hpp"
#include "efg/efgame.hpp"
#include "efg/equivalences.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace efg {

using Json = nlohmann::ordered_json;

// bad input: unreadable file, malformed JSON, schema violation. Exit code 2.
struct ScenarioError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class ReportFormat { Text, Json };

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the scenario's own seed
  std::optional<std::size_t> max_states;
};

struct Report {
  Json body;  // "kind", "name", "seed", "verdicts", then per-kind data
  bool passed() const;
  std::vector<std::string> failures() const;  // names of failed verdicts, nested suites included
};

Presentation parse_group(const Json& j);
Json group_json(const Presentation& g);
Tree parse_tree(const Json& j);  // parent array, null for roots
Json tree_json(const Tree& t);
BuildConfig parse_build_config(const Json& j);

Report run_scenario(const Json& scenario, const RunOptions& opts = {},
                    const std::filesystem::path& base_dir = {});
Report run_scenario_file(const std::filesystem::path& path, const RunOptions& opts = {});
std::string emit_report(const Report& r, ReportFormat format);
// verdict name -> pass, read back from either rendering
std::vector<std::pair<std::string, bool>> verdicts_of_rendering(const std::string& text);

// the height table of a standalone gadget: p_height(u_0 over the first N w's, p)
std::vector<std::size_t> height_table(std::size_t max_n, long p = 2);

// Move-by-move play against the solver's side. Commands on `in`:
//   forall: <node> <L|R> <c1> <c2> ...    exists: <c1> <c2> ...    quit
Transcript interactive_play(const GameSpec& spec, Player human, std::istream& in, std::ostream& out,
                            const SolveOptions& opts = {});

}  // namespace efg
