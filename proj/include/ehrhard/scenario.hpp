#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ehrhard/alpha.hpp"
#include "ehrhard/json_io.hpp"

namespace ehrhard {

inline constexpr int kExitPass = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitAssertion = 2;
inline constexpr int kExitInfeasible = 3;

// Field types: number, integer, boolean, string, number_list, index_list (1-based), grid, json.
struct FieldSpec {
  std::string name;
  std::string type;
  std::string help;
  bool required = false;
  Json default_value;
};

struct SubcommandSchema {
  std::string name;
  std::string help;
  std::vector<FieldSpec> fields;
};

const std::vector<SubcommandSchema>& subcommand_schemas();
const SubcommandSchema& schema_for(const std::string& subcommand);
Json schemas_json();

struct Scenario {
  std::string name = "scenario";
  std::string subcommand;
  Json params = Json::object();
  std::uint64_t seed = kDefaultSeed;
};

// Coerces strings from flags, fills defaults and rejects unknown or ill-typed fields.
Json resolve_params(const SubcommandSchema& schema, const Json& params);
// Accepts a scenario object or a summary document carrying one under "scenario".
Scenario parse_scenario(const Json& j);
Json scenario_json(const Scenario& s);

std::uint64_t derive_seed(std::uint64_t seed, const std::string& subcommand);
std::uint64_t parse_seed(const Json& j);
std::string seed_hex(std::uint64_t seed);

struct RunReport {
  int exit_code = kExitPass;
  Json summary;
  std::string field_csv;
};

RunReport run_scenario(const Scenario& scenario);
// Writes <out_dir>/<name>/<subcommand>.summary.json and, when present, .field.csv.
void emit_report(const Scenario& scenario, const RunReport& report, const std::string& out_dir);

}  // namespace ehrhard
