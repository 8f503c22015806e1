#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "ehrhard_lab.h"
#include "json.hpp"

using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::string out = "results";
  std::string name;
  std::string seed;
  bool print = false;
  std::map<std::string, std::string> values;
};

int fail_with(ehl_status st) {
  std::cerr << "error (" << ehl_status_name(st) << "): " << ehl_last_error() << "\n";
  return st == EHL_ERR_INFEASIBLE ? 3 : 1;
}

}  // namespace

int run(int argc, char** argv) {
  char* schema_text = nullptr;
  if (ehl_scenario_schema(&schema_text) != EHL_OK) return fail_with(EHL_ERR_INTERNAL);
  const json schemas = json::parse(schema_text);
  ehl_string_free(schema_text);

  CLI::App app{"Numerical laboratory for Gaussian functional inequalities"};
  app.require_subcommand(1);
  std::map<std::string, Flags> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& s : schemas) {
    const std::string name = s["name"];
    auto* sub = app.add_subcommand(name, s["help"].get<std::string>());
    Flags& f = flags[name];
    sub->add_option("--config", f.config, "scenario JSON file (a previous summary also works)");
    sub->add_option("--out", f.out, "output directory")->capture_default_str();
    sub->add_option("--name", f.name, "scenario name");
    sub->add_option("--seed", f.seed, "global seed in hex");
    sub->add_flag("--print", f.print, "print the summary to stdout");
    for (const auto& fld : s["fields"]) {
      const std::string fname = fld["name"];
      std::string help = fld["help"].get<std::string>() + " [" + fld["type"].get<std::string>() + "]";
      if (!fld["default"].is_null()) help += " default " + fld["default"].dump();
      sub->add_option("--" + fname, f.values[fname], help)->allow_extra_args(false);
    }
    subs[name] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string subcommand;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) subcommand = name;
  Flags& f = flags[subcommand];
  CLI::App* sub = subs[subcommand];

  json scenario = json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) {
      std::cerr << "error (config): cannot read " << f.config << "\n";
      return 1;
    }
    try {
      scenario = json::parse(in);
    } catch (const json::exception& e) {
      std::cerr << "error (config): " << e.what() << "\n";
      return 1;
    }
    if (scenario.contains("scenario") && scenario["scenario"].is_object()) scenario = scenario["scenario"];
    if (scenario.contains("subcommand") && scenario["subcommand"] != subcommand) {
      std::cerr << "error (config): file is for subcommand " << scenario["subcommand"] << "\n";
      return 1;
    }
  }
  scenario["subcommand"] = subcommand;
  if (!scenario.contains("params")) scenario["params"] = json::object();
  for (const auto& [fname, value] : f.values)
    if (sub->count("--" + fname) > 0) scenario["params"][fname] = value;
  if (!f.name.empty()) scenario["name"] = f.name;
  if (!scenario.contains("name")) scenario["name"] = subcommand;
  if (!f.seed.empty()) scenario["seed"] = f.seed;

  ehl_report* report = nullptr;
  const ehl_status st = ehl_run(scenario.dump().c_str(), &report);
  if (st != EHL_OK) return fail_with(st);
  const ehl_status wst = ehl_report_write(report, f.out.c_str());
  if (wst != EHL_OK) {
    ehl_report_free(report);
    return fail_with(wst);
  }
  const int code = ehl_report_exit_code(report);
  if (f.print) std::cout << ehl_report_summary(report);
  const char* verdict = code == 0 ? "pass" : (code == 2 ? "assertion failed" : "infeasible or unknown");
  std::cerr << subcommand << ": " << verdict << " -> " << f.out << "/" << ehl_report_name(report) << "/" << subcommand
            << ".summary.json\n";
  ehl_report_free(report);
  return code;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
