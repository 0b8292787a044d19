// SPDX-License-Identifier: Apache-2.0
//
// stochgrid run   --config exp.ini [--seed S] [--out DIR] [--jobs J]
// stochgrid sweep --config a.ini --config b.ini --axis run.n [--out DIR]
// stochgrid sweep --config base.ini --axis run.n --values "128;256;512"
//
// Exit codes: 0 every check passed, 1 a check failed or the run aborted,
// 2 invalid configuration.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stochgrid/experiment.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kConfig = 2;

/// Prints an error and its nested causes; returns the exit code of the innermost one.
int report_error(const std::exception& e, int depth = 0) {
  std::cerr << std::string(2 * static_cast<std::size_t>(depth), ' ') << "error: " << e.what() << '\n';
  int code = dynamic_cast<const stochgrid::ConfigError*>(&e) ? kConfig : kFail;
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    code = report_error(inner, depth + 1);
  }
  return code;
}

void print_run(const stochgrid::RunReport& r) {
  std::cout << (r.pass ? "PASS " : "FAIL ") << r.out.string() << "/report.json  (" << r.seconds << " s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-grid Euler error experiments"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string sweep_out = "sweep_out";
  unsigned jobs = 1;
  std::string axis;
  std::vector<std::string> values;

  auto* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("--config", configs, "experiment config file")->required()->expected(1)->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override [run] seed");
  run->add_option("--out", out, "override [run] out");
  run->add_option("--jobs", jobs, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);

  auto* sw = app.add_subcommand("sweep", "run configs that differ along one axis");
  sw->add_option("--config", configs, "config files, or one base config with --values")
      ->required()
      ->check(CLI::ExistingFile);
  sw->add_option("--axis", axis, "swept key as section.key")->required();
  sw->add_option("--values", values, "axis values applied to a single base config")->delimiter(';');
  sw->add_option("--seed", seed, "override [run] seed");
  sw->add_option("--out", sweep_out, "sweep output directory")->capture_default_str();
  sw->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help exits 0; any malformed command line counts as a configuration error
    return app.exit(e) == 0 ? kPass : kConfig;
  }

  try {
    if (*run) {
      stochgrid::ConfigFile file = stochgrid::ConfigFile::load(configs.front());
      if (seed) file.set("run", "seed", std::to_string(*seed));
      if (!out.empty()) file.set("run", "out", out);
      stochgrid::ExperimentConfig cfg = stochgrid::experiment_from(file);
      cfg.jobs = jobs;
      const auto report = stochgrid::run(cfg);
      print_run(report);
      return report.pass ? kPass : kFail;
    }
    std::vector<stochgrid::ConfigFile> files;
    for (const auto& c : configs) files.push_back(stochgrid::ConfigFile::load(c));
    if (!values.empty()) {
      if (files.size() != 1) throw stochgrid::ConfigError("--values needs exactly one base config");
      files = stochgrid::expand_axis(files.front(), axis, values);
    }
    const auto result = stochgrid::sweep(files, axis, sweep_out, seed, jobs);
    for (const auto& r : result.runs) print_run(r);
    std::cout << "sweep table: " << result.csv.string() << '\n';
    return result.pass ? kPass : kFail;
  } catch (const std::exception& e) {
    return report_error(e);
  }
}
