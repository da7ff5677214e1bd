/*
 Copyright 2026 The mfpmp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// mfpmp: run, validate and verify mean-field PMP experiments.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mfpmp/experiment.hpp"

namespace {

int cmd_run(const std::string& path, const std::string& out_dir) {
  mfpmp::ExperimentConfig cfg = mfpmp::load_config(path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  const mfpmp::RunOutcome r = mfpmp::run_experiment(cfg);
  if (r.exit_code == mfpmp::exit_ok) {
    std::cout << r.message << "\n";
  } else {
    std::cerr << "mfpmp: " << r.message << "\n";
    std::cerr << "mfpmp: report written to " << (r.output_dir / "report.json").string() << "\n";
  }
  return r.exit_code;
}

int cmd_validate(const std::string& path) {
  const mfpmp::ExperimentConfig cfg = mfpmp::load_config(path);
  std::cout << "# " << path << ": ok, resolved settings\n" << mfpmp::resolved_config_text(cfg);
  return mfpmp::exit_ok;
}

int cmd_verify(const std::string& suite, std::uint64_t seed) {
  const mfpmp::SuiteResult r = mfpmp::run_verify_suite(suite, seed);
  for (const auto& c : r.checks) {
    std::printf("%s  %-58s value=%.3e tol=%.1e  %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value,
                c.tolerance, c.detail.c_str());
  }
  std::printf("%s: %s\n", suite.c_str(), r.passed() ? "all checks passed" : "FAILED");
  return r.passed() ? mfpmp::exit_ok : mfpmp::exit_oracle;
}

int cmd_list() {
  for (const auto& [id, desc] : mfpmp::benchmark_catalog()) std::printf("%-12s %s\n", id.c_str(), desc.c_str());
  return mfpmp::exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic mean-field Pontryagin minimum principle solver"};
  app.require_subcommand(1);

  std::string config_path, out_dir, suite;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run an experiment config and write CSV/JSON outputs");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("-o,--output-dir", out_dir, "override output.dir");

  auto* validate = app.add_subcommand("validate", "check a config and print the resolved settings");
  validate->add_option("config", config_path, "config file")->required();

  auto* verify = app.add_subcommand("verify", "run an oracle verification suite");
  std::string suites;
  for (const auto& s : mfpmp::verify_suite_names()) suites += (suites.empty() ? "" : ", ") + s;
  verify->add_option("suite", suite, "one of: " + suites)->required()->check(CLI::IsMember(mfpmp::verify_suite_names()));
  verify->add_option("--seed", seed, "seed for sampled ensembles");

  auto* list = app.add_subcommand("list-problems", "list bundled problem ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mfpmp::exit_config;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (validate->parsed()) return cmd_validate(config_path);
    if (verify->parsed()) return cmd_verify(suite, seed);
    if (list->parsed()) return cmd_list();
  } catch (const mfpmp::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return mfpmp::exit_config;
  } catch (const mfpmp::NumericalError& e) {
    std::cerr << "mfpmp: numerical failure: " << e.what() << "\n";
    return mfpmp::exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "mfpmp: " << e.what() << "\n";
    return mfpmp::exit_failure;
  }
  return mfpmp::exit_failure;
}
