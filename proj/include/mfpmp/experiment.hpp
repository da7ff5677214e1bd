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

#pragma once

// Experiment configs, runs and output files.
//
// Config files are flat `key = value` lines with dotted sections:
//
//   problem.id = pendulum        # required
//   problem.friction = 5         # any other problem.* key is a problem override
//   ensemble.size = 200
//   ensemble.seed = 0
//   solver.mode = discounted     # discounted | finite-decoupled | finite-sweeps | verify
//   solver.dt = 0.025
//   solver.steps = 8000
//   solver.epsilon = dt          # number, or `dt` to tie it to the step size
//   output.dir = pendulum        # relative to $MFPMP_OUTPUT_ROOT (default "runs")
//
// Everything after '#' is a comment. Values may be double-quoted.

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "mfpmp/benchmarks.hpp"
#include "mfpmp/solver.hpp"
#include "mfpmp/verify.hpp"

namespace mfpmp {

enum class RunMode { discounted, finite_decoupled, finite_sweeps, verify };

inline const char* run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::discounted: return "discounted";
    case RunMode::finite_decoupled: return "finite-decoupled";
    case RunMode::finite_sweeps: return "finite-sweeps";
    default: return "verify";
  }
}

/// Process exit codes of the command line tool.
enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_config = 2, exit_numerical = 3, exit_oracle = 4 };

struct ConfigDiagnostic {
  int line = 0;  // 0 when the problem is not tied to a line
  std::string key;
  std::string message;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string origin, std::vector<ConfigDiagnostic> diags)
      : Error(render(origin, diags)), diagnostics_(std::move(diags)) {}

  const std::vector<ConfigDiagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  static std::string render(const std::string& origin, const std::vector<ConfigDiagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
      if (!out.empty()) out += '\n';
      out += origin;
      if (d.line > 0) out += ":" + std::to_string(d.line);
      out += ": ";
      if (!d.key.empty()) out += "'" + d.key + "': ";
      out += d.message;
    }
    return out;
  }

  std::vector<ConfigDiagnostic> diagnostics_;
};

struct ExperimentConfig {
  std::string problem_id;
  ParameterOverrides overrides;
  long ensemble_size = 100;
  std::uint64_t seed = 0;
  RunMode mode = RunMode::discounted;
  SolverConfig solver;
  bool epsilon_is_dt = true;
  SweepOptions sweeps;
  std::string verify_suite = "all";
  std::string output_dir;
  /// Control-surface points per axis; 0 disables the surface.
  long grid = 101;
  double grid_margin = 0.1;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  if (v == 0.0) v = 0.0;  // no negative zero in outputs
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

inline bool parse_long(const std::string& s, long& out) {
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

inline bool parse_u64(const std::string& s, std::uint64_t& out) {
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

inline bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no") {
    out = false;
    return true;
  }
  return false;
}

struct RawEntry {
  std::string value;
  int line = 0;
};

}  // namespace detail

/**
 * Parses and validates config text. All problems found are reported together
 * in a single ConfigError; `origin` prefixes the diagnostics.
 */
inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  std::vector<ConfigDiagnostic> diags;
  std::map<std::string, detail::RawEntry> raw;
  {
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        diags.push_back({number, "", "expected 'key = value'"});
        continue;
      }
      const std::string key = detail::trim(line.substr(0, eq));
      std::string value = detail::trim(line.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      if (key.empty()) {
        diags.push_back({number, "", "empty key"});
        continue;
      }
      if (raw.count(key)) {
        diags.push_back({number, key, "duplicate key (first set on line " + std::to_string(raw[key].line) + ")"});
        continue;
      }
      raw[key] = {value, number};
    }
  }

  ExperimentConfig cfg;
  cfg.solver.step_size = 0.01;
  cfg.solver.num_steps = 1000;
  bool mode_given = false;
  bool grid_given = false;
  int id_line = 0;

  const auto bad = [&](const std::string& key, const detail::RawEntry& e, const std::string& what) {
    diags.push_back({e.line, key, what + ", got '" + e.value + "'"});
  };

  for (const auto& [key, e] : raw) {
    const std::string& v = e.value;
    if (key == "problem.id") {
      cfg.problem_id = v;
      id_line = e.line;
    } else if (key.rfind("problem.", 0) == 0) {
      cfg.overrides[key.substr(8)] = v;
    } else if (key == "ensemble.size") {
      if (!detail::parse_long(v, cfg.ensemble_size) || cfg.ensemble_size < 1) bad(key, e, "expected an integer >= 1");
    } else if (key == "ensemble.seed") {
      if (!detail::parse_u64(v, cfg.seed)) bad(key, e, "expected a non-negative integer");
    } else if (key == "solver.mode") {
      mode_given = true;
      if (v == "discounted") cfg.mode = RunMode::discounted;
      else if (v == "finite-decoupled") cfg.mode = RunMode::finite_decoupled;
      else if (v == "finite-sweeps") cfg.mode = RunMode::finite_sweeps;
      else if (v == "verify") cfg.mode = RunMode::verify;
      else bad(key, e, "expected discounted, finite-decoupled, finite-sweeps or verify");
    } else if (key == "solver.dt") {
      if (!detail::parse_double(v, cfg.solver.step_size) || !(cfg.solver.step_size > 0.0)) {
        bad(key, e, "expected a positive number");
      }
    } else if (key == "solver.steps") {
      if (!detail::parse_long(v, cfg.solver.num_steps) || cfg.solver.num_steps < 1) {
        bad(key, e, "expected an integer >= 1");
      }
    } else if (key == "solver.epsilon") {
      double eps = 0.0;
      if (v == "dt") {
        cfg.epsilon_is_dt = true;
      } else if (detail::parse_double(v, eps) && eps > 0.0) {
        cfg.epsilon_is_dt = false;
        cfg.solver.bridge_epsilon = eps;
      } else {
        bad(key, e, "expected a positive number or 'dt'");
      }
    } else if (key == "solver.gauge") {
      if (v == "natural") cfg.solver.gauge = NaturalScoreGauge{};
      else if (v == "zero") cfg.solver.gauge = ZeroGauge{};
      else if (v == "decoupling") cfg.solver.gauge = DecouplingGauge{};
      else if (v == "combined") cfg.solver.gauge = CombinedGauge{};
      else bad(key, e, "expected natural, zero, decoupling or combined");
    } else if (key == "solver.dynamics") {
      if (v == "bridge") cfg.solver.dynamics = Dynamics::bridge;
      else if (v == "regression") cfg.solver.dynamics = Dynamics::regression;
      else bad(key, e, "expected bridge or regression");
    } else if (key == "solver.sinkhorn_tol") {
      if (!detail::parse_double(v, cfg.solver.sinkhorn_tol) || !(cfg.solver.sinkhorn_tol > 0.0)) {
        bad(key, e, "expected a positive number");
      }
    } else if (key == "solver.sinkhorn_max_iter") {
      long n = 0;
      if (!detail::parse_long(v, n) || n < 1 || n > 100000000) bad(key, e, "expected a positive integer");
      else cfg.solver.sinkhorn_max_iter = static_cast<int>(n);
    } else if (key == "solver.symmetrize") {
      if (!detail::parse_bool(v, cfg.solver.symmetrize_regression)) bad(key, e, "expected true or false");
    } else if (key == "solver.sigma_floor") {
      if (!detail::parse_double(v, cfg.solver.sigma_floor) || cfg.solver.sigma_floor < 0.0) {
        bad(key, e, "expected a non-negative number");
      }
    } else if (key == "solver.equilibrium_threshold") {
      if (!detail::parse_double(v, cfg.solver.equilibrium_threshold) || !(cfg.solver.equilibrium_threshold > 0.0)) {
        bad(key, e, "expected a positive number");
      }
    } else if (key == "solver.max_sweeps") {
      long n = 0;
      if (!detail::parse_long(v, n) || n < 1 || n > 1000000) bad(key, e, "expected a positive integer");
      else cfg.sweeps.max_sweeps = static_cast<int>(n);
    } else if (key == "solver.relax") {
      if (!detail::parse_double(v, cfg.sweeps.relax) || !(cfg.sweeps.relax > 0.0 && cfg.sweeps.relax <= 1.0)) {
        bad(key, e, "expected a number in (0, 1]");
      }
    } else if (key == "solver.sweep_tol") {
      if (!detail::parse_double(v, cfg.sweeps.tolerance) || !(cfg.sweeps.tolerance > 0.0)) {
        bad(key, e, "expected a positive number");
      }
    } else if (key == "verify.suite") {
      cfg.verify_suite = v;
    } else if (key == "output.dir") {
      cfg.output_dir = v;
    } else if (key == "output.stride") {
      if (!detail::parse_long(v, cfg.solver.snapshot_stride) || cfg.solver.snapshot_stride < 1) {
        bad(key, e, "expected an integer >= 1");
      }
    } else if (key == "output.grid") {
      grid_given = true;
      if (!detail::parse_long(v, cfg.grid) || cfg.grid < 0 || cfg.grid == 1) {
        bad(key, e, "expected 0 (off) or an integer >= 2");
      }
    } else if (key == "output.grid_margin") {
      if (!detail::parse_double(v, cfg.grid_margin) || cfg.grid_margin < 0.0) {
        bad(key, e, "expected a non-negative number");
      }
    } else {
      diags.push_back({e.line, key, "unknown key"});
    }
  }

  if (cfg.mode == RunMode::verify) {
    const auto& names = verify_suite_names();
    if (std::find(names.begin(), names.end(), cfg.verify_suite) == names.end()) {
      const auto it = raw.find("verify.suite");
      diags.push_back({it == raw.end() ? 0 : it->second.line, "verify.suite", "unknown suite '" + cfg.verify_suite + "'"});
    }
    if (cfg.output_dir.empty()) cfg.output_dir = "verify-" + cfg.verify_suite;
    if (!diags.empty()) throw ConfigError(origin, std::move(diags));
    cfg.solver.rng_seed = cfg.seed;
    return cfg;
  }

  if (cfg.problem_id.empty()) {
    diags.push_back({0, "problem.id", "missing required key"});
    throw ConfigError(origin, std::move(diags));
  }
  if (cfg.epsilon_is_dt) cfg.solver.bridge_epsilon.reset();

  std::optional<Benchmark> bench;
  try {
    bench = make_benchmark(cfg.problem_id, cfg.overrides);
  } catch (const std::exception& ex) {
    // point at the override named in the message when there is one
    ConfigDiagnostic d{id_line, "problem.id", ex.what()};
    for (const auto& [k, v] : cfg.overrides) {
      if (std::string(ex.what()).find("'" + k + "'") != std::string::npos) {
        d.key = "problem." + k;
        d.line = raw.at(d.key).line;
      }
    }
    diags.push_back(std::move(d));
  }
  if (bench) {
    const bool finite = is_finite_horizon(bench->problem.horizon());
    if (!mode_given) cfg.mode = finite ? RunMode::finite_decoupled : RunMode::discounted;
    const int mode_line = raw.count("solver.mode") ? raw.at("solver.mode").line : 0;
    if (cfg.mode == RunMode::discounted && finite) {
      diags.push_back({mode_line, "solver.mode", "discounted mode needs a discounted problem (problem.horizon)"});
    }
    if ((cfg.mode == RunMode::finite_decoupled || cfg.mode == RunMode::finite_sweeps) && !finite) {
      diags.push_back({mode_line, "solver.mode", "finite-horizon modes need problem.horizon = finite"});
    }
    const long d = bench->problem.dim_x();
    if (!grid_given && d > 2) cfg.grid = 0;
    if (cfg.grid > 0) {
      double points = 1.0;
      for (long k = 0; k < d; ++k) points *= static_cast<double>(cfg.grid);
      if (points > 2e6) {
        const int line = raw.count("output.grid") ? raw.at("output.grid").line : 0;
        diags.push_back({line, "output.grid", "control surface would have " + detail::format_double(points) +
                                                  " points (limit 2e6)"});
      }
    }
  }
  try {
    if (diags.empty()) cfg.solver.validate();
  } catch (const std::exception& ex) {
    const int line = raw.count("output.stride") ? raw.at("output.stride").line : 0;
    diags.push_back({line, "", ex.what()});
  }
  if (cfg.output_dir.empty()) cfg.output_dir = cfg.problem_id;
  if (!diags.empty()) throw ConfigError(origin, std::move(diags));
  cfg.solver.rng_seed = cfg.seed;
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), {{0, "", "cannot open file"}});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

/// Fully resolved config as key/value pairs, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> resolved_entries(const ExperimentConfig& cfg) {
  using detail::format_double;
  std::vector<std::pair<std::string, std::string>> out;
  if (cfg.mode == RunMode::verify) {
    out.emplace_back("solver.mode", "verify");
    out.emplace_back("verify.suite", cfg.verify_suite);
    out.emplace_back("ensemble.seed", std::to_string(cfg.seed));
    out.emplace_back("output.dir", cfg.output_dir);
    return out;
  }
  out.emplace_back("problem.id", cfg.problem_id);
  for (const auto& [k, v] : cfg.overrides) out.emplace_back("problem." + k, v);
  out.emplace_back("ensemble.size", std::to_string(cfg.ensemble_size));
  out.emplace_back("ensemble.seed", std::to_string(cfg.seed));
  out.emplace_back("solver.mode", run_mode_name(cfg.mode));
  out.emplace_back("solver.dt", format_double(cfg.solver.step_size));
  out.emplace_back("solver.steps", std::to_string(cfg.solver.num_steps));
  out.emplace_back("solver.epsilon", format_double(cfg.solver.epsilon()));
  out.emplace_back("solver.gauge", gauge_name(cfg.solver.gauge));
  out.emplace_back("solver.dynamics", dynamics_name(cfg.solver.dynamics));
  out.emplace_back("solver.sinkhorn_tol", format_double(cfg.solver.sinkhorn_tol));
  out.emplace_back("solver.sinkhorn_max_iter", std::to_string(cfg.solver.sinkhorn_max_iter));
  out.emplace_back("solver.symmetrize", cfg.solver.symmetrize_regression ? "true" : "false");
  out.emplace_back("solver.sigma_floor", format_double(cfg.solver.sigma_floor));
  out.emplace_back("solver.equilibrium_threshold", format_double(cfg.solver.equilibrium_threshold));
  out.emplace_back("solver.max_sweeps", std::to_string(cfg.sweeps.max_sweeps));
  out.emplace_back("solver.relax", format_double(cfg.sweeps.relax));
  out.emplace_back("solver.sweep_tol", format_double(cfg.sweeps.tolerance));
  out.emplace_back("output.dir", cfg.output_dir);
  out.emplace_back("output.stride", std::to_string(cfg.solver.snapshot_stride));
  out.emplace_back("output.grid", std::to_string(cfg.grid));
  out.emplace_back("output.grid_margin", format_double(cfg.grid_margin));
  return out;
}

inline std::string resolved_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : resolved_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

/// Output directory: absolute paths as given, relative ones under $MFPMP_OUTPUT_ROOT (default "runs").
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  if (dir.is_absolute()) return dir;
  const char* root = std::getenv("MFPMP_OUTPUT_ROOT");
  return std::filesystem::path(root && *root ? root : "runs") / dir;
}

// ---------------------------------------------------------------------------
// CSV writers. Columns are fixed; numbers use the shortest round-trip form.

namespace detail {

inline void csv_cell(std::string& row, double v) {
  row += ',';
  row += format_double(v);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace detail

inline std::string trajectory_csv_header(long dim_x, long dim_u) {
  std::string h = "step,t,particle_id";
  for (long k = 1; k <= dim_x; ++k) h += ",x" + std::to_string(k);
  for (long k = 1; k <= dim_x; ++k) h += ",p" + std::to_string(k);
  for (long k = 1; k <= dim_u; ++k) h += ",u" + std::to_string(k);
  return h;
}

inline void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& rec, long dim_x, long dim_u) {
  out << trajectory_csv_header(dim_x, dim_u) << '\n';
  std::string row;
  for (std::size_t s = 0; s < rec.snapshots.size(); ++s) {
    const EnsembleState& e = rec.snapshots[s];
    const Matrix& u = rec.controls[s];
    for (long i = 0; i < e.size(); ++i) {
      row = std::to_string(rec.steps[s]);
      detail::csv_cell(row, rec.times[s]);
      row += ',' + std::to_string(i);
      for (long k = 0; k < dim_x; ++k) detail::csv_cell(row, e.X(k, i));
      for (long k = 0; k < dim_x; ++k) detail::csv_cell(row, e.P(k, i));
      for (long k = 0; k < dim_u; ++k) detail::csv_cell(row, u(k, i));
      out << row << '\n';
    }
  }
}

inline std::string summary_csv_header(long dim_x) {
  std::string h = "step,t";
  for (long k = 1; k <= dim_x; ++k) h += ",mean_x" + std::to_string(k);
  for (long k = 1; k <= dim_x; ++k) h += ",std_x" + std::to_string(k);
  return h + ",residual,sinkhorn_iterations";
}

inline void write_summary_csv(std::ostream& out, const TrajectoryRecord& rec, long dim_x) {
  out << summary_csv_header(dim_x) << '\n';
  std::string row;
  for (const SampleSummary& s : rec.summary) {
    row = std::to_string(s.step);
    detail::csv_cell(row, s.t);
    for (long k = 0; k < dim_x; ++k) detail::csv_cell(row, s.mean(k));
    for (long k = 0; k < dim_x; ++k) detail::csv_cell(row, s.stddev(k));
    detail::csv_cell(row, s.residual);
    row += ',' + std::to_string(s.sinkhorn_iterations);
    out << row << '\n';
  }
}

/// Grid bounds: per-component range of all recorded states, widened by `margin` of the range on each side.
inline std::pair<Vector, Vector> visited_bounds(const TrajectoryRecord& rec, double margin) {
  detail::require(!rec.snapshots.empty(), "visited_bounds: empty trajectory");
  Vector lo = rec.snapshots.front().X.rowwise().minCoeff();
  Vector hi = rec.snapshots.front().X.rowwise().maxCoeff();
  for (const auto& e : rec.snapshots) {
    lo = lo.cwiseMin(e.X.rowwise().minCoeff());
    hi = hi.cwiseMax(e.X.rowwise().maxCoeff());
  }
  for (long k = 0; k < lo.size(); ++k) {
    double pad = margin * (hi(k) - lo(k));
    if (pad <= 0.0) pad = 0.5;
    lo(k) -= pad;
    hi(k) += pad;
  }
  return {lo, hi};
}

/// Feedback u = -R G(x)^T (A x + c) on a regular grid, first coordinate varying slowest.
inline void write_control_surface_csv(std::ostream& out, const ControlProblem& problem,
                                      const AffineGradientModel& law, const Vector& lo, const Vector& hi, long n) {
  detail::require(n >= 2, "control surface: need at least two points per axis");
  const long d = problem.dim_x();
  const long m = problem.dim_u();
  std::string h;
  for (long k = 1; k <= d; ++k) h += (k > 1 ? ",x" : "x") + std::to_string(k);
  for (long k = 1; k <= m; ++k) h += ",u" + std::to_string(k);
  out << h << '\n';
  std::vector<long> idx(d, 0);
  Vector x(d);
  std::string row;
  while (true) {
    for (long k = 0; k < d; ++k) {
      x(k) = lo(k) + (hi(k) - lo(k)) * static_cast<double>(idx[k]) / static_cast<double>(n - 1);
    }
    const Vector u = eval_control(x, eval_grad_phi(law, x), problem);
    row = detail::format_double(x(0));
    for (long k = 1; k < d; ++k) detail::csv_cell(row, x(k));
    for (long k = 0; k < m; ++k) detail::csv_cell(row, u(k));
    out << row << '\n';
    long k = d - 1;
    while (k >= 0 && ++idx[k] == n) idx[k--] = 0;
    if (k < 0) break;
  }
}

// ---------------------------------------------------------------------------

struct RunOutcome {
  int exit_code = exit_ok;
  std::string message;
  std::filesystem::path output_dir;
  nlohmann::json report;
};

namespace detail {

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (long i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json vector_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline nlohmann::json model_json(const AffineGradientModel& m) {
  return {{"A", matrix_json(m.A)}, {"c", vector_json(m.c)}};
}

inline nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : resolved_entries(cfg)) j[k] = v;
  return j;
}

inline nlohmann::json suite_json(const SuiteResult& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"value", std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json(nullptr)},
                      {"tolerance", c.tolerance},
                      {"passed", c.passed},
                      {"detail", c.detail}});
  }
  return {{"suite", r.suite}, {"passed", r.passed()}, {"checks", checks}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
}

}  // namespace detail

/// Config text rebuilt from the "config" object of a report.json.
inline std::string config_text_from_report(const nlohmann::json& report) {
  std::string out;
  for (const auto& [k, v] : report.at("config").items()) out += k + " = " + v.get<std::string>() + "\n";
  return out;
}

/**
 * Runs one experiment and writes trajectory.csv, summary.csv,
 * control_surface.csv (when a grid is configured) and report.json. Numerical
 * failures are reported in report.json with exit code 3 instead of throwing.
 */
inline RunOutcome run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  RunOutcome outcome;
  outcome.output_dir = resolve_output_dir(cfg);
  fs::create_directories(outcome.output_dir);
  nlohmann::json& report = outcome.report;
  report["config"] = detail::config_json(cfg);
  report["seed"] = cfg.seed;
  report["mode"] = run_mode_name(cfg.mode);
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  if (cfg.mode == RunMode::verify) {
    const SuiteResult r = run_verify_suite(cfg.verify_suite, cfg.seed);
    report["verify"] = detail::suite_json(r);
    report["status"] = r.passed() ? "ok" : "oracle_failure";
    report["wall_clock_seconds"] = elapsed();
    detail::write_json(outcome.output_dir / "report.json", report);
    outcome.exit_code = r.passed() ? exit_ok : exit_oracle;
    outcome.message = r.passed() ? "all checks passed" : "oracle verification failed";
    return outcome;
  }

  const Benchmark bench = make_benchmark(cfg.problem_id, cfg.overrides);
  const ControlProblem& problem = bench.problem;
  const EnsembleState init = bench.sample(cfg.ensemble_size, cfg.seed);
  report["problem"] = {{"id", bench.id}, {"description", bench.description}};

  TrajectoryRecord rec;
  try {
    switch (cfg.mode) {
      case RunMode::discounted: {
        DiscountedResult r = solve_discounted_forward(problem, init, cfg.solver);
        report["equilibrium"] = {{"converged", r.report.converged},
                                 {"final_time", r.report.final_time},
                                 {"drift_metric", r.report.drift_metric},
                                 {"control_law", detail::model_json(r.report.control_law)}};
        rec = std::move(r.record);
        break;
      }
      case RunMode::finite_decoupled:
        rec = solve_finite_horizon_decoupled(problem, init, cfg.solver);
        report["control_law_t0"] = detail::model_json(rec.models.front());
        break;
      case RunMode::finite_sweeps: {
        SweepResult r = solve_finite_horizon_sweeps(problem, init, cfg.solver, cfg.sweeps);
        report["sweeps"] = {{"converged", r.converged}, {"count", r.sweeps}, {"last_change", r.last_change}};
        rec = std::move(r.record);
        report["control_law_t0"] = detail::model_json(rec.models.front());
        break;
      }
      default: break;
    }
  } catch (const NumericalError& e) {
    outcome.exit_code = exit_numerical;
    outcome.message = e.what();
  } catch (const SinkhornError& e) {
    outcome.exit_code = exit_numerical;
    outcome.message = e.what();
  } catch (const DegenerateEnsembleError& e) {
    outcome.exit_code = exit_numerical;
    outcome.message = e.what();
  } catch (const ConvergenceError& e) {
    outcome.exit_code = exit_numerical;
    outcome.message = e.what();
  }
  report["wall_clock_seconds"] = elapsed();
  if (outcome.exit_code != exit_ok) {
    report["status"] = "numerical_failure";
    report["error"] = outcome.message;
    detail::write_json(outcome.output_dir / "report.json", report);
    return outcome;
  }
  report["terminal_model"] = detail::model_json(rec.terminal_model);

  {
    std::ofstream out = detail::open_output(outcome.output_dir / "trajectory.csv");
    write_trajectory_csv(out, rec, problem.dim_x(), problem.dim_u());
  }
  {
    std::ofstream out = detail::open_output(outcome.output_dir / "summary.csv");
    write_summary_csv(out, rec, problem.dim_x());
  }
  if (cfg.grid > 0) {
    // discounted runs use the equilibrium law, finite ones the law at t = 0
    const AffineGradientModel& law = cfg.mode == RunMode::discounted ? rec.terminal_model : rec.models.front();
    const auto [lo, hi] = visited_bounds(rec, cfg.grid_margin);
    std::ofstream out = detail::open_output(outcome.output_dir / "control_surface.csv");
    write_control_surface_csv(out, problem, law, lo, hi, cfg.grid);
    report["control_surface"] = {{"points_per_axis", cfg.grid}, {"lower", detail::vector_json(lo)},
                                 {"upper", detail::vector_json(hi)}};
  }
  report["status"] = "ok";
  report["wall_clock_seconds"] = elapsed();
  detail::write_json(outcome.output_dir / "report.json", report);
  outcome.message = "wrote " + outcome.output_dir.string();
  return outcome;
}

}  // namespace mfpmp
