#pragma once

// Configuration-driven runs: parse a flat `key = value` document, execute one
// experiment and write a CSV plus a plain-text summary.
//
// Exit codes: 0 success, 1 an in-run assertion failed, 2 configuration
// error (nothing written), 3 numerical error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "erm_lab/empirical_process.hpp"
#include "erm_lab/errors.hpp"
#include "erm_lab/gaussian_process.hpp"
#include "erm_lab/measure.hpp"
#include "erm_lab/problem_gen.hpp"
#include "erm_lab/text.hpp"
#include "erm_lab/theorems.hpp"

namespace erm_lab::cli {

enum ExitCode : int { kOk = 0, kAssertionFailed = 1, kConfigError = 2, kNumericalError = 3 };

enum class Experiment { kHEstimate, kOscEstimate, kErmRun, kTheorem1, kTheorem2, kTheorem3, kTheorem4, kSweep };

struct RunConfig {
  // problem block
  std::optional<GeneratorSpec> generator;  // unset when loading from a file
  std::string problem_path;
  // experiment block
  Experiment experiment = Experiment::kTheorem1;
  std::string experiment_name = "theorem1";
  std::vector<std::size_t> n_list{256, 1024, 4096};
  std::size_t trials = 10'000;
  std::size_t h_trials = 100'000;
  std::size_t osc_trials = 2'000;
  std::vector<double> delta_grid{1.0, 0.9, 0.75, 0.5, 0.25, 0.1, 0.05};
  std::vector<double> lambda_grid{0.01, 0.1, 0.5};
  std::optional<double> lambda;  // erm-run: fixed lambda instead of lambda_n
  std::optional<double> delta;   // theorem4: fixed delta instead of calibration
  double p_floor = 0.10;
  Constants constants;
  std::uint64_t seed = 0;
  std::string output;
  std::string hash;  // of the canonical key/value listing
  std::map<std::string, std::string> entries;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  unsigned threads = 1;
};

namespace detail {

inline Experiment experiment_from_name(std::string_view name) {
  if (name == "h-estimate") return Experiment::kHEstimate;
  if (name == "osc-estimate") return Experiment::kOscEstimate;
  if (name == "erm-run") return Experiment::kErmRun;
  if (name == "theorem1") return Experiment::kTheorem1;
  if (name == "theorem2") return Experiment::kTheorem2;
  if (name == "theorem3") return Experiment::kTheorem3;
  if (name == "theorem4") return Experiment::kTheorem4;
  if (name == "sweep") return Experiment::kSweep;
  throw InputError("experiment.name: unknown experiment '" + std::string(name) + "'");
}

inline std::vector<std::size_t> parse_size_list(std::string_view s, std::string_view what) {
  std::vector<std::size_t> out;
  for (auto part : text::split(s, ',')) out.push_back(text::parse_integer<std::size_t>(part, what));
  return out;
}

}  // namespace detail

/// Parses and validates a configuration document. Unknown keys are errors.
inline RunConfig parse_config(std::string_view document) {
  RunConfig cfg;
  std::size_t line_no = 0;
  for (auto line : text::split(document, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = text::trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key(text::trim(line.substr(0, eq)));
    if (!cfg.entries.emplace(key, std::string(text::trim(line.substr(eq + 1)))).second)
      throw InputError("config: duplicate key '" + key + "'");
  }

  std::string family;
  GeneratorSpec gen;
  for (const auto& [key, value] : cfg.entries) {
    if (key == "seed") cfg.seed = text::parse_integer<std::uint64_t>(value, key);
    else if (key == "output") cfg.output = value;
    else if (key == "problem.family") family = value;
    else if (key == "problem.path") cfg.problem_path = value;
    else if (key == "problem.a") gen.a = text::parse_double(value, key);
    else if (key == "problem.b") gen.b = text::parse_double(value, key);
    else if (key == "problem.d") gen.d = text::parse_integer<std::size_t>(value, key);
    else if (key == "problem.c") gen.c = text::parse_double(value, key);
    else if (key == "problem.atoms") gen.atoms = text::parse_integer<std::size_t>(value, key);
    else if (key == "problem.m") gen.m = text::parse_integer<std::size_t>(value, key);
    else if (key == "problem.rho") gen.rho = text::parse_double(value, key);
    else if (key == "problem.min_sep") gen.min_sep = text::parse_double(value, key);
    else if (key == "problem.seed") gen.seed = text::parse_integer<std::uint64_t>(value, key);
    else if (key == "experiment.name") {
      cfg.experiment = detail::experiment_from_name(value);
      cfg.experiment_name = value;
    } else if (key == "experiment.n_list") cfg.n_list = detail::parse_size_list(value, key);
    else if (key == "experiment.trials") cfg.trials = text::parse_integer<std::size_t>(value, key);
    else if (key == "experiment.h_trials") cfg.h_trials = text::parse_integer<std::size_t>(value, key);
    else if (key == "experiment.osc_trials") cfg.osc_trials = text::parse_integer<std::size_t>(value, key);
    else if (key == "experiment.delta_grid") cfg.delta_grid = text::parse_double_list(value, key);
    else if (key == "experiment.lambda_grid") cfg.lambda_grid = text::parse_double_list(value, key);
    else if (key == "experiment.lambda") cfg.lambda = text::parse_double(value, key);
    else if (key == "experiment.delta") cfg.delta = text::parse_double(value, key);
    else if (key == "experiment.p_floor") cfg.p_floor = text::parse_double(value, key);
    else if (key == "constants.c2") cfg.constants.c2 = text::parse_double(value, key);
    else if (key == "constants.c3") cfg.constants.c3 = text::parse_double(value, key);
    else if (key == "constants.eta") cfg.constants.eta = text::parse_double(value, key);
    else throw InputError("config: unknown key '" + key + "'");
  }

  if (family == "two_point") gen.family = Family::kTwoPoint;
  else if (family == "simplex") gen.family = Family::kSimplex;
  else if (family == "sphere") gen.family = Family::kSphere;
  else if (family != "file") throw InputError("problem.family must be one of two_point, simplex, sphere, file");
  if (family == "file") {
    if (cfg.problem_path.empty()) throw InputError("problem.path is required when problem.family = file");
  } else {
    if (!cfg.problem_path.empty()) throw InputError("problem.path is only valid with problem.family = file");
    cfg.generator = gen;
  }

  if (!cfg.entries.contains("experiment.name")) throw InputError("config: experiment.name is required");
  if (cfg.trials < 2) throw InputError("experiment.trials must be at least 2");
  if ((cfg.experiment == Experiment::kTheorem3 || cfg.experiment == Experiment::kTheorem4) && cfg.trials < 100)
    throw InputError("experiment.trials must be at least 100 for theorem3 and theorem4");
  if (cfg.h_trials < 2) throw InputError("experiment.h_trials must be at least 2");
  if (cfg.osc_trials < 2) throw InputError("experiment.osc_trials must be at least 2");
  if (cfg.n_list.empty()) throw InputError("experiment.n_list must not be empty");
  for (auto n : cfg.n_list)
    if (n == 0) throw InputError("experiment.n_list entries must be at least 1");
  if (cfg.delta_grid.empty()) throw InputError("experiment.delta_grid must not be empty");
  for (std::size_t i = 0; i < cfg.delta_grid.size(); ++i) {
    if (!(cfg.delta_grid[i] >= 0.0)) throw InputError("experiment.delta_grid entries must be nonnegative");
    if (i > 0 && !(cfg.delta_grid[i] < cfg.delta_grid[i - 1]))
      throw InputError("experiment.delta_grid must be strictly decreasing");
  }
  for (double l : cfg.lambda_grid)
    if (!(l > 0.0 && l <= 0.5)) throw InputError("experiment.lambda_grid entries must lie in (0, 0.5]");
  if (cfg.lambda && !(*cfg.lambda >= 0.0 && *cfg.lambda <= 1.0)) throw InputError("experiment.lambda must lie in [0, 1]");
  if (cfg.delta && !(*cfg.delta >= 0.0)) throw InputError("experiment.delta must be nonnegative");
  if (!(cfg.p_floor >= 0.0 && cfg.p_floor <= 1.0)) throw InputError("experiment.p_floor must lie in [0, 1]");
  cfg.constants.validate();

  std::string canonical;
  for (const auto& [key, value] : cfg.entries) canonical += key + " = " + value + "\n";
  cfg.hash = text::hex64(text::fnv1a64(canonical));
  return cfg;
}

namespace detail {

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
    out_ << '\n';
  }

  CsvWriter& cell(const std::string& s) {
    out_ << (cells_++ ? "," : "") << s;
    return *this;
  }
  CsvWriter& cell(double x) { return cell(text::format_double(x)); }
  CsvWriter& cell(std::size_t x) { return cell(std::to_string(x)); }

  void end_row() {
    if (cells_ != columns_.size()) throw std::logic_error("CsvWriter: row width differs from header");
    out_ << '\n';
    cells_ = 0;
  }

  std::string str() const { return out_.str(); }

 private:
  std::vector<std::string> columns_;
  std::ostringstream out_;
  std::size_t cells_ = 0;
};

struct Artifacts {
  std::string csv;
  std::ostringstream summary;
  bool assertions_ok = true;

  void check(bool ok, const std::string& what) {
    summary << "assert " << (ok ? "PASS " : "FAIL ") << what << '\n';
    assertions_ok = assertions_ok && ok;
  }
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
}

inline void run_experiment(const RunConfig& cfg, const LearningProblem& problem, const std::string& problem_id,
                           std::uint64_t seed, Exec exec, Artifacts& art) {
  const auto seed_cell = std::to_string(seed);
  ExperimentOptions opt;
  opt.constants = cfg.constants;
  opt.trials = cfg.trials;
  opt.h_trials = cfg.h_trials;
  opt.osc_trials = cfg.osc_trials;
  opt.seed = seed;
  opt.exec = exec;
  const auto g = geometry(problem);

  switch (cfg.experiment) {
    case Experiment::kHEstimate: {
      const auto set = build_excess_loss_set(problem);
      const auto h = estimate_H(set, cfg.trials, derive_seed(seed, StreamTag::kGaussianProcess), exec);
      const auto probe = concentration_probe(set, cfg.trials, derive_seed(seed, StreamTag::kGaussianProcess), exec);
      CsvWriter csv({"problem_id", "M", "trials", "H_mean", "H_stderr", "sigma_max", "H_closed_form", "conc_prob",
                     "seed", "config_hash"});
      csv.cell(problem_id).cell(set.size()).cell(cfg.trials).cell(h.mean).cell(h.std_error).cell(h.sigma_max);
      csv.cell(set.size() == 2 ? text::format_double(closed_form_H_pair(set.sigma_max())) : std::string{});
      csv.cell(probe.probability).cell(seed_cell).cell(cfg.hash);
      csv.end_row();
      art.csv = csv.str();
      art.summary << "H(Q') = " << text::format_double(h.mean) << " +- " << text::format_double(h.std_error)
                  << " over " << cfg.trials << " draws, M = " << set.size() << '\n';
      if (h.mean > 0.0)
        art.summary << "sigma_max / H = " << text::format_double(h.sigma_max / h.mean) << '\n';
      art.check(h.mean >= 0.0, "H estimate is nonnegative");
      art.check(probe.probability >= 0.05, "Pr(Z >= EZ/4) >= 0.05");
      break;
    }
    case Experiment::kOscEstimate: {
      CsvWriter csv({"problem_id", "n", "delta", "trials", "osc_mean", "osc_stderr", "seed", "config_hash"});
      for (auto n : cfg.n_list) {
        for (double delta : cfg.delta_grid) {
          const auto osc = estimate_osc(problem, problem.oracle_index(), delta, n, cfg.trials,
                                        derive_seed(seed, StreamTag::kCalibration, {n}), exec);
          csv.cell(problem_id).cell(n).cell(delta).cell(cfg.trials).cell(osc.mean).cell(osc.std_error);
          csv.cell(seed_cell).cell(cfg.hash);
          csv.end_row();
        }
      }
      art.csv = csv.str();
      break;
    }
    case Experiment::kErmRun: {
      const double h = cfg.lambda ? 0.0 : resolve_H(build_excess_loss_set(problem), opt).mean;
      CsvWriter csv({"problem_id", "n", "trials", "lambda", "p_fail", "p_lo", "p_hi", "mean_excess",
                     "mean_excess_stderr", "seed", "config_hash"});
      for (auto n : cfg.n_list) {
        const double lambda = cfg.lambda ? *cfg.lambda : choose_lambda_n(h, n, cfg.constants);
        const auto r = erm_failure_experiment(problem, lambda, n, 0.0, opt);
        csv.cell(problem_id).cell(n).cell(cfg.trials).cell(lambda).cell(r.p_fail.p).cell(r.p_fail.lo);
        csv.cell(r.p_fail.hi).cell(r.excess.mean).cell(r.excess.std_error).cell(seed_cell).cell(cfg.hash);
        csv.end_row();
      }
      art.csv = csv.str();
      break;
    }
    case Experiment::kTheorem2: {
      CsvWriter csv({"problem_id", "lambda", "min_ratio", "comparisons", "d_over_rho", "max_minimizer_deviation", "seed",
                     "config_hash"});
      const auto all = theorem2_check(problem, cfg.lambda_grid);
      for (double lambda : cfg.lambda_grid) {
        const auto rep = theorem2_check(problem, {lambda});
        csv.cell(problem_id).cell(lambda).cell(rep.min_ratio).cell(rep.comparisons).cell(rep.d_over_rho);
        csv.cell(rep.max_minimizer_deviation).cell(seed_cell).cell(cfg.hash);
        csv.end_row();
      }
      art.csv = csv.str();
      art.summary << "c_emp = " << text::format_double(all.min_ratio) << '\n';
      art.check(all.positive(), "minimum ratio is positive");
      art.check(all.identity_holds(), "ratio equals D/rho on minimizers");
      break;
    }
    case Experiment::kTheorem3: {
      const auto h = resolve_H(build_excess_loss_set(problem), opt);
      CsvWriter csv({"problem_id", "n", "trials", "H_mean", "H_stderr", "lambda_n", "threshold", "p", "p_lo", "p_hi",
                     "seed", "config_hash"});
      for (auto n : cfg.n_list) {
        const auto r = theorem3_experiment(problem, n, opt, h.mean);
        csv.cell(problem_id).cell(n).cell(cfg.trials).cell(h.mean).cell(h.std_error).cell(r.lambda_n);
        csv.cell(r.threshold).cell(r.probability.p).cell(r.probability.lo).cell(r.probability.hi);
        csv.cell(seed_cell).cell(cfg.hash);
        csv.end_row();
      }
      art.csv = csv.str();
      break;
    }
    case Experiment::kTheorem4: {
      const auto h = resolve_H(build_excess_loss_set(problem), opt);
      CsvWriter csv({"problem_id", "n", "trials", "H_mean", "delta", "lambda_n", "r_n", "ball_size", "threshold", "p",
                     "p_lo", "p_hi", "seed", "config_hash"});
      for (auto n : cfg.n_list) {
        const double delta = cfg.delta ? *cfg.delta
                                       : calibrate_delta(problem, n, h.mean, cfg.constants, cfg.delta_grid,
                                                         cfg.osc_trials, seed, exec)
                                             .delta;
        const auto r = theorem4_experiment(problem, n, delta, opt, h.mean);
        csv.cell(problem_id).cell(n).cell(cfg.trials).cell(h.mean).cell(delta).cell(r.lambda_n).cell(r.r_n);
        csv.cell(r.ball.size()).cell(r.threshold).cell(r.probability.p).cell(r.probability.lo).cell(r.probability.hi);
        csv.cell(seed_cell).cell(cfg.hash);
        csv.end_row();
      }
      art.csv = csv.str();
      break;
    }
    case Experiment::kTheorem1:
    case Experiment::kSweep: {
      const auto rep = theorem1_experiment(problem, cfg.n_list, cfg.delta_grid, opt, cfg.p_floor);
      CsvWriter csv({"problem_id", "n", "trials", "H_mean", "H_stderr", "delta", "lambda_n", "r_n", "p_fail", "p_lo",
                     "p_hi", "mean_excess", "sqrtn_mean_excess", "seed", "config_hash"});
      for (const auto& r : rep.rows) {
        csv.cell(problem_id).cell(r.n).cell(r.trials).cell(r.h_mean).cell(r.h_stderr).cell(r.delta).cell(r.lambda_n);
        csv.cell(r.r_n).cell(r.p_fail.p).cell(r.p_fail.lo).cell(r.p_fail.hi).cell(r.mean_excess);
        csv.cell(r.sqrtn_mean_excess).cell(seed_cell).cell(cfg.hash);
        csv.end_row();
      }
      art.csv = csv.str();
      art.summary << "geometry: D = " << text::format_double(g.big_d) << ", rho = " << text::format_double(g.rho)
                  << ", rho_inf = " << text::format_double(g.rho_inf) << '\n';
      for (const auto& r : rep.rows) {
        art.summary << "n = " << r.n << ": delta = " << text::format_double(r.delta)
                    << (r.delta_flagged ? " (no grid value met the oscillation budget)" : "")
                    << ", r_n (rho^2) = " << text::format_double(r.r_n)
                    << ", r_n (rho^1) = " << text::format_double(r.headline_radius)
                    << ", Pr[theorem3 event] = " << text::format_double(r.theorem3.p)
                    << ", Pr[theorem4 event] = " << text::format_double(r.theorem4.p) << '\n';
      }
      art.check(rep.p_floor_holds(), "p_fail(n) >= " + text::format_double(rep.p_floor) + " for every n");
      art.check(rep.scaling_holds(), "max/min of sqrt(n) * mean excess over n >= " +
                                         std::to_string(rep.scaling_min_n) + " is " +
                                         text::format_double(rep.scaling_ratio()) + " <= 1.25");
      if (cfg.experiment == Experiment::kSweep) {
        const auto onset = rep.p_floor_onset();
        art.summary << "p_fail floor holds from n = " << (onset ? std::to_string(*onset) : std::string("never"))
                    << '\n';
        std::optional<std::size_t> t4_onset;
        for (auto it = rep.rows.rbegin(); it != rep.rows.rend() && it->theorem4.p >= 1.0 - 0.5 * it->theorem3.p; ++it)
          t4_onset = it->n;
        art.summary << "Pr[theorem4 event] >= 1 - Pr[theorem3 event] / 2 holds from n = "
                    << (t4_onset ? std::to_string(*t4_onset) : std::string("never")) << '\n';
      }
      break;
    }
  }
}

}  // namespace detail

struct RunResult {
  int exit_code = kOk;
  std::string message;
  std::string csv_path;
  std::string summary_path;
};

/// Executes a parsed configuration. Never throws; errors map to exit codes.
inline RunResult run(const RunConfig& cfg, const Overrides& overrides = {}) {
  RunResult res;
  const std::uint64_t seed = overrides.seed.value_or(cfg.seed);
  const std::string output = overrides.output.value_or(cfg.output);
  try {
    if (output.empty()) throw InputError("no output path: set `output` in the config or pass --out");
    std::optional<LearningProblem> problem;
    std::string problem_id;
    if (cfg.generator) {
      problem.emplace(generate(*cfg.generator));
      problem_id = describe(*cfg.generator);
    } else {
      problem.emplace(parse_problem(detail::read_file(cfg.problem_path)));
      problem_id = "file;" + std::filesystem::path(cfg.problem_path).filename().string();
    }
    detail::Artifacts art;
    detail::run_experiment(cfg, *problem, problem_id, seed, Exec{overrides.threads}, art);

    std::ostringstream summary;
    summary << "experiment: " << cfg.experiment_name << '\n'
            << "problem: " << problem_id << '\n'
            << "seed: " << seed << '\n'
            << "config_hash: " << cfg.hash << '\n'
            << "config:\n";
    for (const auto& [key, value] : cfg.entries) summary << "  " << key << " = " << value << '\n';
    summary << art.summary.str();
    summary << "result: " << (art.assertions_ok ? "PASS" : "FAIL") << '\n';

    res.csv_path = output;
    res.summary_path = output + ".summary.txt";
    detail::write_file(res.csv_path, art.csv);
    detail::write_file(res.summary_path, summary.str());
    res.exit_code = art.assertions_ok ? kOk : kAssertionFailed;
    res.message = art.assertions_ok ? "ok" : "one or more in-run assertions failed";
  } catch (const InputError& e) {
    res.exit_code = kConfigError;
    res.message = e.what();
  } catch (const NumericalError& e) {
    res.exit_code = kNumericalError;
    res.message = e.what();
  }
  return res;
}

/// Parses, then runs. Configuration errors surface as kConfigError.
inline RunResult run_document(std::string_view config_document, const Overrides& overrides = {}) {
  try {
    return run(parse_config(config_document), overrides);
  } catch (const InputError& e) {
    return {kConfigError, e.what(), {}, {}};
  }
}

}  // namespace erm_lab::cli
