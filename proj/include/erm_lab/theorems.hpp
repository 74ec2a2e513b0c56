#pragma once

// End-to-end experiments for the ERM lower bound: choice of the perturbation
// level lambda_n and radius r_n, Monte Carlo failure probabilities, and the
// exact binomial oracle for the two-point family.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "erm_lab/empirical_process.hpp"
#include "erm_lab/errors.hpp"
#include "erm_lab/gaussian_process.hpp"
#include "erm_lab/measure.hpp"
#include "erm_lab/parallel.hpp"
#include "erm_lab/rng.hpp"
#include "erm_lab/stats.hpp"

namespace erm_lab {

/// Multipliers left unspecified by the theory; the defaults are fixed up front.
struct Constants {
  double c2 = 0.25;   // threshold multiplier
  double c3 = 0.5;    // lambda_n multiplier
  double eta = 0.25;  // oscillation budget multiplier

  void validate() const {
    if (!(c2 > 0.0 && c3 > 0.0 && eta > 0.0)) throw InputError("constants c2, c3 and eta must be strictly positive");
  }
};

/// lambda_n = min(c3 H / sqrt(n), 1/2).
inline double choose_lambda_n(double h, std::size_t n, const Constants& c) {
  if (!(h >= 0.0)) throw InputError("choose_lambda_n: H must be nonnegative");
  if (n == 0) throw InputError("choose_lambda_n: n must be at least 1");
  return std::min(c.c3 * h / std::sqrt(static_cast<double>(n)), 0.5);
}

/// r_n = c3 H delta^2 rho^2 / sqrt(n).
inline double choose_r_n(double h, std::size_t n, double delta, const Geometry& g, const Constants& c) {
  if (!(delta >= 0.0)) throw InputError("choose_r_n: delta must be nonnegative");
  if (n == 0) throw InputError("choose_r_n: n must be at least 1");
  return c.c3 * h * delta * delta * g.rho * g.rho / std::sqrt(static_cast<double>(n));
}

/// The same radius with rho to the first power, as the headline bound is
/// normalized. Logged alongside r_n, never used for decisions.
inline double headline_radius(double h, std::size_t n, double delta, const Geometry& g, const Constants& c) {
  return c.c3 * h * delta * delta * g.rho / std::sqrt(static_cast<double>(n));
}

struct DeltaCalibration {
  double delta = 0.0;
  bool flagged = false;  // no grid value met the budget; delta is the grid minimum
  MeanEstimate osc;      // oscillation at the returned delta
};

/// Largest delta in a decreasing grid with osc_n(F, f*, delta) + 2 stderr <= eta H.
inline DeltaCalibration calibrate_delta(const LearningProblem& problem, std::size_t n, double h, const Constants& c,
                                        const std::vector<double>& delta_grid, std::size_t trials, std::uint64_t seed,
                                        Exec exec = {}) {
  if (delta_grid.empty()) throw InputError("calibrate_delta: the delta grid is empty");
  for (std::size_t i = 1; i < delta_grid.size(); ++i)
    if (!(delta_grid[i] < delta_grid[i - 1])) throw InputError("calibrate_delta: the delta grid must be decreasing");
  const double budget = c.eta * h;
  DeltaCalibration out;
  for (double delta : delta_grid) {
    out.delta = delta;
    out.osc = estimate_osc(problem, problem.oracle_index(), delta, n, trials,
                           derive_seed(seed, StreamTag::kCalibration, {n}), exec);
    if (out.osc.mean + 2.0 * out.osc.std_error <= budget) return out;
  }
  out.flagged = true;
  return out;
}

struct Theorem2Report {
  double min_ratio = std::numeric_limits<double>::infinity();  // c_emp
  std::size_t comparisons = 0;
  double max_minimizer_deviation = 0.0;  // max |ratio / (D / rho) - 1| over minimizers
  double d_over_rho = 1.0;

  bool positive() const { return min_ratio > 0.0; }
  bool identity_holds(double tol = 1e-9) const { return max_minimizer_deviation <= tol; }
};

/// E L_lambda(f) / (lambda (rho / D) ||f - f*||^2) over f != f* and the lambda grid.
inline Theorem2Report theorem2_check(const LearningProblem& problem, const std::vector<double>& lambda_grid) {
  for (double l : lambda_grid)
    if (!(l > 0.0 && l <= 0.5)) throw InputError("theorem2_check: lambda values must lie in (0, 1/2]");
  const auto g = geometry(problem);
  const auto v = minimizer_set(problem);
  Theorem2Report rep;
  rep.d_over_rho = 1.0 / g.rho_over_d();
  const auto& space = problem.space();
  for (std::size_t f = 0; f < problem.size(); ++f) {
    if (f == problem.oracle_index()) continue;
    const double dist2 = risk(problem.function(f), problem.oracle(), space);
    if (dist2 == 0.0) continue;
    const bool is_minimizer = std::find(v.begin(), v.end(), f) != v.end();
    for (double lambda : lambda_grid) {
      const double excess = expectation(perturbed_excess_loss(f, problem, lambda), space);
      const double ratio = excess / (lambda * g.rho_over_d() * dist2);
      rep.min_ratio = std::min(rep.min_ratio, ratio);
      ++rep.comparisons;
      if (is_minimizer)
        rep.max_minimizer_deviation = std::max(rep.max_minimizer_deviation, std::abs(ratio / rep.d_over_rho - 1.0));
    }
  }
  return rep;
}

/// Everything an experiment needs besides the problem and n.
struct ExperimentOptions {
  Constants constants;
  std::size_t trials = 10'000;      // ERM / event trials per n
  std::size_t h_trials = 100'000;   // Gaussian draws for H when no closed form applies
  std::size_t osc_trials = 2'000;   // trials per delta during calibration
  std::uint64_t seed = 0;
  Exec exec;
};

/// Seed of the data sample used by trial t at sample size n. Shared by every
/// experiment so that events at the same (n, t) are computed on the same data.
inline std::uint64_t trial_sample_seed(std::uint64_t master, std::size_t n, std::size_t t) {
  return derive_seed(master, StreamTag::kSample, {n, t});
}

/// H(Q') for the full minimizer set: closed form when |Q'| <= 2, Monte Carlo otherwise.
inline SupremumEstimate resolve_H(const ExcessLossSet& set, const ExperimentOptions& opt) {
  if (set.size() == 1) return {0.0, 0.0, 0, 0.0};
  if (set.size() == 2) return {closed_form_H_pair(set.sigma_max()), 0.0, 0, set.sigma_max()};
  return estimate_H(set, opt.h_trials, derive_seed(opt.seed, StreamTag::kGaussianProcess), opt.exec);
}

struct Theorem3Result {
  double h = 0.0;
  double lambda_n = 0.0;
  double threshold = 0.0;  // -c2 H / sqrt(n)
  ProportionEstimate probability;
};

struct Theorem4Result {
  double h = 0.0;
  double lambda_n = 0.0;
  double r_n = 0.0;
  std::vector<std::size_t> ball;  // B_{r_n} = {f : E L_lambda_n(f) <= r_n}
  double threshold = 0.0;         // -c2 H / (2 sqrt(n))
  ProportionEstimate probability;
};

namespace detail {

inline std::vector<std::size_t> ball_of_radius(const PerturbedLosses& losses, double r) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < losses.means().size(); ++i)
    if (losses.mean(i) <= r) out.push_back(i);
  return out;
}

inline double inf_over(const PerturbedLosses& losses, const std::vector<std::size_t>& indices,
                       std::span<const std::size_t> counts, std::size_t n) {
  double best = std::numeric_limits<double>::infinity();
  for (auto i : indices) best = std::min(best, counts_mean(losses.loss(i), counts, n));
  return best;
}

inline std::vector<std::size_t> sample_counts(const LearningProblem& problem, std::size_t n, std::uint64_t master,
                                              std::size_t t) {
  return atom_counts(draw_sample(problem.space(), n, trial_sample_seed(master, n, t)), problem.space().atom_count());
}

inline void require_trials(std::size_t trials, const char* op) {
  if (trials < 100) throw InputError(std::string(op) + ": at least 100 trials are required");
}

}  // namespace detail

/// Pr[min_{f in V} P_n L_lambda_n(f) <= -c2 H / sqrt(n)].
inline Theorem3Result theorem3_experiment(const LearningProblem& problem, std::size_t n, const ExperimentOptions& opt,
                                          std::optional<double> h_override = std::nullopt) {
  detail::require_trials(opt.trials, "theorem3_experiment");
  opt.constants.validate();
  Theorem3Result out;
  out.h = h_override ? *h_override : resolve_H(build_excess_loss_set(problem), opt).mean;
  out.lambda_n = choose_lambda_n(out.h, n, opt.constants);
  out.threshold = -opt.constants.c2 * out.h / std::sqrt(static_cast<double>(n));
  const PerturbedLosses losses(problem, out.lambda_n);
  const auto v = minimizer_set(problem);
  const auto hits = parallel_map<char>(opt.trials, opt.exec, [&](std::size_t t) {
    const auto counts = detail::sample_counts(problem, n, opt.seed, t);
    return static_cast<char>(detail::inf_over(losses, v, counts, n) <= out.threshold);
  });
  out.probability = wilson_interval(static_cast<std::size_t>(std::count(hits.begin(), hits.end(), 1)), opt.trials);
  return out;
}

/// Pr[inf_{f in B_{r_n}} P_n L_lambda_n(f) >= -c2 H / (2 sqrt(n))], with B_{r_n} computed exactly.
inline Theorem4Result theorem4_experiment(const LearningProblem& problem, std::size_t n, double delta,
                                          const ExperimentOptions& opt, std::optional<double> h_override = std::nullopt) {
  detail::require_trials(opt.trials, "theorem4_experiment");
  opt.constants.validate();
  Theorem4Result out;
  out.h = h_override ? *h_override : resolve_H(build_excess_loss_set(problem), opt).mean;
  out.lambda_n = choose_lambda_n(out.h, n, opt.constants);
  out.r_n = choose_r_n(out.h, n, delta, geometry(problem), opt.constants);
  out.threshold = -opt.constants.c2 * out.h / (2.0 * std::sqrt(static_cast<double>(n)));
  const PerturbedLosses losses(problem, out.lambda_n);
  out.ball = detail::ball_of_radius(losses, out.r_n);
  const auto hits = parallel_map<char>(opt.trials, opt.exec, [&](std::size_t t) {
    const auto counts = detail::sample_counts(problem, n, opt.seed, t);
    return static_cast<char>(detail::inf_over(losses, out.ball, counts, n) >= out.threshold);
  });
  out.probability = wilson_interval(static_cast<std::size_t>(std::count(hits.begin(), hits.end(), 1)), opt.trials);
  return out;
}

struct ErmFailure {
  ProportionEstimate p_fail;  // Pr[E L_lambda(f_hat) > r]
  MeanEstimate excess;        // of E L_lambda(f_hat) | D
};

/// ERM at a fixed lambda on opt.trials coupled samples of size n.
inline ErmFailure erm_failure_experiment(const LearningProblem& problem, double lambda, std::size_t n, double r,
                                         const ExperimentOptions& opt, TieRule rule = TieRule::kFavorOracle) {
  if (opt.trials < 2) throw InputError("erm_failure_experiment: at least 2 trials are required");
  const PerturbedLosses losses(problem, lambda);
  const auto excess = parallel_map<double>(opt.trials, opt.exec, [&](std::size_t t) {
    return losses.erm(detail::sample_counts(problem, n, opt.seed, t), n, rule).excess_risk;
  });
  const auto fails = static_cast<std::size_t>(std::count_if(excess.begin(), excess.end(), [&](double e) { return e > r; }));
  return {wilson_interval(fails, opt.trials), mean_and_stderr(excess)};
}

struct ReportRow {
  std::size_t n = 0;
  std::size_t trials = 0;
  double h_mean = 0.0;
  double h_stderr = 0.0;
  double delta = 0.0;
  bool delta_flagged = false;
  double lambda_n = 0.0;
  double r_n = 0.0;
  double headline_radius = 0.0;
  ProportionEstimate p_fail;
  double mean_excess = 0.0;
  double sqrtn_mean_excess = 0.0;
  ProportionEstimate theorem3;  // event of theorem3_experiment on the same samples
  ProportionEstimate theorem4;  // event of theorem4_experiment on the same samples
};

struct ExperimentReport {
  SupremumEstimate h;
  Geometry geometry;
  std::vector<ReportRow> rows;
  double p_floor = 0.10;
  std::size_t scaling_min_n = 256;
  double scaling_ratio_max = 1.25;

  bool p_floor_holds() const {
    return std::all_of(rows.begin(), rows.end(), [&](const ReportRow& r) { return r.p_fail.p >= p_floor; });
  }

  /// max / min of sqrt(n) * mean excess over rows with n >= scaling_min_n.
  double scaling_ratio() const {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    bool any = false;
    for (const auto& r : rows) {
      if (r.n < scaling_min_n) continue;
      any = true;
      lo = std::min(lo, r.sqrtn_mean_excess);
      hi = std::max(hi, r.sqrtn_mean_excess);
    }
    if (!any || hi == 0.0) return 1.0;
    return lo == 0.0 ? std::numeric_limits<double>::infinity() : hi / lo;
  }

  bool scaling_holds() const { return scaling_ratio() <= scaling_ratio_max; }

  /// Smallest n in the sweep from which p_fail >= p_floor holds for every larger n; nullopt if never.
  std::optional<std::size_t> p_floor_onset() const {
    std::optional<std::size_t> onset;
    for (auto it = rows.rbegin(); it != rows.rend() && it->p_fail.p >= p_floor; ++it) onset = it->n;
    return onset;
  }
};

/// For each n: calibrate delta, set lambda_n and r_n, run ERM on coupled
/// samples and record Pr[E L_lambda_n(f_hat) | D > r_n] with the mean excess.
inline ExperimentReport theorem1_experiment(const LearningProblem& problem, const std::vector<std::size_t>& n_list,
                                            const std::vector<double>& delta_grid, const ExperimentOptions& opt,
                                            double p_floor = 0.10) {
  if (n_list.empty()) throw InputError("theorem1_experiment: n_list is empty");
  if (opt.trials < 2) throw InputError("theorem1_experiment: at least 2 trials are required");
  opt.constants.validate();
  ExperimentReport rep;
  rep.p_floor = p_floor;
  rep.geometry = geometry(problem);
  rep.h = resolve_H(build_excess_loss_set(problem), opt);
  const auto v = minimizer_set(problem);
  for (auto n : n_list) {
    if (n == 0) throw InputError("theorem1_experiment: n must be at least 1");
    ReportRow row;
    row.n = n;
    row.trials = opt.trials;
    row.h_mean = rep.h.mean;
    row.h_stderr = rep.h.std_error;
    const auto cal = calibrate_delta(problem, n, rep.h.mean, opt.constants, delta_grid, opt.osc_trials, opt.seed, opt.exec);
    row.delta = cal.delta;
    row.delta_flagged = cal.flagged;
    row.lambda_n = choose_lambda_n(rep.h.mean, n, opt.constants);
    row.r_n = choose_r_n(rep.h.mean, n, row.delta, rep.geometry, opt.constants);
    row.headline_radius = headline_radius(rep.h.mean, n, row.delta, rep.geometry, opt.constants);
    const double root_n = std::sqrt(static_cast<double>(n));
    const double t3 = -opt.constants.c2 * rep.h.mean / root_n;
    const double t4 = t3 / 2.0;
    const PerturbedLosses losses(problem, row.lambda_n);
    const auto ball = detail::ball_of_radius(losses, row.r_n);

    struct Outcome {
      double excess = 0.0;
      bool t3 = false;
      bool t4 = false;
    };
    const auto outcomes = parallel_map<Outcome>(opt.trials, opt.exec, [&](std::size_t t) {
      const auto counts = detail::sample_counts(problem, n, opt.seed, t);
      return Outcome{losses.erm(counts, n).excess_risk, detail::inf_over(losses, v, counts, n) <= t3,
                     detail::inf_over(losses, ball, counts, n) >= t4};
    });
    std::vector<double> excess;
    excess.reserve(outcomes.size());
    std::size_t fails = 0, hits3 = 0, hits4 = 0;
    for (const auto& o : outcomes) {
      excess.push_back(o.excess);
      fails += o.excess > row.r_n;
      hits3 += o.t3;
      hits4 += o.t4;
    }
    row.p_fail = wilson_interval(fails, opt.trials);
    row.theorem3 = wilson_interval(hits3, opt.trials);
    row.theorem4 = wilson_interval(hits4, opt.trials);
    row.mean_excess = mean_and_stderr(excess).mean;
    row.sqrtn_mean_excess = root_n * row.mean_excess;
    rep.rows.push_back(row);
  }
  return rep;
}

enum class Crossing { kStrictlyBelow, kAtOrBelow };

/// Exact probability, over k ~ Binomial(n, 1/2) atom-0 draws, that the
/// two-point functional P_n L_lambda(f_2) = (k v0 + (n - k) v1) / n crosses
/// the threshold. kStrictlyBelow requires a margin of kErmTieTolerance, so with
/// threshold 0 this is the probability that ERM (favoring f*) returns f_2.
inline double binomial_oracle_two_point(double a, double b, std::size_t n, double lambda, double threshold,
                                        Crossing crossing = Crossing::kStrictlyBelow) {
  if (n == 0 || n > 1'000'000) throw InputError("binomial_oracle_two_point: n must lie in [1, 1e6]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("binomial_oracle_two_point: lambda must lie in [0, 1]");
  // T = 0, f* = (a, b), f_2 = (b, a), T_lambda = lambda f*.
  const double t0 = lambda * a, t1 = lambda * b;
  const double v0 = (b - t0) * (b - t0) - (a - t0) * (a - t0);
  const double v1 = (a - t1) * (a - t1) - (b - t1) * (b - t1);
  double p = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double value = (static_cast<double>(k) * v0 + static_cast<double>(n - k) * v1) / static_cast<double>(n);
    const bool hit =
        crossing == Crossing::kStrictlyBelow ? value < threshold - kErmTieTolerance : value <= threshold;
    if (hit) p += std::exp(log_binomial_pmf(n, k, 0.5));
  }
  return std::min(p, 1.0);
}

}  // namespace erm_lab
