#pragma once

// Data samples, empirical means, the ERM procedure and the Gaussian
// multiplier processes used for oscillation and symmetrization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "erm_lab/errors.hpp"
#include "erm_lab/measure.hpp"
#include "erm_lab/parallel.hpp"
#include "erm_lab/rng.hpp"
#include "erm_lab/stats.hpp"

namespace erm_lab {

/// Empirical excess risks within this of the minimum count as ties.
inline constexpr double kErmTieTolerance = 1e-12;

/// Tolerance on ||center - h|| <= delta when forming oscillation balls.
inline constexpr double kBallTolerance = 1e-12;

struct Sample {
  std::vector<std::size_t> atom_indices;
  std::uint64_t seed = 0;

  std::size_t n() const { return atom_indices.size(); }
};

/// Inverse-CDF draw of one atom.
inline std::size_t draw_atom(const ProbabilitySpace& space, RandomStream& rng) {
  const auto cdf = space.cumulative();
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), space.atom_count() - 1);
}

/// n i.i.d. atoms from mu, a deterministic function of (space, n, seed).
inline Sample draw_sample(const ProbabilitySpace& space, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InputError("draw_sample: n must be at least 1");
  RandomStream rng(derive_seed(seed, StreamTag::kSample));
  Sample s;
  s.seed = seed;
  s.atom_indices.resize(n);
  for (auto& x : s.atom_indices) x = draw_atom(space, rng);
  return s;
}

/// Occurrences of each atom in the sample.
inline std::vector<std::size_t> atom_counts(const Sample& sample, std::size_t atoms) {
  std::vector<std::size_t> counts(atoms, 0);
  for (auto x : sample.atom_indices) {
    if (x >= atoms) throw InputError("atom_counts: sample index exceeds the atom count");
    ++counts[x];
  }
  return counts;
}

namespace detail {
inline double counts_mean(const SimpleFunction& g, std::span<const std::size_t> counts, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i]) s += static_cast<double>(counts[i]) * g[i];
  return s / static_cast<double>(n);
}
}  // namespace detail

/// P_n g = n^-1 sum_i g(X_i).
inline double empirical_mean(const SimpleFunction& g, const Sample& sample) {
  if (sample.n() == 0) throw InputError("empirical_mean: empty sample");
  return detail::counts_mean(g, atom_counts(sample, g.size()), sample.n());
}

/// P_n L_lambda(f).
inline double empirical_excess_risk(const LearningProblem& problem, double lambda, std::size_t f_index,
                                    const Sample& sample) {
  return empirical_mean(perturbed_excess_loss(f_index, problem, lambda), sample);
}

enum class TieRule { kFavorOracle, kLowestIndex };

struct ErmResult {
  std::size_t chosen_index = 0;
  std::vector<double> empirical_risks;   // P_n (f - T_lambda)^2 per class function
  std::vector<double> empirical_excess;  // P_n L_lambda(f) per class function
  double excess_risk = 0.0;              // E L_lambda(chosen), exact over mu
};

/// L_lambda(f) for every f in F together with its exact mean, for repeated
/// ERM runs at a fixed lambda.
class PerturbedLosses {
 public:
  PerturbedLosses(const LearningProblem& problem, double lambda)
      : problem_(&problem), lambda_(lambda), target_(perturbed_target(problem, lambda)) {
    for (std::size_t i = 0; i < problem.size(); ++i) {
      losses_.push_back(perturbed_excess_loss(i, problem, lambda));
      means_.push_back(expectation(losses_.back(), problem.space()));
    }
  }

  double lambda() const { return lambda_; }
  const SimpleFunction& loss(std::size_t i) const { return losses_.at(i); }
  /// E L_lambda(f_i)
  double mean(std::size_t i) const { return means_.at(i); }
  std::span<const double> means() const { return means_; }

  ErmResult erm(std::span<const std::size_t> counts, std::size_t n, TieRule rule = TieRule::kFavorOracle) const {
    const auto& p = *problem_;
    ErmResult r;
    r.empirical_risks.resize(p.size());
    r.empirical_excess.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& f = p.function(i);
      double s = 0.0;
      for (std::size_t w = 0; w < counts.size(); ++w) {
        if (!counts[w]) continue;
        const double d = f[w] - target_[w];
        s += static_cast<double>(counts[w]) * d * d;
      }
      r.empirical_risks[i] = s / static_cast<double>(n);
      r.empirical_excess[i] = detail::counts_mean(losses_[i], counts, n);
    }
    const double best = *std::min_element(r.empirical_excess.begin(), r.empirical_excess.end());
    const auto tied = [&](std::size_t i) { return r.empirical_excess[i] <= best + kErmTieTolerance; };
    std::size_t chosen = p.size();
    if (rule == TieRule::kFavorOracle && tied(p.oracle_index())) chosen = p.oracle_index();
    for (std::size_t i = 0; chosen == p.size(); ++i)
      if (tied(i)) chosen = i;
    r.chosen_index = chosen;
    r.excess_risk = means_[chosen];
    return r;
  }

 private:
  const LearningProblem* problem_;
  double lambda_;
  SimpleFunction target_;
  std::vector<SimpleFunction> losses_;
  std::vector<double> means_;
};

/// One element of Arg min_f P_n (f - T_lambda)^2. Candidates are compared on
/// P_n L_lambda(f), which differs from the empirical risk by a constant.
inline ErmResult erm(const LearningProblem& problem, double lambda, const Sample& sample,
                     TieRule rule = TieRule::kFavorOracle) {
  const PerturbedLosses losses(problem, lambda);
  return losses.erm(atom_counts(sample, problem.space().atom_count()), sample.n(), rule);
}

namespace detail {

// X_1..X_n followed by g_1..g_n from one stream. Returns per-atom counts and
// per-atom multiplier sums S_w = sum_{i: X_i = w} g_i.
struct MultiplierDraw {
  std::vector<std::size_t> counts;
  std::vector<double> sums;
};

inline MultiplierDraw multiplier_draw(const ProbabilitySpace& space, std::size_t n, std::uint64_t stream_seed) {
  RandomStream rng(stream_seed);
  std::vector<std::size_t> xs(n);
  for (auto& x : xs) x = draw_atom(space, rng);
  MultiplierDraw d{std::vector<std::size_t>(space.atom_count(), 0), std::vector<double>(space.atom_count(), 0.0)};
  for (auto x : xs) {
    ++d.counts[x];
    d.sums[x] += rng.normal();
  }
  return d;
}

inline double multiplier_sum(const SimpleFunction& f, const SimpleFunction& h, std::span<const double> sums) {
  double s = 0.0;
  for (std::size_t w = 0; w < sums.size(); ++w) s += (f[w] - h[w]) * sums[w];
  return s;
}

}  // namespace detail

/// osc_n(F, center, delta) = n^-1/2 E sup_{h : ||center - h|| <= delta} |sum_i g_i (center - h)(X_i)|,
/// both X and g fresh on every trial.
inline MeanEstimate estimate_osc(const LearningProblem& problem, std::size_t center_index, double delta, std::size_t n,
                                 std::size_t trials, std::uint64_t seed, Exec exec = {}) {
  if (!(delta >= 0.0)) throw InputError("estimate_osc: delta must be nonnegative");
  if (trials < 2) throw InputError("estimate_osc: at least 2 trials are required");
  if (n == 0) throw InputError("estimate_osc: n must be at least 1");
  detail::require_index(problem, center_index);
  const auto& space = problem.space();
  const auto& center = problem.function(center_index);
  std::vector<std::size_t> ball;
  for (std::size_t h = 0; h < problem.size(); ++h)
    if (h != center_index && l2_norm(center - problem.function(h), space) <= delta + kBallTolerance) ball.push_back(h);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const auto values = parallel_map<double>(trials, exec, [&](std::size_t t) {
    if (ball.empty()) return 0.0;
    const auto d = detail::multiplier_draw(space, n, derive_seed(seed, StreamTag::kOscillation, {t}));
    double sup = 0.0;
    for (auto h : ball) sup = std::max(sup, std::abs(detail::multiplier_sum(center, problem.function(h), d.sums)));
    return sup * scale;
  });
  return mean_and_stderr(values);
}

/// osc_n(F, delta): the same statistic with the sup over all pairs (f, h)
/// within delta. Shares streams with estimate_osc for equal seeds.
inline MeanEstimate estimate_osc_pairs(const LearningProblem& problem, double delta, std::size_t n, std::size_t trials,
                                       std::uint64_t seed, Exec exec = {}) {
  if (!(delta >= 0.0)) throw InputError("estimate_osc_pairs: delta must be nonnegative");
  if (trials < 2) throw InputError("estimate_osc_pairs: at least 2 trials are required");
  if (n == 0) throw InputError("estimate_osc_pairs: n must be at least 1");
  const auto& space = problem.space();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t f = 0; f < problem.size(); ++f)
    for (std::size_t h = f + 1; h < problem.size(); ++h)
      if (l2_norm(problem.function(f) - problem.function(h), space) <= delta + kBallTolerance) pairs.emplace_back(f, h);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const auto values = parallel_map<double>(trials, exec, [&](std::size_t t) {
    if (pairs.empty()) return 0.0;
    const auto d = detail::multiplier_draw(space, n, derive_seed(seed, StreamTag::kOscillation, {t}));
    double sup = 0.0;
    for (auto [f, h] : pairs)
      sup = std::max(sup, std::abs(detail::multiplier_sum(problem.function(f), problem.function(h), d.sums)));
    return sup * scale;
  });
  return mean_and_stderr(values);
}

struct SymmetrizationResult {
  MeanEstimate lhs;  // E sup_f |(P - P_n) L_lambda(f)|
  MeanEstimate rhs;  // E sup_f |n^-1 sum_i g_i (f - f*)(X_i)|
  double bound_constant = 8.0;

  /// Standard error of lhs - bound_constant * rhs, treating the two as independent.
  double combined_stderr() const {
    return std::hypot(lhs.std_error, bound_constant * rhs.std_error);
  }
  bool holds(double sigmas = 3.0) const {
    return lhs.mean <= bound_constant * rhs.mean + sigmas * combined_stderr();
  }
};

/// Both sides of the symmetrization inequality over F' = F, on shared draws.
inline SymmetrizationResult symmetrization_ratio(const LearningProblem& problem, double lambda, std::size_t n,
                                                 std::size_t trials, std::uint64_t seed, Exec exec = {}) {
  if (trials < 2) throw InputError("symmetrization_ratio: at least 2 trials are required");
  if (n == 0) throw InputError("symmetrization_ratio: n must be at least 1");
  const PerturbedLosses losses(problem, lambda);
  const auto& space = problem.space();
  const auto draws = parallel_map<std::pair<double, double>>(trials, exec, [&](std::size_t t) {
    const auto d = detail::multiplier_draw(space, n, derive_seed(seed, StreamTag::kSymmetrization, {t}));
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t f = 0; f < problem.size(); ++f) {
      lhs = std::max(lhs, std::abs(losses.mean(f) - detail::counts_mean(losses.loss(f), d.counts, n)));
      rhs = std::max(rhs, std::abs(detail::multiplier_sum(problem.function(f), problem.oracle(), d.sums)));
    }
    return std::pair{lhs, rhs / static_cast<double>(n)};
  });
  std::vector<double> l, r;
  l.reserve(trials);
  r.reserve(trials);
  for (auto [a, b] : draws) {
    l.push_back(a);
    r.push_back(b);
  }
  return {mean_and_stderr(l), mean_and_stderr(r)};
}

}  // namespace erm_lab
