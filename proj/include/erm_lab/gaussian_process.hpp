#pragma once

// The canonical Gaussian process indexed by a finite set of zero-mean excess
// losses: covariance E G_s G_t = <s, t> in L2(mu).

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "erm_lab/errors.hpp"
#include "erm_lab/measure.hpp"
#include "erm_lab/parallel.hpp"
#include "erm_lab/rng.hpp"
#include "erm_lab/stats.hpp"
#include "erm_lab/text.hpp"

namespace erm_lab {

/// Q': zero-mean excess losses, element 0 identically zero, with their Gram matrix.
class ExcessLossSet {
 public:
  ExcessLossSet(ProbabilitySpace space, std::vector<SimpleFunction> elements, std::vector<std::size_t> source_indices)
      : space_(std::move(space)), elements_(std::move(elements)), sources_(std::move(source_indices)) {
    if (elements_.empty() || !elements_.front().is_zero())
      throw InputError("ExcessLossSet: element 0 must be the zero function");
    if (sources_.size() != elements_.size()) throw InputError("ExcessLossSet: one source index per element");
    for (std::size_t i = 0; i < elements_.size(); ++i) {
      if (std::abs(expectation(elements_[i], space_)) > 1e-10)
        throw InputError("ExcessLossSet: element " + std::to_string(i) + " does not have mean zero");
    }
    const auto m = static_cast<Eigen::Index>(elements_.size());
    gram_.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        gram_(i, j) = gram_(j, i) = inner_product(elements_[static_cast<std::size_t>(i)],
                                                  elements_[static_cast<std::size_t>(j)], space_);
    const double lowest = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram_, Eigen::EigenvaluesOnly).eigenvalues()(0);
    if (lowest < -1e-9)
      throw NumericalError("ExcessLossSet: Gram matrix is not positive semidefinite (smallest eigenvalue " +
                           text::format_double(lowest) + ")");
  }

  std::size_t size() const { return elements_.size(); }
  const ProbabilitySpace& space() const { return space_; }
  const std::vector<SimpleFunction>& elements() const { return elements_; }
  /// Class index each element came from; element 0 maps to the oracle.
  const std::vector<std::size_t>& source_indices() const { return sources_; }
  const Eigen::MatrixXd& gram() const { return gram_; }

  /// max_q ||q||
  double sigma_max() const { return std::sqrt(std::max(0.0, gram_.diagonal().maxCoeff())); }

  ExcessLossSet scaled(double s) const {
    std::vector<SimpleFunction> out;
    for (const auto& e : elements_) out.push_back(e.scaled(s));
    return ExcessLossSet(space_, std::move(out), sources_);
  }

 private:
  ProbabilitySpace space_;
  std::vector<SimpleFunction> elements_;
  std::vector<std::size_t> sources_;
  Eigen::MatrixXd gram_;
};

/// Q' from a subset of the minimizer set (all of it by default). The
/// oracle's zero element is placed first whether or not it was listed.
inline ExcessLossSet build_excess_loss_set(const LearningProblem& problem,
                                           std::optional<std::vector<std::size_t>> subset_indices = std::nullopt) {
  const auto v = minimizer_set(problem);
  const auto subset = subset_indices.value_or(v);
  std::vector<SimpleFunction> elements{SimpleFunction::zero(problem.space().atom_count())};
  std::vector<std::size_t> sources{problem.oracle_index()};
  for (auto i : subset) {
    if (std::find(v.begin(), v.end(), i) == v.end())
      throw InputError("build_excess_loss_set: index " + std::to_string(i) + " is not in the minimizer set");
    if (i == problem.oracle_index()) continue;
    elements.push_back(excess_loss(i, problem));
    sources.push_back(i);
  }
  return ExcessLossSet(problem.space(), std::move(elements), std::move(sources));
}

/// Lower-triangular factor of the Gram restricted to its nonzero-variance
/// coordinates. Coordinates with zero variance are identically zero.
struct GaussianFactor {
  std::vector<Eigen::Index> active;
  Eigen::MatrixXd lower;
  double jitter = 0.0;  // absolute diagonal shift that was added
};

/// Jitter starts at 1e-12 and grows by factors of 10 up to 1e-6, each
/// relative to the largest variance.
inline GaussianFactor factor_gram(const Eigen::MatrixXd& gram) {
  GaussianFactor out;
  for (Eigen::Index i = 0; i < gram.rows(); ++i)
    if (gram(i, i) > 0.0) out.active.push_back(i);
  const auto k = static_cast<Eigen::Index>(out.active.size());
  if (k == 0) return out;
  Eigen::MatrixXd sub(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = gram(out.active[i], out.active[j]);
  const double scale = sub.diagonal().maxCoeff();
  for (double eps = 1e-12; eps <= 1e-6 * (1.0 + 1e-9); eps *= 10.0) {
    const double shift = eps * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(sub + shift * Eigen::MatrixXd::Identity(k, k));
    if (llt.info() == Eigen::Success) {
      out.lower = llt.matrixL();
      out.jitter = shift;
      return out;
    }
  }
  const auto eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sub, Eigen::EigenvaluesOnly).eigenvalues();
  throw NumericalError("factor_gram: Cholesky failed at maximum jitter; eigenvalues range [" +
                       text::format_double(eig.minCoeff()) + ", " + text::format_double(eig.maxCoeff()) + "]");
}

namespace detail {

inline constexpr std::size_t kDrawsPerBlock = 1024;

// Calls sink(draw_index, values) for each draw of one block, in order.
template <typename Sink>
void gp_block(const GaussianFactor& factor, std::size_t m, std::size_t block, std::size_t total, std::uint64_t seed,
              Sink&& sink) {
  RandomStream rng(derive_seed(seed, StreamTag::kGaussianProcess, {block}));
  const auto k = static_cast<Eigen::Index>(factor.active.size());
  Eigen::VectorXd z(k), g_active(k);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  const std::size_t begin = block * kDrawsPerBlock;
  const std::size_t end = std::min(total, begin + kDrawsPerBlock);
  for (std::size_t d = begin; d < end; ++d) {
    if (k > 0) {
      for (Eigen::Index i = 0; i < k; ++i) z(i) = rng.normal();
      g_active.noalias() = factor.lower.triangularView<Eigen::Lower>() * z;
      for (Eigen::Index i = 0; i < k; ++i) g(factor.active[static_cast<std::size_t>(i)]) = g_active(i);
    }
    sink(d, g);
  }
}

inline std::size_t block_count(std::size_t total) { return (total + kDrawsPerBlock - 1) / kDrawsPerBlock; }

}  // namespace detail

/// count x M matrix whose rows are independent draws of (G_q1, ..., G_qM).
inline Eigen::MatrixXd sample_gp(const ExcessLossSet& set, std::size_t count, std::uint64_t seed, Exec exec = {}) {
  const auto factor = factor_gram(set.gram());
  const auto m = set.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(m));
  parallel_map<char>(detail::block_count(count), exec, [&](std::size_t block) {
    detail::gp_block(factor, m, block, count, seed,
                     [&](std::size_t d, const Eigen::VectorXd& g) { out.row(static_cast<Eigen::Index>(d)) = g; });
    return char{0};
  });
  return out;
}

/// Draw-wise suprema max_j G_qj, in draw order.
inline std::vector<double> sample_suprema(const ExcessLossSet& set, std::size_t count, std::uint64_t seed,
                                          Exec exec = {}) {
  const auto factor = factor_gram(set.gram());
  const auto m = set.size();
  std::vector<double> out(count);
  parallel_map<char>(detail::block_count(count), exec, [&](std::size_t block) {
    detail::gp_block(factor, m, block, count, seed,
                     [&](std::size_t d, const Eigen::VectorXd& g) { out[d] = g.maxCoeff(); });
    return char{0};
  });
  return out;
}

struct SupremumEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  double sigma_max = 0.0;
};

/// Monte Carlo estimate of H(Q') = E max_q G_q.
inline SupremumEstimate estimate_H(const ExcessLossSet& set, std::size_t trials, std::uint64_t seed, Exec exec = {}) {
  if (trials < 2) throw InputError("estimate_H: at least 2 trials are required");
  const auto sups = sample_suprema(set, trials, seed, exec);
  const auto est = mean_and_stderr(sups);
  return {est.mean, est.std_error, trials, set.sigma_max()};
}

/// Exact H for Q' = {0, q} with ||q|| = sigma: E max(0, sigma N) = sigma / sqrt(2 pi).
inline double closed_form_H_pair(double sigma) {
  if (!(sigma >= 0.0)) throw InputError("closed_form_H_pair: sigma must be nonnegative");
  return sigma / std::sqrt(2.0 * std::numbers::pi);
}

struct ConcentrationProbe {
  double probability = 0.0;  // Pr(Z >= E Z / 4)
  double expected_sup = 0.0;
  std::size_t trials = 0;
};

/// Pr(Z >= E Z / 4) for Z = max_q G_q, with E Z estimated from the same draws.
/// Returns exactly 1/2 when E Z = 0.
inline ConcentrationProbe concentration_probe(const ExcessLossSet& set, std::size_t trials, std::uint64_t seed,
                                              Exec exec = {}) {
  if (trials < 2) throw InputError("concentration_probe: at least 2 trials are required");
  const auto sups = sample_suprema(set, trials, seed, exec);
  const double ez = mean_and_stderr(sups).mean;
  ConcentrationProbe out{0.5, ez, trials};
  if (ez == 0.0) return out;
  std::size_t hits = 0;
  for (double z : sups) hits += (z >= ez / 4.0) ? 1 : 0;
  out.probability = static_cast<double>(hits) / static_cast<double>(trials);
  return out;
}

}  // namespace erm_lab
