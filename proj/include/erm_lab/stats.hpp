#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "erm_lab/errors.hpp"

namespace erm_lab {

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
};

/// Sample mean and standard error (sample sd / sqrt(count)), summed in index order.
inline MeanEstimate mean_and_stderr(std::span<const double> values) {
  MeanEstimate est;
  est.trials = values.size();
  if (values.empty()) return est;
  double sum = 0.0;
  for (double v : values) sum += v;
  est.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return est;
  double ss = 0.0;
  for (double v : values) ss += (v - est.mean) * (v - est.mean);
  const double var = ss / static_cast<double>(values.size() - 1);
  est.std_error = std::sqrt(var / static_cast<double>(values.size()));
  return est;
}

struct ProportionEstimate {
  double p = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t successes = 0;
  std::size_t trials = 0;

  double half_width() const { return 0.5 * (hi - lo); }
};

inline constexpr double kZ95 = 1.959963984540054;

/// Point estimate with the Wilson score interval.
inline ProportionEstimate wilson_interval(std::size_t successes, std::size_t trials, double z = kZ95) {
  if (trials == 0) throw InputError("wilson_interval: zero trials");
  if (successes > trials) throw InputError("wilson_interval: successes exceed trials");
  ProportionEstimate est;
  est.successes = successes;
  est.trials = trials;
  const double n = static_cast<double>(trials);
  est.p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (est.p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(est.p * (1.0 - est.p) / n + z2 / (4.0 * n * n)) / denom;
  est.lo = std::max(0.0, center - half);
  est.hi = std::min(1.0, center + half);
  // Guard against rounding at the edges (p = 0 or 1).
  est.lo = std::min(est.lo, est.p);
  est.hi = std::max(est.hi, est.p);
  return est;
}

/// log of the Binomial(n, p) mass at k, via log-gamma.
inline double log_binomial_pmf(std::size_t n, std::size_t k, double p) {
  if (k > n) return -INFINITY;
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  double out = std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0);
  if (k > 0) out += (p > 0.0 ? kk * std::log(p) : -INFINITY);
  if (k < n) out += (p < 1.0 ? (nn - kk) * std::log1p(-p) : -INFINITY);
  return out;
}

}  // namespace erm_lab
