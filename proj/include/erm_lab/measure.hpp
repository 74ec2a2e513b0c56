#pragma once

// Finite probability spaces and the squared-loss learning problems built on
// them. All expectations here are exact weighted sums over the atoms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "erm_lab/errors.hpp"
#include "erm_lab/text.hpp"

namespace erm_lab {

/// Risk gaps at or below this are treated as ties when deciding membership
/// in the minimizer set.
inline constexpr double kMinimizerTolerance = 1e-10;

class ProbabilitySpace {
 public:
  explicit ProbabilitySpace(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw InputError("ProbabilitySpace: at least one atom is required");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0) || !std::isfinite(w)) throw InputError("ProbabilitySpace: weights must be strictly positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InputError("ProbabilitySpace: weights must sum to 1");
    cumulative_.resize(weights_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      acc += weights_[i];
      cumulative_[i] = acc;
    }
    cumulative_.back() = 1.0;
  }

  static ProbabilitySpace uniform(std::size_t atoms) {
    if (atoms == 0) throw InputError("ProbabilitySpace::uniform: at least one atom is required");
    return ProbabilitySpace(std::vector<double>(atoms, 1.0 / static_cast<double>(atoms)));
  }

  std::size_t atom_count() const { return weights_.size(); }
  double weight(std::size_t atom) const { return weights_.at(atom); }
  std::span<const double> weights() const { return weights_; }
  /// Running sums of the weights; the last entry is exactly 1.
  std::span<const double> cumulative() const { return cumulative_; }

  friend bool operator==(const ProbabilitySpace& a, const ProbabilitySpace& b) { return a.weights_ == b.weights_; }

 private:
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// A real function on the atoms of a finite space, stored by value.
class SimpleFunction {
 public:
  SimpleFunction() = default;
  explicit SimpleFunction(std::vector<double> values) : values_(std::move(values)) {}
  SimpleFunction(std::initializer_list<double> values) : values_(values) {}

  static SimpleFunction zero(std::size_t atoms) { return SimpleFunction(std::vector<double>(atoms, 0.0)); }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> values() const { return values_; }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  bool is_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
  }

  SimpleFunction scaled(double s) const {
    SimpleFunction out = *this;
    for (auto& v : out.values_) v *= s;
    return out;
  }

  friend SimpleFunction operator-(const SimpleFunction& a, const SimpleFunction& b) {
    if (a.size() != b.size()) throw InputError("SimpleFunction: dimension mismatch");
    SimpleFunction out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.values_[i] -= b.values_[i];
    return out;
  }

  friend bool operator==(const SimpleFunction&, const SimpleFunction&) = default;

 private:
  std::vector<double> values_;
};

namespace detail {
inline void require_on_space(const SimpleFunction& f, const ProbabilitySpace& space, const char* op) {
  if (f.size() != space.atom_count())
    throw InputError(std::string(op) + ": function has " + std::to_string(f.size()) + " values, space has " +
                     std::to_string(space.atom_count()) + " atoms");
}
}  // namespace detail

inline double expectation(const SimpleFunction& f, const ProbabilitySpace& space) {
  detail::require_on_space(f, space, "expectation");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += space.weight(i) * f[i];
  return s;
}

/// L2(mu) inner product.
inline double inner_product(const SimpleFunction& f, const SimpleFunction& h, const ProbabilitySpace& space) {
  detail::require_on_space(f, space, "inner_product");
  detail::require_on_space(h, space, "inner_product");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += space.weight(i) * f[i] * h[i];
  return s;
}

inline double l2_norm(const SimpleFunction& f, const ProbabilitySpace& space) {
  return std::sqrt(inner_product(f, f, space));
}

/// Squared-loss risk E(f - T)^2.
inline double risk(const SimpleFunction& f, const SimpleFunction& target, const ProbabilitySpace& space) {
  detail::require_on_space(f, space, "risk");
  detail::require_on_space(target, space, "risk");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = f[i] - target[i];
    s += space.weight(i) * d * d;
  }
  return s;
}

/// Function class F, target T and a designated risk minimizer f* in F.
class LearningProblem {
 public:
  LearningProblem(ProbabilitySpace space, std::vector<SimpleFunction> class_functions, SimpleFunction target,
                  std::size_t oracle_index)
      : space_(std::move(space)),
        functions_(std::move(class_functions)),
        target_(std::move(target)),
        oracle_(oracle_index) {
    if (functions_.empty()) throw InputError("LearningProblem: the class must contain at least one function");
    detail::require_on_space(target_, space_, "LearningProblem target");
    if (target_.sup_norm() > 1.0) throw InputError("LearningProblem: target leaves the unit sup-norm ball");
    for (std::size_t i = 0; i < functions_.size(); ++i) {
      detail::require_on_space(functions_[i], space_, "LearningProblem class function");
      if (functions_[i].sup_norm() > 1.0)
        throw InputError("LearningProblem: class function " + std::to_string(i) + " leaves the unit sup-norm ball");
    }
    if (oracle_ >= functions_.size()) throw InputError("LearningProblem: oracle_index out of range");
    risks_.reserve(functions_.size());
    for (const auto& f : functions_) risks_.push_back(risk(f, target_, space_));
    const double best = *std::min_element(risks_.begin(), risks_.end());
    if (risks_[oracle_] - best > kMinimizerTolerance)
      throw InputError("LearningProblem: oracle_index does not minimize the risk over the class");
  }

  const ProbabilitySpace& space() const { return space_; }
  const std::vector<SimpleFunction>& functions() const { return functions_; }
  const SimpleFunction& function(std::size_t i) const { return functions_.at(i); }
  const SimpleFunction& target() const { return target_; }
  std::size_t oracle_index() const { return oracle_; }
  const SimpleFunction& oracle() const { return functions_[oracle_]; }
  std::size_t size() const { return functions_.size(); }
  /// risk(f_i, T), cached at construction.
  std::span<const double> risks() const { return risks_; }

 private:
  ProbabilitySpace space_;
  std::vector<SimpleFunction> functions_;
  SimpleFunction target_;
  std::size_t oracle_;
  std::vector<double> risks_;
};

/// Indices of F attaining the minimal risk against T.
inline std::vector<std::size_t> minimizer_set(const LearningProblem& problem) {
  const auto risks = problem.risks();
  const double best = *std::min_element(risks.begin(), risks.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < risks.size(); ++i)
    if (risks[i] - best <= kMinimizerTolerance) out.push_back(i);
  return out;
}

namespace detail {
inline void require_index(const LearningProblem& problem, std::size_t i) {
  if (i >= problem.size()) throw InputError("function index " + std::to_string(i) + " out of range");
}
inline void require_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("lambda must lie in [0, 1]");
}
}  // namespace detail

/// L(f) = (f - T)^2 - (f* - T)^2, pointwise.
inline SimpleFunction excess_loss(std::size_t f_index, const LearningProblem& problem) {
  detail::require_index(problem, f_index);
  const auto& f = problem.function(f_index);
  const auto& fs = problem.oracle();
  const auto& t = problem.target();
  SimpleFunction out = SimpleFunction::zero(t.size());
  if (f_index == problem.oracle_index()) return out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double a = f[i] - t[i];
    const double b = fs[i] - t[i];
    out[i] = a * a - b * b;
  }
  return out;
}

/// T_lambda = (1 - lambda) T + lambda f*.
inline SimpleFunction perturbed_target(const LearningProblem& problem, double lambda) {
  detail::require_lambda(lambda);
  const auto& t = problem.target();
  const auto& fs = problem.oracle();
  SimpleFunction out = SimpleFunction::zero(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = (1.0 - lambda) * t[i] + lambda * fs[i];
  return out;
}

/// L_lambda(f) = (f - T_lambda)^2 - (f* - T_lambda)^2, pointwise.
inline SimpleFunction perturbed_excess_loss(std::size_t f_index, const LearningProblem& problem, double lambda) {
  detail::require_index(problem, f_index);
  if (lambda == 0.0) return excess_loss(f_index, problem);
  const auto tl = perturbed_target(problem, lambda);
  const auto& f = problem.function(f_index);
  const auto& fs = problem.oracle();
  SimpleFunction out = SimpleFunction::zero(tl.size());
  if (f_index == problem.oracle_index()) return out;
  for (std::size_t i = 0; i < tl.size(); ++i) {
    const double a = f[i] - tl[i];
    const double b = fs[i] - tl[i];
    out[i] = a * a - b * b;
  }
  return out;
}

/// Excess losses of the minimizers, in minimizer-set order. The oracle's
/// entry is the zero function.
inline std::vector<SimpleFunction> excess_loss_class(const LearningProblem& problem) {
  std::vector<SimpleFunction> out;
  for (auto i : minimizer_set(problem)) out.push_back(excess_loss(i, problem));
  return out;
}

struct Geometry {
  double big_d = 0.0;    // sup_f ||T - f||
  double rho = 0.0;      // ||T - f*||
  double rho_inf = 0.0;  // ||T - f*||_inf

  /// rho / D, with the convention 1 when D = 0.
  double rho_over_d() const { return big_d == 0.0 ? 1.0 : rho / big_d; }
};

inline Geometry geometry(const LearningProblem& problem) {
  Geometry g;
  for (double r : problem.risks()) g.big_d = std::max(g.big_d, std::sqrt(r));
  g.rho = std::sqrt(problem.risks()[problem.oracle_index()]);
  g.rho_inf = (problem.target() - problem.oracle()).sup_norm();
  return g;
}

// ---------------------------------------------------------------------------
// Problem documents: one `key = value` per line, `#` starts a comment.
//
//   atoms = 2
//   weights = 0.5,0.5
//   target = 0,0
//   f.0 = 1,0
//   f.1 = 0,1
//   oracle_index = 0

inline std::string to_text(const LearningProblem& problem) {
  std::ostringstream out;
  const auto w = problem.space().weights();
  out << "atoms = " << problem.space().atom_count() << '\n';
  out << "weights = " << text::join_doubles({w.begin(), w.end()}) << '\n';
  const auto t = problem.target().values();
  out << "target = " << text::join_doubles({t.begin(), t.end()}) << '\n';
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const auto v = problem.function(i).values();
    out << "f." << i << " = " << text::join_doubles({v.begin(), v.end()}) << '\n';
  }
  out << "oracle_index = " << problem.oracle_index() << '\n';
  return out.str();
}

inline LearningProblem parse_problem(std::string_view document) {
  std::map<std::string, std::string, std::less<>> entries;
  std::size_t line_no = 0;
  for (auto line : text::split(document, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = text::trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw InputError("problem document line " + std::to_string(line_no) + ": expected key = value");
    std::string key(text::trim(line.substr(0, eq)));
    if (!entries.emplace(key, std::string(text::trim(line.substr(eq + 1)))).second)
      throw InputError("problem document: duplicate key '" + key + "'");
  }
  const auto take = [&](const std::string& key) {
    auto it = entries.find(key);
    if (it == entries.end()) throw InputError("problem document: missing key '" + key + "'");
    std::string v = it->second;
    entries.erase(it);
    return v;
  };
  const auto atoms = text::parse_integer<std::size_t>(take("atoms"), "atoms");
  auto weights = text::parse_double_list(take("weights"), "weights");
  if (weights.size() != atoms) throw InputError("problem document: weights count differs from atoms");
  auto target = text::parse_double_list(take("target"), "target");
  const auto oracle = text::parse_integer<std::size_t>(take("oracle_index"), "oracle_index");
  std::vector<SimpleFunction> functions;
  for (std::size_t i = 0;; ++i) {
    const auto key = "f." + std::to_string(i);
    if (!entries.contains(key)) break;
    functions.emplace_back(text::parse_double_list(take(key), key));
  }
  if (!entries.empty()) throw InputError("problem document: unknown key '" + entries.begin()->first + "'");
  return LearningProblem(ProbabilitySpace(std::move(weights)), std::move(functions), SimpleFunction(std::move(target)),
                         oracle);
}

}  // namespace erm_lab
