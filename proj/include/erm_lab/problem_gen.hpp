#pragma once

// Deterministic generators for learning problems with several risk
// minimizers. All families use the zero target on a uniform space.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "erm_lab/errors.hpp"
#include "erm_lab/measure.hpp"
#include "erm_lab/rng.hpp"
#include "erm_lab/text.hpp"

namespace erm_lab {

/// Attempts allowed per sphere function before generation gives up.
inline constexpr int kSphereRejectionBudget = 10'000;

/// Uniform 2-atom space, T = 0, F = {(a, b), (b, a)}, f* = (a, b).
inline LearningProblem gen_two_point(double a, double b) {
  if (!(std::abs(a) <= 1.0 && std::abs(b) <= 1.0)) throw InputError("gen_two_point: |a| and |b| must be at most 1");
  if (a == b || a == -b) throw InputError("gen_two_point: a = +-b gives a degenerate excess loss class");
  return LearningProblem(ProbabilitySpace::uniform(2), {SimpleFunction{a, b}, SimpleFunction{b, a}},
                         SimpleFunction::zero(2), 0);
}

/// Uniform d-atom space, T = 0, f_i = c * 1{atom i}, f* = f_0.
inline LearningProblem gen_simplex(std::size_t d, double c) {
  if (d < 2) throw InputError("gen_simplex: d must be at least 2");
  if (!(c > 0.0 && c <= 1.0)) throw InputError("gen_simplex: c must lie in (0, 1]");
  std::vector<SimpleFunction> fs;
  fs.reserve(d);
  for (std::size_t i = 0; i < d; ++i) {
    auto f = SimpleFunction::zero(d);
    f[i] = c;
    fs.push_back(std::move(f));
  }
  return LearningProblem(ProbabilitySpace::uniform(d), std::move(fs), SimpleFunction::zero(d), 0);
}

/// m functions on the L2 sphere of radius rho around T = 0, pairwise at
/// least min_sep apart. Each candidate draws i.i.d. uniform values in
/// [-1, 1] per atom and is rescaled to norm rho; candidates leaving the
/// unit sup-norm ball or too close to an accepted function are redrawn.
inline LearningProblem gen_sphere(std::size_t atoms, std::size_t m, double rho, double min_sep, std::uint64_t seed) {
  if (atoms < 2) throw InputError("gen_sphere: atoms must be at least 2");
  if (m < 2) throw InputError("gen_sphere: m must be at least 2 (multiple minimizers are required)");
  if (!(rho > 0.0 && rho <= 1.0)) throw InputError("gen_sphere: rho must lie in (0, 1]");
  if (!(min_sep > 0.0)) throw InputError("gen_sphere: min_sep must be positive");

  const auto space = ProbabilitySpace::uniform(atoms);
  RandomStream rng(derive_seed(seed, StreamTag::kGenerator));
  std::vector<SimpleFunction> fs;
  for (std::size_t k = 0; k < m; ++k) {
    bool accepted = false;
    for (int attempt = 0; attempt < kSphereRejectionBudget && !accepted; ++attempt) {
      auto f = SimpleFunction::zero(atoms);
      for (std::size_t i = 0; i < atoms; ++i) f[i] = rng.uniform(-1.0, 1.0);
      const double norm = l2_norm(f, space);
      if (norm == 0.0) continue;
      f = f.scaled(rho / norm);
      if (f.sup_norm() > 1.0) continue;
      bool separated = true;
      for (const auto& g : fs) {
        if (l2_norm(f - g, space) < min_sep) {
          separated = false;
          break;
        }
      }
      if (!separated) continue;
      fs.push_back(std::move(f));
      accepted = true;
    }
    if (!accepted)
      throw NumericalError("gen_sphere: rejection budget exhausted at function " + std::to_string(k) +
                           " (atoms=" + std::to_string(atoms) + ", m=" + std::to_string(m) +
                           ", rho=" + text::format_double(rho) + ", min_sep=" + text::format_double(min_sep) +
                           ", seed=" + std::to_string(seed) + ")");
  }
  return LearningProblem(space, std::move(fs), SimpleFunction::zero(atoms), 0);
}

enum class Family { kTwoPoint, kSimplex, kSphere };

struct GeneratorSpec {
  Family family = Family::kTwoPoint;
  double a = 1.0;  // two_point
  double b = 0.0;
  std::size_t d = 4;  // simplex
  double c = 1.0;
  std::size_t atoms = 8;  // sphere
  std::size_t m = 5;
  double rho = 0.25;
  double min_sep = 0.1;
  std::uint64_t seed = 42;
};

inline LearningProblem generate(const GeneratorSpec& spec) {
  switch (spec.family) {
    case Family::kTwoPoint:
      return gen_two_point(spec.a, spec.b);
    case Family::kSimplex:
      return gen_simplex(spec.d, spec.c);
    case Family::kSphere:
      return gen_sphere(spec.atoms, spec.m, spec.rho, spec.min_sep, spec.seed);
  }
  throw InputError("generate: unknown family");
}

/// Short CSV-safe identifier, e.g. `two_point;a=1;b=0`.
inline std::string describe(const GeneratorSpec& spec) {
  using text::format_double;
  switch (spec.family) {
    case Family::kTwoPoint:
      return "two_point;a=" + format_double(spec.a) + ";b=" + format_double(spec.b);
    case Family::kSimplex:
      return "simplex;d=" + std::to_string(spec.d) + ";c=" + format_double(spec.c);
    case Family::kSphere:
      return "sphere;atoms=" + std::to_string(spec.atoms) + ";m=" + std::to_string(spec.m) +
             ";rho=" + format_double(spec.rho) + ";min_sep=" + format_double(spec.min_sep) +
             ";seed=" + std::to_string(spec.seed);
  }
  return "unknown";
}

}  // namespace erm_lab
