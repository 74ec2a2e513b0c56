#pragma once

#include <string>
#include <utility>
#include <vector>

#include "erm_lab/measure.hpp"
#include "erm_lab/problem_gen.hpp"

namespace erm_lab::test_support {

/// F = {T}: the degenerate problem with D = 0.
inline LearningProblem degenerate_problem() {
  SimpleFunction t{0.3, -0.2};
  return LearningProblem(ProbabilitySpace::uniform(2), {t}, t, 0);
}

/// Two-point reference problem plus a strictly suboptimal function.
inline LearningProblem two_point_with_suboptimal() {
  return LearningProblem(ProbabilitySpace::uniform(2),
                         {SimpleFunction{1.0, 0.0}, SimpleFunction{0.0, 1.0}, SimpleFunction{0.9, 0.9}},
                         SimpleFunction::zero(2), 0);
}

/// Non-uniform weights, nonzero target, a unique minimizer.
inline LearningProblem weighted_problem() {
  ProbabilitySpace space({0.2, 0.3, 0.5});
  SimpleFunction t{0.1, -0.2, 0.3};
  return LearningProblem(space,
                         {SimpleFunction{0.0, 0.0, 0.4}, SimpleFunction{0.5, -0.5, 0.0}, SimpleFunction{-1.0, 1.0, 1.0}},
                         t, 0);
}

inline LearningProblem sphere_fixture() { return gen_sphere(8, 5, 0.25, 0.1, 42); }

inline std::vector<std::pair<std::string, LearningProblem>> fixture_problems() {
  std::vector<std::pair<std::string, LearningProblem>> out;
  out.emplace_back("two_point(1,0)", gen_two_point(1.0, 0.0));
  out.emplace_back("two_point(0.5,0)", gen_two_point(0.5, 0.0));
  out.emplace_back("two_point(0.3,-0.8)", gen_two_point(0.3, -0.8));
  out.emplace_back("simplex(4,1)", gen_simplex(4, 1.0));
  out.emplace_back("simplex(16,1)", gen_simplex(16, 1.0));
  out.emplace_back("simplex(5,0.6)", gen_simplex(5, 0.6));
  out.emplace_back("sphere(8,5,0.25,0.1,42)", sphere_fixture());
  out.emplace_back("degenerate", degenerate_problem());
  out.emplace_back("two_point+suboptimal", two_point_with_suboptimal());
  out.emplace_back("weighted", weighted_problem());
  return out;
}

}  // namespace erm_lab::test_support
