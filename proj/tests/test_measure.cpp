#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "erm_lab/measure.hpp"
#include "erm_lab/problem_gen.hpp"
#include "fixtures.hpp"

using namespace erm_lab;

namespace {

const ProbabilitySpace kUniform2 = ProbabilitySpace::uniform(2);

// Random problem with a random target and class; the oracle is the risk argmin.
LearningProblem random_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> atoms_dist(1, 7), class_dist(1, 6);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), pos(0.05, 1.0);
  const auto atoms = atoms_dist(rng);
  std::vector<double> w(atoms);
  for (auto& x : w) x = pos(rng);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  double sum = std::accumulate(w.begin(), w.end() - 1, 0.0);
  w.back() = 1.0 - sum;
  ProbabilitySpace space(w);
  auto rand_fn = [&] {
    auto f = SimpleFunction::zero(atoms);
    for (std::size_t i = 0; i < atoms; ++i) f[i] = unit(rng);
    return f;
  };
  const auto t = rand_fn();
  std::vector<SimpleFunction> fs;
  const auto m = class_dist(rng);
  for (std::size_t i = 0; i < m; ++i) fs.push_back(rand_fn());
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (risk(fs[i], t, space) < risk(fs[best], t, space)) best = i;
  return LearningProblem(space, fs, t, best);
}

// Fixtures plus random problems, every one with a multi-minimizer or random structure.
std::vector<LearningProblem> property_problems() {
  std::vector<LearningProblem> out;
  for (auto& [name, p] : test_support::fixture_problems()) out.push_back(p);
  std::mt19937_64 rng(20240611);
  for (int i = 0; i < 40; ++i) out.push_back(random_problem(rng));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::uint64_t s = 0; s < 10; ++s) out.push_back(gen_sphere(6, 4, 0.3, 0.05, s));
  for (int i = 0; i < 10; ++i) {
    const double a = unit(rng), b = unit(rng);
    if (std::abs(std::abs(a) - std::abs(b)) > 1e-3) out.push_back(gen_two_point(a, b));
  }
  return out;
}

}  // namespace

TEST(ProbabilitySpace, RejectsBadWeights) {
  EXPECT_THROW(ProbabilitySpace({}), InputError);
  EXPECT_THROW(ProbabilitySpace({0.5, 0.0, 0.5}), InputError);
  EXPECT_THROW(ProbabilitySpace({0.5, 0.6}), InputError);
  EXPECT_THROW(ProbabilitySpace({-0.5, 1.5}), InputError);
  EXPECT_NO_THROW(ProbabilitySpace({0.25, 0.75}));
  EXPECT_DOUBLE_EQ(ProbabilitySpace::uniform(3).cumulative().back(), 1.0);
}

TEST(InnerProduct, Examples) {
  EXPECT_EQ(inner_product({1, 0}, {0, 1}, kUniform2), 0.0);
  EXPECT_EQ(inner_product({1, 1}, {1, 1}, kUniform2), 1.0);
  EXPECT_DOUBLE_EQ(inner_product({1, 0}, {1, 1}, ProbabilitySpace({0.25, 0.75})), 0.25);
}

TEST(InnerProduct, DimensionMismatch) {
  EXPECT_THROW(inner_product({1, 0, 0}, {0, 1}, kUniform2), InputError);
  EXPECT_THROW(risk({1}, {0, 1}, kUniform2), InputError);
}

TEST(InnerProduct, SymmetricAndBilinear) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  const ProbabilitySpace space({0.1, 0.2, 0.3, 0.4});
  for (int i = 0; i < 100; ++i) {
    SimpleFunction f{u(rng), u(rng), u(rng), u(rng)}, g{u(rng), u(rng), u(rng), u(rng)}, h{u(rng), u(rng), u(rng), u(rng)};
    const double a = u(rng);
    EXPECT_NEAR(inner_product(f, g, space), inner_product(g, f, space), 1e-15);
    auto combo = f.scaled(a);
    for (std::size_t k = 0; k < 4; ++k) combo[k] += h[k];
    EXPECT_NEAR(inner_product(combo, g, space), a * inner_product(f, g, space) + inner_product(h, g, space), 1e-14);
  }
}

TEST(Risk, Examples) {
  EXPECT_EQ(risk({0.3, 0.4}, {0.3, 0.4}, kUniform2), 0.0);
  EXPECT_DOUBLE_EQ(risk({1, 0}, {0, 0}, kUniform2), 0.5);
  EXPECT_DOUBLE_EQ(risk({0, 1}, {0, 0}, kUniform2), 0.5);
}

TEST(Risk, InvariantUnderAtomPermutation) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_problem(rng);
    const auto atoms = p.space().atom_count();
    std::vector<std::size_t> perm(atoms);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> w(atoms);
    auto f = SimpleFunction::zero(atoms), t = SimpleFunction::zero(atoms);
    for (std::size_t i = 0; i < atoms; ++i) {
      w[i] = p.space().weight(perm[i]);
      f[i] = p.function(0)[perm[i]];
      t[i] = p.target()[perm[i]];
    }
    EXPECT_NEAR(risk(f, t, ProbabilitySpace(w)), p.risks()[0], 1e-14);
  }
}

TEST(LearningProblem, Validation) {
  EXPECT_THROW(LearningProblem(kUniform2, {}, {0, 0}, 0), InputError);
  EXPECT_THROW(LearningProblem(kUniform2, {{1.5, 0}}, {0, 0}, 0), InputError);
  EXPECT_THROW(LearningProblem(kUniform2, {{1, 0}}, {0, 2}, 0), InputError);
  EXPECT_THROW(LearningProblem(kUniform2, {{1, 0}}, {0, 0}, 1), InputError);
  // (1, 1) has risk 1 > 0.5: not a minimizer.
  EXPECT_THROW(LearningProblem(kUniform2, {{1, 0}, {1, 1}}, {0, 0}, 1), InputError);
}

TEST(MinimizerSet, Examples) {
  EXPECT_EQ(minimizer_set(gen_two_point(1, 0)), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(minimizer_set(test_support::degenerate_problem()), (std::vector<std::size_t>{0}));
  EXPECT_EQ(minimizer_set(gen_simplex(4, 1)), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(minimizer_set(test_support::two_point_with_suboptimal()), (std::vector<std::size_t>{0, 1}));
}

TEST(ExcessLoss, Examples) {
  const auto tp = gen_two_point(1, 0);
  EXPECT_TRUE(excess_loss(0, tp).is_zero());
  EXPECT_EQ(excess_loss(1, tp), (SimpleFunction{-1, 1}));
  EXPECT_EQ(excess_loss(1, gen_simplex(4, 1)), (SimpleFunction{-1, 1, 0, 0}));
  EXPECT_THROW(excess_loss(2, tp), InputError);
}

TEST(ExcessLoss, SignMatchesRiskOrder) {
  for (const auto& p : property_problems()) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double el = expectation(excess_loss(i, p), p.space());
      EXPECT_NEAR(el, p.risks()[i] - p.risks()[p.oracle_index()], 1e-14);
      EXPECT_GE(el, -kMinimizerTolerance);
    }
  }
}

TEST(PerturbedTarget, Examples) {
  const auto tp = gen_two_point(1, 0);
  EXPECT_EQ(perturbed_target(tp, 0.0), tp.target());
  EXPECT_EQ(perturbed_target(tp, 1.0), tp.oracle());
  EXPECT_EQ(perturbed_target(tp, 0.1), (SimpleFunction{0.1, 0.0}));
  EXPECT_THROW(perturbed_target(tp, -0.1), InputError);
  EXPECT_THROW(perturbed_target(tp, 1.1), InputError);
  for (const auto& p : property_problems())
    for (double l : {0.0, 0.3, 0.7, 1.0}) EXPECT_LE(perturbed_target(p, l).sup_norm(), 1.0);
}

TEST(PerturbedExcessLoss, Examples) {
  const auto tp = gen_two_point(1, 0);
  const auto l = perturbed_excess_loss(1, tp, 0.1);
  EXPECT_NEAR(l[0], -0.8, 1e-15);
  EXPECT_NEAR(l[1], 1.0, 1e-15);
  EXPECT_NEAR(expectation(l, tp.space()), 0.1, 1e-15);
  EXPECT_TRUE(perturbed_excess_loss(0, tp, 0.37).is_zero());
  EXPECT_EQ(perturbed_excess_loss(1, tp, 0.0), excess_loss(1, tp));
  EXPECT_THROW(perturbed_excess_loss(1, tp, 2.0), InputError);
}

// E L_lambda(f) = lambda ||f - f*||^2 on the minimizer set.
TEST(PerturbedExcessLoss, SquaredLossIdentityOnMinimizers) {
  for (const auto& p : property_problems()) {
    for (auto i : minimizer_set(p)) {
      const double dist2 = risk(p.function(i), p.oracle(), p.space());
      for (double lambda : {0.0, 0.01, 0.1, 0.25, 0.5, 0.9, 1.0}) {
        const double e = expectation(perturbed_excess_loss(i, p, lambda), p.space());
        EXPECT_NEAR(e, lambda * dist2, 1e-12);
      }
    }
  }
}

TEST(PerturbedExcessLoss, SupNormCloseToExcessLoss) {
  for (const auto& p : property_problems()) {
    const double rho_inf = geometry(p).rho_inf;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto base = excess_loss(i, p);
      for (double lambda : {0.0, 0.01, 0.1, 0.5, 1.0}) {
        const double gap = (perturbed_excess_loss(i, p, lambda) - base).sup_norm();
        EXPECT_LE(gap, 8.0 * lambda * rho_inf + 1e-15);
      }
    }
  }
}

// f* stays a minimizer of risk(., T_lambda), and the unique one in L2 for lambda > 0.
TEST(PerturbedExcessLoss, OracleIsUniqueMinimizerOfPerturbedRisk) {
  for (const auto& p : property_problems()) {
    for (double lambda : {0.0, 0.05, 0.5, 1.0}) {
      const auto tl = perturbed_target(p, lambda);
      const double r_star = risk(p.oracle(), tl, p.space());
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = risk(p.function(i), tl, p.space());
        EXPECT_GE(r, r_star - 1e-12);
        const double dist2 = risk(p.function(i), p.oracle(), p.space());
        if (lambda > 0.0 && dist2 > 1e-9) {
          EXPECT_GT(r, r_star);
        }
      }
    }
  }
}

// E L_lambda(f) >= c (rho / D) lambda ||f - f*||^2 with c > 0 on every problem.
TEST(PerturbedExcessLoss, LowerBoundedByDistance) {
  for (const auto& p : property_problems()) {
    const auto g = geometry(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double dist2 = risk(p.function(i), p.oracle(), p.space());
      if (dist2 == 0.0) continue;
      for (double lambda : {0.01, 0.1, 0.5}) {
        const double e = expectation(perturbed_excess_loss(i, p, lambda), p.space());
        EXPECT_GT(e / (lambda * g.rho_over_d() * dist2), 0.0);
      }
    }
  }
}

TEST(ExcessLossClass, Examples) {
  const auto q = excess_loss_class(gen_two_point(1, 0));
  ASSERT_EQ(q.size(), 2u);
  EXPECT_TRUE(q[0].is_zero());
  EXPECT_EQ(q[1], (SimpleFunction{-1, 1}));

  const auto deg = excess_loss_class(test_support::degenerate_problem());
  ASSERT_EQ(deg.size(), 1u);
  EXPECT_TRUE(deg[0].is_zero());

  const auto sp = gen_simplex(4, 1);
  const auto qs = excess_loss_class(sp);
  ASSERT_EQ(qs.size(), 4u);
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t j = 1; j < 4; ++j) {
      if (i != j) {
        EXPECT_DOUBLE_EQ(inner_product(qs[i], qs[j], sp.space()), 0.25);
      }
    }
  for (const auto& p : property_problems())
    for (const auto& q : excess_loss_class(p)) EXPECT_NEAR(expectation(q, p.space()), 0.0, 1e-10);
}

TEST(Geometry, Examples) {
  const auto g = geometry(gen_two_point(1, 0));
  EXPECT_DOUBLE_EQ(g.big_d, 1.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(g.rho, 1.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(g.rho_inf, 1.0);

  const auto d = geometry(test_support::degenerate_problem());
  EXPECT_EQ(d.big_d, 0.0);
  EXPECT_EQ(d.rho, 0.0);
  EXPECT_EQ(d.rho_over_d(), 1.0);

  const auto s = geometry(gen_simplex(4, 1));
  EXPECT_DOUBLE_EQ(s.rho, 0.5);
  EXPECT_DOUBLE_EQ(s.big_d, 0.5);

  for (const auto& p : property_problems()) {
    const auto gg = geometry(p);
    EXPECT_LE(0.0, gg.rho);
    EXPECT_LE(gg.rho, gg.big_d);
    EXPECT_LE(gg.big_d, 2.0);
  }
}

TEST(ProblemText, RoundTripsExactly) {
  for (const auto& p : property_problems()) {
    const auto back = parse_problem(to_text(p));
    EXPECT_EQ(back.space(), p.space());
    EXPECT_EQ(back.functions(), p.functions());
    EXPECT_EQ(back.target(), p.target());
    EXPECT_EQ(back.oracle_index(), p.oracle_index());
  }
}

TEST(ProblemText, ParsesDocument) {
  const auto p = parse_problem(
      "# reference problem\n"
      "atoms = 2\n"
      "weights = 0.5, 0.5\n"
      "target = 0,0\n"
      "f.0 = 1,0\n"
      "f.1 = 0,1\n"
      "oracle_index = 0\n");
  EXPECT_EQ(p.size(), 2u);
  EXPECT_EQ(p.function(1), (SimpleFunction{0, 1}));
}

TEST(ProblemText, RejectsMalformedDocuments) {
  const std::string good = "atoms = 2\nweights = 0.5,0.5\ntarget = 0,0\nf.0 = 1,0\noracle_index = 0\n";
  EXPECT_NO_THROW(parse_problem(good));
  EXPECT_THROW(parse_problem("atoms = 2\n"), InputError);
  EXPECT_THROW(parse_problem(good + "extra = 1\n"), InputError);
  EXPECT_THROW(parse_problem(good + "atoms = 3\n"), InputError);
  EXPECT_THROW(parse_problem("atoms = 2\nweights = 0,5;0,5\ntarget = 0,0\nf.0 = 1,0\noracle_index = 0\n"), InputError);
  EXPECT_THROW(parse_problem("atoms = 3\nweights = 0.5,0.5\ntarget = 0,0\nf.0 = 1,0\noracle_index = 0\n"), InputError);
  EXPECT_THROW(parse_problem("atoms = 2\nweights = 0.5,0.5\ntarget = 0,0\nf.0 = 1,0\noracle_index = 0\nf.2 = 0,1\n"),
               InputError);
}
