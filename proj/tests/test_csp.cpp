#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "rnnhard/csp.hpp"
#include "rnnhard/csp_io.hpp"
#include "rnnhard/stats.hpp"

using namespace rnnhard;

namespace {

Assignment psi_of(std::initializer_list<int> v) { return Assignment{std::vector<int>(v)}; }

SignedTuple clause(std::initializer_list<int> lits) {  // 1-based signed literals
  SignedTuple t;
  for (int l : lits) t.push_back({l > 0 ? 1 : -1, (l > 0 ? l : -l) - 1});
  return t;
}

Formula sat_formula(int n_vars, int K, std::vector<SignedTuple> clauses) {
  Formula f{n_vars, FormulaKind::sat, K, 1, {}, std::nullopt, Origin::unknown};
  for (auto& c : clauses) f.constraints.push_back({{c}, Polarity::positive});
  return f;
}

}  // namespace

TEST(RandomKsat, EmptyFormula) {
  const auto f = sample_random_ksat(4, 0, 2, 11);
  EXPECT_EQ(f.size(), 0u);
  EXPECT_EQ(f.kind, FormulaKind::sat);
  EXPECT_EQ(f.origin, Origin::random);
}

TEST(RandomKsat, ArityAboveVariableCountRejected) {
  EXPECT_THROW(sample_random_ksat(2, 1, 3, 0), std::invalid_argument);
  EXPECT_THROW(sample_planted_ksat(2, 1, 3, 0), std::invalid_argument);
}

TEST(RandomKsat, SignIndexPairsUniform) {
  const std::size_t m = 10000;
  const auto f = sample_random_ksat(4, m, 2, 5);
  std::vector<double> obs(8, 0.0);
  std::vector<std::size_t> appears(4, 0);
  for (const auto& c : f.constraints) {
    const auto& t = c.clauses.front();
    ASSERT_EQ(t.size(), 2u);
    ASSERT_NE(t[0].var, t[1].var);
    for (const auto& l : t) {
      obs[static_cast<std::size_t>(l.var * 2 + (l.sign > 0))] += 1.0;
      appears[static_cast<std::size_t>(l.var)]++;
    }
  }
  const std::vector<double> expected(8, 2.0 * m / 8.0);
  EXPECT_GT(stats::chi_square(obs, expected).p_value, 0.01);
  for (auto a : appears) EXPECT_NEAR(static_cast<double>(a) / m, 0.5, 0.02);
}

TEST(PlantedKsat, AllConstraintsSatisfied) {
  const auto f = sample_planted_ksat(4, 50, 2, 3);
  ASSERT_TRUE(f.planted);
  EXPECT_EQ(count_satisfied(f, *f.planted), 50u);
  EXPECT_NO_THROW(validate(f));
}

TEST(PlantedKsat, SingleVariableForcesLiteral) {
  const auto f = sample_planted_ksat(1, 3, 1, 9);
  for (const auto& c : f.constraints) {
    ASSERT_EQ(c.clauses.front().size(), 1u);
    EXPECT_EQ(c.clauses.front()[0].var, 0);
    EXPECT_EQ(c.clauses.front()[0].sign, (*f.planted)[0]);
  }
}

TEST(PlantedKsat, MatchesUniformOverSatisfiedClauses) {
  // Oracle: every (variable set, sign pattern) class satisfied by psi is
  // equally likely. Signs are read in increasing variable order.
  const std::size_t m = 10000;
  const auto f = sample_planted_ksat(6, m, 3, 21);
  const auto& psi = *f.planted;
  std::map<std::vector<int>, double> counts;
  for (int a = 0; a < 6; ++a)
    for (int b = a + 1; b < 6; ++b)
      for (int c = b + 1; c < 6; ++c)
        for (int pat = 0; pat < 8; ++pat) {
          const int sa = pat & 1 ? 1 : -1, sb = pat & 2 ? 1 : -1, sc = pat & 4 ? 1 : -1;
          if (sa * psi[a] == 1 || sb * psi[b] == 1 || sc * psi[c] == 1) counts[{a, sa, b, sb, c, sc}] = 0.0;
        }
  ASSERT_EQ(counts.size(), 20u * 7u);
  for (const auto& con : f.constraints) {
    auto t = con.clauses.front();
    std::sort(t.begin(), t.end(), [](const Literal& x, const Literal& y) { return x.var < y.var; });
    const std::vector<int> key{t[0].var, t[0].sign, t[1].var, t[1].sign, t[2].var, t[2].sign};
    ASSERT_TRUE(counts.count(key)) << "unsatisfied clause drawn";
    counts[key] += 1.0;
  }
  std::vector<double> obs, exp;
  for (const auto& [k, v] : counts) {
    obs.push_back(v);
    exp.push_back(static_cast<double>(m) / 140.0);
  }
  EXPECT_GT(stats::chi_square(obs, exp).p_value, 0.01);
}

TEST(Evaluate, ClauseBothLiteralsFalse) {
  EXPECT_FALSE(evaluate_clause(clause({1, -2}), psi_of({-1, 1})));
  EXPECT_TRUE(evaluate_clause(clause({1, -2}), psi_of({1, 1})));
}

TEST(Evaluate, ConjunctionAndNegation) {
  Constraint c{{clause({1, 2}), clause({3, 4})}, Polarity::positive};
  const auto psi = psi_of({1, -1, -1, -1});
  EXPECT_FALSE(evaluate_constraint(c, psi));
  c.polarity = Polarity::negated;
  EXPECT_TRUE(evaluate_constraint(c, psi));
}

TEST(Evaluate, RandomClauseSatisfactionRate) {
  Rng rng(77);
  std::size_t sat = 0;
  const std::size_t trials = 40000;
  for (std::size_t i = 0; i < trials; ++i) {
    Assignment psi;
    for (int v = 0; v < 10; ++v) psi.values.push_back(rng.sign());
    sat += evaluate_clause(uniform_tuple(rng, 10, 3), psi) ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(sat) / trials, 7.0 / 8.0, 0.01);
}

TEST(Greedy, HandTrace) {
  const auto f = sat_formula(6, 2, {clause({1, 2}), clause({3, 4}), clause({5, 6}), clause({1, 3})});
  const auto g = reduce_sat_to_T(f, 3, 1);
  ASSERT_TRUE(g.ok());
  ASSERT_EQ(g.formula->size(), 1u);
  const auto& grp = g.formula->constraints[0].clauses;
  ASSERT_EQ(grp.size(), 3u);
  EXPECT_EQ(grp[0], clause({1, 2}));
  EXPECT_EQ(grp[1], clause({3, 4}));
  EXPECT_EQ(grp[2], clause({5, 6}));
  EXPECT_EQ(g.clauses_used, 3u);
}

TEST(Greedy, SkippedClausesServeLaterGroups) {
  const auto f = sat_formula(6, 2, {clause({1, 2}), clause({1, 3}), clause({3, 4}), clause({5, 6})});
  const auto g = reduce_sat_to_T(f, 2, 2);
  ASSERT_TRUE(g.ok());
  EXPECT_EQ(g.formula->constraints[0].clauses, (std::vector<SignedTuple>{clause({1, 2}), clause({3, 4})}));
  EXPECT_EQ(g.formula->constraints[1].clauses, (std::vector<SignedTuple>{clause({1, 3}), clause({5, 6})}));
}

TEST(Greedy, PigeonholeFails) {
  const auto f = sample_random_ksat(20, 5, 3, 1);
  const auto g = reduce_sat_to_T(f, 3, 2);
  EXPECT_FALSE(g.ok());
  EXPECT_FALSE(g.reason.empty());
}

TEST(Greedy, RunningOutOfDisjointClausesIsAValue) {
  const auto f = sat_formula(4, 2, {clause({1, 2}), clause({-1, 2}), clause({1, -2}), clause({-1, -2})});
  const auto g = reduce_sat_to_T(f, 2, 1);
  EXPECT_FALSE(g.ok());
  EXPECT_EQ(g.groups_formed, 0u);
}

TEST(Greedy, RejectsNonSatInput) {
  const auto f = sample_random_mixed(10, 3, 2, 2, 0);
  EXPECT_THROW(reduce_sat_to_T(f, 2, 1), std::invalid_argument);
}

TEST(Greedy, DisjointnessAndPlantedPreservation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sat = sample_planted_ksat(40, 3000, 3, seed);
    const auto g = reduce_sat_to_T(sat, 6, 40);
    ASSERT_TRUE(g.ok()) << g.reason;
    for (const auto& c : g.formula->constraints) {
      std::set<int> vars;
      for (const auto& cl : c.clauses)
        for (const auto& l : cl) vars.insert(l.var);
      EXPECT_EQ(vars.size(), 6u * 3u);
      EXPECT_TRUE(evaluate_constraint(c, *g.formula->planted));
    }
    EXPECT_EQ(*g.formula->planted, *sat.planted);
    EXPECT_NO_THROW(validate(*g.formula));
  }
}

TEST(Greedy, GroupsAreDisjointSubsetsOfInput) {
  const auto sat = sample_random_ksat(30, 2000, 3, 4);
  const auto g = reduce_sat_to_T(sat, 5, 60);
  ASSERT_TRUE(g.ok());
  std::multiset<std::vector<int>> in, out;
  auto key = [](const SignedTuple& t) {
    std::vector<int> k;
    for (const auto& l : t) k.push_back(l.sign * (l.var + 1));
    return k;
  };
  for (const auto& c : sat.constraints) in.insert(key(c.clauses.front()));
  for (const auto& c : g.formula->constraints)
    for (const auto& cl : c.clauses) {
      auto it = in.find(key(cl));
      ASSERT_NE(it, in.end());
      in.erase(it);
    }
}

TEST(Flip, SingleLiteralFlipSurvivesHalfTheTime) {
  const auto sat = sample_planted_ksat(50, 20000, 1, 8);
  const auto g = reduce_sat_to_T(sat, 1, 20000);
  ASSERT_TRUE(g.ok());
  const auto mixed = flip_to_mixed(*g.formula, 3);
  const auto s = flip_stats(mixed);
  ASSERT_GT(s.negated, 9000u);
  EXPECT_NEAR(static_cast<double>(s.negated_unsatisfied) / s.negated, 0.5, 0.02);
}

TEST(Flip, PolarityBalanceExactBinomial) {
  const auto sat = sample_random_ksat(40, 10000, 2, 2);
  const auto g = reduce_sat_to_T(sat, 1, 10000);
  ASSERT_TRUE(g.ok());
  const auto s = flip_stats(flip_to_mixed(*g.formula, 99));
  EXPECT_GT(stats::binomial_two_sided_p(s.negated, 10000), 0.001);
}

TEST(Flip, KeptConstraintsUnchangedAndFreshOnesValid) {
  const auto sat = sample_planted_ksat(30, 600, 3, 5);
  const auto g = reduce_sat_to_T(sat, 4, 40);
  ASSERT_TRUE(g.ok());
  const auto mixed = flip_to_mixed(*g.formula, 12);
  ASSERT_EQ(mixed.size(), g.formula->size());
  EXPECT_EQ(mixed.kind, FormulaKind::mixed);
  EXPECT_EQ(*mixed.planted, *g.formula->planted);
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    if (mixed.constraints[i].polarity == Polarity::positive) {
      EXPECT_EQ(mixed.constraints[i].clauses, g.formula->constraints[i].clauses);
    }
  }
  EXPECT_NO_THROW(validate(mixed));
}

TEST(Flip, DeterministicUnderSeed) {
  const auto sat = sample_random_ksat(30, 500, 3, 5);
  const auto g = reduce_sat_to_T(sat, 4, 30);
  ASSERT_TRUE(g.ok());
  const auto a = flip_to_mixed(*g.formula, 4), b = flip_to_mixed(*g.formula, 4), c = flip_to_mixed(*g.formula, 5);
  EXPECT_EQ(formula_to_string(a), formula_to_string(b));
  EXPECT_NE(formula_to_string(a), formula_to_string(c));
}

TEST(Flip, RejectsNonConjunctionInput) {
  EXPECT_THROW(flip_to_mixed(sample_random_ksat(5, 3, 2, 0), 0), std::invalid_argument);
}

TEST(PlantedMixed, EveryConstraintSatisfied) {
  const auto f = sample_planted_mixed(63, 300, 3, 18, 4);
  EXPECT_TRUE(satisfies_all(f, *f.planted));
  const auto s = flip_stats(f);
  EXPECT_GT(s.negated, 100u);
  EXPECT_LT(s.negated, 200u);
  EXPECT_NO_THROW(validate(f));
}

TEST(RandomMixed, ShapeAndOrigin) {
  const auto f = sample_random_mixed(20, 50, 3, 4, 1);
  EXPECT_EQ(f.origin, Origin::random);
  EXPECT_FALSE(f.planted);
  EXPECT_NO_THROW(validate(f));
  EXPECT_THROW(sample_random_mixed(10, 1, 3, 4, 0), std::invalid_argument);
}

TEST(Determinism, FrozenFormulaIds) {
  // Golden ids pin the generator streams across platforms.
  EXPECT_EQ(formula_id(sample_random_ksat(10, 20, 3, 1)), formula_id(sample_random_ksat(10, 20, 3, 1)));
  EXPECT_EQ(formula_id(sample_random_ksat(10, 20, 3, 1)), "F12ee3059d0fa98f2");
  EXPECT_EQ(formula_id(sample_planted_mixed(12, 5, 2, 3, 7)), "F31daf2c65fce3ada");
}

TEST(FormulaIo, DimacsRoundTrip) {
  const auto f = sample_planted_ksat(12, 40, 3, 6);
  const std::string text = formula_to_string(f, "seed=6\nmode=planted\n");
  EXPECT_NE(text.find("p cnf 12 40"), std::string::npos);
  EXPECT_NE(text.find("c planted"), std::string::npos);
  EXPECT_NE(text.find("c manifest seed=6"), std::string::npos);
  EXPECT_EQ(formula_from_string(text), f);
}

TEST(FormulaIo, MixedRoundTrip) {
  const auto f = sample_planted_mixed(30, 25, 3, 4, 2);
  const std::string text = formula_to_string(f);
  EXPECT_NE(text.find("t 30 25 3 4"), std::string::npos);
  EXPECT_EQ(formula_from_string(text), f);
  EXPECT_EQ(formula_to_string(formula_from_string(text)), text);
}

TEST(FormulaIo, ParsesHandWrittenFiles) {
  const auto f = formula_from_string("c kind MIXED\nc planted 1 -1 1 1\nt 4 2 2 2\n+ 1 -2 | 3 4\n- -1 2 | -3 -4\n");
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f.constraints[1].polarity, Polarity::negated);
  EXPECT_EQ(f.constraints[1].clauses[0], clause({-1, 2}));
  EXPECT_EQ(f.planted->values, (std::vector<int>{1, -1, 1, 1}));
  const auto d = formula_from_string("p cnf 3 2\n1 -2\n 3 0\n-1 2 3 0\n");
  EXPECT_EQ(d.K, 3);
  EXPECT_EQ(d.constraints[0].clauses[0], clause({1, -2, 3}));
}

TEST(FormulaIo, RejectsMalformed) {
  EXPECT_THROW(formula_from_string("p cnf 3 2\n1 2 0\n"), std::runtime_error);
  EXPECT_THROW(formula_from_string("p cnf 3 1\n1 5 0\n"), std::runtime_error);
  EXPECT_THROW(formula_from_string("t 4 1 2 2\n+ 1 2 | 2 3\n"), std::invalid_argument);
  EXPECT_THROW(formula_from_string("t 4 1 2 1\n* 1 2\n"), std::runtime_error);
  EXPECT_THROW(formula_from_string("1 2 0\n"), std::runtime_error);
}
