#include <gtest/gtest.h>

#include "rnnhard/gadget.hpp"
#include "rnnhard/network.hpp"

using namespace rnnhard;

namespace {

Assignment from_mask(int n, unsigned mask) {
  Assignment a;
  for (int i = 0; i < n; ++i) a.values.push_back((mask >> i) & 1u ? 1 : -1);
  return a;
}

std::size_t falsified(const Constraint& c, const Assignment& psi) {
  std::size_t k = 0;
  for (const auto& cl : c.clauses) k += evaluate_clause(cl, psi) ? 0 : 1;
  return k;
}

}  // namespace

TEST(EncodeClause, HandExample) {
  const SignedTuple c{{1, 0}, {-1, 2}};
  Eigen::VectorXd expect(4);
  expect << 1, 0, -1, -1;
  EXPECT_EQ(encode_clause(c, 3), expect);
  const SignedTuple c3{{-1, 1}, {1, 3}, {1, 4}};
  Eigen::VectorXd e3(6);
  e3 << 0, -1, 0, 1, 1, -2;
  EXPECT_EQ(encode_clause(c3, 5), e3);
}

TEST(EncodeClause, RejectsRepeatedVariable) {
  EXPECT_THROW(encode_clause({{1, 0}, {-1, 0}}, 3), std::invalid_argument);
  EXPECT_THROW(encode_clause({{1, 4}}, 3), std::invalid_argument);
}

TEST(EncodeConstraint, LabelsFollowPolarity) {
  Constraint c{{{{1, 0}, {1, 1}}, {{-1, 2}, {1, 3}}}, Polarity::positive};
  auto [x, y] = encode_constraint(c, 4);
  EXPECT_EQ(x.size(), 10);
  EXPECT_EQ(y, 0);
  Eigen::VectorXd head(5);
  head << -1, -1, 0, 0, -1;
  EXPECT_EQ(x.head(5), head);
  c.polarity = Polarity::negated;
  EXPECT_EQ(encode_constraint(c, 4).second, 1);
  EXPECT_EQ(encode_constraint(c, 4).first, x);
}

TEST(EncodeConstraint, HiddenSumCountsFalsifiedClauses) {
  // Exhaustive over assignments: sum of ReLU(<(psi,1), block>) is the number
  // of clauses of the stored tuple that psi falsifies.
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 6, K = 2, q = 3;
    Constraint c{uniform_conjunction(rng, n, K, q), trial % 2 ? Polarity::negated : Polarity::positive};
    const auto x = encode_constraint(c, n).first;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      const auto psi = from_mask(n, mask);
      const auto w = realizing_weights(psi, q);
      EXPECT_EQ(pre_clip_cnn(w, x), static_cast<double>(falsified(c, psi)));
    }
  }
}

TEST(EncodeConstraint, ExhaustiveRealizability) {
  // psi realizes the point exactly when it satisfies the constraint.
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 5, K = 2, q = 2;
    Constraint c{uniform_conjunction(rng, n, K, q), rng.coin() ? Polarity::negated : Polarity::positive};
    auto [x, y] = encode_constraint(c, n);
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      const auto psi = from_mask(n, mask);
      const bool fits = eval_cnn(realizing_weights(psi, q), x) == static_cast<double>(y);
      EXPECT_EQ(fits, evaluate_constraint(c, psi));
    }
  }
}

TEST(EncodeFormula, PlantedMixedIsRealizable) {
  const auto f = sample_planted_mixed(40, 200, 3, 6, 1);
  const auto s = encode_formula(f);
  EXPECT_EQ(s.provenance.kind, SampleKind::realizable);
  EXPECT_EQ(s.provenance.source, formula_id(f));
  EXPECT_EQ(s.dim(), 41 * 6);
  ASSERT_EQ(s.size(), 200u);
  const auto w = realizing_weights(*f.planted, f.q);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(eval_cnn(w, s.point(i)), static_cast<double>(s.labels[i]));
}

TEST(EncodeFormula, NormIdentity) {
  const auto f = sample_random_mixed(30, 50, 3, 5, 2);
  const auto s = encode_formula(f);
  const double expect = 5.0 * (3.0 + 4.0);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.point(i).squaredNorm(), expect);
  EXPECT_DOUBLE_EQ(s.norm_bound, std::sqrt(expect));
  EXPECT_EQ(s.provenance.kind, SampleKind::scattered);
}

TEST(EncodeFormula, RejectsOtherKinds) {
  EXPECT_THROW(encode_formula(sample_random_ksat(5, 3, 2, 0)), std::invalid_argument);
}

TEST(EncodeFormula, EmptyFormula) {
  const auto s = encode_formula(sample_random_mixed(10, 0, 2, 2, 0));
  EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(s.dim(), 22);
}

TEST(RealizingWeights, Layout) {
  const auto w = realizing_weights(Assignment{{1, -1, -1}}, 4);
  Eigen::VectorXd expect(4);
  expect << 1, -1, -1, 1;
  EXPECT_EQ(w.w, expect);
  EXPECT_EQ(w.n, 16);
  EXPECT_EQ(realizing_weights(Assignment{{1}}).n, 0);
}

TEST(SampleKind, NamesRoundTrip) {
  for (auto k : {SampleKind::unknown, SampleKind::scattered, SampleKind::realizable})
    EXPECT_EQ(parse_sample_kind(sample_kind_name(k)), k);
  EXPECT_THROW(parse_sample_kind("maybe"), std::runtime_error);
}
