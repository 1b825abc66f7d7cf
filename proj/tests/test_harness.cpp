#include <gtest/gtest.h>

#include "rnnhard/harness.hpp"
#include "rnnhard/shape.hpp"

using namespace rnnhard;

namespace {

LabeledSample random_sample(Eigen::Index dim, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  LabeledSample s(dim, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) s.features(j, static_cast<Eigen::Index>(i)) = rng.normal();
    s.labels[i] = rng.coin() ? 1 : 0;
  }
  return s;
}

bool any_fail(const std::vector<StatReport>& rs) {
  return std::any_of(rs.begin(), rs.end(), [](const StatReport& r) { return r.outcome == Outcome::fail; });
}

}  // namespace

TEST(Reports, ExitCodesAndJsonRoundTrip) {
  const std::vector<StatReport> ok{p_report("a", 1.0, 0.5, 0.01, 10), exact_report("b", 0.0, 0.0, 3)};
  EXPECT_EQ(exit_code(ok), 0);
  auto inc = ok;
  inc.push_back(inconclusive_report("c", 5, "small"));
  EXPECT_EQ(exit_code(inc), 2);
  auto bad = inc;
  bad.push_back(p_report("d", 9.0, 1e-5, 0.01, 10));
  EXPECT_EQ(exit_code(bad), 1);
  for (const auto& r : bad) {
    const auto back = stat_report_from_json(to_json(r));
    EXPECT_EQ(back.test, r.test);
    EXPECT_EQ(back.p_value, r.p_value);
    EXPECT_EQ(back.outcome, r.outcome);
    EXPECT_EQ(back.note, r.note);
  }
  const auto table = render_table(bad);
  EXPECT_NE(table.find("inconclusive"), std::string::npos);
  EXPECT_NE(table.find("fail"), std::string::npos);
}

TEST(CheckRealizable, HandExample) {
  LabeledSample s(2, 3);
  s.features << 1.0, 0.2, -1.0,  //
      0.5, 0.3, 2.0;
  s.labels = {1, 0, 0};
  Eigen::MatrixXd W(2, 1);
  W << 1.0, 0.0;
  // Sums 1.0, 0.2, 0: the middle point misses label 0 by 0.2.
  const auto r = check_realizable(s, NetworkWeights(W));
  EXPECT_FALSE(r.realizable);
  EXPECT_EQ(r.violations, 1u);
  EXPECT_EQ(r.exact_matches, 2u);
  EXPECT_DOUBLE_EQ(r.max_residual, 0.2);
  EXPECT_TRUE(check_realizable(s, NetworkWeights(W), 0.25).realizable);
}

TEST(CheckRealizable, PlantedGadgetIsExact) {
  const auto f = sample_planted_mixed(30, 400, 3, 5, 3);
  const auto s = encode_formula(f);
  const NetworkWeights w(realizing_weights(*f.planted, f.q));
  const auto r = check_realizable(s, w, 0.0, 3);
  EXPECT_TRUE(r.realizable);
  EXPECT_EQ(r.exact_matches, s.size());
  EXPECT_EQ(r.max_residual, 0.0);
}

TEST(CheckRealizable, WrongAssignmentFails) {
  const auto f = sample_planted_mixed(30, 400, 3, 5, 4);
  Assignment other = *f.planted;
  for (auto& v : other.values) v = -v;
  EXPECT_FALSE(check_realizable(encode_formula(f), NetworkWeights(realizing_weights(other, f.q))).realizable);
}

TEST(Scattered, SmallSampleInconclusive) {
  const auto r = test_scattered(random_sample(4, 99, 1));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].outcome, Outcome::inconclusive);
}

TEST(Scattered, RandomLabelsPass) {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) failures += any_fail(test_scattered(random_sample(6, 500, seed))) ? 1 : 0;
  EXPECT_LE(failures, 2);
}

TEST(Scattered, DetectsDependenceAndImbalance) {
  auto s = random_sample(6, 1000, 5);
  for (std::size_t i = 0; i < s.size(); ++i) s.features(2, static_cast<Eigen::Index>(i)) += s.labels[i];
  EXPECT_TRUE(any_fail(test_scattered(s)));
  auto t = random_sample(6, 1000, 6);
  for (std::size_t i = 0; i < 700; ++i) t.labels[i] = 1;
  EXPECT_TRUE(any_fail(test_scattered(t)));
}

TEST(Scattered, RandomMixedGadgetPasses) {
  const auto f = sample_random_mixed(20, 2000, 3, 3, 7);
  auto s = encode_formula(f);
  for (std::size_t i = 0; i < s.size(); ++i) s.labels[i] = f.constraints[i].polarity == Polarity::negated ? 1 : 0;
  EXPECT_FALSE(any_fail(test_scattered(s)));
}

TEST(Distribution, DirectDrawsPassEveryFamily) {
  const std::vector<DistributionSpec> specs{DistributionSpec::normal(0.7), DistributionSpec::uniform(1.5),
                                            DistributionSpec::bernoulli(0.3), DistributionSpec::sphere(2.0),
                                            DistributionSpec::gaussian_cols(ar1_covariance(6, 0.5))};
  for (const auto& spec : specs) {
    int failures = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      Rng rng(seed, "draw");
      const auto W = sample_direct(spec, 6, 400, rng);
      failures += any_fail(test_distribution(std::vector<Eigen::MatrixXd>{W}, spec, seed + 1000)) ? 1 : 0;
    }
    EXPECT_LE(failures, 4) << spec.tag();
  }
}

TEST(Distribution, DetectsWrongLaw) {
  Rng rng(1);
  const auto W = sample_direct(DistributionSpec::normal(1.3), 6, 500, rng);
  EXPECT_TRUE(any_fail(test_distribution(std::vector<Eigen::MatrixXd>{W}, DistributionSpec::normal(1.0), 3)));
  const auto U = sample_direct(DistributionSpec::uniform(std::sqrt(3.0)), 6, 500, rng);
  EXPECT_TRUE(any_fail(test_distribution(std::vector<Eigen::MatrixXd>{U}, DistributionSpec::normal(1.0), 3)));
  Eigen::MatrixXd B = sample_direct(DistributionSpec::bernoulli(0.5), 6, 50, rng);
  B(0, 0) = 0.5000001;
  EXPECT_TRUE(any_fail(test_distribution(std::vector<Eigen::MatrixXd>{B}, DistributionSpec::bernoulli(0.5), 3)));
  Eigen::MatrixXd S = sample_direct(DistributionSpec::sphere(1.0), 6, 50, rng);
  S.col(3) *= 1.001;
  EXPECT_TRUE(any_fail(test_distribution(std::vector<Eigen::MatrixXd>{S}, DistributionSpec::sphere(1.0), 3)));
}

TEST(Distribution, DetectsWrongCovariance) {
  Rng rng(2);
  const auto W = sample_direct(DistributionSpec::gaussian_cols(Eigen::MatrixXd::Identity(5, 5)), 5, 2000, rng);
  EXPECT_TRUE(any_fail(test_distribution(std::vector<Eigen::MatrixXd>{W}, DistributionSpec::gaussian_cols(ar1_covariance(5, 0.5)), 4)));
}

TEST(Distribution, GaussianSmallSampleAndMismatch) {
  Rng rng(3);
  const auto spec = DistributionSpec::gaussian_cols(ar1_covariance(4, 0.2));
  const auto r = test_distribution(std::vector<Eigen::MatrixXd>{sample_direct(spec, 4, 10, rng)}, spec, 1);
  EXPECT_EQ(r.front().outcome, Outcome::inconclusive);
  EXPECT_THROW(test_distribution(std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Ones(5, 40)}, spec, 1), std::invalid_argument);
  EXPECT_THROW(test_distribution(std::vector<Eigen::MatrixXd>{}, spec, 1), std::invalid_argument);
}

TEST(SminTail, Thresholds) {
  const double l = std::log(63.0);
  EXPECT_DOUBLE_EQ(iid_smin_threshold(DistributionSpec::normal(2.0), 63), 2.0 / (63.0 * l * l));
  EXPECT_DOUBLE_EQ(sphere_smin_threshold(DistributionSpec::sphere(3.0), 63), 3.0 / (63.0 * std::sqrt(63.0) * std::pow(l, 5)));
  EXPECT_DOUBLE_EQ(default_smin_threshold(DistributionSpec::sphere(3.0), 63), sphere_smin_threshold(DistributionSpec::sphere(3.0), 63));
}

TEST(SminTail, MatchesIndividualTransformsAndThreads) {
  const auto spec = DistributionSpec::normal(1.0);
  const auto a = mc_smin_tail(spec, 10, 3, 120, 0.05, 9, 1);
  const auto b = mc_smin_tail(spec, 10, 3, 120, 0.05, 9, 3);
  EXPECT_EQ(a.smin, b.smin);
  EXPECT_EQ(a.smin[17], sample_fc_transform(spec, 10, 3, derive_seed(9, "smin-trial", 17)).smin());
  std::size_t exceed = 0;
  for (double v : a.smin) exceed += v <= 0.05 ? 1 : 0;
  EXPECT_EQ(a.exceed, exceed);
  EXPECT_DOUBLE_EQ(a.exceedance, exceed / 120.0);
  EXPECT_THROW(mc_smin_tail(spec, 10, 3, 99, 0.05, 9), std::invalid_argument);
}

namespace {

class GreedyLearner : public Learner {
 public:
  std::string name() const override { return "greedy"; }
  Predictor learn(ExampleOracle& oracle) override {
    for (;;) oracle.draw();
  }
};

}  // namespace

TEST(Distinguisher, CheatingAndBaselineLearners) {
  const auto f = sample_planted_mixed(20, 3000, 3, 3, 5);
  const auto s = encode_formula(f);
  const std::size_t m = 100;
  CheatingLearner cheat{NetworkWeights(realizing_weights(*f.planted, f.q))};
  const auto r = distinguish_with_learner(cheat, s, m, 1);
  EXPECT_EQ(r.verdict, Verdict::realizable);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.draws, 0u);
  ConstantLearner c;
  EXPECT_DOUBLE_EQ(distinguish_with_learner(c, s, m, 1).loss, 0.25);
  MemorizingLearner mem;
  const auto rm = distinguish_with_learner(mem, s, m, 1);
  EXPECT_EQ(rm.draws, m);
  EXPECT_EQ(rm.verdict, Verdict::scattered);
  EXPECT_GE(rm.loss, 0.25 * (1.0 - static_cast<double>(m) / s.size()) - 1e-12);
}

TEST(Distinguisher, BudgetIsEnforced) {
  const auto s = random_sample(5, 2000, 2);
  GreedyLearner g;
  const auto r = distinguish_with_learner(g, s, 50, 3);
  EXPECT_TRUE(r.aborted);
  EXPECT_EQ(r.draws, 50u);
  EXPECT_FALSE(r.reason.empty());
  EXPECT_THROW(distinguish_with_learner(g, random_sample(5, 100, 2), 50, 3), std::invalid_argument);
}
