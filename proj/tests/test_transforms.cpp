#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "rnnhard/transforms.hpp"

using namespace rnnhard;

namespace {

BlockTransform random_block(Eigen::Index k, Eigen::Index s, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> z(static_cast<std::size_t>(k * k * s));
  for (auto& v : z) v = rng.normal();
  return BlockTransform(k, s, std::move(z), "test");
}

double dense_smin(const Eigen::MatrixXd& A) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues().minCoeff();
}

Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace

TEST(BlockTransform, IdentityActsTrivially) {
  const auto M = identity_transform(3, 4);
  EXPECT_EQ(M.dense(), Eigen::MatrixXd::Identity(12, 12));
  EXPECT_EQ(M.smin(), 1.0);
  Rng rng(1);
  const auto x = random_vector(12, rng);
  EXPECT_EQ(apply_inverse_transpose(M, x), x);
}

TEST(BlockTransform, LayoutMatchesDiagonalBlocks) {
  const auto M = random_block(2, 3, 4);
  const Eigen::MatrixXd D = M.dense();
  for (Eigen::Index a = 0; a < 2; ++a)
    for (Eigen::Index b = 0; b < 2; ++b) {
      const Eigen::MatrixXd blk = D.block(a * 3, b * 3, 3, 3);
      for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) EXPECT_EQ(blk(i, j), i == j ? M.diag(a, b, i) : 0.0);
    }
}

TEST(BlockTransform, BlockwiseSminMatchesDenseSvd) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(seed % 5), s = 1 + static_cast<Eigen::Index>((seed * 7) % 6);
    const auto M = random_block(k, s, seed);
    const double ref = dense_smin(M.dense());
    EXPECT_NEAR(smin_blockwise(M), ref, 1e-10 * std::max(1.0, ref)) << "k=" << k << " s=" << s;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M.dense());
    EXPECT_NEAR(M.smax(), svd.singularValues().maxCoeff(), 1e-10 * M.smax());
  }
}

TEST(BlockTransform, InverseTransposeSolves) {
  Rng rng(9);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto M = random_block(4, 5, 100 + seed);
    const auto x = random_vector(20, rng);
    const Eigen::VectorXd xp = apply_inverse_transpose(M, x);
    EXPECT_LT((M.dense().transpose() * xp - x).norm(), 1e-9 * x.norm() * M.condition());
  }
}

TEST(BlockTransform, PushWeightsMatchesDenseProduct) {
  Rng rng(2);
  const auto M = random_block(3, 4, 7);
  const auto w = random_vector(4, rng);
  const Eigen::MatrixXd expect = M.dense() * cnn_to_matrix(CnnFilter{w, 0}, 3);
  EXPECT_LT((push_weights(M, w) - expect).norm(), 1e-12 * expect.norm());
}

TEST(BlockTransform, TransportPreservesHiddenPreactivations) {
  Rng rng(3);
  const Eigen::Index k = 5, s = 6;
  const auto M = random_block(k, s, 11);
  const auto w = random_vector(s, rng);
  const Eigen::MatrixXd W = push_weights(M, w);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vector(k * s, rng);
    const Eigen::VectorXd xp = apply_inverse_transpose(M, x);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double expect = w.dot(x.segment(j * s, s));
      EXPECT_NEAR(W.col(j).dot(xp), expect, 1e-9 * M.condition() * w.norm() * x.norm());
    }
  }
}

TEST(BlockTransform, SingularAndMalformedInputs) {
  const BlockTransform Z(2, 2, std::vector<double>(8, 0.0), "zero");
  EXPECT_EQ(Z.smin(), 0.0);
  EXPECT_THROW(apply_inverse_transpose(Z, Eigen::VectorXd::Ones(4)), SingularTransform);
  EXPECT_THROW(BlockTransform(2, 2, std::vector<double>(7, 1.0), "x"), std::invalid_argument);
  const auto M = identity_transform(2, 2);
  EXPECT_THROW(apply_inverse_transpose(M, Eigen::VectorXd::Ones(5)), std::invalid_argument);
  EXPECT_THROW(push_weights(M, Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST(SampleFcTransform, IidEntriesFollowLaw) {
  const auto M = sample_fc_transform(DistributionSpec::bernoulli(0.5), 4, 3, 1);
  EXPECT_EQ(M.dim(), 15);
  for (double v : M.diagonals()) EXPECT_EQ(std::abs(v), 0.5);
  const auto U = sample_fc_transform(DistributionSpec::uniform(2.0), 4, 3, 1);
  for (double v : U.diagonals()) EXPECT_LE(std::abs(v), 2.0);
}

TEST(SampleFcTransform, SphereColumnsHaveRadius) {
  const auto M = sample_fc_transform(DistributionSpec::sphere(3.0), 5, 4, 2);
  const Eigen::MatrixXd W = push_weights(M, Eigen::VectorXd::Ones(6));
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(W.col(j).norm(), 3.0, 1e-12);
}

TEST(SampleFcTransform, DeterministicAndFamilyChecked) {
  const auto spec = DistributionSpec::normal(1.0);
  EXPECT_EQ(sample_fc_transform(spec, 4, 3, 5).diagonals(), sample_fc_transform(spec, 4, 3, 5).diagonals());
  EXPECT_NE(sample_fc_transform(spec, 4, 3, 5).diagonals(), sample_fc_transform(spec, 4, 3, 6).diagonals());
  EXPECT_THROW(sample_fc_transform(DistributionSpec::gaussian_cols(Eigen::MatrixXd::Identity(5, 5)), 4, 3, 0),
               std::invalid_argument);
}

TEST(CnnTransform, InnerProductsPreservedForEveryFamily) {
  const Eigen::Index t = 7;
  const std::vector<DistributionSpec> specs{DistributionSpec::normal(0.5), DistributionSpec::uniform(1.0),
                                            DistributionSpec::bernoulli(2.0), DistributionSpec::sphere(3.0),
                                            DistributionSpec::gaussian_cols(ar1_covariance(t, 0.6))};
  Rng rng(6);
  for (const auto& spec : specs) {
    const auto T = sample_cnn_transform(spec, t, 17);
    const CnnFilter f{random_vector(t, rng), 0};
    const auto fp = push_filter(T, f);
    const auto x = random_vector(4 * t, rng);
    const auto xp = apply_patch_map(T, x);
    EXPECT_NEAR(pre_clip_cnn(fp, xp), pre_clip_cnn(f, x), 1e-9 * T.condition() * f.w.norm() * x.norm()) << spec.tag();
    EXPECT_GT(T.smin, 0.0);
  }
}

TEST(CnnTransform, SphereMapIsScaledOrthogonal) {
  const Eigen::Index t = 9;
  const auto T = sample_cnn_transform(DistributionSpec::sphere(2.0), t, 4);
  const double c = 2.0 / 3.0;
  EXPECT_LT((T.weight_map.transpose() * T.weight_map - c * c * Eigen::MatrixXd::Identity(t, t)).norm(), 1e-12);
  EXPECT_NEAR(T.condition(), 1.0, 1e-12);
}

TEST(CnnTransform, IidMapIsDiagonal) {
  const auto T = sample_cnn_transform(DistributionSpec::normal(1.0), 5, 4);
  const Eigen::VectorXd d = T.weight_map.diagonal();
  EXPECT_EQ(Eigen::MatrixXd(d.asDiagonal()), T.weight_map);
  EXPECT_EQ(T.min_abs_diag, d.cwiseAbs().minCoeff());
  EXPECT_THROW(sample_cnn_transform(DistributionSpec::gaussian_cols(Eigen::MatrixXd::Identity(4, 4)), 5, 0),
               std::invalid_argument);
}

TEST(MapPoints, ThreadCountDoesNotChangeResult) {
  LabeledSample s(6, 200);
  Rng rng(5);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.point(i) = random_vector(6, rng);
    s.labels[i] = static_cast<int>(i % 2);
  }
  const auto M = random_block(2, 3, 8);
  auto f = [&](const auto& x) { return apply_inverse_transpose(M, x); };
  const auto a = map_points(s, 6, 1, f), b = map_points(s, 6, 4, f);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, s.labels);
}
