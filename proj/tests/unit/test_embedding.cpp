#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rembo/embedding.hpp"
#include "rembo/stats.hpp"

using namespace rembo;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x(i++) = e;
  return x;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Eigen::VectorXd random_y(std::mt19937_64& rng, std::size_t d, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd y(static_cast<Eigen::Index>(d));
  for (auto& v : y) v = u(rng);
  return y;
}

}  // namespace

TEST(DrawEmbedding, EntriesLookStandardNormal) {
  std::vector<double> pooled;
  for (std::uint64_t seed = 0; seed < 1250; ++seed) {
    const auto emb = Embedding::draw(4, 2, seed);
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index c = 0; c < 2; ++c) pooled.push_back(emb.matrix()(i, c));
    }
  }
  ASSERT_EQ(pooled.size(), 10000u);
  const auto ks = stats::ks_one_sample(pooled, std_normal_cdf);
  EXPECT_GT(ks.p_value, 0.01) << "D = " << ks.statistic;
}

TEST(DrawEmbedding, BillionDimensionsIsLazyAndDeterministic) {
  const auto a = Embedding::draw(1'000'000'000, 2, 77);
  const auto b = Embedding::draw(1'000'000'000, 2, 77);
  EXPECT_EQ(a.storage(), Embedding::Storage::LazyRows);
  EXPECT_EQ(a.rows_generated(), 0u);
  EXPECT_EQ(a.row(714285714), b.row(714285714));
  EXPECT_EQ(a.rows_generated(), 1u);
  EXPECT_NE(a.row(714285714), Embedding::draw(1'000'000'000, 2, 78).row(714285714));
  EXPECT_THROW(a.matrix(), std::logic_error);
  EXPECT_THROW(a.map_to_x(vec({0.0, 0.0})), std::logic_error);
}

TEST(DrawEmbedding, StorageSwitchesAboveThreshold) {
  EXPECT_EQ(Embedding::draw(kLazyThreshold, 1, 0).storage(), Embedding::Storage::Dense);
  EXPECT_EQ(Embedding::draw(kLazyThreshold + 1, 1, 0).storage(), Embedding::Storage::LazyRows);
}

TEST(DrawEmbedding, DenseCachesTheLazyGenerator) {
  const auto dense = Embedding::draw(kLazyThreshold, 3, 5);
  const auto lazy = Embedding::draw(kLazyThreshold + 1, 3, 5);
  for (std::size_t i : {0u, 1u, 4242u, 99999u}) EXPECT_EQ(dense.row(i), lazy.row(i));
}

TEST(DrawEmbedding, YBoxIsSymmetricCube) {
  const auto emb = Embedding::draw(10, 2, 1);
  const double r = std::sqrt(2.0);
  EXPECT_EQ(emb.y_box().lower, vec({-r, -r}));
  EXPECT_EQ(emb.y_box().upper, vec({r, r}));
  EXPECT_NEAR(r, 1.41421356, 1e-8);
}

TEST(DrawEmbedding, RejectsBadShapes) {
  EXPECT_THROW(Embedding::draw(2, 3, 0), std::invalid_argument);
  EXPECT_THROW(Embedding::draw(2, 0, 0), std::invalid_argument);
  EXPECT_THROW(Embedding::draw(3, 1, 0, Box::cube(2, -1.0, 1.0)), std::invalid_argument);
  EXPECT_THROW(Embedding::draw(3, 1, 0, std::nullopt, CategoricalTable{{2, 2}}), std::invalid_argument);
  EXPECT_THROW(Embedding::draw(3, 1, 0, std::nullopt, CategoricalTable{{2, 0, 2}}), std::invalid_argument);
}

TEST(MapToX, ZeroMapsToZero) {
  const auto emb = Embedding::draw(30, 3, 2);
  EXPECT_EQ(emb.map_to_x(Eigen::VectorXd::Zero(3)), Eigen::VectorXd::Zero(30));
}

TEST(MapToX, ClampsPerCoordinate) {
  Eigen::MatrixXd A(2, 1);
  A << 3.0, 0.5;
  const auto emb = Embedding::from_matrix(A);
  EXPECT_EQ(emb.map_to_x(vec({1.0})), vec({1.0, 0.5}));
  EXPECT_THROW(emb.map_to_x(vec({1.0, 2.0})), std::invalid_argument);
  EXPECT_THROW(emb.map_to_x(vec({std::nan("")})), std::invalid_argument);
}

TEST(MapToX, SparseAgreesWithFull) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto emb = Embedding::draw(20, 2, static_cast<std::uint64_t>(rep));
    const Eigen::VectorXd y = random_y(rng, 2, 1.5);
    const std::size_t i = rng() % 20;
    const std::size_t idx[] = {i};
    EXPECT_EQ(emb.map_coordinates(y, idx)(0), emb.map_to_x(y)(static_cast<Eigen::Index>(i)));
  }
}

TEST(MapToX, OutputIsInsideTheBoxAndIdempotent) {
  std::mt19937_64 rng(4);
  const Box box(vec({-1.0, 0.0, -0.5, -2.0}), vec({1.0, 0.25, 3.0, -1.0}));
  const auto emb = Embedding::draw(4, 2, 9, box);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::VectorXd x = emb.map_to_x(random_y(rng, 2, 3.0));
    EXPECT_TRUE(box.contains(x));
    EXPECT_EQ(box.clamp(x), x);
  }
}

TEST(DecodeCategorical, EdgeExamples) {
  EXPECT_EQ(decode_coordinate(-1.0, 3), 0);
  EXPECT_EQ(decode_coordinate(1.0, 3), 2);
  EXPECT_EQ(decode_coordinate(0.0, 2), 1);
  EXPECT_EQ(decode_coordinate(-0.01, 2), 0);
  EXPECT_EQ(decode_coordinate(0.5, 1), 0);
}

TEST(DecodeCategorical, AlwaysInRange) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 10.0);
  for (int rep = 0; rep < 10000; ++rep) {
    const int count = 1 + static_cast<int>(rng() % 9);
    const int c = decode_coordinate(g(rng), count);
    EXPECT_GE(c, 0);
    EXPECT_LT(c, count);
  }
  EXPECT_EQ(decode_coordinate(1e300, 4), 3);
  EXPECT_EQ(decode_coordinate(-1e300, 4), 0);
}

TEST(DecodeCategorical, NeedsTable) {
  const auto emb = Embedding::draw(3, 1, 0);
  EXPECT_THROW(emb.decode_categorical(Eigen::VectorXd::Zero(3)), std::logic_error);
  const auto with_table = Embedding::draw(3, 1, 0, std::nullopt, CategoricalTable{{2, 3, 7}});
  const auto cats = with_table.decode_categorical(vec({-1.0, 0.0, 1.0}));
  EXPECT_EQ(cats, (std::vector<int>{0, 1, 6}));
}

TEST(SubspaceRankCheck, RandomEmbeddingsHaveFullRank) {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto emb = Embedding::draw(10, 3, seed);
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(10, 2);
    basis(seed % 10, 0) = 1.0;
    basis((seed + 3) % 10, 1) = 1.0;
    ok += subspace_rank_check(emb, basis) ? 1 : 0;
  }
  EXPECT_EQ(ok, 1000);
}

TEST(SubspaceRankCheck, DegenerateCases) {
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3, 1);
  basis(0, 0) = 1.0;
  EXPECT_FALSE(subspace_rank_check(Embedding::from_matrix(Eigen::MatrixXd::Zero(3, 1)), basis));
  Eigen::MatrixXd orthogonal(3, 1);
  orthogonal << 0.0, 1.0, -2.0;
  EXPECT_FALSE(subspace_rank_check(Embedding::from_matrix(orthogonal), basis));
}

TEST(SubspaceRankCheck, LazyEmbeddingTouchesOnlyBasisRows) {
  const auto emb = Embedding::draw(1'000'000, 2, 3);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(1'000'000, 2);
  basis(10, 0) = 1.0;
  basis(999'999, 1) = 1.0;
  EXPECT_TRUE(subspace_rank_check(emb, basis));
  EXPECT_EQ(emb.rows_generated(), 2u);
}
