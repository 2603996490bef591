#include "oracles.hpp"

#include "tenips/tensor.hpp"

#include <gtest/gtest.h>

using namespace tenips;

namespace {

TensorXd iota(const Shape& s) {
  TensorXd t(s);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i + 1);
  return t;
}

Shape random_shape(Rng& rng, Index min_order, Index max_order, Index max_dim) {
  const Index order = min_order + static_cast<Index>(rng.unit() * static_cast<double>(max_order - min_order + 1));
  std::vector<Index> dims;
  for (Index n = 0; n < order; ++n) dims.push_back(1 + static_cast<Index>(rng.unit() * static_cast<double>(max_dim)));
  return Shape(dims);
}

std::vector<std::vector<Index>> strict_subsets(Index order) {
  std::vector<std::vector<Index>> out;
  for (unsigned mask = 1; mask + 1 < (1u << order); ++mask) {
    std::vector<Index> s;
    for (Index m = 0; m < order; ++m)
      if (mask & (1u << m)) s.push_back(m);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(Shape, RejectsEmptyAndNonPositive) {
  EXPECT_THROW(Shape(std::vector<Index>{}), std::invalid_argument);
  EXPECT_THROW(Shape({3, 0, 2}), std::invalid_argument);
  EXPECT_THROW(Shape({-1}), std::invalid_argument);
}

TEST(Shape, CountsAndOverflow) {
  const Shape s{2, 3, 4};
  EXPECT_EQ(s.size(), 24);
  EXPECT_EQ(s.size_before(1), 2);
  EXPECT_EQ(s.size_after(1), 4);
  EXPECT_EQ(s.to_string(), "2x3x4");
  EXPECT_THROW(Shape({Index(1) << 40, Index(1) << 40}), std::overflow_error);
}

TEST(Shape, LinearIndexMatchesOracle) {
  const Shape s{3, 4, 2, 5};
  for (Index lin = 0; lin < s.size(); ++lin) {
    const auto idx = oracle::unravel(s, lin);
    EXPECT_EQ(linear_index(s, idx), lin);
    EXPECT_EQ(multi_index(s, lin), idx);
  }
  const std::vector<Index> bad{0, 4, 0, 0};
  EXPECT_THROW(linear_index(s, bad), std::out_of_range);
  const std::vector<Index> short_idx{0, 0};
  EXPECT_THROW(linear_index(s, short_idx), std::invalid_argument);
}

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(TensorXd(Shape{2, 2}, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  TensorXd a(Shape{2, 2}), b(Shape{2, 3});
  EXPECT_THROW(a += b, std::invalid_argument);
}

TEST(Mask, RejectsNonBinaryAndAgreesWithSetView) {
  EXPECT_THROW(Mask(Shape{2}, {0, 2}), std::invalid_argument);
  Mask m(Shape{2, 3});
  m.set(1, true);
  m.set(4, true);
  EXPECT_EQ(m.observed_count(), 2);
  EXPECT_EQ(m.observed_indices(), (std::vector<Index>{1, 4}));
  for (Index i = 0; i < m.size(); ++i) EXPECT_EQ(m.as_tensor()[i], m[i] ? 1.0 : 0.0);
}

TEST(Unfold, TwoByTwoByTwoModeZero) {
  const TensorXd t = iota(Shape{2, 2, 2});
  Eigen::MatrixXd expected(2, 4);
  expected << 1, 3, 5, 7, 2, 4, 6, 8;
  EXPECT_EQ(unfold(t, 0), expected);
}

TEST(Unfold, MatchesFiberOracleOnEveryMode) {
  const TensorXd t = iota(Shape{3, 2, 4, 2});
  for (Index n = 0; n < 4; ++n) EXPECT_EQ(unfold(t, n), oracle::unfold(t, {n})) << "mode " << n;
}

TEST(Unfold, MatrixIsItsOwnModeZeroUnfolding) {
  Rng rng(3);
  const Eigen::MatrixXd m = rng.normal_matrix(4, 6);
  const TensorXd t(Shape{4, 6}, Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()));
  EXPECT_EQ(unfold(t, 0), m);
  EXPECT_EQ(unfold(t, 1), m.transpose());
}

TEST(Unfold, ModeOutOfRange) {
  const TensorXd t(Shape{2, 2});
  EXPECT_THROW(unfold(t, 2), std::out_of_range);
  EXPECT_THROW(unfold(t, -1), std::out_of_range);
  EXPECT_THROW(fold(Eigen::MatrixXd(3, 2), 0, Shape{2, 2}), std::invalid_argument);
}

TEST(SUnfold, SingleModeEqualsModeUnfolding) {
  const TensorXd t = iota(Shape{3, 4, 5});
  for (Index n = 0; n < 3; ++n) EXPECT_EQ(unfold(t, UnfoldingSpec(t.shape(), {n})), unfold(t, n));
}

TEST(SUnfold, IndexMapOnTwoThreeFourFive) {
  const Shape s{2, 3, 4, 5};
  const TensorXd t = iota(s);
  const UnfoldingSpec spec(s, {0, 2});
  const Eigen::MatrixXd m = unfold(t, spec);
  ASSERT_EQ(m.rows(), 8);
  ASSERT_EQ(m.cols(), 15);
  for (Index lin = 0; lin < s.size(); ++lin) {
    const auto idx = oracle::unravel(s, lin);
    const Index row = idx[0] + 2 * idx[2];
    const Index col = idx[1] + 3 * idx[3];
    EXPECT_EQ(m(row, col), t[lin]);
  }
}

TEST(SUnfold, SpecValidation) {
  const Shape s{2, 3, 4};
  EXPECT_THROW(UnfoldingSpec(s, {}), std::invalid_argument);
  EXPECT_THROW(UnfoldingSpec(s, {0, 1, 2}), std::invalid_argument);
  EXPECT_THROW(UnfoldingSpec(s, {1, 1}), std::invalid_argument);
  EXPECT_THROW(UnfoldingSpec(s, {3}), std::out_of_range);
  const UnfoldingSpec spec(s, {2, 0});
  EXPECT_EQ(spec.row_modes(), (std::vector<Index>{0, 2}));
  EXPECT_EQ(spec.col_modes(), (std::vector<Index>{1}));
  EXPECT_EQ(spec.row_dim() * spec.col_dim(), s.size());
  EXPECT_THROW(unfold(TensorXd(Shape{2, 3, 5}), spec), std::invalid_argument);
}

TEST(SquareSet, Examples) {
  const UnfoldingSpec a = square_set(Shape{8, 8, 8, 8});
  EXPECT_EQ(a.row_modes(), (std::vector<Index>{0, 1}));
  EXPECT_EQ(a.row_dim(), 64);
  const UnfoldingSpec b = square_set(Shape{2200, 1080, 1920});
  EXPECT_EQ(b.row_modes(), (std::vector<Index>{0}));
  EXPECT_EQ(b.row_dim(), 2200);
  EXPECT_EQ(b.col_dim(), 2073600);
  const UnfoldingSpec c = square_set(Shape{4, 2, 2});
  EXPECT_EQ(c.row_modes(), (std::vector<Index>{0}));
  EXPECT_EQ(c.row_dim(), 4);
  EXPECT_EQ(c.col_dim(), 4);
  EXPECT_THROW(square_set(Shape{7}), std::invalid_argument);
}

TEST(SquareSet, MinimalOverExhaustiveEnumeration) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Shape s = random_shape(rng, 2, 6, 9);
    const UnfoldingSpec best = square_set(s);
    auto gap = [&](const std::vector<Index>& rows) {
      Index r = 1;
      for (Index m : rows) r *= s[m];
      return std::abs(r - s.size() / r);
    };
    const Index g = gap(best.row_modes());
    for (const auto& subset : strict_subsets(s.order())) {
      ASSERT_LE(g, gap(subset)) << s.to_string();
      if (gap(subset) == g) {
        // Tie-break: no smaller subset, and lexicographically first among equal sizes.
        ASSERT_GE(subset.size(), best.row_modes().size());
        if (subset.size() == best.row_modes().size()) {
          ASSERT_LE(best.row_modes(), subset);
        }
      }
    }
  }
}

TEST(Fold, RoundTripsAreBitExact) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape s = random_shape(rng, 2, 5, 6);
    const TensorXd t = oracle::random_tensor(s, rng);
    for (Index n = 0; n < s.order(); ++n) ASSERT_EQ(fold(unfold(t, n), n, s), t);
    for (const auto& subset : strict_subsets(s.order())) {
      const UnfoldingSpec spec(s, subset);
      const Eigen::MatrixXd m = unfold(t, spec);
      ASSERT_EQ(m, oracle::unfold(t, subset));
      ASSERT_EQ(fold(m, spec, s), t);
    }
  }
}

TEST(PermuteModes, MatchesIndexOracleAndRejectsBadPermutations) {
  Rng rng(9);
  const Shape s{2, 3, 4};
  const TensorXd t = oracle::random_tensor(s, rng);
  const std::vector<Index> perm{2, 0, 1};
  const TensorXd p = permute_modes(t, perm);
  EXPECT_EQ(p.shape(), (Shape{4, 2, 3}));
  for (Index lin = 0; lin < t.size(); ++lin) {
    const auto i = oracle::unravel(s, lin);
    EXPECT_EQ(p({i[2], i[0], i[1]}), t[lin]);
  }
  const std::vector<Index> dup{0, 0, 1};
  EXPECT_THROW(permute_modes(t, dup), std::invalid_argument);
}

TEST(ModeProduct, IdentityLeavesTensorUnchanged) {
  Rng rng(1);
  const TensorXd t = oracle::random_tensor(Shape{3, 4, 2}, rng);
  for (Index n = 0; n < 3; ++n) EXPECT_EQ(mode_product(t, Eigen::MatrixXd::Identity(t.shape()[n], t.shape()[n]), n), t);
}

TEST(ModeProduct, MatchesDefiningSum) {
  Rng rng(2);
  const TensorXd t = oracle::random_tensor(Shape{3, 3, 3}, rng);
  const Eigen::MatrixXd u = rng.normal_matrix(2, 3);
  for (Index n = 0; n < 3; ++n) {
    const TensorXd got = mode_product(t, u, n);
    const TensorXd want = oracle::mode_product(t, u, n);
    EXPECT_LT(oracle::rel_diff(got.data(), want.data()), 1e-14);
  }
}

TEST(ModeProduct, UnfoldedFormOnRandomShapes) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Shape s = random_shape(rng, 2, 5, 5);
    const TensorXd t = oracle::random_tensor(s, rng);
    for (Index n = 0; n < s.order(); ++n) {
      const Eigen::MatrixXd u = rng.normal_matrix(1 + trial % 4, s[n]);
      const TensorXd y = mode_product(t, u, n);
      ASSERT_LT(oracle::rel_diff(unfold(y, n), u * unfold(t, n)), 1e-12);
    }
  }
}

TEST(ModeProduct, DistinctModesCommute) {
  Rng rng(6);
  const Shape s{4, 5, 3};
  const TensorXd t = oracle::random_tensor(s, rng);
  std::vector<Eigen::MatrixXd> proj;
  for (Index n = 0; n < 3; ++n) {
    const Eigen::MatrixXd q = oracle::orthonormal(s[n], 2, rng);
    proj.push_back(q * q.transpose());
  }
  const TensorXd a = mode_product(mode_product(mode_product(t, proj[0], 0), proj[1], 1), proj[2], 2);
  const TensorXd b = mode_product(mode_product(mode_product(t, proj[2], 2), proj[0], 0), proj[1], 1);
  EXPECT_LT(oracle::rel_diff(a.data(), b.data()), 1e-13);
}

TEST(ModeProduct, DimensionMismatch) {
  const TensorXd t(Shape{3, 4});
  EXPECT_THROW(mode_product(t, Eigen::MatrixXd::Zero(2, 4), 0), std::invalid_argument);
}

TEST(Hadamard, OnesZeroMaskAndLoopOracle) {
  Rng rng(8);
  const Shape s{3, 2, 4};
  const TensorXd a = oracle::random_tensor(s, rng);
  const TensorXd b = oracle::random_tensor(s, rng);
  EXPECT_EQ(hadamard(a, TensorXd::Constant(s, 1.0)), a);
  EXPECT_EQ(hadamard(a, Mask(s)), TensorXd(s));
  const TensorXd c = hadamard(a, b);
  for (Index i = 0; i < s.size(); ++i) EXPECT_EQ(c[i], a[i] * b[i]);
  EXPECT_THROW(hadamard(a, TensorXd(Shape{3, 2})), std::invalid_argument);
}

TEST(Norms, IdentityAndRankOne) {
  EXPECT_NEAR(nuclear_norm(Eigen::MatrixXd::Identity(5, 5)), 5.0, 1e-14);
  EXPECT_NEAR(spectral_norm(Eigen::MatrixXd::Identity(5, 5)), 1.0, 1e-14);
  Rng rng(10);
  const Eigen::VectorXd u = rng.normal_matrix(4, 1).col(0).normalized();
  const Eigen::VectorXd v = rng.normal_matrix(6, 1).col(0).normalized();
  const Eigen::MatrixXd m = u * v.transpose();
  EXPECT_NEAR(nuclear_norm(m), 1.0, 1e-12);
  EXPECT_NEAR(spectral_norm(m), 1.0, 1e-12);
}

TEST(Norms, AgreeWithGramEigenvalues) {
  Rng rng(12);
  const Eigen::MatrixXd m = rng.normal_matrix(5, 7);
  const Eigen::VectorXd s = singular_values(m);
  const Eigen::VectorXd g = oracle::gram_singular_values(m);
  ASSERT_EQ(s.size(), g.size());
  for (Index i = 0; i + 1 < s.size(); ++i) EXPECT_GE(s[i], s[i + 1]);
  EXPECT_LT((s - g).norm(), 1e-10);
  EXPECT_NEAR(nuclear_norm(m), g.sum(), 1e-10);
  EXPECT_NEAR(spectral_norm(m), g[0], 1e-10);
}

TEST(Norms, FrobeniusMaxAbsAndNaNRejection) {
  TensorXd t(Shape{2, 2});
  t[0] = 3;
  t[3] = -4;
  EXPECT_DOUBLE_EQ(frobenius_norm(t), 5.0);
  EXPECT_DOUBLE_EQ(max_abs(t), 4.0);
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(frobenius_norm(t), std::domain_error);
  EXPECT_THROW(max_abs(t), std::domain_error);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
  m(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(nuclear_norm(m), std::domain_error);
}

TEST(Norms, NumericalRankThreshold) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
  m(0, 0) = 1;
  m(1, 1) = 1e-6;
  m(2, 2) = 1e-10;
  EXPECT_EQ(numerical_rank(m), 2);
  EXPECT_EQ(numerical_rank(Eigen::MatrixXd::Zero(3, 3)), 0);
}

TEST(Tensor, TemplatedOnFloat) {
  Tensor<float> t(Shape{2, 3});
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  EXPECT_EQ(fold(unfold(t, 1), 1, t.shape()), t);
}
