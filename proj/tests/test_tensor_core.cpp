#include <gtest/gtest.h>

#include <random>

#include "fqmps/core/krylov.hpp"
#include "fqmps/core/linalg.hpp"
#include "fqmps/core/tensor.hpp"

using namespace fqmps;

namespace {

template <Scalar T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) {
    if constexpr (is_complex_v<T>) {
      const double re = g(rng);
      v = T(re, g(rng));
    } else {
      v = g(rng);
    }
  }
  return t;
}

// Dense exp(z A) v via eigendecomposition of the Hermitian matrix A.
Eigen::VectorXcd dense_expv(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& v, cplx z) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  Eigen::VectorXcd ph(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) ph(i) = std::exp(z * es.eigenvalues()(i));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint() * v;
}

}  // namespace

TEST(Contract, IdentityTimesVector) {
  auto id = Tensor<double>::identity(2);
  Tensor<double> v({2}, {3.0, -4.0});
  auto r = contract(id, v, {{1, 0}});
  EXPECT_EQ(r.shape(), Shape({2}));
  EXPECT_EQ(r({0}), 3.0);
  EXPECT_EQ(r({1}), -4.0);
}

TEST(Contract, NoAxesGivesOuterProduct) {
  Tensor<double> u({3}, {1, 2, 3}), v({2}, {5, 7});
  auto r = contract(u, v, {});
  ASSERT_EQ(r.shape(), Shape({3, 2}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(r({i, j}), u({i}) * v({j}));
}

TEST(Contract, MatchesNaiveTripleLoop) {
  auto a = random_tensor<cplx>({3, 4}, 1);
  auto b = random_tensor<cplx>({4, 5}, 2);
  auto r = contract(a, b, {{1, 0}});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 5; ++k) {
      cplx s = 0;
      for (std::size_t j = 0; j < 4; ++j) s += a({i, j}) * b({j, k});
      EXPECT_LT(std::abs(r({i, k}) - s), 1e-12);
    }
}

TEST(Contract, ExtentMismatchThrows) {
  Tensor<double> a({2, 3}), b({4, 2});
  EXPECT_THROW(contract(a, b, {{1, 0}}), DimensionError);
}

TEST(Contract, BilinearAndAssociative) {
  auto a = random_tensor<cplx>({2, 3, 4}, 3);
  auto b = random_tensor<cplx>({4, 5}, 4);
  auto c = random_tensor<cplx>({5, 2}, 5);
  const cplx alpha(0.3, -1.7);
  auto lhs = contract(alpha * a, b, {{2, 0}});
  auto rhs = alpha * contract(a, b, {{2, 0}});
  EXPECT_LT((lhs - rhs).max_abs(), 1e-12 * rhs.max_abs());
  auto ab_c = contract(contract(a, b, {{2, 0}}), c, {{2, 0}});
  auto a_bc = contract(a, contract(b, c, {{1, 0}}), {{2, 0}});
  EXPECT_LT((ab_c - a_bc).max_abs(), 1e-12 * ab_c.max_abs());
}

TEST(Tensor, PermuteRoundTrip) {
  auto a = random_tensor<double>({2, 3, 4}, 6);
  auto p = a.permuted({2, 0, 1});
  EXPECT_EQ(p.shape(), Shape({4, 2, 3}));
  EXPECT_EQ(p({3, 1, 2}), a({1, 2, 3}));
  EXPECT_EQ(p.permuted({1, 2, 0}), a);
}

TEST(Tensor, RejectsZeroExtentAndBadFill) {
  EXPECT_THROW(Tensor<double>({2, 0}), DimensionError);
  EXPECT_THROW(Tensor<double>({2, 2}, {1.0, 2.0}), DimensionError);
}

TEST(SvdSplit, RankOne) {
  Tensor<double> t({3, 2});
  const double u[3] = {1, 2, 2}, v[2] = {3, 4};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) t({i, j}) = u[i] * v[j];
  auto f = svd_split(t, {0});
  ASSERT_EQ(f.s.size(), 1);
  EXPECT_NEAR(f.s(0), 3.0 * 5.0, 1e-12);
  EXPECT_LT(f.discarded_weight, 1e-28);
}

TEST(SvdSplit, IdentityTruncatedToTwo) {
  auto f = svd_split(Tensor<double>::identity(4), {0}, TruncationPolicy::bond(2, 0.0));
  ASSERT_EQ(f.s.size(), 2);
  EXPECT_NEAR(f.s(0), 1.0, 1e-14);
  EXPECT_NEAR(f.s(1), 1.0, 1e-14);
  EXPECT_NEAR(f.discarded_weight, 0.5, 1e-14);
}

TEST(SvdSplit, RandomReconstructsExactly) {
  auto t = random_tensor<cplx>({6, 6}, 7);
  auto f = svd_split(t, {0}, TruncationPolicy::exact());
  const RowMat<cplx> rec = f.u.matrix(1) * f.s.cast<cplx>().asDiagonal() * f.v.matrix(1);
  EXPECT_LT((rec - t.matrix(1)).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index i = 1; i < f.s.size(); ++i) EXPECT_LE(f.s(i), f.s(i - 1));
  const RowMat<cplx> uu = f.u.matrix(1).adjoint() * f.u.matrix(1);
  EXPECT_LT((uu - RowMat<cplx>::Identity(uu.rows(), uu.cols())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SvdSplit, MultiAxisGroupingRecombines) {
  auto t = random_tensor<double>({2, 3, 4}, 8);
  auto f = svd_split(t, {0, 2}, TruncationPolicy::exact());
  EXPECT_EQ(f.u.shape(), Shape({2, 4, f.u.extent(2)}));
  auto us = f.u;
  for (std::size_t k = 0; k < us.extent(2); ++k)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 4; ++j) us({i, j, k}) *= f.s(Eigen::Index(k));
  auto rec = contract(us, f.v, {{2, 0}}).permuted({0, 2, 1});
  EXPECT_LT((rec - t).max_abs(), 1e-12);
}

TEST(SvdSplit, InvalidAxesThrow) {
  auto t = random_tensor<double>({2, 3}, 9);
  EXPECT_THROW(svd_split(t, {}), DimensionError);
  EXPECT_THROW(svd_split(t, {0, 1}), DimensionError);
}

TEST(QrSplit, OrthogonalInputGivesIdentityR) {
  const double c = std::cos(0.3), s = std::sin(0.3);
  Tensor<double> t({2, 2}, {c, -s, s, c});
  auto f = qr_split(t, {0});
  EXPECT_LT((f.q - t).max_abs(), 1e-14);
  EXPECT_LT((f.r - Tensor<double>::identity(2)).max_abs(), 1e-14);
}

TEST(QrSplit, RankDeficientReconstructs) {
  Tensor<double> t({3, 2}, {1, 2, 2, 4, 3, 6});
  auto f = qr_split(t, {0});
  const RowMat<double> rec = f.q.matrix(1) * f.r.matrix(1);
  EXPECT_LT((rec - t.matrix(1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QrSplit, RandomTallIsOrthonormal) {
  auto t = random_tensor<cplx>({8, 3}, 10);
  auto f = qr_split(t, {0});
  const RowMat<cplx> qq = f.q.matrix(1).adjoint() * f.q.matrix(1);
  EXPECT_LT((qq - RowMat<cplx>::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  const RowMat<cplx> rec = f.q.matrix(1) * f.r.matrix(1);
  EXPECT_LT((rec - t.matrix(1)).cwiseAbs().maxCoeff(), 1e-12 * t.max_abs());
}

TEST(Lanczos, DiagonalThree) {
  Eigen::Vector3d d(1, 2, 3);
  auto apply = [&](const Vec<double>& v) -> Vec<double> { return d.cwiseProduct(v); };
  auto r = lanczos_min<double>(apply, Vec<double>::Ones(3) / std::sqrt(3.0));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.eigenvalue, 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.eigenvector(0)), 1.0, 1e-10);
}

TEST(Lanczos, TwoByTwoHopping) {
  Eigen::Matrix2d a;
  a << 0, -1, -1, 0;
  auto apply = [&](const Vec<double>& v) -> Vec<double> { return a * v; };
  Vec<double> v0(2);
  v0 << 1.0, 0.3;
  auto r = lanczos_min<double>(apply, v0);
  EXPECT_NEAR(r.eigenvalue, -1.0, 1e-12);
}

TEST(Lanczos, InvariantStartVectorStillFindsGroundState) {
  Eigen::Vector3d d(1, 2, 3);
  auto apply = [&](const Vec<double>& v) -> Vec<double> { return d.cwiseProduct(v); };
  Vec<double> v0 = Vec<double>::Zero(3);
  v0(1) = 1.0;
  auto r = lanczos_min<double>(apply, v0);
  EXPECT_NEAR(r.eigenvalue, 1.0, 1e-12);
}

TEST(Lanczos, BelowRayleighQuotientOfStart) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Random(30, 30);
    a = (a + a.adjoint()).eval();
    Vec<cplx> v0 = Vec<cplx>::Random(30);
    auto apply = [&](const Vec<cplx>& v) -> Vec<cplx> { return a * v; };
    auto r = lanczos_min<cplx>(apply, v0);
    const double rq = (v0.dot(a * v0)).real() / v0.squaredNorm();
    EXPECT_LE(r.eigenvalue, rq + 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
    EXPECT_NEAR(r.eigenvalue, es.eigenvalues()(0), 1e-9);
  }
}

TEST(Lanczos, ZeroStartVectorThrows) {
  auto apply = [](const Vec<double>& v) -> Vec<double> { return v; };
  EXPECT_THROW(lanczos_min<double>(apply, Vec<double>::Zero(3)), DomainError);
}

TEST(KrylovExpv, ZeroOperatorIsIdentity) {
  Vec<cplx> v(3);
  v << cplx(1, 2), cplx(0.5, 0), cplx(-1, 1);
  auto apply = [](const Vec<cplx>& x) -> Vec<cplx> { return Vec<cplx>::Zero(x.size()); };
  auto r = krylov_expv<cplx>(apply, v, cplx(0, -1.0));
  EXPECT_LT((r - v).norm(), 1e-15);
}

TEST(KrylovExpv, DiagonalPhase) {
  Eigen::Vector2cd d(1.0, -1.0);
  auto apply = [&](const Vec<cplx>& x) -> Vec<cplx> { return d.cwiseProduct(x); };
  Vec<cplx> v(2);
  v << 1.0, 0.0;
  auto r = krylov_expv<cplx>(apply, v, cplx(0, -M_PI));
  EXPECT_LT(std::abs(r(0) - cplx(-1, 0)), 1e-10);
  EXPECT_LT(std::abs(r(1)), 1e-10);
}

TEST(KrylovExpv, MatchesDenseExponentialAndPreservesNorm) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Random(10, 10);
  a = (a + a.adjoint()).eval();
  Vec<cplx> v = Vec<cplx>::Random(10);
  auto apply = [&](const Vec<cplx>& x) -> Vec<cplx> { return a * x; };
  for (double dt : {0.02, 0.5}) {
    const cplx z(0, -dt);
    auto r = krylov_expv<cplx>(apply, v, z);
    EXPECT_LT((r - dense_expv(a, v, z)).norm(), 1e-10);
    EXPECT_NEAR(r.norm(), v.norm(), 1e-10);
  }
}

TEST(KrylovExpv, ReportsNonConvergence) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Random(50, 50);
  a = (100.0 * (a + a.adjoint())).eval();
  Vec<cplx> v = Vec<cplx>::Random(50);
  auto apply = [&](const Vec<cplx>& x) -> Vec<cplx> { return a * x; };
  ExpvOptions opt;
  opt.max_dim = 4;
  try {
    krylov_expv<cplx>(apply, v, cplx(0, -1.0), opt);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_GT(e.residual(), opt.tol);
  }
}
