#pragma once

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "fqmps/core/tensor.hpp"

namespace fqmps {

/// Singular values below this fraction of the largest one are exact zeros
/// for every consumer (truncation and entropies alike).
inline constexpr double kSingularFloor = 1e-14;

struct TruncationPolicy {
  std::size_t max_bond = std::numeric_limits<std::size_t>::max();
  /// Upper bound on the discarded fraction sum(s_k^2, dropped) / sum(s_k^2).
  double discard_tolerance = 1e-12;

  static TruncationPolicy exact() { return {std::numeric_limits<std::size_t>::max(), 0.0}; }
  static TruncationPolicy bond(std::size_t d, double tol = 1e-12) { return {d, tol}; }

  void validate() const {
    if (max_bond < 1) throw DomainError("TruncationPolicy: max_bond must be >= 1");
    if (!(discard_tolerance >= 0.0 && discard_tolerance < 1.0)) {
      throw DomainError("TruncationPolicy: discard_tolerance must lie in [0, 1)");
    }
  }
};

/// Number of singular values to keep, and the normalized discarded weight.
inline std::pair<std::size_t, double> truncation_rank(const Eigen::VectorXd& s,
                                                      const TruncationPolicy& policy) {
  policy.validate();
  const auto n = static_cast<std::size_t>(s.size());
  if (n == 0) return {0, 0.0};
  const double total = s.squaredNorm();
  if (total == 0.0) return {1, 0.0};
  const double floor = kSingularFloor * s(0);
  std::size_t keep = 0;
  while (keep < n && s(Eigen::Index(keep)) > floor) ++keep;
  keep = std::max<std::size_t>(keep, 1);
  keep = std::min(keep, policy.max_bond);
  // Drop the smallest values while the tail stays under the tolerance.
  double tail = 0.0;
  for (std::size_t k = keep; k < n; ++k) tail += s(Eigen::Index(k)) * s(Eigen::Index(k));
  while (keep > 1) {
    const double v = s(Eigen::Index(keep - 1));
    if ((tail + v * v) / total > policy.discard_tolerance) break;
    tail += v * v;
    --keep;
  }
  return {keep, tail / total};
}

template <Scalar T>
struct MatrixSvd {
  RowMat<T> u;          // rows x k
  Eigen::VectorXd s;    // k, non-increasing
  RowMat<T> vh;         // k x cols
  double discarded_weight = 0.0;
};

/// Truncated SVD of a matrix: m == u * diag(s) * vh up to the discarded weight.
template <Scalar T, class Derived>
MatrixSvd<T> svd_matrix(const Eigen::MatrixBase<Derived>& m, const TruncationPolicy& policy) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  const Mat a = m;
  Eigen::BDCSVD<Mat> svd;
  svd.compute(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericError("svd: factorization failed for " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " matrix");
  }
  const Eigen::VectorXd s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s(i))) throw NumericError("svd: non-finite singular value");
  }
  auto [keep, discarded] = truncation_rank(s, policy);
  const auto k = Eigen::Index(keep);
  MatrixSvd<T> out;
  out.u = svd.matrixU().leftCols(k);
  out.s = s.head(k);
  out.vh = svd.matrixV().leftCols(k).adjoint();
  out.discarded_weight = discarded;
  return out;
}

template <Scalar T>
struct SvdSplit {
  Tensor<T> u;  // left axes..., k
  Eigen::VectorXd s;
  Tensor<T> v;  // k, right axes...
  double discarded_weight = 0.0;
};

template <Scalar T>
struct QrSplit {
  Tensor<T> q;  // left axes..., k
  Tensor<T> r;  // k, right axes...
};

namespace detail {

struct AxisGrouping {
  std::vector<std::size_t> perm;
  Shape left, right;
  std::size_t rows = 1, cols = 1;
};

template <Scalar T>
AxisGrouping group_axes(const Tensor<T>& t, const std::vector<std::size_t>& left_axes) {
  std::set<std::size_t> left(left_axes.begin(), left_axes.end());
  if (left.empty() || left.size() >= t.rank() || left.size() != left_axes.size()) {
    throw DimensionError("split: left axes must be a nonempty proper subset of the tensor axes");
  }
  AxisGrouping g;
  for (auto a : left_axes) {
    if (a >= t.rank()) throw DimensionError("split: axis out of range");
    g.perm.push_back(a);
    g.left.push_back(t.extent(a));
    g.rows *= t.extent(a);
  }
  for (std::size_t a = 0; a < t.rank(); ++a) {
    if (!left.count(a)) {
      g.perm.push_back(a);
      g.right.push_back(t.extent(a));
      g.cols *= t.extent(a);
    }
  }
  return g;
}

}  // namespace detail

/// Splits `t` into U (left axes + new bond), singular values, and V (new bond
/// + remaining axes). U has orthonormal columns and V orthonormal rows.
template <Scalar T>
SvdSplit<T> svd_split(const Tensor<T>& t, const std::vector<std::size_t>& left_axes,
                      const TruncationPolicy& policy = {}) {
  auto g = detail::group_axes(t, left_axes);
  const Tensor<T> p = t.permuted(g.perm);
  auto f = svd_matrix<T>(p.matrix(g.left.size()), policy);
  const auto k = static_cast<std::size_t>(f.s.size());
  Shape us = g.left, vs{k};
  us.push_back(k);
  vs.insert(vs.end(), g.right.begin(), g.right.end());
  SvdSplit<T> out{Tensor<T>(us), f.s, Tensor<T>(vs), f.discarded_weight};
  out.u.matrix(g.left.size()) = f.u;
  out.v.matrix(1) = f.vh;
  return out;
}

template <Scalar T, class Derived>
std::pair<RowMat<T>, RowMat<T>> qr_matrix(const Eigen::MatrixBase<Derived>& m) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  const Mat a = m;
  const Eigen::Index k = std::min(a.rows(), a.cols());
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(a.rows(), k);
  Mat r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  // Gauge fix: non-negative real diagonal of R.
  for (Eigen::Index i = 0; i < k; ++i) {
    const T d = r(i, i);
    const double mag = std::abs(d);
    if (mag == 0.0) continue;
    const T phase = d / mag;
    if (phase == T(1)) continue;
    q.col(i) *= phase;
    r.row(i) *= conj_of(phase);
  }
  return {RowMat<T>(q), RowMat<T>(r)};
}

/// Householder QR with thin Q: Q (left axes + k) has orthonormal columns.
template <Scalar T>
QrSplit<T> qr_split(const Tensor<T>& t, const std::vector<std::size_t>& left_axes) {
  auto g = detail::group_axes(t, left_axes);
  const Tensor<T> p = t.permuted(g.perm);
  auto [q, r] = qr_matrix<T>(p.matrix(g.left.size()));
  const auto k = static_cast<std::size_t>(q.cols());
  Shape qs = g.left, rs{k};
  qs.push_back(k);
  rs.insert(rs.end(), g.right.begin(), g.right.end());
  QrSplit<T> out{Tensor<T>(qs), Tensor<T>(rs)};
  out.q.matrix(g.left.size()) = q;
  out.r.matrix(1) = r;
  return out;
}

/// Von Neumann entropy (natural log) of a Schmidt spectrum.
inline double entropy_from_singular_values(const Eigen::VectorXd& s) {
  if (s.size() == 0) return 0.0;
  const double smax = s.maxCoeff();
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > kSingularFloor * smax) total += s(i) * s(i);
  }
  if (total == 0.0) return 0.0;
  double ent = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) <= kSingularFloor * smax) continue;
    const double p = s(i) * s(i) / total;
    ent -= p * std::log(p);
  }
  return std::max(ent, 0.0);
}

}  // namespace fqmps
