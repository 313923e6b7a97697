#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fqmps/core/tensor.hpp"

namespace fqmps {

struct LanczosOptions {
  double tol = 1e-10;
  int max_iter = 400;    // total matrix-vector products
  int krylov_dim = 40;   // basis size before an explicit restart
  std::uint64_t seed = 0x5eed;
};

template <Scalar T>
struct LanczosResult {
  double eigenvalue = 0.0;
  Vec<T> eigenvector;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

template <Scalar T>
Vec<T> random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec<T> v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if constexpr (is_complex_v<T>) {
      const double re = g(rng);
      v(i) = T(re, g(rng));
    } else {
      v(i) = g(rng);
    }
  }
  return v;
}

// Two passes of classical Gram-Schmidt against the stored basis.
template <Scalar T>
void orthogonalize(Vec<T>& w, const std::vector<Vec<T>>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) w -= b * b.dot(w);
  }
}

}  // namespace detail

/// Smallest eigenpair of a Hermitian operator given only through `apply`.
///
/// Runs Lanczos with full reorthogonalization and explicit restarts from the
/// current Ritz vector. Convergence means ||A v - theta v|| <= tol * |A|_est,
/// where |A|_est is the largest Ritz value magnitude seen so far. An invariant
/// Krylov space is continued with an orthogonalized random vector so the
/// result is not confined to the symmetry sector of `v0`. Non-convergence is
/// reported through `converged`, not thrown.
template <Scalar T, class Apply>
LanczosResult<T> lanczos_min(Apply&& apply, const Vec<T>& v0, const LanczosOptions& opt = {}) {
  const Eigen::Index n = v0.size();
  const double v0norm = v0.norm();
  if (n == 0 || v0norm == 0.0) throw DomainError("lanczos_min: start vector must be nonzero");
  std::mt19937_64 rng(opt.seed);
  LanczosResult<T> best;
  Vec<T> start = v0 / v0norm;
  double anorm = 0.0;
  int used = 0;
  while (true) {
    std::vector<Vec<T>> basis;
    std::vector<double> alpha, beta;
    basis.push_back(start);
    Vec<T> ritz_vec;
    double theta = 0.0, resid = 0.0;
    int mmax = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, n));
    for (int j = 0; j < mmax; ++j) {
      Vec<T> w = apply(basis[j]);
      ++used;
      const double a = real_of(basis[j].dot(w));
      alpha.push_back(a);
      w -= a * basis[j];
      if (j > 0) w -= beta[j - 1] * basis[j - 1];
      detail::orthogonalize(w, basis);
      double b = w.norm();

      const int m = j + 1;
      Eigen::MatrixXd tm = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) tm(i, i) = alpha[i];
      for (int i = 0; i + 1 < m; ++i) tm(i, i + 1) = tm(i + 1, i) = beta[i];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tm);
      theta = es.eigenvalues()(0);
      anorm = std::max({anorm, std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(m - 1))});
      const Eigen::VectorXd y = es.eigenvectors().col(0);
      resid = b * std::abs(y(m - 1));
      const double scale = anorm > 0.0 ? anorm : 1.0;
      if (b <= 1e-13 * scale && m < n && used < opt.max_iter) {
        // Invariant subspace: continue with a fresh direction.
        Vec<T> r = detail::random_vector<T>(n, rng);
        detail::orthogonalize(r, basis);
        const double rn = r.norm();
        if (rn > 1e-12) {
          basis.push_back(r / rn);
          beta.push_back(0.0);
          if (m == mmax) ++mmax;
          continue;
        }
      }
      const bool done = resid <= opt.tol * scale;
      const bool exhausted = (m == n) || used >= opt.max_iter || m == mmax;
      if (done || exhausted) {
        ritz_vec = Vec<T>::Zero(n);
        for (int i = 0; i < m; ++i) ritz_vec += y(i) * basis[i];
        ritz_vec.normalize();
      }
      if (done || m == n) {
        best = {theta, ritz_vec, resid, used, true};
        return best;
      }
      if (used >= opt.max_iter) {
        best = {theta, ritz_vec, resid, used, false};
        return best;
      }
      if (m == mmax) break;
      beta.push_back(b);
      basis.push_back(w / b);
    }
    start = ritz_vec;
    best = {theta, ritz_vec, resid, used, false};
  }
}

struct ExpvOptions {
  double tol = 1e-10;
  int max_dim = 60;
};

struct ExpvInfo {
  int krylov_dim = 0;
  double error_estimate = 0.0;
};

/// exp(prefactor * A) v for Hermitian A via a Lanczos basis grown until the
/// a-posteriori error estimate drops below tol * ||v||.
template <Scalar T, class Apply>
Vec<T> krylov_expv(Apply&& apply, const Vec<T>& v, T prefactor, const ExpvOptions& opt = {},
                   ExpvInfo* info = nullptr) {
  const Eigen::Index n = v.size();
  const double vnorm = v.norm();
  if (n == 0 || vnorm == 0.0) throw DomainError("krylov_expv: vector must be nonzero");
  using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<Vec<T>> basis{v / vnorm};
  std::vector<double> alpha, beta;
  const int mmax = static_cast<int>(std::min<Eigen::Index>(opt.max_dim, n));
  double err = 0.0;
  for (int j = 0; j < mmax; ++j) {
    Vec<T> w = apply(basis[j]);
    const double a = real_of(basis[j].dot(w));
    alpha.push_back(a);
    w -= a * basis[j];
    if (j > 0) w -= beta[j - 1] * basis[j - 1];
    detail::orthogonalize(w, basis);
    const double b = w.norm();
    const int m = j + 1;
    Eigen::MatrixXd tm = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) tm(i, i) = alpha[i];
    for (int i = 0; i + 1 < m; ++i) tm(i, i + 1) = tm(i + 1, i) = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tm);
    const CMat evec = es.eigenvectors().template cast<cplx>();
    Eigen::VectorXcd phase(m);
    for (int i = 0; i < m; ++i) phase(i) = std::exp(cplx(prefactor) * es.eigenvalues()(i));
    const Eigen::VectorXcd y = evec * phase.asDiagonal() * evec.row(0).transpose();
    const double scale = std::max(1.0, std::abs(alpha[0]));
    const bool breakdown = b <= 1e-14 * scale;
    err = breakdown ? 0.0 : b * std::abs(y(m - 1));
    if (breakdown || err <= opt.tol || m == n) {
      Vec<T> out = Vec<T>::Zero(n);
      for (int i = 0; i < m; ++i) {
        if constexpr (is_complex_v<T>) {
          out += y(i) * basis[i];
        } else {
          out += y(i).real() * basis[i];
        }
      }
      if (info) *info = {m, err};
      return vnorm * out;
    }
    beta.push_back(b);
    basis.push_back(w / b);
  }
  throw NumericError("krylov_expv: no convergence at Krylov dimension " + std::to_string(mmax) +
                         " (error estimate " + std::to_string(err) + ")",
                     err);
}

}  // namespace fqmps
