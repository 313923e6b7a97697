#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "fqmps/core/linalg.hpp"
#include "fqmps/mps/mpo.hpp"
#include "fqmps/oracle/constrained_ed.hpp"
#include "fqmps/oracle/dense.hpp"

// Operators of the q-space chain built from explicit Kronecker products and
// enumeration, independent of the MPO builders.
namespace fqmps::oracle {

inline std::size_t q_space_dim(int N, int q) {
  std::size_t d = 1;
  for (int n = 0; n < N; ++n) d *= std::size_t(q);
  return d;
}

/// q-tuple (1-based values) of a lexicographic basis index.
inline std::vector<int> q_tuple(std::size_t idx, int N, int q) {
  std::vector<int> out(static_cast<std::size_t>(N));
  for (int n = N - 1; n >= 0; --n) {
    out[std::size_t(n)] = int(idx % std::size_t(q)) + 1;
    idx /= std::size_t(q);
  }
  return out;
}

inline std::size_t q_index(const std::vector<int>& qs, int q) {
  std::size_t idx = 0;
  for (int v : qs) idx = idx * std::size_t(q) + std::size_t(v - 1);
  return idx;
}

inline Eigen::MatrixXd local_projector(int q, int m) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(q, q);
  if (m <= q) p(m - 1, m - 1) = 1.0;
  return p;
}

/// (T)_{ab} = delta_{b, a+1}: lowers q by one.
inline Eigen::MatrixXd local_lowering(int q) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i + 1 < q; ++i) t(i, i + 1) = 1.0;
  return t;
}

/// `op` on site n (0-based), identity elsewhere.
inline Eigen::MatrixXd on_site(int N, int q, int n, const Eigen::MatrixXd& op) {
  std::vector<Eigen::MatrixXd> f(std::size_t(N), Eigen::MatrixXd::Identity(q, q));
  f[std::size_t(n)] = op;
  return kron_chain(f);
}

/// V * sum_{n >= 2} P_1 on site n.
inline Eigen::MatrixXd kron_hv(int N, int q, double V) {
  const auto dim = Eigen::Index(q_space_dim(N, q));
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int n = 1; n < N; ++n) h += V * on_site(N, q, n, local_projector(q, 1));
  return h;
}

/// -t sum_n (T_n^+ T_{n+1} + T_n T_{n+1}^+).
inline Eigen::MatrixXd kron_pair_hops(int N, int q, double t) {
  const Eigen::MatrixXd T = local_lowering(q), Td = T.transpose();
  const auto dim = Eigen::Index(q_space_dim(N, q));
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int n = 0; n + 1 < N; ++n) {
    std::vector<Eigen::MatrixXd> a(std::size_t(N), Eigen::MatrixXd::Identity(q, q)), b = a;
    a[std::size_t(n)] = Td;
    a[std::size_t(n + 1)] = T;
    b[std::size_t(n)] = T;
    b[std::size_t(n + 1)] = Td;
    h -= t * (kron_chain(a) + kron_chain(b));
  }
  return h;
}

/// -t (T_N + T_N^+): the last particle hopping alone.
inline Eigen::MatrixXd kron_last_hop(int N, int q, double t) {
  const Eigen::MatrixXd T = local_lowering(q);
  return -t * on_site(N, q, N - 1, T + T.transpose());
}

/// Diagonal 0/1 matrix keeping the q-tuples accepted by `keep`.
template <class Pred>
Eigen::MatrixXd enum_projector(int N, int q, Pred keep) {
  const std::size_t dim = q_space_dim(N, q);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(Eigen::Index(dim), Eigen::Index(dim));
  for (std::size_t i = 0; i < dim; ++i)
    if (keep(q_tuple(i, N, q))) p(Eigen::Index(i), Eigen::Index(i)) = 1.0;
  return p;
}

/// Projector onto sum_n q_n <= L.
inline Eigen::MatrixXd enum_constraint_projector(int L, int N, int q) {
  return enum_projector(N, q, [&](const std::vector<int>& qs) {
    int s = 0;
    for (int v : qs) s += v;
    return s <= L;
  });
}

/// <a|W|b> for basis product states given as q-tuples.
template <Scalar T>
T mpo_element(const Mpo<T>& op, const std::vector<int>& a, const std::vector<int>& b) {
  RowMat<T> acc = RowMat<T>::Ones(1, 1);
  for (std::size_t n = 0; n < op.length(); ++n) {
    const auto& w = op.sites[n];
    RowMat<T> m(Eigen::Index(w.extent(0)), Eigen::Index(w.extent(3)));
    for (std::size_t l = 0; l < w.extent(0); ++l)
      for (std::size_t r = 0; r < w.extent(3); ++r)
        m(Eigen::Index(l), Eigen::Index(r)) = w({l, std::size_t(a[n] - 1), std::size_t(b[n] - 1), r});
    acc = acc * m;
  }
  return acc(0, 0);
}

/// The MPO restricted to the ordered sector, in the basis order of `b`.
/// Requires q_max >= L - N + 1 so every configuration is representable.
inline Eigen::MatrixXd mpo_on_sector(const Mpo<double>& op, const ConstrainedBasis& b) {
  const auto n = Eigen::Index(b.size());
  Eigen::MatrixXd h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto qi = b.distances(std::size_t(i));
    for (Eigen::Index j = 0; j < n; ++j) h(i, j) = mpo_element(op, qi, b.distances(std::size_t(j)));
  }
  return h;
}

}  // namespace fqmps::oracle
