#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fqmps/core/linalg.hpp"
#include "fqmps/mps/mpo.hpp"
#include "fqmps/mps/mps.hpp"
#include "fqmps/oracle/constrained_ed.hpp"

namespace fqmps::oracle {

/// Dense matrix of an MPO in the lexicographic basis (first site most
/// significant).
template <Scalar T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> mpo_to_dense(const Mpo<T>& op,
                                                              std::size_t cap = 4096) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  op.validate();
  double dim = 1.0;
  for (std::size_t n = 0; n < op.length(); ++n) dim *= double(op.phys_dim(n));
  if (dim > double(cap)) throw SizeError("mpo_to_dense: dimension exceeds cap");
  std::vector<Mat> acc{Mat::Ones(1, 1)};
  for (const auto& w : op.sites) {
    const std::size_t wl = w.extent(0), d = w.extent(1), wr = w.extent(3);
    const Eigen::Index m = acc.front().rows();
    std::vector<Mat> next(wr, Mat::Zero(m * Eigen::Index(d), m * Eigen::Index(d)));
    for (std::size_t a = 0; a < wl; ++a)
      for (std::size_t b = 0; b < wr; ++b)
        for (std::size_t o = 0; o < d; ++o)
          for (std::size_t i = 0; i < d; ++i) {
            const T v = w({a, o, i, b});
            if (v == T{0}) continue;
            for (Eigen::Index r = 0; r < m; ++r)
              for (Eigen::Index c = 0; c < m; ++c)
                next[b](r * Eigen::Index(d) + Eigen::Index(o), c * Eigen::Index(d) + Eigen::Index(i)) +=
                    acc[a](r, c) * v;
          }
    acc = std::move(next);
  }
  return acc.front();
}

/// Dense vector of an MPS (first site most significant), norm_log included.
template <Scalar T>
Vec<T> mps_to_dense(const Mps<T>& psi, std::size_t cap = std::size_t(1) << 24) {
  psi.validate();
  double dim = 1.0;
  for (std::size_t n = 0; n < psi.length(); ++n) dim *= double(psi.phys_dim(n));
  if (dim > double(cap)) throw SizeError("mps_to_dense: dimension exceeds cap");
  RowMat<T> acc = RowMat<T>::Ones(1, 1);  // rows: configurations so far, cols: bond
  for (const auto& a : psi.sites) {
    const RowMat<T> x = acc * a.matrix(1);  // (conf, d * Dr)
    acc = Eigen::Map<const RowMat<T>>(x.data(), x.rows() * Eigen::Index(a.extent(1)),
                                      Eigen::Index(a.extent(2)));
  }
  Vec<T> v = acc.col(0);
  return v * T(std::exp(psi.norm_log));
}

/// Kronecker product of per-site matrices, first factor most significant.
inline Eigen::MatrixXd kron_chain(const std::vector<Eigen::MatrixXd>& ops) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Ones(1, 1);
  for (const auto& o : ops) {
    Eigen::MatrixXd next(acc.rows() * o.rows(), acc.cols() * o.cols());
    for (Eigen::Index r = 0; r < acc.rows(); ++r)
      for (Eigen::Index c = 0; c < acc.cols(); ++c)
        next.block(r * o.rows(), c * o.cols(), o.rows(), o.cols()) = acc(r, c) * o;
    acc = std::move(next);
  }
  return acc;
}

/// Second-quantized t-V Hamiltonian on 2^L states. Site l (0-based) is bit
/// L-1-l, so the ordering matches the MPO basis. Fermionic signs are counted
/// explicitly from the occupations between the two hopping sites.
inline Eigen::MatrixXd q2_dense_hamiltonian(int L, double t, double V) {
  if (L < 1 || L > 14) throw SizeError("q2_dense_hamiltonian: L outside [1, 14]");
  const std::uint32_t dim = 1u << L;
  auto bit = [L](int l) { return 1u << (L - 1 - l); };
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (std::uint32_t s = 0; s < dim; ++s) {
    for (int l = 0; l + 1 < L; ++l) {
      if ((s & bit(l)) && (s & bit(l + 1))) h(s, s) += V;
      // c_i^+ c_j for (i, j) = (l, l+1) and (l+1, l)
      for (auto [i, j] : {std::pair{l, l + 1}, std::pair{l + 1, l}}) {
        if (!(s & bit(j)) || (s & bit(i))) continue;
        std::uint32_t between = 0;
        for (int k = std::min(i, j) + 1; k < std::max(i, j); ++k) between += (s & bit(k)) ? 1 : 0;
        const double sign = (between % 2) ? -1.0 : 1.0;
        const std::uint32_t s2 = (s & ~bit(j)) | bit(i);
        h(s2, s) += -t * sign;
      }
    }
  }
  return h;
}

/// Block of a 2^L operator restricted to states with N particles.
inline Eigen::MatrixXd particle_sector(const Eigen::MatrixXd& h, int L, int N) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index s = 0; s < (Eigen::Index(1) << L); ++s)
    if (std::popcount(std::uint64_t(s)) == N) idx.push_back(s);
  Eigen::MatrixXd b(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) b(Eigen::Index(i), Eigen::Index(j)) = h(idx[i], idx[j]);
  return b;
}

inline Eigen::VectorXd sector_spectrum(const Eigen::MatrixXd& h, int L, int N) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(particle_sector(h, L, N), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Embeds a state on the ordered sector into the q-space of dimension
/// q_max^N. Configurations with some q_n > q_max must carry zero amplitude.
template <class Vector>
Eigen::Matrix<typename Vector::Scalar, Eigen::Dynamic, 1> embed_in_q_space(
    const ConstrainedBasis& b, const Vector& psi, int q_max, std::size_t cap = std::size_t(1) << 24) {
  const double dim = std::pow(double(q_max), b.N());
  if (dim > double(cap)) throw SizeError("embed_in_q_space: dimension exceeds cap");
  Eigen::Matrix<typename Vector::Scalar, Eigen::Dynamic, 1> out =
      Eigen::Matrix<typename Vector::Scalar, Eigen::Dynamic, 1>::Zero(Eigen::Index(dim));
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto q = b.distances(i);
    std::size_t idx = 0;
    bool fits = true;
    for (int v : q) {
      if (v > q_max) fits = false;
      idx = idx * std::size_t(q_max) + std::size_t(std::min(v, q_max) - 1);
    }
    if (!fits) {
      if (psi(Eigen::Index(i)) != typename Vector::Scalar(0)) {
        throw DomainError("embed_in_q_space: state has weight beyond q_max");
      }
      continue;
    }
    out(Eigen::Index(idx)) = psi(Eigen::Index(i));
  }
  return out;
}

/// Von Neumann entropy of a q-space vector across the cut after `cut` sites.
template <class Vector>
double exact_q_entropy(const Vector& v, int N, int q_max, int cut) {
  if (cut < 1 || cut >= N) throw DomainError("exact_q_entropy: cut must lie in [1, N-1]");
  using S = typename Vector::Scalar;
  const auto rows = Eigen::Index(std::llround(std::pow(double(q_max), cut)));
  const auto cols = Eigen::Index(std::llround(std::pow(double(q_max), N - cut)));
  if (rows * cols != v.size()) throw DimensionError("exact_q_entropy: vector size mismatch");
  const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> m =
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), rows, cols);
  Eigen::BDCSVD<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> svd(m);
  return entropy_from_singular_values(svd.singularValues());
}

}  // namespace fqmps::oracle
