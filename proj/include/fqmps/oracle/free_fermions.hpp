#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fqmps/core/errors.hpp"
#include "fqmps/core/tensor.hpp"

namespace fqmps::oracle {

/// Single-particle energies of the open chain, -2 t cos(k pi / (L + 1)),
/// sorted ascending.
inline std::vector<double> open_chain_spectrum(int L, double t = 1.0) {
  if (L < 1) throw DomainError("open_chain_spectrum: L must be >= 1");
  std::vector<double> e;
  for (int k = 1; k <= L; ++k) e.push_back(-2.0 * t * std::cos(k * std::numbers::pi / (L + 1)));
  std::sort(e.begin(), e.end());
  return e;
}

/// Ground energy of N free fermions on the open chain.
inline double free_ground_energy(int L, int N, double t = 1.0) {
  if (N < 0 || N > L) throw DomainError("free_ground_energy: need 0 <= N <= L");
  const auto e = open_chain_spectrum(L, t);
  double s = 0.0;
  for (int k = 0; k < N; ++k) s += e[std::size_t(k)];
  return s;
}

inline Eigen::MatrixXd hopping_matrix(int L, double t = 1.0) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(L, L);
  for (int i = 0; i + 1 < L; ++i) h(i, i + 1) = h(i + 1, i) = -t;
  return h;
}

enum class FreeInitial { ground, domain_wall };

/// One-body density matrix C_ij = <c_j^+ c_i> at time `time` under free
/// hopping, C(t) = U C(0) U^+ with U = exp(-i h t). <n_x> = C_xx (0-based x).
inline Eigen::MatrixXcd correlation_matrix(int L, int N, double time, FreeInitial init,
                                           double t = 1.0) {
  if (L < 1 || N < 0 || N > L) throw DomainError("correlation_matrix: need 0 <= N <= L");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hopping_matrix(L, t));
  const Eigen::MatrixXd& phi = es.eigenvectors();
  Eigen::MatrixXcd c0 = Eigen::MatrixXcd::Zero(L, L);
  if (init == FreeInitial::ground) {
    c0 = (phi.leftCols(N) * phi.leftCols(N).transpose()).cast<cplx>();
  } else {
    for (int i = 0; i < N; ++i) c0(i, i) = 1.0;
  }
  Eigen::VectorXcd ph(L);
  for (int k = 0; k < L; ++k) ph(k) = std::exp(cplx(0.0, -time * es.eigenvalues()(k)));
  const Eigen::MatrixXcd u = phi.cast<cplx>() * ph.asDiagonal() * phi.transpose().cast<cplx>();
  return u * c0 * u.adjoint();
}

/// Entanglement entropy of a block of sites from the restricted correlation
/// matrix (0-based site indices).
inline double block_entropy_from_correlations(const Eigen::MatrixXcd& c,
                                              const std::vector<int>& block) {
  const auto m = Eigen::Index(block.size());
  if (m == 0) return 0.0;
  Eigen::MatrixXcd sub(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) sub(i, j) = c(block[std::size_t(i)], block[std::size_t(j)]);
  const Eigen::MatrixXcd herm = 0.5 * (sub + sub.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    double nu = es.eigenvalues()(k);
    if (nu < -1e-9 || nu > 1.0 + 1e-9) {
      throw DomainError("block_entropy: correlation eigenvalue " + std::to_string(nu) +
                        " outside [0, 1]");
    }
    nu = std::clamp(nu, 1e-14, 1.0 - 1e-14);
    s -= nu * std::log(nu) + (1.0 - nu) * std::log(1.0 - nu);
  }
  return std::max(s, 0.0);
}

/// Entropy of the first `cut` sites.
inline double left_block_entropy(const Eigen::MatrixXcd& c, int cut) {
  std::vector<int> block(std::size_t(std::max(cut, 0)));
  for (int i = 0; i < cut; ++i) block[std::size_t(i)] = i;
  return block_entropy_from_correlations(c, block);
}

}  // namespace fqmps::oracle
