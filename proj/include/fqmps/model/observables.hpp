#pragma once

#include <cmath>
#include <vector>

#include "fqmps/model/builders.hpp"
#include "fqmps/mps/environment.hpp"
#include "fqmps/mps/mps.hpp"

namespace fqmps {

/// 1 - <P_C> with the exact constraint projector.
template <Scalar T>
double leakage(const Mps<T>& state, ModelParams p) {
  p.projector_rep = ProjectorRep::exact;
  const auto pc = build_projector_C(p).template cast<T>();
  return 1.0 - real_of(expectation(state, pc));
}

/// <q_n> for every particle.
template <Scalar T>
std::vector<double> interparticle_profile(const Mps<T>& state) {
  std::vector<double> q(state.phys_dim(0));
  for (std::size_t k = 0; k < q.size(); ++k) q[k] = double(k + 1);
  return local_expectation_profile(state, std::span<const double>(q));
}

/// <n_x> = sum_alpha <P_{x_alpha = x}> for x = 1..L (returned 0-based).
///
/// One left-to-right pass carries the environment resolved by the position
/// of the particle just absorbed; the state is right-canonical beyond it, so
/// each trace is an expectation value.
template <Scalar T>
std::vector<double> occupation_profile(const Mps<T>& state, const ModelParams& p) {
  if (int(state.length()) != p.N) throw DimensionError("occupation_profile: chain length differs from N");
  const auto psi = normalized(state, 0);
  const auto L = std::size_t(p.L);
  std::vector<double> n(L, 0.0);
  // env[x-1]: contraction of the absorbed sites restricted to x_alpha = x
  std::vector<RowMat<T>> env(L + 1);
  std::vector<bool> live(L + 1, false);
  env[0] = RowMat<T>::Ones(1, 1);
  live[0] = true;  // x_0 = 0
  for (std::size_t a = 0; a < psi.length(); ++a) {
    const auto& m = psi.sites[a];
    const auto d = m.extent(1), dl = Eigen::Index(m.extent(0)), dr = Eigen::Index(m.extent(2));
    std::vector<RowMat<T>> next(L + 1);
    std::vector<bool> nlive(L + 1, false);
    for (std::size_t x = 0; x <= L; ++x) {
      if (!live[x]) continue;
      for (std::size_t q = 1; q <= d && x + q <= L; ++q) {
        Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>> mq(m.data() + (q - 1) * std::size_t(dr), dl, dr,
                                                                Eigen::OuterStride<>(Eigen::Index(d) * dr));
        const RowMat<T> contrib = mq.adjoint() * env[x] * mq;
        if (!nlive[x + q]) {
          next[x + q] = contrib;
          nlive[x + q] = true;
        } else {
          next[x + q] += contrib;
        }
      }
    }
    env = std::move(next);
    live = std::move(nlive);
    for (std::size_t x = 1; x <= L; ++x)
      if (live[x]) n[x - 1] += real_of(T(env[x].trace()));
  }
  return n;
}

/// Reference path: one position-projector expectation per (alpha, x).
template <Scalar T>
std::vector<double> occupation_profile_naive(const Mps<T>& state, const ModelParams& p) {
  std::vector<double> n(std::size_t(p.L), 0.0);
  for (int alpha = 1; alpha <= p.N; ++alpha)
    for (int x = alpha; x <= p.L; ++x) {
      const auto op = build_position_projector(p, alpha, x).template cast<T>();
      n[std::size_t(x - 1)] += real_of(expectation(state, op));
    }
  return n;
}

/// ln C(N, P), the particle-entanglement lower bound of a symmetrized
/// coordinate tensor.
inline double particle_entropy_bound(int N, int P) {
  if (P < 0 || P > N) throw DomainError("particle_entropy_bound: need 0 <= P <= N");
  return std::lgamma(N + 1.0) - std::lgamma(P + 1.0) - std::lgamma(N - P + 1.0);
}

}  // namespace fqmps
