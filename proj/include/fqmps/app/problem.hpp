#pragma once

#include <string>
#include <vector>

#include "fqmps/core/errors.hpp"
#include "fqmps/model/builders.hpp"
#include "fqmps/model/observables.hpp"
#include "fqmps/model/params.hpp"
#include "fqmps/mps/mps.hpp"
#include "fqmps/solvers/dmrg.hpp"

namespace fqmps::app {

inline constexpr const char* kVersion = "0.1.0";

/// A first-quantized model ready for the solvers, in the picture being solved.
struct Problem {
  ModelParams params;  // solver picture; N counts holes in hole mode
  int particles = 0;
  Hamiltonian h;
  Mpo<double> projector;

  bool hole() const { return params.mode == Mode::hole; }
  /// Energy of the particle system from an expectation value of h.
  double physical_energy(double e) const { return e + h.offset; }
  /// Particle density from the solver-picture occupation profile.
  std::vector<double> particle_density(std::vector<double> n) const {
    if (hole())
      for (double& v : n) v = 1.0 - v;
    return n;
  }
};

/// `model` is in the particle picture with `mode` selecting the solver
/// picture. Without an explicit q_max the cutoff is L - N + 1, which is exact.
inline Problem make_problem(ModelParams model, bool q_max_set) {
  Problem pr;
  pr.particles = model.N;
  const Mode mode = model.mode;
  model.mode = Mode::particle;
  if (mode == Mode::hole) {
    if (model.N == model.L) throw DomainError("hole mode needs at least one hole");
    model = hole_params(model).params;
  }
  if (!q_max_set) model.q_max = std::max(2, model.L - model.N + 1);
  model.validate();
  pr.params = model;
  pr.h = assemble_hamiltonian(model);
  auto exact = model;
  exact.projector_rep = ProjectorRep::exact;
  pr.projector = build_projector_C(exact);
  return pr;
}

/// Most uniform product state of the solver picture.
inline Mps<double> uniform_start(const Problem& pr) {
  const auto q = uniform_configuration(pr.params.L, pr.params.N);
  for (int v : q) {
    if (v > pr.params.q_max) {
      throw DomainError("q_max = " + std::to_string(pr.params.q_max) +
                        " cannot hold the uniform starting configuration (needs " + std::to_string(v) + ")");
    }
  }
  return product_state<double>(q, pr.params.q_max);
}

/// All particles packed on the left: x_n = n.
inline Mps<cplx> domain_wall_start(const Problem& pr) {
  if (pr.hole()) throw DomainError("domain-wall starts are particle-mode only");
  return product_state<cplx>(std::vector<int>(std::size_t(pr.params.N), 1), pr.params.q_max);
}

/// Occupation-basis product state of the second-quantized chain.
template <Scalar T>
Mps<T> occupation_product(const std::vector<int>& occupied_sites, int L) {
  std::vector<std::size_t> idx(std::size_t(L), 0);
  for (int x : occupied_sites) idx.at(std::size_t(x - 1)) = 1;
  return product_state_indices<T>(idx, 2);
}

inline std::vector<int> uniform_sites(int L, int N) {
  std::vector<int> x;
  int pos = 0;
  for (int q : uniform_configuration(L, N)) x.push_back(pos += q);
  return x;
}

inline std::vector<int> domain_wall_sites(int N) {
  std::vector<int> x(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) x[std::size_t(n)] = n + 1;
  return x;
}

/// <n_x> on the second-quantized chain.
template <Scalar T>
std::vector<double> q2_density(const Mps<T>& psi) {
  static constexpr double num[2] = {0.0, 1.0};
  return local_expectation_profile(psi, std::span<const double>(num, 2));
}

}  // namespace fqmps::app
