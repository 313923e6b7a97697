#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "fqmps/core/errors.hpp"

namespace fqmps {

enum class Mode { particle, hole };
enum class ProjectorRep { exact, truncated };

inline std::string to_string(Mode m) { return m == Mode::particle ? "particle" : "hole"; }
inline std::string to_string(ProjectorRep r) {
  return r == ProjectorRep::exact ? "exact" : "truncated";
}

/// Physical and representational parameters of the first-quantized t-V chain.
///
/// In hole mode `N` counts holes; the caller converts (see hole_params).
struct ModelParams {
  double t = 1.0;
  double V = 0.0;
  int L = 2;
  int N = 1;
  int q_max = 2;
  /// Penalty strength; unset means default_lambda(). Zero disables the
  /// constraint altogether (H' = H_t + H_V).
  std::optional<double> lambda;
  Mode mode = Mode::particle;
  ProjectorRep projector_rep = ProjectorRep::exact;
  /// Use the plain penalty H_t + H_V + lambda (1 - P_C) instead of routing the
  /// last-particle hop through the constraint counter.
  bool penalty_only = false;
  /// Drop the last-particle hop -t (T^N + T^N+), keeping only pair hops.
  bool literal_hopping = false;

  double default_lambda() const { return 10.0 * (2.0 * std::abs(t) + std::abs(V)) * N; }
  double penalty() const { return lambda.value_or(default_lambda()); }

  /// Largest counter x_N - N allowed by the projector representation.
  int counter_cap() const {
    return projector_rep == ProjectorRep::exact ? L - N : std::min(q_max - 1, L - N);
  }

  void validate() const {
    if (!std::isfinite(t) || !std::isfinite(V)) throw DomainError("ModelParams: t and V must be finite");
    if (L < 1) throw DomainError("ModelParams: L must be >= 1");
    if (N < 1 || N > L) throw DomainError("ModelParams: N must satisfy 1 <= N <= L");
    if (q_max < 2) throw DomainError("ModelParams: q_max must be >= 2");
    if (lambda && !(*lambda >= 0.0 && std::isfinite(*lambda))) {
      throw DomainError("ModelParams: lambda must be finite and >= 0");
    }
  }
};

/// Hole-picture parameters for a particle-picture system, and the constant
/// with E_particle(N) = E_hole(L - N) + offset.
struct HoleMapping {
  ModelParams params;
  double offset = 0.0;
};

inline HoleMapping hole_params(const ModelParams& particle) {
  if (particle.mode != Mode::particle) throw DomainError("hole_params: input must be in particle mode");
  HoleMapping h{particle, 0.0};
  h.params.mode = Mode::hole;
  h.params.N = particle.L - particle.N;
  h.offset = (particle.L - 1) * particle.V - 2.0 * particle.V * h.params.N;
  return h;
}

}  // namespace fqmps
