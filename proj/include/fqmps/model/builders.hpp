#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "fqmps/model/params.hpp"
#include "fqmps/mps/mpo.hpp"

namespace fqmps {

/// Single-site operators on the inter-particle distance q in {1..q_max}
/// (physical index q - 1).
struct LocalOps {
  int q_max = 2;
  RowMat<double> id, T, Td;

  explicit LocalOps(int q) : q_max(q) {
    if (q < 1) throw DomainError("LocalOps: q_max must be >= 1");
    id = RowMat<double>::Identity(q, q);
    T = RowMat<double>::Zero(q, q);
    for (int i = 0; i + 1 < q; ++i) T(i, i + 1) = 1.0;  // q -> q - 1
    Td = T.transpose();
  }

  /// Projector onto q = m; zero when m lies outside [1, q_max].
  RowMat<double> P(int m) const {
    RowMat<double> p = RowMat<double>::Zero(q_max, q_max);
    if (m >= 1 && m <= q_max) p(m - 1, m - 1) = 1.0;
    return p;
  }

  /// Projector onto q <= m.
  RowMat<double> P_upto(int m) const {
    RowMat<double> p = RowMat<double>::Zero(q_max, q_max);
    for (int k = 0; k < std::min(m, q_max); ++k) p(k, k) = 1.0;
    return p;
  }
};

/// Hamiltonian MPO together with its reconstruction metadata.
struct Hamiltonian {
  Mpo<double> mpo;
  /// Constant to add to expectation values (nonzero in hole mode).
  double offset = 0.0;
  double lambda = 0.0;
};

namespace detail {

inline void place(Tensor<double>& w, std::size_t a, std::size_t b, const RowMat<double>& op,
                  double coeff = 1.0) {
  const std::size_t d = w.extent(1);
  for (std::size_t o = 0; o < d; ++o)
    for (std::size_t i = 0; i < d; ++i) {
      const double v = op(Eigen::Index(o), Eigen::Index(i));
      if (v != 0.0) w({a, o, i, b}) += coeff * v;
    }
}

inline Tensor<double> identity_site(std::size_t d) {
  Tensor<double> w({1, d, d, 1});
  for (std::size_t s = 0; s < d; ++s) w({0, s, s, 0}) = 1.0;
  return w;
}

/// Sum over sites of single-site operators, ops[n] acting on site n.
inline Mpo<double> site_sum_mpo(const std::vector<RowMat<double>>& ops) {
  const std::size_t len = ops.size();
  const auto d = static_cast<std::size_t>(ops.front().rows());
  const RowMat<double> id = RowMat<double>::Identity(Eigen::Index(d), Eigen::Index(d));
  Mpo<double> m;
  if (len == 1) {
    Tensor<double> w({1, d, d, 1});
    place(w, 0, 0, ops[0]);
    m.sites.push_back(std::move(w));
    return m;
  }
  for (std::size_t n = 0; n < len; ++n) {
    const std::size_t wl = n == 0 ? 1 : 2, wr = n + 1 == len ? 1 : 2;
    Tensor<double> w({wl, d, d, wr});
    // channel 0: nothing placed yet; channel 1: term placed
    if (n == 0) {
      place(w, 0, 0, id);
      place(w, 0, 1, ops[n]);
    } else if (n + 1 == len) {
      place(w, 0, 0, ops[n]);
      place(w, 1, 0, id);
    } else {
      place(w, 0, 0, id);
      place(w, 0, 1, ops[n]);
      place(w, 1, 1, id);
    }
    m.sites.push_back(std::move(w));
  }
  return m;
}

/// Running-sum automaton over the inter-particle distances.
///
/// The channel at the bond after site n (n < last) is the partial counter
/// c = sum_{k <= n} (q_k - 1) = x_{n+1} - (n+1), kept while c <= cap. Site
/// `last` closes the automaton with the operator close(c) for incoming
/// counter c; later sites carry the identity.
inline Mpo<double> counter_automaton(int length, int q_max, int last, int cap,
                                     const std::function<RowMat<double>(int)>& close) {
  const auto d = static_cast<std::size_t>(q_max);
  auto width = [&](int n) {  // number of counter values on the bond after site n
    return static_cast<std::size_t>(std::min(cap, (n + 1) * (q_max - 1))) + 1;
  };
  const LocalOps ops(q_max);
  Mpo<double> m;
  bool nonzero = true;
  for (int n = 0; n < length; ++n) {
    if (n > last) {
      m.sites.push_back(identity_site(d));
      continue;
    }
    const std::size_t wl = n == 0 ? 1 : width(n - 1);
    const std::size_t wr = n == last ? 1 : width(n);
    Tensor<double> w({wl, d, d, wr});
    for (std::size_t c = 0; c < wl; ++c) {
      if (n == last) {
        place(w, c, 0, close(static_cast<int>(c)));
        continue;
      }
      for (int q = 1; q <= q_max; ++q) {
        const std::size_t cn = c + static_cast<std::size_t>(q - 1);
        if (cn < wr) w({c, std::size_t(q - 1), std::size_t(q - 1), cn}) = 1.0;
      }
    }
    if (n == last) nonzero = w.max_abs() > 0.0;
    m.sites.push_back(std::move(w));
  }
  if (!nonzero) return zero_mpo<double>(std::size_t(length), d);
  return m;
}

}  // namespace detail

/// V sum_{n >= 2} P_1^n: nearest-neighbour repulsion in distance variables.
inline Mpo<double> build_hv(const ModelParams& p) {
  p.validate();
  const LocalOps ops(p.q_max);
  const auto d = static_cast<std::size_t>(p.q_max);
  if (p.N == 1) return zero_mpo<double>(1, d);
  std::vector<RowMat<double>> terms(std::size_t(p.N), RowMat<double>::Zero(p.q_max, p.q_max));
  for (int n = 1; n < p.N; ++n) terms[std::size_t(n)] = p.V * ops.P(1);
  return detail::site_sum_mpo(terms);
}

/// Hopping MPO: -t sum_n (T^n+ T^{n+1} + T^n T^{n+1}+) - t (T^N + T^N+).
/// `literal_hopping` drops the last-particle term.
inline Mpo<double> build_ht(const ModelParams& p, bool literal_hopping) {
  p.validate();
  const LocalOps ops(p.q_max);
  const auto d = static_cast<std::size_t>(p.q_max);
  const std::size_t len = std::size_t(p.N);
  const RowMat<double> lone = literal_hopping ? RowMat<double>::Zero(p.q_max, p.q_max)
                                          : RowMat<double>(-p.t * (ops.T + ops.Td));
  Mpo<double> m;
  if (len == 1) {
    Tensor<double> w({1, d, d, 1});
    detail::place(w, 0, 0, lone);
    m.sites.push_back(std::move(w));
    return m;
  }
  // channels: 0 start, 1 T+ placed, 2 T placed, 3 done
  for (std::size_t n = 0; n < len; ++n) {
    const bool first = n == 0, last = n + 1 == len;
    Tensor<double> w({first ? 1u : 4u, d, d, last ? 1u : 4u});
    const std::size_t done = last ? 0 : 3;
    if (!last) {
      detail::place(w, 0, 0, ops.id);
      detail::place(w, 0, 1, ops.Td);
      detail::place(w, 0, 2, ops.T);
    }
    if (!first) {
      detail::place(w, 1, done, ops.T, -p.t);
      detail::place(w, 2, done, ops.Td, -p.t);
      detail::place(w, 3, done, ops.id);
    }
    if (last) detail::place(w, 0, 0, lone);
    m.sites.push_back(std::move(w));
  }
  return m;
}

/// Constraint projector onto sum_n q_n <= L (exact) or onto the capped
/// counter x_N - N <= min(q_max - 1, L - N) (truncated).
inline Mpo<double> build_projector_C(const ModelParams& p) {
  p.validate();
  const LocalOps ops(p.q_max);
  const int cap = p.counter_cap();
  return detail::counter_automaton(p.N, p.q_max, p.N - 1, cap,
                                   [&](int c) { return ops.P_upto(cap - c + 1); });
}

/// Projector onto x_alpha = x, i.e. q_1 + ... + q_alpha = x (alpha, x 1-based).
inline Mpo<double> build_position_projector(const ModelParams& p, int alpha, int x) {
  p.validate();
  if (alpha < 1 || alpha > p.N) throw DomainError("position projector: alpha outside [1, N]");
  if (x > p.L) throw DomainError("position projector: x exceeds L");
  const auto d = static_cast<std::size_t>(p.q_max);
  if (x < alpha) return zero_mpo<double>(std::size_t(p.N), d);
  const LocalOps ops(p.q_max);
  const int target = x - alpha;
  return detail::counter_automaton(p.N, p.q_max, alpha - 1, target,
                                   [&](int c) { return ops.P(target - c + 1); });
}

/// Penalized first-quantized Hamiltonian H' with lambda (1 - P_C).
///
/// By default the last-particle hop and the penalty are routed through the
/// constraint counter, so that hops leaving the constrained sector are
/// removed and H' commutes with P_C; the physical block then equals
/// P_C (H_t + H_V) P_C exactly. `penalty_only` (and the truncated
/// representation) use the plain sum H_t + H_V + lambda (1 - P_C). A zero
/// lambda gives H_t + H_V with no constraint.
inline Hamiltonian assemble_hamiltonian(const ModelParams& p) {
  p.validate();
  const LocalOps ops(p.q_max);
  const auto d = static_cast<std::size_t>(p.q_max);
  const double lam = p.penalty();
  const bool hole = p.mode == Mode::hole;
  std::vector<Mpo<double>> terms;
  terms.push_back(build_hv(p));
  if (hole) {
    std::vector<RowMat<double>> edge(std::size_t(p.N), RowMat<double>::Zero(p.q_max, p.q_max));
    edge[0] = p.V * ops.P(1);
    terms.push_back(detail::site_sum_mpo(edge));
  }
  const bool projected = lam > 0.0 && !p.penalty_only && p.projector_rep == ProjectorRep::exact;
  if (!projected) {
    terms.push_back(build_ht(p, p.literal_hopping));
    if (hole) terms.push_back(scaled(build_position_projector(p, p.N, p.L), p.V));
    if (lam > 0.0) {
      terms.push_back(scaled(identity_mpo<double>(std::size_t(p.N), d), lam));
      terms.push_back(scaled(build_projector_C(p), -lam));
    }
  } else {
    terms.push_back(build_ht(p, /*literal_hopping=*/true));
    terms.push_back(scaled(identity_mpo<double>(std::size_t(p.N), d), lam));
    const int cap = p.counter_cap();
    // Incoming counter c at the last site: q is allowed iff q <= cap - c + 1.
    terms.push_back(detail::counter_automaton(p.N, p.q_max, p.N - 1, cap, [&](int c) {
      const RowMat<double> pa = ops.P_upto(cap - c + 1);
      RowMat<double> op = -lam * pa;
      if (!p.literal_hopping) op -= p.t * (ops.T * pa + pa * ops.Td);
      if (hole) op += p.V * ops.P(cap - c + 1);
      return op;
    }));
  }
  Hamiltonian h;
  h.mpo = merge_channels(mpo_sum(terms));
  h.offset = hole ? (p.L - 1) * p.V - 2.0 * p.V * p.N : 0.0;
  h.lambda = lam;
  return h;
}

/// Second-quantized t-V chain on L sites, occupation basis {|0>, |1>}.
/// Nearest-neighbour hopping carries no string operator.
inline Mpo<double> build_q2_tv(const ModelParams& p) {
  if (p.L < 1) throw DomainError("build_q2_tv: L must be >= 1");
  const std::size_t len = std::size_t(p.L), d = 2;
  if (len == 1) return zero_mpo<double>(1, d);
  RowMat<double> id = RowMat<double>::Identity(2, 2), cd = RowMat<double>::Zero(2, 2);
  cd(1, 0) = 1.0;
  const RowMat<double> c = cd.transpose();
  const RowMat<double> num = cd * c;
  Mpo<double> m;
  // channels: 0 start, 1 c+ placed, 2 c placed, 3 n placed, 4 done
  for (std::size_t n = 0; n < len; ++n) {
    const bool first = n == 0, last = n + 1 == len;
    Tensor<double> w({first ? 1u : 5u, d, d, last ? 1u : 5u});
    const std::size_t done = last ? 0 : 4;
    if (!last) {
      detail::place(w, 0, 0, id);
      detail::place(w, 0, 1, cd);
      detail::place(w, 0, 2, c);
      detail::place(w, 0, 3, num);
    }
    if (!first) {
      detail::place(w, 1, done, c, -p.t);
      detail::place(w, 2, done, cd, -p.t);
      detail::place(w, 3, done, num, p.V);
      detail::place(w, 4, done, id);
    }
    m.sites.push_back(std::move(w));
  }
  return m;
}

}  // namespace fqmps
