#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fqmps/core/linalg.hpp"
#include "fqmps/core/tensor.hpp"

namespace fqmps {

/// Matrix product state. Site tensors have shape (left bond, physical, right
/// bond); the represented vector is exp(norm_log) times the contraction of
/// the site tensors. Site indices are 0-based; for first-quantized states
/// site n carries the inter-particle distance q_{n+1} with physical index
/// q - 1.
template <Scalar T>
struct Mps {
  std::vector<Tensor<T>> sites;
  std::optional<std::size_t> center;
  double norm_log = 0.0;

  std::size_t length() const noexcept { return sites.size(); }
  std::size_t phys_dim(std::size_t n) const { return sites.at(n).extent(1); }
  /// Extent of the bond to the right of site n.
  std::size_t bond(std::size_t n) const { return sites.at(n).extent(2); }

  std::size_t max_bond() const {
    std::size_t m = 1;
    for (const auto& s : sites) m = std::max({m, s.extent(0), s.extent(2)});
    return m;
  }

  void validate() const {
    if (sites.empty()) throw DimensionError("Mps: chain must have at least one site");
    for (std::size_t n = 0; n < sites.size(); ++n) {
      if (sites[n].rank() != 3) throw DimensionError("Mps: site tensors must have rank 3");
      if (n > 0 && sites[n - 1].extent(2) != sites[n].extent(0)) {
        throw DimensionError("Mps: bond mismatch between sites " + std::to_string(n - 1) + " and " +
                             std::to_string(n));
      }
    }
    if (sites.front().extent(0) != 1 || sites.back().extent(2) != 1) {
      throw DimensionError("Mps: boundary bonds must have extent 1");
    }
    if (center && *center >= sites.size()) throw DimensionError("Mps: center out of range");
  }

  template <Scalar U>
  Mps<U> cast() const {
    Mps<U> out;
    out.sites.reserve(sites.size());
    for (const auto& s : sites) out.sites.push_back(s.template cast<U>());
    out.center = center;
    out.norm_log = norm_log;
    return out;
  }
};

struct EntropyProfile {
  std::vector<double> values;  // S_n for the cut after site n, n = 0..N-2

  double max() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
  }
  std::size_t argmax() const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] > values[k]) k = i;
    }
    return k;
  }
};

/// Basis product state from 0-based physical indices.
template <Scalar T>
Mps<T> product_state_indices(const std::vector<std::size_t>& indices, std::size_t phys_dim) {
  if (indices.empty()) throw DomainError("product_state: chain must have at least one site");
  Mps<T> psi;
  for (auto i : indices) {
    if (i >= phys_dim) throw DomainError("product_state: index " + std::to_string(i) + " out of range");
    Tensor<T> a({1, phys_dim, 1});
    a({0, i, 0}) = T{1};
    psi.sites.push_back(std::move(a));
  }
  psi.center = 0;
  return psi;
}

/// First-quantized product state psi(q) = prod_n delta(q_n, q_values[n]),
/// with q_values in [1, q_max].
template <Scalar T>
Mps<T> product_state(const std::vector<int>& q_values, int q_max) {
  std::vector<std::size_t> idx;
  for (int q : q_values) {
    if (q < 1 || q > q_max) {
      throw DomainError("product_state: q = " + std::to_string(q) + " outside [1, " +
                        std::to_string(q_max) + "]");
    }
    idx.push_back(static_cast<std::size_t>(q - 1));
  }
  return product_state_indices<T>(idx, static_cast<std::size_t>(q_max));
}

namespace detail {

// site n = Q R with Q left-orthonormal; R is absorbed into site n+1.
template <Scalar T>
void shift_center_right(Mps<T>& psi, std::size_t n) {
  auto& a = psi.sites[n];
  const std::size_t dl = a.extent(0), d = a.extent(1), dr = a.extent(2);
  auto [q, r] = qr_matrix<T>(a.matrix(2));
  const auto k = static_cast<std::size_t>(q.cols());
  Tensor<T> an({dl, d, k});
  an.matrix(2) = q;
  a = std::move(an);
  auto& b = psi.sites[n + 1];
  Tensor<T> bn({k, b.extent(1), b.extent(2)});
  bn.matrix(1) = r * b.matrix(1);
  (void)dr;
  b = std::move(bn);
}

// site n = L Q with Q right-orthonormal; L is absorbed into site n-1.
template <Scalar T>
void shift_center_left(Mps<T>& psi, std::size_t n) {
  auto& b = psi.sites[n];
  const std::size_t d = b.extent(1), dr = b.extent(2);
  const RowMat<T> bt = b.matrix(1).adjoint();
  auto [q, r] = qr_matrix<T>(bt);
  const auto k = static_cast<std::size_t>(q.cols());
  Tensor<T> bn({k, d, dr});
  bn.matrix(1) = q.adjoint();
  b = std::move(bn);
  auto& a = psi.sites[n - 1];
  Tensor<T> an({a.extent(0), a.extent(1), k});
  an.matrix(2) = a.matrix(2) * r.adjoint();
  a = std::move(an);
}

template <Scalar T>
void normalize_center(Mps<T>& psi, std::size_t c) {
  const double nrm = psi.sites[c].norm();
  if (nrm == 0.0) throw NumericError("canonicalize: state has zero norm");
  psi.sites[c] *= T(1.0 / nrm);
  psi.norm_log += std::log(nrm);
}

}  // namespace detail

template <Scalar T>
struct Canonicalized {
  Mps<T> state;
  /// Discarded weight relative to the squared norm of the input vector.
  double discarded_weight = 0.0;
};

/// Brings the state into mixed-canonical form around `center`.
///
/// Without truncation only QR sweeps are used and the represented vector is
/// unchanged. With truncation the state is first left-orthonormalized, then
/// truncated in a single right-to-left SVD sweep; the kept subspaces are
/// nested, so the fidelity loss equals the returned discarded weight.
/// The center tensor is normalized and its norm moved into norm_log.
template <Scalar T>
Canonicalized<T> canonicalize(Mps<T> psi, std::size_t center,
                              const TruncationPolicy& policy = TruncationPolicy::exact()) {
  psi.validate();
  const std::size_t n = psi.length();
  if (center >= n) throw DimensionError("canonicalize: center out of range");
  const bool truncate = policy.discard_tolerance > 0.0 || policy.max_bond < psi.max_bond();
  double discarded = 0.0;
  if (!truncate) {
    for (std::size_t k = 0; k < center; ++k) detail::shift_center_right(psi, k);
    for (std::size_t k = n - 1; k > center; --k) detail::shift_center_left(psi, k);
    detail::normalize_center(psi, center);
    psi.center = center;
    return {std::move(psi), 0.0};
  }
  for (std::size_t k = 0; k + 1 < n; ++k) detail::shift_center_right(psi, k);
  detail::normalize_center(psi, n - 1);
  // Running squared norm of the truncated vector relative to the input.
  double kept = 1.0;
  for (std::size_t k = n - 1; k > 0; --k) {
    auto& b = psi.sites[k];
    const std::size_t d = b.extent(1), dr = b.extent(2);
    auto f = svd_matrix<T>(b.matrix(1), policy);
    discarded += kept * f.discarded_weight;
    kept *= (1.0 - f.discarded_weight);
    const auto r = static_cast<std::size_t>(f.s.size());
    Tensor<T> bn({r, d, dr});
    bn.matrix(1) = f.vh;
    b = std::move(bn);
    auto& a = psi.sites[k - 1];
    Tensor<T> an({a.extent(0), a.extent(1), r});
    const RowMat<T> us = f.u * f.s.template cast<T>().asDiagonal();
    an.matrix(2) = a.matrix(2) * us;
    a = std::move(an);
    // Record the truncated norm and renormalize the new center.
    const double nrm = a.norm();
    if (nrm == 0.0) throw NumericError("canonicalize: truncation removed the whole state");
    a *= T(1.0 / nrm);
    psi.norm_log += std::log(nrm);
  }
  for (std::size_t k = 0; k < center; ++k) detail::shift_center_right(psi, k);
  detail::normalize_center(psi, center);
  psi.center = center;
  return {std::move(psi), discarded};
}

/// Unit-norm copy: canonical at `center` with norm_log reset to 0.
template <Scalar T>
Mps<T> normalized(Mps<T> psi, std::size_t center = 0) {
  auto c = canonicalize(std::move(psi), center);
  c.state.norm_log = 0.0;
  return std::move(c.state);
}

/// <a|b>, antilinear in `a`, including both norm_log factors.
template <Scalar T>
T inner(const Mps<T>& a, const Mps<T>& b) {
  if (a.length() != b.length()) throw DimensionError("inner: chain lengths differ");
  RowMat<T> env = RowMat<T>::Ones(1, 1);
  for (std::size_t n = 0; n < a.length(); ++n) {
    const auto& x = a.sites[n];
    const auto& y = b.sites[n];
    if (x.extent(1) != y.extent(1)) throw DimensionError("inner: physical dimensions differ");
    const auto dla = Eigen::Index(x.extent(0)), dlb = Eigen::Index(y.extent(0));
    const auto d = Eigen::Index(x.extent(1));
    const auto dra = Eigen::Index(x.extent(2)), drb = Eigen::Index(y.extent(2));
    RowMat<T> f = env * y.matrix(1);  // (dla, d * drb)
    Eigen::Map<const RowMat<T>> f2(f.data(), dla * d, drb);
    env = x.matrix(2).adjoint() * f2;
    (void)dlb;
    (void)dra;
  }
  return env(0, 0) * T(std::exp(a.norm_log + b.norm_log));
}

template <Scalar T>
double norm_squared(const Mps<T>& a) {
  return real_of(inner(a, a));
}

/// Bipartite entanglement entropies from the Schmidt spectra of a
/// mixed-canonical sweep.
template <Scalar T>
EntropyProfile entropy_profile(const Mps<T>& state) {
  auto psi = canonicalize(state, 0).state;
  EntropyProfile out;
  for (std::size_t n = 0; n + 1 < psi.length(); ++n) {
    auto& a = psi.sites[n];
    const std::size_t dl = a.extent(0), d = a.extent(1);
    auto f = svd_matrix<T>(a.matrix(2), TruncationPolicy::exact());
    out.values.push_back(entropy_from_singular_values(f.s));
    const auto r = static_cast<std::size_t>(f.s.size());
    Tensor<T> an({dl, d, r});
    an.matrix(2) = f.u;
    a = std::move(an);
    auto& b = psi.sites[n + 1];
    Tensor<T> bn({r, b.extent(1), b.extent(2)});
    const RowMat<T> svh = f.s.template cast<T>().asDiagonal() * f.vh;
    bn.matrix(1) = svh * b.matrix(1);
    b = std::move(bn);
  }
  return out;
}

namespace detail {

template <Scalar T>
double center_diag_expectation(const Tensor<T>& m, std::span<const double> diag) {
  const std::size_t dl = m.extent(0), d = m.extent(1), dr = m.extent(2);
  double num = 0.0, den = 0.0;
  for (std::size_t l = 0; l < dl; ++l) {
    for (std::size_t s = 0; s < d; ++s) {
      for (std::size_t r = 0; r < dr; ++r) {
        const double w = std::norm(m.data()[(l * d + s) * dr + r]);
        num += diag[s] * w;
        den += w;
      }
    }
  }
  return num / den;
}

}  // namespace detail

/// Expectation of a diagonal single-site observable, diag[k] being its value
/// on physical index k.
template <Scalar T>
double local_expectation(const Mps<T>& state, std::size_t site, std::span<const double> diag) {
  if (site >= state.length()) throw DimensionError("local_expectation: invalid site");
  if (diag.size() != state.phys_dim(site)) {
    throw DimensionError("local_expectation: diagonal length differs from physical dimension");
  }
  auto psi = canonicalize(state, site).state;
  return detail::center_diag_expectation(psi.sites[site], diag);
}

/// local_expectation at every site, evaluated in one canonical sweep.
template <Scalar T>
std::vector<double> local_expectation_profile(const Mps<T>& state, std::span<const double> diag) {
  auto psi = canonicalize(state, 0).state;
  std::vector<double> out;
  for (std::size_t n = 0; n < psi.length(); ++n) {
    if (diag.size() != psi.phys_dim(n)) {
      throw DimensionError("local_expectation: diagonal length differs from physical dimension");
    }
    out.push_back(detail::center_diag_expectation(psi.sites[n], diag));
    if (n + 1 < psi.length()) detail::shift_center_right(psi, n);
  }
  return out;
}

/// Compresses a dense vector over prod(dims) (first site most significant)
/// into an MPS by successive SVDs.
template <Scalar T>
Mps<T> mps_from_dense(const Vec<T>& v, const std::vector<std::size_t>& dims,
                      const TruncationPolicy& policy = TruncationPolicy::exact()) {
  if (dims.empty()) throw DimensionError("mps_from_dense: no sites");
  if (static_cast<std::size_t>(v.size()) != shape_volume(dims)) {
    throw DimensionError("mps_from_dense: vector length does not match dimensions");
  }
  Mps<T> psi;
  RowMat<T> rest = Eigen::Map<const RowMat<T>>(v.data(), 1, v.size());
  std::size_t dl = 1;
  for (std::size_t n = 0; n + 1 < dims.size(); ++n) {
    const auto rows = Eigen::Index(dl * dims[n]);
    const auto cols = Eigen::Index(rest.size()) / rows;
    Eigen::Map<const RowMat<T>> m(rest.data(), rows, cols);
    auto f = svd_matrix<T>(m, policy);
    const auto r = static_cast<std::size_t>(f.s.size());
    Tensor<T> a({dl, dims[n], r});
    a.matrix(2) = f.u;
    psi.sites.push_back(std::move(a));
    rest = f.s.template cast<T>().asDiagonal() * f.vh;
    dl = r;
  }
  Tensor<T> last({dl, dims.back(), 1});
  std::copy(rest.data(), rest.data() + rest.size(), last.data());
  psi.sites.push_back(std::move(last));
  psi.center = dims.size() - 1;
  return psi;
}

/// Normalized random MPS with bonds capped at `bond` (used by tests and
/// benchmarks).
template <Scalar T>
Mps<T> random_mps(std::size_t length, std::size_t phys_dim, std::size_t bond, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Mps<T> psi;
  std::size_t dl = 1;
  for (std::size_t n = 0; n < length; ++n) {
    // Cap by the dimension reachable from either boundary.
    double left = std::pow(double(phys_dim), double(n + 1));
    double right = std::pow(double(phys_dim), double(length - n - 1));
    std::size_t dr = n + 1 == length ? 1 : std::min<double>({double(bond), left, right});
    Tensor<T> a({dl, phys_dim, dr});
    for (auto& x : a.values()) {
      if constexpr (is_complex_v<T>) {
        const double re = g(rng);
        x = T(re, g(rng));
      } else {
        x = g(rng);
      }
    }
    psi.sites.push_back(std::move(a));
    dl = dr;
  }
  return normalized(std::move(psi), 0);
}

}  // namespace fqmps
