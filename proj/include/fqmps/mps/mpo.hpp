#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fqmps/core/linalg.hpp"
#include "fqmps/core/tensor.hpp"

namespace fqmps {

/// Matrix product operator. Site tensors have shape
/// (left bond, physical out, physical in, right bond).
template <Scalar T>
struct Mpo {
  std::vector<Tensor<T>> sites;

  std::size_t length() const noexcept { return sites.size(); }
  std::size_t phys_dim(std::size_t n) const { return sites.at(n).extent(1); }
  std::size_t bond(std::size_t n) const { return sites.at(n).extent(3); }

  std::size_t max_bond() const {
    std::size_t m = 1;
    for (const auto& s : sites) m = std::max({m, s.extent(0), s.extent(3)});
    return m;
  }

  void validate() const {
    if (sites.empty()) throw DimensionError("Mpo: chain must have at least one site");
    for (std::size_t n = 0; n < sites.size(); ++n) {
      const auto& w = sites[n];
      if (w.rank() != 4) throw DimensionError("Mpo: site tensors must have rank 4");
      if (w.extent(1) != w.extent(2)) throw DimensionError("Mpo: physical legs differ");
      if (n > 0 && sites[n - 1].extent(3) != w.extent(0)) {
        throw DimensionError("Mpo: bond mismatch at site " + std::to_string(n));
      }
    }
    if (sites.front().extent(0) != 1 || sites.back().extent(3) != 1) {
      throw DimensionError("Mpo: boundary bonds must have extent 1");
    }
  }

  template <Scalar U>
  Mpo<U> cast() const {
    Mpo<U> out;
    for (const auto& s : sites) out.sites.push_back(s.template cast<U>());
    return out;
  }
};

template <Scalar T>
Mpo<T> identity_mpo(std::size_t length, std::size_t phys_dim) {
  Mpo<T> m;
  for (std::size_t n = 0; n < length; ++n) {
    Tensor<T> w({1, phys_dim, phys_dim, 1});
    for (std::size_t s = 0; s < phys_dim; ++s) w({0, s, s, 0}) = T{1};
    m.sites.push_back(std::move(w));
  }
  return m;
}

template <Scalar T>
Mpo<T> zero_mpo(std::size_t length, std::size_t phys_dim) {
  auto m = identity_mpo<T>(length, phys_dim);
  m.sites.front() *= T{0};
  return m;
}

template <Scalar T>
Mpo<T> scaled(Mpo<T> m, T alpha) {
  m.sites.front() *= alpha;
  return m;
}

/// Direct-sum addition: boundary sites concatenate along the open bond,
/// interior sites become block diagonal.
template <Scalar T>
Mpo<T> mpo_sum(const std::vector<Mpo<T>>& terms) {
  if (terms.empty()) throw DomainError("mpo_sum: no terms");
  const std::size_t len = terms.front().length();
  for (const auto& t : terms) {
    t.validate();
    if (t.length() != len) throw DimensionError("mpo_sum: chain lengths differ");
  }
  if (terms.size() == 1) return terms.front();
  Mpo<T> out;
  for (std::size_t n = 0; n < len; ++n) {
    const std::size_t d = terms.front().phys_dim(n);
    std::size_t wl = 0, wr = 0;
    for (const auto& t : terms) {
      if (t.phys_dim(n) != d) throw DimensionError("mpo_sum: physical dimensions differ");
      wl += t.sites[n].extent(0);
      wr += t.sites[n].extent(3);
    }
    if (n == 0) wl = 1;
    if (n + 1 == len) wr = 1;
    Tensor<T> w({wl, d, d, wr});
    std::size_t ol = 0, orr = 0;
    for (const auto& t : terms) {
      const auto& x = t.sites[n];
      for (std::size_t a = 0; a < x.extent(0); ++a)
        for (std::size_t so = 0; so < d; ++so)
          for (std::size_t si = 0; si < d; ++si)
            for (std::size_t b = 0; b < x.extent(3); ++b) {
              const std::size_t aa = n == 0 ? 0 : ol + a;
              const std::size_t bb = n + 1 == len ? 0 : orr + b;
              w({aa, so, si, bb}) += x({a, so, si, b});
            }
      ol += x.extent(0);
      orr += x.extent(3);
    }
    out.sites.push_back(std::move(w));
  }
  return out;
}

namespace detail {

template <Scalar T>
bool column_equal(const Tensor<T>& w, std::size_t b1, std::size_t b2) {
  const std::size_t wl = w.extent(0), d = w.extent(1), wr = w.extent(3);
  for (std::size_t a = 0; a < wl; ++a)
    for (std::size_t s = 0; s < d * d; ++s) {
      const std::size_t base = (a * d * d + s) * wr;
      if (w.data()[base + b1] != w.data()[base + b2]) return false;
    }
  return true;
}

template <Scalar T>
bool column_zero(const Tensor<T>& w, std::size_t b) {
  const std::size_t rows = w.size() / w.extent(3), wr = w.extent(3);
  for (std::size_t i = 0; i < rows; ++i)
    if (w.data()[i * wr + b] != T{0}) return false;
  return true;
}

template <Scalar T>
bool row_equal(const Tensor<T>& w, std::size_t a1, std::size_t a2) {
  const std::size_t stride = w.size() / w.extent(0);
  return std::equal(w.data() + a1 * stride, w.data() + (a1 + 1) * stride, w.data() + a2 * stride);
}

template <Scalar T>
bool row_zero(const Tensor<T>& w, std::size_t a) {
  const std::size_t stride = w.size() / w.extent(0);
  return std::all_of(w.data() + a * stride, w.data() + (a + 1) * stride,
                     [](T v) { return v == T{0}; });
}

// Rebuilds bond n (between sites n and n+1) keeping the listed channels;
// `fold` maps every dropped channel onto a kept one (or -1 to discard).
template <Scalar T>
void rebuild_bond(Mpo<T>& m, std::size_t n, const std::vector<long>& target, bool fold_left) {
  auto& left = m.sites[n];
  auto& right = m.sites[n + 1];
  const std::size_t w = left.extent(3);
  std::vector<long> newidx(w, -1);
  std::size_t kept = 0;
  for (std::size_t b = 0; b < w; ++b)
    if (target[b] == static_cast<long>(b)) newidx[b] = static_cast<long>(kept++);
  if (kept == w) return;
  if (kept == 0) kept = 1;  // keep a zero channel so the chain stays well-formed
  const std::size_t wl = left.extent(0), d = left.extent(1), wr2 = right.extent(3);
  Tensor<T> nl({wl, d, d, kept}), nr({kept, d, d, wr2});
  for (std::size_t b = 0; b < w; ++b) {
    if (target[b] < 0) continue;
    const auto dst = static_cast<std::size_t>(newidx[static_cast<std::size_t>(target[b])]);
    const bool primary = target[b] == static_cast<long>(b);
    // Folding adds the duplicate's contribution on the side where the
    // channels differ; the equal side keeps a single copy.
    if (primary || fold_left) {
      for (std::size_t a = 0; a < wl; ++a)
        for (std::size_t s = 0; s < d * d; ++s)
          nl.data()[(a * d * d + s) * kept + dst] += left.data()[(a * d * d + s) * w + b];
    }
    if (primary || !fold_left) {
      const std::size_t stride = d * d * wr2;
      for (std::size_t i = 0; i < stride; ++i) nr.data()[dst * stride + i] += right.data()[b * stride + i];
    }
  }
  left = std::move(nl);
  right = std::move(nr);
}

}  // namespace detail

/// Exact bond reduction: drops channels that are identically zero on either
/// side and merges channels whose incoming columns (or outgoing rows) are
/// bitwise equal. Automaton-built sums (shared identity "start"/"done"
/// channels, shared counters) collapse to their minimal form; no rounding is
/// introduced.
template <Scalar T>
Mpo<T> merge_channels(Mpo<T> m) {
  m.validate();
  const std::size_t len = m.length();
  if (len < 2) return m;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t n = 0; n + 1 < len; ++n) {
      const auto& left = m.sites[n];
      const auto& right = m.sites[n + 1];
      const std::size_t w = left.extent(3);
      std::vector<long> target(w);
      bool any = false;
      for (std::size_t b = 0; b < w; ++b) {
        target[b] = static_cast<long>(b);
        if (detail::column_zero(left, b) || detail::row_zero(right, b)) {
          target[b] = -1;
          any = true;
          continue;
        }
        for (std::size_t c = 0; c < b; ++c) {
          if (target[c] == static_cast<long>(c) && detail::column_equal(left, b, c)) {
            target[b] = static_cast<long>(c);
            any = true;
            break;
          }
        }
      }
      if (any) {
        detail::rebuild_bond(m, n, target, /*fold_left=*/false);
        changed = true;
      }
    }
    for (std::size_t n = len - 1; n-- > 0;) {
      const auto& left = m.sites[n];
      const auto& right = m.sites[n + 1];
      const std::size_t w = left.extent(3);
      std::vector<long> target(w);
      bool any = false;
      for (std::size_t b = 0; b < w; ++b) {
        target[b] = static_cast<long>(b);
        for (std::size_t c = 0; c < b; ++c) {
          if (target[c] == static_cast<long>(c) && detail::row_equal(right, b, c)) {
            target[b] = static_cast<long>(c);
            any = true;
            break;
          }
        }
      }
      if (any) {
        detail::rebuild_bond(m, n, target, /*fold_left=*/true);
        changed = true;
      }
    }
  }
  return m;
}

/// Optional SVD compression (left-to-right then right-to-left) discarding
/// singular values below rel_tol * s_max. Produces dense site tensors, so the
/// sparse kernels lose their advantage; builders do not use it.
template <Scalar T>
Mpo<T> compress_svd(Mpo<T> m, double rel_tol = 1e-14) {
  m.validate();
  const std::size_t len = m.length();
  auto sweep = [&](bool forward) {
    for (std::size_t step = 0; step + 1 < len; ++step) {
      const std::size_t n = forward ? step : len - 1 - step;
      auto& w = m.sites[n];
      const std::size_t wl = w.extent(0), d = w.extent(1), wr = w.extent(3);
      if (forward) {
        auto f = svd_matrix<T>(w.matrix(3), TruncationPolicy::exact());
        std::size_t k = 0;
        while (k < std::size_t(f.s.size()) && f.s(Eigen::Index(k)) > rel_tol * f.s(0)) ++k;
        k = std::max<std::size_t>(k, 1);
        Tensor<T> nw({wl, d, d, k});
        nw.matrix(3) = f.u.leftCols(Eigen::Index(k));
        auto& next = m.sites[n + 1];
        Tensor<T> nn({k, d, d, next.extent(3)});
        const RowMat<T> sv = f.s.head(Eigen::Index(k)).template cast<T>().asDiagonal() *
                             f.vh.topRows(Eigen::Index(k));
        nn.matrix(1) = sv * next.matrix(1);
        w = std::move(nw);
        next = std::move(nn);
      } else {
        auto f = svd_matrix<T>(w.matrix(1), TruncationPolicy::exact());
        std::size_t k = 0;
        while (k < std::size_t(f.s.size()) && f.s(Eigen::Index(k)) > rel_tol * f.s(0)) ++k;
        k = std::max<std::size_t>(k, 1);
        Tensor<T> nw({k, d, d, wr});
        nw.matrix(1) = f.vh.topRows(Eigen::Index(k));
        auto& prev = m.sites[n - 1];
        Tensor<T> np({prev.extent(0), d, d, k});
        const RowMat<T> us = f.u.leftCols(Eigen::Index(k)) *
                             f.s.head(Eigen::Index(k)).template cast<T>().asDiagonal();
        np.matrix(3) = prev.matrix(3) * us;
        w = std::move(nw);
        prev = std::move(np);
      }
    }
  };
  sweep(true);
  sweep(false);
  return m;
}

/// Nonzero entries of one MPO site, in (a, b, out, in) lexicographic order.
template <Scalar T>
struct SparseSite {
  struct Entry {
    std::uint32_t a, b, out, in;
    T value;
  };
  std::size_t wl = 0, wr = 0, d = 0;
  std::vector<Entry> entries;

  static SparseSite from(const Tensor<T>& w) {
    SparseSite s;
    s.wl = w.extent(0);
    s.d = w.extent(1);
    s.wr = w.extent(3);
    for (std::size_t a = 0; a < s.wl; ++a)
      for (std::size_t b = 0; b < s.wr; ++b)
        for (std::size_t o = 0; o < s.d; ++o)
          for (std::size_t i = 0; i < s.d; ++i) {
            const T v = w({a, o, i, b});
            if (v != T{0}) {
              s.entries.push_back({std::uint32_t(a), std::uint32_t(b), std::uint32_t(o),
                                   std::uint32_t(i), v});
            }
          }
    return s;
  }
};

template <Scalar T>
std::vector<SparseSite<T>> sparse_sites(const Mpo<T>& m) {
  std::vector<SparseSite<T>> out;
  out.reserve(m.length());
  for (const auto& w : m.sites) out.push_back(SparseSite<T>::from(w));
  return out;
}

}  // namespace fqmps
