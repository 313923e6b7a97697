#pragma once

#include <vector>

#include "fqmps/mps/mpo.hpp"
#include "fqmps/mps/mps.hpp"

namespace fqmps {

/// Partial contraction of <bra| W |ket> over one side of the chain.
///
/// Storage is a stacked matrix with one block per MPO channel:
///  - left environments:  block a is L[a](bra, ket), shape (w * D_bra) x D_ket;
///  - right environments: block b is R[b]^T(ket, bra), shape (w * D_ket) x D_bra.
/// Both layouts turn the dominant contractions into single large GEMMs.
template <Scalar T>
struct Env {
  RowMat<T> cat;
  std::size_t channels = 1;

  std::size_t block_rows() const { return static_cast<std::size_t>(cat.rows()) / channels; }
  std::size_t cols() const { return static_cast<std::size_t>(cat.cols()); }

  static Env boundary() { return {RowMat<T>::Ones(1, 1), 1}; }
};

namespace detail {

template <Scalar T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <Scalar T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Y(l*d + out, b*Dr + r) = sum W(a,out,in,b) [L M](a, l; in, r)
template <Scalar T>
RowMat<T> left_half(const Env<T>& left, const SparseSite<T>& w, const Tensor<T>& m) {
  const auto dl = Eigen::Index(m.extent(0)), d = Eigen::Index(m.extent(1)),
             dr = Eigen::Index(m.extent(2));
  if (left.channels != w.wl || Eigen::Index(left.cols()) != dl) {
    throw DimensionError("environment: left block does not match site tensor");
  }
  const Eigen::Index dlb = Eigen::Index(left.block_rows());
  const RowMat<T> x = left.cat * m.matrix(1);  // (wl*dlb) x (d*dr)
  RowMat<T> y = RowMat<T>::Zero(dlb * d, Eigen::Index(w.wr) * dr);
  const Eigen::Index ycols = y.cols();
  for (const auto& e : w.entries) {
    StridedMap<T> yb(y.data() + Eigen::Index(e.out) * ycols + Eigen::Index(e.b) * dr, dlb, dr,
                     Eigen::OuterStride<>(d * ycols));
    yb.noalias() += e.value * x.block(Eigen::Index(e.a) * dlb, Eigen::Index(e.in) * dr, dlb, dr);
  }
  return y;
}

// H(a*Dl + l, out*Dr + r_bra) = sum W(a,out,in,b) M(l,in,r_ket) R[b](r_bra,r_ket)
template <Scalar T>
RowMat<T> right_half(const Env<T>& right, const SparseSite<T>& w, const Tensor<T>& m) {
  const auto dl = Eigen::Index(m.extent(0)), d = Eigen::Index(m.extent(1)),
             dr = Eigen::Index(m.extent(2));
  if (right.channels != w.wr || Eigen::Index(right.block_rows()) != dr) {
    throw DimensionError("environment: right block does not match site tensor");
  }
  const Eigen::Index drb = Eigen::Index(right.cols());
  const Tensor<T> mp = m.permuted({1, 0, 2});  // (in, l, r)
  Eigen::Map<const RowMat<T>> mm(mp.data(), d * dl, dr);
  RowMat<T> h = RowMat<T>::Zero(Eigen::Index(w.wl) * dl, d * drb);
  std::vector<RowMat<T>> g(w.wr);
  std::vector<bool> have(w.wr, false);
  for (const auto& e : w.entries) {
    if (!have[e.b]) {
      g[e.b] = mm * right.cat.middleRows(Eigen::Index(e.b) * dr, dr);  // (in*Dl + l, r_bra)
      have[e.b] = true;
    }
    h.block(Eigen::Index(e.a) * dl, Eigen::Index(e.out) * drb, dl, drb).noalias() +=
        e.value * g[e.b].middleRows(Eigen::Index(e.in) * dl, dl);
  }
  return h;
}

}  // namespace detail

/// Left environment after absorbing one site.
template <Scalar T>
Env<T> update_left(const Env<T>& left, const Tensor<T>& bra, const Tensor<T>& ket,
                   const SparseSite<T>& w) {
  const RowMat<T> y = detail::left_half(left, w, ket);
  const auto dr_ket = Eigen::Index(ket.extent(2)), dr_bra = Eigen::Index(bra.extent(2));
  if (bra.extent(1) != ket.extent(1) || Eigen::Index(left.block_rows()) != Eigen::Index(bra.extent(0))) {
    throw DimensionError("update_left: bra does not match environment");
  }
  Env<T> out{RowMat<T>(Eigen::Index(w.wr) * dr_bra, dr_ket), w.wr};
  const auto bra2 = bra.matrix(2);
  for (std::size_t b = 0; b < w.wr; ++b) {
    out.cat.middleRows(Eigen::Index(b) * dr_bra, dr_bra).noalias() =
        bra2.adjoint() * y.middleCols(Eigen::Index(b) * dr_ket, dr_ket);
  }
  return out;
}

/// Right environment after absorbing one site.
template <Scalar T>
Env<T> update_right(const Env<T>& right, const Tensor<T>& bra, const Tensor<T>& ket,
                    const SparseSite<T>& w) {
  const RowMat<T> h = detail::right_half(right, w, ket);
  if (bra.extent(1) != ket.extent(1) || right.cols() != bra.extent(2)) {
    throw DimensionError("update_right: bra does not match environment");
  }
  return {h * bra.matrix(1).adjoint(), w.wl};
}

/// Effective single-site operator applied to a center tensor.
template <Scalar T>
Tensor<T> apply_site(const Env<T>& left, const SparseSite<T>& w, const Env<T>& right,
                     const Tensor<T>& m) {
  const RowMat<T> y = detail::left_half(left, w, m);
  if (right.channels != w.wr || right.block_rows() != m.extent(2)) {
    throw DimensionError("apply_site: right environment does not match");
  }
  Tensor<T> out({left.block_rows(), m.extent(1), right.cols()});
  out.matrix(2).noalias() = y * right.cat;
  return out;
}

/// Effective zero-site operator applied to a bond matrix C (D_left x D_right).
template <Scalar T>
RowMat<T> apply_bond(const Env<T>& left, const Env<T>& right, const RowMat<T>& c) {
  if (left.channels != right.channels) throw DimensionError("apply_bond: channel mismatch");
  const auto dl = Eigen::Index(left.block_rows()), dr = c.cols();
  const RowMat<T> x = left.cat * c;  // (w*dl) x dr
  RowMat<T> out = RowMat<T>::Zero(dl, Eigen::Index(right.cols()));
  for (std::size_t a = 0; a < left.channels; ++a) {
    out.noalias() += x.middleRows(Eigen::Index(a) * dl, dl) *
                     right.cat.middleRows(Eigen::Index(a) * dr, dr);
  }
  return out;
}

/// <bra| W |ket>, including both norm_log factors.
template <Scalar T>
T mpo_matrix_element(const Mps<T>& bra, const Mpo<T>& op, const Mps<T>& ket) {
  if (bra.length() != op.length() || ket.length() != op.length()) {
    throw DimensionError("expectation: chain lengths differ");
  }
  Env<T> env = Env<T>::boundary();
  for (std::size_t n = 0; n < op.length(); ++n) {
    if (op.phys_dim(n) != ket.phys_dim(n) || op.phys_dim(n) != bra.phys_dim(n)) {
      throw DimensionError("expectation: physical dimensions differ");
    }
    env = update_left(env, bra.sites[n], ket.sites[n], SparseSite<T>::from(op.sites[n]));
  }
  return env.cat(0, 0) * T(std::exp(bra.norm_log + ket.norm_log));
}

/// <psi|W|psi> / <psi|psi>.
template <Scalar T>
T expectation(const Mps<T>& psi, const Mpo<T>& op) {
  return mpo_matrix_element(psi, op, psi) / inner(psi, psi);
}

/// W|psi> as an MPS with bond dimension w*D, without compression.
template <Scalar T>
Mps<T> apply_mpo(const Mpo<T>& op, const Mps<T>& psi) {
  if (op.length() != psi.length()) throw DimensionError("apply_mpo: chain lengths differ");
  Mps<T> out;
  out.norm_log = psi.norm_log;
  for (std::size_t n = 0; n < op.length(); ++n) {
    if (op.phys_dim(n) != psi.phys_dim(n)) throw DimensionError("apply_mpo: physical dimensions differ");
    const auto w = SparseSite<T>::from(op.sites[n]);
    const auto& m = psi.sites[n];
    const std::size_t dl = m.extent(0), d = m.extent(1), dr = m.extent(2);
    Tensor<T> t({w.wl * dl, d, w.wr * dr});
    for (const auto& e : w.entries)
      for (std::size_t l = 0; l < dl; ++l)
        for (std::size_t r = 0; r < dr; ++r)
          t.data()[((e.a * dl + l) * d + e.out) * w.wr * dr + e.b * dr + r] +=
              e.value * m.data()[(l * d + e.in) * dr + r];
    out.sites.push_back(std::move(t));
  }
  return out;
}

/// <psi|W^2|psi> - <psi|W|psi>^2 for a Hermitian W.
template <Scalar T>
double energy_variance(const Mps<T>& psi, const Mpo<T>& op) {
  const double nn = norm_squared(psi);
  const double e = real_of(mpo_matrix_element(psi, op, psi)) / nn;
  return norm_squared(apply_mpo(op, psi)) / nn - e * e;
}

}  // namespace fqmps
