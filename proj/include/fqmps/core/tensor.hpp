#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "fqmps/core/errors.hpp"

namespace fqmps {

using cplx = std::complex<double>;

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};
template <class T>
inline constexpr bool is_complex_v = is_complex<T>::value;

template <class T>
concept Scalar = std::same_as<T, double> || std::same_as<T, cplx>;

template <Scalar T>
inline T conj_of(T v) {
  if constexpr (is_complex_v<T>) {
    return std::conj(v);
  } else {
    return v;
  }
}

template <Scalar T>
inline double real_of(T v) {
  if constexpr (is_complex_v<T>) {
    return v.real();
  } else {
    return v;
  }
}

template <Scalar T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <Scalar T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Shape = std::vector<std::size_t>;

inline std::size_t shape_volume(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += std::to_string(s[i]);
    if (i + 1 < s.size()) out += ",";
  }
  return out + ")";
}

/// Dense row-major tensor. The last index runs fastest; this layout is part
/// of the checkpoint format and of every kernel that maps tensors to
/// matrices, so it must not change.
template <Scalar T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_volume(shape_), T{0}) {
    check_extents();
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_volume(shape_)) {
      throw DimensionError("Tensor: " + std::to_string(data_.size()) +
                           " entries do not fill shape " + shape_string(shape_));
    }
  }

  static Tensor identity(std::size_t n) {
    Tensor id({n, n});
    for (std::size_t i = 0; i < n; ++i) id.data_[i * n + i] = T{1};
    return id;
  }

  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  std::size_t offset(std::span<const std::size_t> idx) const {
    if (idx.size() != shape_.size()) throw DimensionError("Tensor: index rank mismatch");
    std::size_t off = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] >= shape_[k]) throw DimensionError("Tensor: index out of range");
      off = off * shape_[k] + idx[k];
    }
    return off;
  }

  T& operator()(std::initializer_list<std::size_t> idx) {
    return data_[offset(std::span<const std::size_t>(idx.begin(), idx.size()))];
  }
  const T& operator()(std::initializer_list<std::size_t> idx) const {
    return data_[offset(std::span<const std::size_t>(idx.begin(), idx.size()))];
  }

  Tensor reshaped(Shape new_shape) const {
    if (shape_volume(new_shape) != size()) {
      throw DimensionError("Tensor: cannot reshape " + shape_string(shape_) + " to " +
                           shape_string(new_shape));
    }
    return Tensor(std::move(new_shape), data_);
  }

  /// Axis `k` of the result is axis `perm[k]` of this tensor.
  Tensor permuted(const std::vector<std::size_t>& perm) const {
    const std::size_t r = rank();
    if (perm.size() != r) throw DimensionError("Tensor: permutation rank mismatch");
    std::vector<bool> seen(r, false);
    for (auto p : perm) {
      if (p >= r || seen[p]) throw DimensionError("Tensor: invalid permutation");
      seen[p] = true;
    }
    Shape out_shape(r);
    for (std::size_t k = 0; k < r; ++k) out_shape[k] = shape_[perm[k]];
    Tensor out(out_shape);
    if (size() == 0) return out;
    std::vector<std::size_t> in_stride(r, 1);
    for (std::size_t k = r; k-- > 1;) in_stride[k - 1] = in_stride[k] * shape_[k];
    std::vector<std::size_t> stride(r);
    for (std::size_t k = 0; k < r; ++k) stride[k] = in_stride[perm[k]];
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t dst = 0; dst < out.size(); ++dst) {
      out.data_[dst] = data_[src];
      for (std::size_t k = r; k-- > 0;) {
        if (++idx[k] < out_shape[k]) {
          src += stride[k];
          break;
        }
        src -= stride[k] * (out_shape[k] - 1);
        idx[k] = 0;
      }
    }
    return out;
  }

  Tensor conj() const {
    Tensor out(*this);
    if constexpr (is_complex_v<T>) {
      for (auto& v : out.data_) v = std::conj(v);
    }
    return out;
  }

  double norm() const {
    double s = 0.0;
    for (const auto& v : data_) s += std::norm(v);
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  Tensor& operator*=(T alpha) {
    for (auto& v : data_) v *= alpha;
    return *this;
  }

  Tensor& operator+=(const Tensor& o) {
    if (o.shape_ != shape_) throw DimensionError("Tensor: shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator-=(const Tensor& o) {
    if (o.shape_ != shape_) throw DimensionError("Tensor: shape mismatch in -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  friend Tensor operator*(T alpha, Tensor t) { return t *= alpha; }
  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }

  bool operator==(const Tensor& o) const = default;

  /// Row-major matrix view grouping the first `row_axes` axes as rows.
  Eigen::Map<RowMat<T>> matrix(std::size_t row_axes) {
    auto [r, c] = split_extents(row_axes);
    return Eigen::Map<RowMat<T>>(data_.data(), static_cast<Eigen::Index>(r),
                                 static_cast<Eigen::Index>(c));
  }
  Eigen::Map<const RowMat<T>> matrix(std::size_t row_axes) const {
    auto [r, c] = split_extents(row_axes);
    return Eigen::Map<const RowMat<T>>(data_.data(), static_cast<Eigen::Index>(r),
                                       static_cast<Eigen::Index>(c));
  }

  template <Scalar U>
  Tensor<U> cast() const {
    std::vector<U> d(data_.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      if constexpr (std::same_as<U, double> && is_complex_v<T>) {
        d[i] = data_[i].real();
      } else {
        d[i] = U(data_[i]);
      }
    }
    return Tensor<U>(shape_, std::move(d));
  }

  static Tensor from_matrix(const RowMat<T>& m) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    t.matrix(1) = m;
    return t;
  }

 private:
  void check_extents() const {
    for (auto e : shape_) {
      if (e == 0) throw DimensionError("Tensor: extents must be positive, got " + shape_string(shape_));
    }
  }

  std::pair<std::size_t, std::size_t> split_extents(std::size_t row_axes) const {
    if (row_axes > rank()) throw DimensionError("Tensor: row axis count exceeds rank");
    std::size_t r = 1;
    for (std::size_t k = 0; k < row_axes; ++k) r *= shape_[k];
    return {r, r == 0 ? 0 : size() / r};
  }

  Shape shape_;
  std::vector<T> data_;
};

using AxisPairs = std::vector<std::pair<std::size_t, std::size_t>>;

/// Sums over the paired axes of `a` and `b`. The result carries the unpaired
/// axes of `a` followed by the unpaired axes of `b`, each in original order.
template <Scalar T>
Tensor<T> contract(const Tensor<T>& a, const Tensor<T>& b, const AxisPairs& pairs) {
  std::vector<bool> a_used(a.rank(), false), b_used(b.rank(), false);
  std::vector<std::size_t> a_sum, b_sum;
  for (auto [ia, ib] : pairs) {
    if (ia >= a.rank() || ib >= b.rank()) throw DimensionError("contract: axis out of range");
    if (a_used[ia] || b_used[ib]) throw DimensionError("contract: axis paired twice");
    if (a.extent(ia) != b.extent(ib)) {
      throw DimensionError("contract: extent mismatch " + std::to_string(a.extent(ia)) + " vs " +
                           std::to_string(b.extent(ib)));
    }
    a_used[ia] = b_used[ib] = true;
    a_sum.push_back(ia);
    b_sum.push_back(ib);
  }
  std::vector<std::size_t> a_perm, b_perm;
  Shape out_shape;
  std::size_t m = 1, n = 1, k = 1;
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (!a_used[i]) {
      a_perm.push_back(i);
      out_shape.push_back(a.extent(i));
      m *= a.extent(i);
    }
  }
  for (auto i : a_sum) {
    a_perm.push_back(i);
    k *= a.extent(i);
  }
  for (auto i : b_sum) b_perm.push_back(i);
  for (std::size_t i = 0; i < b.rank(); ++i) {
    if (!b_used[i]) {
      b_perm.push_back(i);
      out_shape.push_back(b.extent(i));
      n *= b.extent(i);
    }
  }
  const Tensor<T> ap = a.permuted(a_perm);
  const Tensor<T> bp = b.permuted(b_perm);
  Eigen::Map<const RowMat<T>> am(ap.data(), Eigen::Index(m), Eigen::Index(k));
  Eigen::Map<const RowMat<T>> bm(bp.data(), Eigen::Index(k), Eigen::Index(n));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor<T> out(out_shape);
  Eigen::Map<RowMat<T>> om(out.data(), Eigen::Index(m), Eigen::Index(n));
  om.noalias() = am * bm;
  return out;
}

}  // namespace fqmps
