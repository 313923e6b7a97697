#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <cmath>
#include <map>
#include <vector>

#include "fqmps/core/errors.hpp"
#include "fqmps/core/krylov.hpp"
#include "fqmps/model/params.hpp"

namespace fqmps::oracle {

inline double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// All ordered configurations 1 <= x_1 < ... < x_N <= L in lexicographic
/// order of x (equivalently of the q-tuples).
class ConstrainedBasis {
 public:
  ConstrainedBasis(int L, int N, double cap = 2e6) : L_(L), N_(N) {
    if (L < 1 || N < 1 || N > L) throw DomainError("ConstrainedBasis: need 1 <= N <= L");
    if (std::exp(log_binomial(L, N)) > cap * (1 + 1e-12)) {
      throw SizeError("ConstrainedBasis: C(" + std::to_string(L) + "," + std::to_string(N) +
                      ") exceeds the configured cap");
    }
    std::vector<int> x(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) x[std::size_t(i)] = i + 1;
    while (true) {
      index_.emplace(x, configs_.size());
      configs_.push_back(x);
      int i = N - 1;
      while (i >= 0 && x[std::size_t(i)] == L - (N - 1 - i)) --i;
      if (i < 0) break;
      ++x[std::size_t(i)];
      for (int j = i + 1; j < N; ++j) x[std::size_t(j)] = x[std::size_t(j - 1)] + 1;
    }
  }

  int L() const { return L_; }
  int N() const { return N_; }
  std::size_t size() const { return configs_.size(); }
  const std::vector<int>& positions(std::size_t i) const { return configs_.at(i); }

  std::vector<int> distances(std::size_t i) const {
    const auto& x = configs_.at(i);
    std::vector<int> q(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) q[n] = n == 0 ? x[0] : x[n] - x[n - 1];
    return q;
  }

  /// Index of a position tuple, or -1 if it is not an ordered configuration.
  long find(const std::vector<int>& x) const {
    auto it = index_.find(x);
    return it == index_.end() ? -1 : static_cast<long>(it->second);
  }

 private:
  int L_, N_;
  std::vector<std::vector<int>> configs_;
  std::map<std::vector<int>, std::size_t> index_;
};

/// First-quantized t-V Hamiltonian on the ordered sector: each particle hops
/// to a free neighbouring site, repulsion counts adjacent pairs. Hole mode
/// adds V on occupied edge sites 1 and L.
inline Eigen::SparseMatrix<double> constrained_hamiltonian(const ConstrainedBasis& b, double t,
                                                           double V, Mode mode = Mode::particle) {
  std::vector<Eigen::Triplet<double>> trip;
  const int L = b.L(), N = b.N();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto& x = b.positions(i);
    double diag = 0.0;
    for (int n = 0; n + 1 < N; ++n)
      if (x[std::size_t(n + 1)] == x[std::size_t(n)] + 1) diag += V;
    if (mode == Mode::hole) {
      if (x.front() == 1) diag += V;
      if (x.back() == L) diag += V;
    }
    if (diag != 0.0) trip.emplace_back(Eigen::Index(i), Eigen::Index(i), diag);
    for (int n = 0; n < N; ++n) {
      for (int s : {-1, 1}) {
        auto y = x;
        y[std::size_t(n)] += s;
        const long j = b.find(y);
        if (j >= 0) trip.emplace_back(Eigen::Index(j), Eigen::Index(i), -t);
      }
    }
  }
  Eigen::SparseMatrix<double> h(Eigen::Index(b.size()), Eigen::Index(b.size()));
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

struct EdGround {
  double energy = 0.0;
  Eigen::VectorXd state;
};

inline constexpr Eigen::Index kDenseEdLimit = 4000;

inline EdGround constrained_ed_ground(const ConstrainedBasis& b, double t, double V,
                                      Mode mode = Mode::particle) {
  const auto h = constrained_hamiltonian(b, t, V, mode);
  if (h.rows() <= kDenseEdLimit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(h)};
    return {es.eigenvalues()(0), es.eigenvectors().col(0)};
  }
  LanczosOptions opt;
  opt.tol = 1e-13;
  opt.max_iter = 20000;
  opt.krylov_dim = 80;
  auto apply = [&](const Vec<double>& v) -> Vec<double> { return h * v; };
  Vec<double> v0 = Vec<double>::Ones(h.rows());
  for (Eigen::Index i = 0; i < v0.size(); ++i) v0(i) += 1e-3 * std::sin(double(i));
  auto r = lanczos_min<double>(apply, v0, opt);
  if (!r.converged) throw NumericError("constrained_ed_ground: Lanczos did not converge", r.residual);
  return {r.eigenvalue, r.eigenvector};
}

inline EdGround constrained_ed_ground(const ModelParams& p) {
  return constrained_ed_ground(ConstrainedBasis(p.L, p.N), p.t, p.V, p.mode);
}

/// exp(-i H time) psi0 on the ordered sector.
inline Eigen::VectorXcd constrained_ed_evolve(const ConstrainedBasis& b, double t, double V,
                                              const Eigen::VectorXcd& psi0, double time,
                                              Mode mode = Mode::particle) {
  if (psi0.size() != Eigen::Index(b.size())) throw DimensionError("constrained_ed_evolve: size mismatch");
  const auto h = constrained_hamiltonian(b, t, V, mode);
  if (h.rows() <= kDenseEdLimit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(h)};
    const Eigen::MatrixXcd u = es.eigenvectors().cast<cplx>();
    Eigen::VectorXcd coef = u.adjoint() * psi0;
    for (Eigen::Index k = 0; k < coef.size(); ++k) coef(k) *= std::exp(cplx(0, -time * es.eigenvalues()(k)));
    return u * coef;
  }
  const Eigen::SparseMatrix<cplx> hc = h.cast<cplx>();
  auto apply = [&](const Vec<cplx>& v) -> Vec<cplx> { return hc * v; };
  ExpvOptions opt;
  opt.tol = 1e-12;
  opt.max_dim = 80;
  const int steps = std::max(1, int(std::ceil(std::abs(time) / 0.05)));
  Vec<cplx> v = psi0;
  for (int s = 0; s < steps; ++s) v = krylov_expv<cplx>(apply, v, cplx(0, -time / steps), opt);
  return v;
}

/// <n_x> (x = 1..L, returned 0-based) of a state on the ordered sector.
template <class Vector>
std::vector<double> ed_occupations(const ConstrainedBasis& b, const Vector& psi) {
  std::vector<double> n(std::size_t(b.L()), 0.0);
  const double norm = psi.squaredNorm();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double w = std::norm(psi(Eigen::Index(i))) / norm;
    for (int x : b.positions(i)) n[std::size_t(x - 1)] += w;
  }
  return n;
}

/// Domain-wall configuration x_n = n as a basis vector.
inline Eigen::VectorXcd ed_domain_wall(const ConstrainedBasis& b) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(Eigen::Index(b.size()));
  v(0) = 1.0;
  return v;
}

}  // namespace fqmps::oracle
