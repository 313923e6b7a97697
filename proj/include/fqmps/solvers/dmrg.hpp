#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "fqmps/core/krylov.hpp"
#include "fqmps/core/linalg.hpp"
#include "fqmps/mps/environment.hpp"
#include "fqmps/mps/mpo.hpp"
#include "fqmps/mps/mps.hpp"

namespace fqmps {

struct DmrgConfig {
  int max_sweeps = 30;
  /// Bond cap per sweep; the last entry applies to all later sweeps.
  std::vector<std::size_t> bond_schedule{16, 32, 64};
  /// Subspace-expansion strength per sweep. Past the end of the list the last
  /// value halves every sweep, and values below mixing_floor count as zero.
  std::vector<double> mixing_schedule{1e-1};
  double mixing_floor = 1e-4;
  double eig_tol = 1e-10;
  int eig_max_iter = 60;
  double energy_tol = 1e-10;
  /// Kept small: weight dropped here cannot return once mixing has stopped.
  double discard_tolerance = 1e-16;
  double leakage_alarm = 1e-6;
  /// Asymmetry bound for the per-sweep Hermiticity probe (relative).
  double hermiticity_tol = 1e-8;
  std::uint64_t seed = 1;
  /// Compute <H^2> - <H>^2 after every sweep (cost grows with the MPO bond squared).
  bool report_variance = false;

  std::size_t bond_at(int sweep) const {
    return bond_schedule.at(std::min<std::size_t>(std::size_t(sweep), bond_schedule.size() - 1));
  }

  double mixing_at(int sweep) const {
    double a;
    if (std::size_t(sweep) < mixing_schedule.size()) {
      a = mixing_schedule[std::size_t(sweep)];
    } else {
      a = mixing_schedule.back() * std::pow(0.5, double(std::size_t(sweep) - mixing_schedule.size() + 1));
    }
    return a < mixing_floor ? 0.0 : a;
  }

  void validate() const {
    if (max_sweeps < 1) throw DomainError("DmrgConfig: max_sweeps must be >= 1");
    if (bond_schedule.empty() || mixing_schedule.empty()) {
      throw DomainError("DmrgConfig: schedules must have at least one entry");
    }
    for (auto d : bond_schedule)
      if (d < 1) throw DomainError("DmrgConfig: bond dimensions must be >= 1");
    for (double a : mixing_schedule)
      if (!(a >= 0.0)) throw DomainError("DmrgConfig: mixing must be >= 0");
    if (!(eig_tol > 0.0) || !(energy_tol > 0.0) || !(leakage_alarm > 0.0)) {
      throw DomainError("DmrgConfig: tolerances must be > 0");
    }
  }
};

struct SweepReport {
  int sweep = 0;
  double energy = 0.0;
  std::optional<double> variance;
  double max_discarded = 0.0;
  std::optional<double> leakage;
  bool leakage_warning = false;
  std::size_t max_bond = 0;
  double mixing = 0.0;
  double seconds = 0.0;
};

struct DmrgResult {
  Mps<double> state;
  std::vector<SweepReport> sweeps;
  bool converged = false;
};

enum class SweepDirection { left_to_right, right_to_left };

/// Sweep state: the MPS, cached environments and the sparse MPO.
///
/// left[n] contracts sites 0..n-1 and right[n] sites n+1..N-1; entries are
/// valid on the side of the orthogonality center they describe.
class DmrgEngine {
 public:
  DmrgEngine(const Mpo<double>& h, Mps<double> psi) : w_(sparse_sites(h)) {
    h.validate();
    psi.validate();
    if (h.length() != psi.length()) throw DimensionError("dmrg: MPO and MPS lengths differ");
    for (std::size_t n = 0; n < h.length(); ++n) {
      if (h.phys_dim(n) != psi.phys_dim(n)) throw DimensionError("dmrg: physical dimensions differ");
    }
    psi_ = normalized(std::move(psi), 0);
    const std::size_t len = psi_.length();
    left_.assign(len, Env<double>::boundary());
    right_.assign(len, Env<double>::boundary());
    for (std::size_t n = len - 1; n > 0; --n) {
      right_[n - 1] = update_right(right_[n], psi_.sites[n], psi_.sites[n], w_[n]);
    }
  }

  const Mps<double>& state() const { return psi_; }
  const Env<double>& left_env(std::size_t n) const { return left_.at(n); }
  const Env<double>& right_env(std::size_t n) const { return right_.at(n); }
  const std::vector<SparseSite<double>>& sparse_mpo() const { return w_; }

  /// One pass from the current edge to the opposite one. The center must be
  /// at site 0 (left_to_right) or N-1 (right_to_left).
  SweepReport sweep(SweepDirection dir, std::size_t max_bond, double mixing, const DmrgConfig& cfg) {
    const std::size_t len = psi_.length();
    const std::size_t start = dir == SweepDirection::left_to_right ? 0 : len - 1;
    if (!psi_.center || *psi_.center != start) {
      throw DomainError("dmrg_sweep: state must be centered at the sweep's starting edge");
    }
    SweepReport rep;
    rep.mixing = mixing;
    const TruncationPolicy policy{max_bond, cfg.discard_tolerance};
    probe_hermiticity(start, cfg);
    for (std::size_t step = 0; step < len; ++step) {
      const std::size_t n = dir == SweepDirection::left_to_right ? step : len - 1 - step;
      rep.energy = optimize_site(n, cfg);
      if (step + 1 == len) break;
      const double dw = dir == SweepDirection::left_to_right ? move_right(n, policy, mixing)
                                                             : move_left(n, policy, mixing);
      rep.max_discarded = std::max(rep.max_discarded, dw);
    }
    rep.max_bond = psi_.max_bond();
    return rep;
  }

  /// Effective operator at site n applied to a center tensor.
  Tensor<double> apply_effective(std::size_t n, const Tensor<double>& m) const {
    return apply_site(left_[n], w_[n], right_[n], m);
  }

 private:
  double optimize_site(std::size_t n, const DmrgConfig& cfg) {
    auto& m = psi_.sites[n];
    const Shape shape = m.shape();
    auto apply = [&](const Vec<double>& v) -> Vec<double> {
      Tensor<double> x(shape, std::vector<double>(v.data(), v.data() + v.size()));
      const auto y = apply_effective(n, x);
      return Eigen::Map<const Vec<double>>(y.data(), Eigen::Index(y.size()));
    };
    LanczosOptions opt;
    opt.tol = cfg.eig_tol;
    opt.max_iter = cfg.eig_max_iter;
    opt.krylov_dim = std::min(cfg.eig_max_iter, 30);
    opt.seed = cfg.seed + n;
    const Vec<double> v0 = Eigen::Map<const Vec<double>>(m.data(), Eigen::Index(m.size()));
    auto r = lanczos_min<double>(apply, v0, opt);
    std::copy(r.eigenvector.data(), r.eigenvector.data() + r.eigenvector.size(), m.data());
    return r.eigenvalue;
  }

  // Dominant eigenvectors of a PSD matrix, trimmed like a singular spectrum.
  static std::pair<RowMat<double>, double> dominant_basis(const RowMat<double>& rho, double weight_m,
                                                          const TruncationPolicy& policy,
                                                          const RowMat<double>& m, bool columns) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rho);
    if (es.info() != Eigen::Success) throw NumericError("dmrg: density-matrix diagonalization failed");
    const Eigen::Index dim = rho.rows();
    Eigen::VectorXd s(dim);
    for (Eigen::Index i = 0; i < dim; ++i) s(i) = std::sqrt(std::max(es.eigenvalues()(dim - 1 - i), 0.0));
    auto [keep, unused] = truncation_rank(s, policy);
    (void)unused;
    RowMat<double> u(dim, Eigen::Index(keep));
    for (Eigen::Index i = 0; i < Eigen::Index(keep); ++i) u.col(i) = es.eigenvectors().col(dim - 1 - i);
    // Weight of the center tensor outside the kept space.
    const double kept = columns ? (u.transpose() * m).squaredNorm() : (m * u).squaredNorm();
    return {u, std::max(0.0, 1.0 - kept / weight_m)};
  }

  double move_right(std::size_t n, const TruncationPolicy& policy, double mixing) {
    auto& a = psi_.sites[n];
    auto& b = psi_.sites[n + 1];
    const std::size_t dl = a.extent(0), d = a.extent(1);
    const RowMat<double> m = a.matrix(2);
    RowMat<double> u, carry;
    double dw;
    if (mixing > 0.0) {
      const RowMat<double> y = detail::left_half(left_[n], w_[n], a);
      const double nm = m.squaredNorm(), ny = std::max(y.squaredNorm(), 1e-300);
      const RowMat<double> rho = m * m.transpose() / nm + (mixing * mixing / ny) * (y * y.transpose());
      std::tie(u, dw) = dominant_basis(rho, nm, policy, m, true);
      carry = u.transpose() * m;
    } else {
      auto f = svd_matrix<double>(m, policy);
      u = f.u;
      dw = f.discarded_weight;
      carry = f.s.asDiagonal() * f.vh;
    }
    const auto k = std::size_t(u.cols());
    Tensor<double> an({dl, d, k});
    an.matrix(2) = u;
    a = std::move(an);
    Tensor<double> bn({k, b.extent(1), b.extent(2)});
    bn.matrix(1) = carry * b.matrix(1);
    b = std::move(bn);
    normalize_center(n + 1);
    left_[n + 1] = update_left(left_[n], a, a, w_[n]);
    return dw;
  }

  double move_left(std::size_t n, const TruncationPolicy& policy, double mixing) {
    auto& b = psi_.sites[n];
    auto& a = psi_.sites[n - 1];
    const std::size_t d = b.extent(1), dr = b.extent(2);
    const RowMat<double> m = b.matrix(1);
    RowMat<double> v, carry;  // v: (d*dr) x k, orthonormal columns
    double dw;
    if (mixing > 0.0) {
      const RowMat<double> hm = detail::right_half(right_[n], w_[n], b);
      const double nm = m.squaredNorm(), nh = std::max(hm.squaredNorm(), 1e-300);
      const RowMat<double> rho = m.transpose() * m / nm + (mixing * mixing / nh) * (hm.transpose() * hm);
      std::tie(v, dw) = dominant_basis(rho, nm, policy, m, false);
      carry = m * v;
    } else {
      auto f = svd_matrix<double>(m, policy);
      v = f.vh.transpose();
      dw = f.discarded_weight;
      carry = f.u * f.s.asDiagonal();
    }
    const auto k = std::size_t(v.cols());
    Tensor<double> bn({k, d, dr});
    bn.matrix(1) = v.transpose();
    b = std::move(bn);
    Tensor<double> an({a.extent(0), a.extent(1), k});
    an.matrix(2) = a.matrix(2) * carry;
    a = std::move(an);
    normalize_center(n - 1);
    right_[n - 1] = update_right(right_[n], b, b, w_[n]);
    return dw;
  }

  void normalize_center(std::size_t c) {
    auto& t = psi_.sites[c];
    const double nrm = t.norm();
    if (nrm == 0.0) throw NumericError("dmrg: center tensor vanished");
    t *= 1.0 / nrm;
    psi_.center = c;
  }

  void probe_hermiticity(std::size_t n, const DmrgConfig& cfg) const {
    const auto& m = psi_.sites[n];
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> g;
    Tensor<double> x(m.shape()), y(m.shape());
    for (auto& v : x.values()) v = g(rng);
    for (auto& v : y.values()) v = g(rng);
    const auto hx = apply_effective(n, x), hy = apply_effective(n, y);
    double xhy = 0.0, hxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      xhy += x.data()[i] * hy.data()[i];
      hxy += hx.data()[i] * y.data()[i];
    }
    const double scale = hx.norm() * y.norm() + hy.norm() * x.norm();
    if (std::abs(xhy - hxy) > cfg.hermiticity_tol * std::max(scale, 1e-300)) {
      throw NumericError("dmrg: effective operator is not Hermitian (asymmetry " +
                             std::to_string(std::abs(xhy - hxy) / scale) + ")",
                         std::abs(xhy - hxy));
    }
  }

  std::vector<SparseSite<double>> w_;
  Mps<double> psi_;
  std::vector<Env<double>> left_, right_;
};

/// One sweep of an engine; see DmrgEngine::sweep.
inline SweepReport dmrg_sweep(DmrgEngine& engine, SweepDirection dir, std::size_t max_bond, double mixing,
                              const DmrgConfig& cfg) {
  return engine.sweep(dir, max_bond, mixing, cfg);
}

/// Ground-state search by single-site DMRG with density-matrix subspace
/// expansion. `projector`, when given, is used for the per-sweep leakage
/// 1 - <P>. `on_sweep` sees every report as it is produced.
inline DmrgResult dmrg_run(const Mpo<double>& h, const Mps<double>& psi0, const DmrgConfig& cfg,
                           const Mpo<double>* projector = nullptr,
                           const std::function<void(const SweepReport&)>& on_sweep = {}) {
  cfg.validate();
  DmrgEngine engine(h, psi0);
  DmrgResult out;
  double last = std::numeric_limits<double>::infinity();
  for (int s = 0; s < cfg.max_sweeps; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const double mix = cfg.mixing_at(s);
    const std::size_t d = cfg.bond_at(s);
    // A sweep is a right-going and a left-going pass; the center returns to 0.
    auto r1 = dmrg_sweep(engine, SweepDirection::left_to_right, d, mix, cfg);
    auto rep = dmrg_sweep(engine, SweepDirection::right_to_left, d, mix, cfg);
    rep.max_discarded = std::max(rep.max_discarded, r1.max_discarded);
    rep.sweep = s;
    if (projector) {
      rep.leakage = 1.0 - expectation(engine.state(), *projector);
      rep.leakage_warning = std::abs(*rep.leakage) > cfg.leakage_alarm;
    }
    if (cfg.report_variance) rep.variance = energy_variance(engine.state(), h);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.sweeps.push_back(rep);
    if (on_sweep) on_sweep(rep);
    const bool schedule_done = std::size_t(s + 1) >= cfg.bond_schedule.size() && mix == 0.0;
    if (schedule_done && std::abs(last - rep.energy) < cfg.energy_tol) {
      out.converged = true;
      break;
    }
    last = rep.energy;
  }
  out.state = engine.state();
  return out;
}

/// Most uniform ordered configuration: x_n = floor((n-1) L / N) + 1, returned
/// as inter-particle distances. At half filling this is the CDW (1, 2, ..., 2).
inline std::vector<int> uniform_configuration(int L, int N) {
  if (N < 1 || N > L) throw DomainError("uniform_configuration: need 1 <= N <= L");
  std::vector<int> q;
  long prev = 0;
  for (int n = 1; n <= N; ++n) {
    const long x = (long(n) - 1) * L / N + 1;
    q.push_back(int(x - prev));
    prev = x;
  }
  return q;
}

}  // namespace fqmps
