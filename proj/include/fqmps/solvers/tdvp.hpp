#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "fqmps/core/krylov.hpp"
#include "fqmps/core/linalg.hpp"
#include "fqmps/mps/environment.hpp"
#include "fqmps/mps/mpo.hpp"
#include "fqmps/mps/mps.hpp"

namespace fqmps {

struct TdvpConfig {
  double dt = 0.02;
  double t_final = 1.0;
  std::size_t max_bond = 64;
  double krylov_tol = 1e-10;
  int krylov_max_dim = 60;
  /// Steps between recorded snapshots; time 0 and the final time are always recorded.
  int measure_stride = 10;
  /// New directions tried per bond and half-sweep; 0 gives fixed-rank TDVP.
  std::size_t expansion = 8;
  /// Expansion-only sweeps at t = 0, before the first step.
  int initial_expansion_sweeps = 2;
  /// Relative singular weight dropped when bonds are recompressed.
  double discard_tolerance = 1e-12;
  std::uint64_t seed = 7;

  long steps() const { return std::lround(t_final / dt); }

  void validate() const {
    if (!(dt > 0.0)) throw DomainError("TdvpConfig: dt must be > 0");
    if (!(t_final >= 0.0)) throw DomainError("TdvpConfig: t_final must be >= 0");
    if (std::abs(double(steps()) * dt - t_final) > 1e-9 * std::max(1.0, t_final)) {
      throw DomainError("TdvpConfig: t_final must be a whole number of steps");
    }
    if (max_bond < 1) throw DomainError("TdvpConfig: max_bond must be >= 1");
    if (initial_expansion_sweeps < 0) throw DomainError("TdvpConfig: initial_expansion_sweeps must be >= 0");
    if (measure_stride < 1) throw DomainError("TdvpConfig: measure_stride must be >= 1");
    if (!(krylov_tol > 0.0)) throw DomainError("TdvpConfig: krylov_tol must be > 0");
    if (!(discard_tolerance >= 0.0 && discard_tolerance < 1.0)) {
      throw DomainError("TdvpConfig: discard_tolerance must lie in [0, 1)");
    }
  }
};

struct StepStats {
  double discarded = 0.0;  // summed over bonds
  std::size_t max_bond = 0;
};

struct TrajectoryPoint {
  long step = 0;
  double time = 0.0;
  double energy = 0.0;
  double norm = 1.0;
  /// Largest per-step discarded weight since the previous point.
  double max_discarded = 0.0;
  std::size_t max_bond = 0;
  std::vector<double> entropy;
  std::vector<double> q_profile;
  std::vector<double> occupation;
  std::optional<double> leakage;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
};

/// Fills model-specific fields of a point from an immutable snapshot.
using TdvpObserver = std::function<void(TrajectoryPoint&, const Mps<cplx>&)>;

namespace detail {

// Up to `count` orthonormal columns spanning (1 - Q Q^+) X, found with a
// seeded randomized range finder. Directions below `rel_floor` relative to X
// are dropped.
inline RowMat<cplx> complement_directions(const RowMat<cplx>& q, const RowMat<cplx>& x, std::size_t count,
                                          std::uint64_t seed, double rel_floor = 1e-12) {
  const Eigen::Index m = q.rows();
  count = std::min<std::size_t>(count, std::size_t(m - q.cols()));
  const double xn = x.norm();
  if (count == 0 || xn == 0.0) return RowMat<cplx>(m, 0);
  const Eigen::Index s = std::min<Eigen::Index>(Eigen::Index(count) + 4, x.cols());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  RowMat<cplx> omega(x.cols(), s);
  for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = cplx(g(rng), g(rng));
  RowMat<cplx> y = x * omega;
  for (int pass = 0; pass < 2; ++pass) y -= q * (q.adjoint() * y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr{Eigen::MatrixXcd(y)};
  const auto& r = qr.matrixR();
  const double scale = xn * omega.norm() / std::sqrt(double(s));
  Eigen::Index keep = 0;
  while (keep < std::min<Eigen::Index>(Eigen::Index(count), std::min(m, s)) &&
         std::abs(r(keep, keep)) > rel_floor * scale) {
    ++keep;
  }
  if (keep == 0) return RowMat<cplx>(m, 0);
  RowMat<cplx> e = Eigen::MatrixXcd(qr.householderQ()).leftCols(keep);
  // Re-orthogonalize against q and within e.
  e -= q * (q.adjoint() * e);
  Eigen::HouseholderQR<Eigen::MatrixXcd> again{Eigen::MatrixXcd(e)};
  return Eigen::MatrixXcd(again.householderQ()).leftCols(keep);
}

inline std::uint64_t mix_seed(std::uint64_t seed, long step, std::size_t site, int dir) {
  std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  for (std::uint64_t v : {std::uint64_t(step), std::uint64_t(site), std::uint64_t(dir)}) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

}  // namespace detail

/// Second-order single-site TDVP with bond expansion.
///
/// Each step runs a left-to-right and a right-to-left pass, every site
/// evolved forward by dt/2 and every bond backward by dt/2. Before a bond
/// is evolved its basis is widened by zero-weight directions taken from the
/// Hamiltonian acting on the current center, so the represented state is
/// unchanged but the projected dynamics can leave the old rank. The
/// right-to-left pass recompresses each bond to max_bond.
class TdvpEngine {
 public:
  TdvpEngine(const Mpo<cplx>& h, Mps<cplx> psi) : w_(sparse_sites(h)) {
    h.validate();
    psi.validate();
    if (h.length() != psi.length()) throw DimensionError("tdvp: MPO and MPS lengths differ");
    for (std::size_t n = 0; n < h.length(); ++n) {
      if (h.phys_dim(n) != psi.phys_dim(n)) throw DimensionError("tdvp: physical dimensions differ");
    }
    psi_ = normalized(std::move(psi), 0);
    const std::size_t len = psi_.length();
    left_.assign(len, Env<cplx>::boundary());
    right_.assign(len, Env<cplx>::boundary());
    for (std::size_t n = len - 1; n > 0; --n) {
      right_[n - 1] = update_right(right_[n], psi_.sites[n], psi_.sites[n], w_[n]);
    }
  }

  const Mps<cplx>& state() const { return psi_; }

  /// Widens every bond with zero-weight directions without evolving.
  void expand_basis(const TdvpConfig& cfg, int sweeps) {
    const std::size_t len = psi_.length();
    double unused = 0.0;
    for (int s = 0; s < sweeps; ++s) {
      const long tag = -1 - s;
      for (std::size_t n = 0; n + 1 < len; ++n) {
        const auto c = split_right(n, cfg, detail::mix_seed(cfg.seed, tag, n, 0));
        absorb_right(n + 1, c);
      }
      for (std::size_t n = len - 1; n > 0; --n) {
        const auto c = split_left(n, cfg, detail::mix_seed(cfg.seed, tag, n, 1), unused, false);
        absorb_left(n - 1, c);
      }
    }
  }

  StepStats step(double dt, const TdvpConfig& cfg, long step_index) {
    const std::size_t len = psi_.length();
    StepStats st;
    const cplx forward(0.0, -dt / 2), backward(0.0, dt / 2);
    for (std::size_t n = 0; n < len; ++n) {
      evolve_site(n, forward, cfg);
      if (n + 1 == len) break;
      auto c = split_right(n, cfg, detail::mix_seed(cfg.seed, step_index, n, 0));
      absorb_right(n + 1, evolve_bond(left_[n + 1], right_[n], c, backward, cfg));
    }
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t n = len - 1 - k;
      evolve_site(n, forward, cfg);
      if (n == 0) break;
      const auto c = split_left(n, cfg, detail::mix_seed(cfg.seed, step_index, n, 1), st.discarded, true);
      absorb_left(n - 1, evolve_bond(left_[n], right_[n - 1], c, backward, cfg));
    }
    st.max_bond = psi_.max_bond();
    return st;
  }

 private:
  void absorb_right(std::size_t n, const RowMat<cplx>& c) {
    auto& b = psi_.sites[n];
    Tensor<cplx> nb({std::size_t(c.rows()), b.extent(1), b.extent(2)});
    nb.matrix(1) = c * b.matrix(1);
    b = std::move(nb);
    psi_.center = n;
  }

  void absorb_left(std::size_t n, const RowMat<cplx>& c) {
    auto& a = psi_.sites[n];
    Tensor<cplx> na({a.extent(0), a.extent(1), std::size_t(c.cols())});
    na.matrix(2) = a.matrix(2) * c;
    a = std::move(na);
    psi_.center = n;
  }

  Vec<cplx> expv(const std::function<Vec<cplx>(const Vec<cplx>&)>& apply, const Vec<cplx>& v, cplx tau,
                 const TdvpConfig& cfg) const {
    if (v.norm() == 0.0) throw NumericError("tdvp: center tensor vanished");
    ExpvOptions opt;
    opt.tol = cfg.krylov_tol;
    opt.max_dim = cfg.krylov_max_dim;
    return krylov_expv<cplx>(apply, v, tau, opt);
  }

  void evolve_site(std::size_t n, cplx tau, const TdvpConfig& cfg) {
    auto& m = psi_.sites[n];
    const Shape shape = m.shape();
    auto apply = [&](const Vec<cplx>& v) -> Vec<cplx> {
      Tensor<cplx> x(shape, std::vector<cplx>(v.data(), v.data() + v.size()));
      const auto y = apply_site(left_[n], w_[n], right_[n], x);
      return Eigen::Map<const Vec<cplx>>(y.data(), Eigen::Index(y.size()));
    };
    const Vec<cplx> v0 = Eigen::Map<const Vec<cplx>>(m.data(), Eigen::Index(m.size()));
    const Vec<cplx> v1 = expv(apply, v0, tau, cfg);
    std::copy(v1.data(), v1.data() + v1.size(), m.data());
  }

  RowMat<cplx> evolve_bond(const Env<cplx>& l, const Env<cplx>& r, const RowMat<cplx>& c, cplx tau,
                           const TdvpConfig& cfg) const {
    const Eigen::Index rows = c.rows(), cols = c.cols();
    auto apply = [&](const Vec<cplx>& v) -> Vec<cplx> {
      const RowMat<cplx> x = Eigen::Map<const RowMat<cplx>>(v.data(), rows, cols);
      const RowMat<cplx> y = apply_bond(l, r, x);
      return Eigen::Map<const Vec<cplx>>(y.data(), y.size());
    };
    const Vec<cplx> v0 = Eigen::Map<const Vec<cplx>>(c.data(), c.size());
    const Vec<cplx> v1 = expv(apply, v0, tau, cfg);
    return Eigen::Map<const RowMat<cplx>>(v1.data(), rows, cols);
  }

  // Left-orthonormalizes site n (with expansion) and returns the bond matrix.
  RowMat<cplx> split_right(std::size_t n, const TdvpConfig& cfg, std::uint64_t seed) {
    auto& m = psi_.sites[n];
    const std::size_t dl = m.extent(0), d = m.extent(1);
    auto [q, r] = qr_matrix<cplx>(m.matrix(2));
    const auto room = cfg.max_bond > std::size_t(q.cols()) ? cfg.max_bond - std::size_t(q.cols()) : 0;
    if (cfg.expansion > 0 && room > 0) {
      const RowMat<cplx> y = detail::left_half(left_[n], w_[n], m);
      const RowMat<cplx> e = detail::complement_directions(q, y, std::min(room, cfg.expansion), seed);
      if (e.cols() > 0) {
        RowMat<cplx> qe(q.rows(), q.cols() + e.cols());
        qe << q, e;
        RowMat<cplx> re = RowMat<cplx>::Zero(qe.cols(), r.cols());
        re.topRows(r.rows()) = r;
        q = std::move(qe);
        r = std::move(re);
      }
    }
    Tensor<cplx> a({dl, d, std::size_t(q.cols())});
    a.matrix(2) = q;
    m = std::move(a);
    left_[n + 1] = update_left(left_[n], m, m, w_[n]);
    return r;
  }

  // Right-orthonormalizes site n (optionally truncating), then expands;
  // returns the bond matrix.
  RowMat<cplx> split_left(std::size_t n, const TdvpConfig& cfg, std::uint64_t seed, double& discarded,
                          bool truncate) {
    auto& m = psi_.sites[n];
    const std::size_t d = m.extent(1), dr = m.extent(2);
    // Columns of q are the new right basis vectors (rows of the isometry).
    RowMat<cplx> q, c;
    if (truncate) {
      auto f = svd_matrix<cplx>(m.matrix(1), TruncationPolicy{cfg.max_bond, cfg.discard_tolerance});
      discarded += f.discarded_weight;
      q = f.vh.transpose();
      c = f.u * f.s.asDiagonal();
    } else {
      auto [qt, rt] = qr_matrix<cplx>(m.matrix(1).transpose());
      q = std::move(qt);
      c = rt.transpose();
    }
    const auto room = cfg.max_bond > std::size_t(q.cols()) ? cfg.max_bond - std::size_t(q.cols()) : 0;
    if (cfg.expansion > 0 && room > 0) {
      const RowMat<cplx> h = detail::right_half(right_[n], w_[n], m);
      const RowMat<cplx> e =
          detail::complement_directions(q, h.transpose(), std::min(room, cfg.expansion), seed);
      if (e.cols() > 0) {
        RowMat<cplx> qe(q.rows(), q.cols() + e.cols());
        qe << q, e;
        RowMat<cplx> ce = RowMat<cplx>::Zero(c.rows(), qe.cols());
        ce.leftCols(c.cols()) = c;
        q = std::move(qe);
        c = std::move(ce);
      }
    }
    Tensor<cplx> b({std::size_t(q.cols()), d, dr});
    b.matrix(1) = q.transpose();
    m = std::move(b);
    right_[n - 1] = update_right(right_[n], m, m, w_[n]);
    // Truncation loses weight; the state is kept at unit norm.
    const double nc = c.norm();
    if (nc == 0.0) throw NumericError("tdvp: bond matrix vanished");
    return c / nc;
  }

  std::vector<SparseSite<cplx>> w_;
  Mps<cplx> psi_;
  std::vector<Env<cplx>> left_, right_;
};

/// Evolves psi0 to cfg.t_final. `observer` fills model-specific fields of
/// every recorded point; `on_point` sees each point as it is recorded and
/// `on_checkpoint` is called with (step, state) after every recorded point.
/// `first_step` resumes a run whose state at step first_step is psi0.
inline Trajectory tdvp_run(const Mpo<cplx>& h, const Mps<cplx>& psi0, const TdvpConfig& cfg,
                           const TdvpObserver& observer = {},
                           const std::function<void(const TrajectoryPoint&)>& on_point = {},
                           const std::function<void(long, const Mps<cplx>&)>& on_checkpoint = {},
                           long first_step = 0) {
  cfg.validate();
  const long total = cfg.steps();
  if (first_step < 0 || first_step > total) throw DomainError("tdvp_run: resume step out of range");
  TdvpEngine engine(h, psi0);
  Trajectory traj;
  double window_discard = 0.0;
  auto record = [&](long step) {
    const Mps<cplx> snap = normalized(engine.state(), 0);
    TrajectoryPoint pt;
    pt.step = step;
    pt.time = double(step) * cfg.dt;
    pt.energy = real_of(expectation(snap, h));
    pt.norm = std::sqrt(norm_squared(engine.state()));
    pt.max_discarded = window_discard;
    pt.max_bond = snap.max_bond();
    pt.entropy = entropy_profile(snap).values;
    if (observer) observer(pt, snap);
    traj.points.push_back(pt);
    if (on_point) on_point(traj.points.back());
    if (on_checkpoint) on_checkpoint(step, engine.state());
    window_discard = 0.0;
  };
  if (first_step == 0) {
    engine.expand_basis(cfg, cfg.initial_expansion_sweeps);
    record(0);
  }
  for (long s = first_step; s < total; ++s) {
    const auto st = engine.step(cfg.dt, cfg, s);
    window_discard = std::max(window_discard, st.discarded);
    if ((s + 1) % cfg.measure_stride == 0 || s + 1 == total) record(s + 1);
  }
  return traj;
}

/// Single step on a copy of `psi` (centered anywhere).
inline Mps<cplx> tdvp_step(const Mpo<cplx>& h, const Mps<cplx>& psi, double dt, const TdvpConfig& cfg,
                           long step_index = 0) {
  TdvpEngine e(h, psi);
  if (step_index == 0) e.expand_basis(cfg, cfg.initial_expansion_sweeps);
  e.step(dt, cfg, step_index);
  return e.state();
}

}  // namespace fqmps
