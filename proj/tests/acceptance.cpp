// Acceptance gate: one PASS/FAIL line per criterion at its stated tolerance.
//
// Criteria that cannot be met by a correct implementation are marked as known
// and reported as FAIL without failing the process; --strict counts them too.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "fqmps/app/checkpoint.hpp"
#include "fqmps/app/eos.hpp"
#include "fqmps/app/problem.hpp"
#include "fqmps/app/validate.hpp"
#include "fqmps/model/builders.hpp"
#include "fqmps/model/observables.hpp"
#include "fqmps/oracle/constrained_ed.hpp"
#include "fqmps/oracle/dense.hpp"
#include "fqmps/oracle/free_fermions.hpp"
#include "fqmps/solvers/dmrg.hpp"
#include "fqmps/solvers/tdvp.hpp"

using namespace fqmps;
using namespace fqmps::app;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Gate {
 public:
  void report(const std::string& id, bool pass, const std::string& what, bool known = false) {
    std::printf("%s %-4s %s%s\n", pass ? "PASS" : "FAIL", id.c_str(), what.c_str(),
                !pass && known ? "  [known limitation]" : "");
    std::fflush(stdout);
    if (!pass) (known ? known_ : unexpected_)++;
  }
  int exit_code(bool strict) const { return unexpected_ + (strict ? known_ : 0) > 0 ? 1 : 0; }
  void summary() const {
    std::printf("\n%d unexpected failure(s), %d known limitation(s)\n", unexpected_, known_);
  }

 private:
  int unexpected_ = 0, known_ = 0;
};

ModelParams chain(int L, int N, double V) {
  ModelParams p;
  p.L = L;
  p.N = N;
  p.V = V;
  p.q_max = std::max(2, L - N + 1);
  return p;
}

struct GroundRun {
  DmrgResult r;
  double seconds = 0.0;
};

GroundRun ground(const Problem& pr, std::vector<std::size_t> bonds, DmrgConfig cfg = {}) {
  cfg.bond_schedule = std::move(bonds);
  const auto t0 = Clock::now();
  GroundRun g{dmrg_run(pr.h.mpo, uniform_start(pr), cfg, &pr.projector), 0.0};
  g.seconds = seconds_since(t0);
  return g;
}

/// Records of a Q1 domain-wall evolution.
struct Q1Record {
  double time, energy, norm;
  std::vector<double> entropy, density, q;
};

std::vector<Q1Record> evolve_q1(const Problem& pr, TdvpConfig cfg) {
  std::vector<Q1Record> out;
  tdvp_run(pr.h.mpo.cast<cplx>(), domain_wall_start(pr), cfg, [&](TrajectoryPoint& pt, const Mps<cplx>& s) {
    out.push_back({pt.time, pt.energy, pt.norm, pt.entropy, occupation_profile(s, pr.params), interparticle_profile(s)});
  });
  return out;
}

/// Max bipartite entropy of the occupation-basis evolution at each record.
std::vector<std::pair<double, double>> evolve_q2_entropy(const ModelParams& p, TdvpConfig cfg) {
  std::vector<std::pair<double, double>> out;
  auto psi0 = occupation_product<cplx>(domain_wall_sites(p.N), p.L);
  tdvp_run(build_q2_tv(p).cast<cplx>(), psi0, cfg, [&](TrajectoryPoint& pt, const Mps<cplx>&) {
    out.emplace_back(pt.time, *std::max_element(pt.entropy.begin(), pt.entropy.end()));
  });
  return out;
}

double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

/// Position where the density profile last drops through `thr`, interpolated.
double front_position(const std::vector<double>& n, double thr = 1e-2) {
  for (std::size_t x = n.size(); x-- > 0;) {
    if (n[x] >= thr) {
      if (x + 1 == n.size()) return double(n.size());
      return double(x + 1) + (n[x] - thr) / (n[x] - n[x + 1]);
    }
  }
  return 0.0;
}

double ed_distance(const ModelParams& p, double dt, double time) {
  const auto pr = make_problem(p, true);
  TdvpConfig cfg;
  cfg.dt = dt;
  cfg.t_final = time;
  TdvpEngine e(pr.h.mpo.cast<cplx>(), domain_wall_start(pr));
  e.expand_basis(cfg, cfg.initial_expansion_sweeps);
  for (long s = 0; s < cfg.steps(); ++s) e.step(dt, cfg, s);
  const oracle::ConstrainedBasis b(p.L, p.N);
  const auto ed = oracle::constrained_ed_evolve(b, p.t, p.V, oracle::ed_domain_wall(b), time);
  const Eigen::VectorXcd w = oracle::embed_in_q_space(b, ed, p.q_max);
  return (oracle::mps_to_dense(e.state()) - w).norm();
}

// 1-2: ground-state accuracy and leakage.
void ground_states(Gate& g, Mps<double>& q1_L40) {
  double worst_leak = 0.0;
  {
    const auto pr = make_problem(chain(16, 8, 0.0), true);
    const auto run = ground(pr, {16, 32, 64});
    const double err = std::abs(run.r.sweeps.back().energy - oracle::free_ground_energy(16, 8)) / 16;
    g.report("1a", err < 1e-8 && run.seconds < 60.0,
             fmt("free DMRG L=16 N=8 D=64: |dE|/L = %.2e (< 1e-8), %.1f s (< 60 s)", err, run.seconds));
    worst_leak = std::max(worst_leak, std::abs(*run.r.sweeps.back().leakage));
  }
  {
    // Gaps of ten or more empty sites carry negligible weight at half filling.
    auto p = chain(40, 20, 0.0);
    p.q_max = 10;
    const auto pr = make_problem(p, true);
    DmrgConfig cfg;
    cfg.mixing_schedule = {1e-1, 1e-2, 1e-3};
    cfg.eig_max_iter = 20;
    const auto run = ground(pr, {32, 64, 128}, cfg);
    const double err = std::abs(run.r.sweeps.back().energy - oracle::free_ground_energy(40, 20)) / 40;
    g.report("1b", err < 1e-7 && run.seconds < 600.0,
             fmt("free DMRG L=40 N=20 Q_max=10 D=128: |dE|/L = %.2e (< 1e-7), %.1f s (< 600 s)", err, run.seconds));
    worst_leak = std::max(worst_leak, std::abs(*run.r.sweeps.back().leakage));
    q1_L40 = run.r.state;
  }
  for (double V : {1.0, 8.0}) {
    const auto pr = make_problem(chain(12, 6, V), true);
    worst_leak = std::max(worst_leak, std::abs(*ground(pr, {16, 32, 64}).r.sweeps.back().leakage));
  }
  g.report("2", worst_leak < 1e-6,
           fmt("leakage |1 - <P_C>| of converged ground states (V = 0, 1, 8): max %.2e (< 1e-6)", worst_leak));
}

// 3-4: operator construction and representation equivalence.
void operators(Gate& g) {
  ValidateOptions full;
  full.tier = Tier::full;
  bool ok = false;
  auto j = app::detail::check_mpo_vs_dense(full, ok);
  g.report("3", ok,
           fmt("MPOs vs Kronecker operators, N <= 4, Q_max <= 4 (%d cases): max error %.1e, idempotence %.1e (< 1e-13)",
               int(j["cases"]), double(j["max_abs_error"]), double(j["max_idempotence_error"])));
  j = app::detail::check_sector_equivalence(full, ok);
  g.report("4a", ok,
           fmt("constrained ED vs occupation-basis sectors, L <= 10, V in {0,1,8}: ground %.1e (< 1e-12), MPO spectra "
               "%.1e (< 1e-11)",
               double(j["ed_ground_mismatch"]), double(j["mpo_spectral_mismatch"])));
  ValidateOptions literal;
  literal.literal_hopping = true;
  bool literal_ok = true;
  j = app::detail::check_sector_equivalence(literal, literal_ok);
  g.report("4b", !literal_ok,
           fmt("without the routed last-particle hop the equivalence breaks: spectral mismatch %.2e",
               double(j["mpo_spectral_mismatch"])));
}

// 5: entanglement of ground states.
void ground_entropy(Gate& g, const Mps<double>& q1_L40) {
  const auto cdw = product_state<double>(uniform_configuration(12, 6), 7);
  const double s_cdw = entropy_profile(cdw).max();
  g.report("5a", s_cdw == 0.0, fmt("CDW product state: max S_n = %.1e (== 0)", s_cdw));
  const double s1 = entropy_profile(q1_L40).max();
  const double bound = particle_entropy_bound(20, 10);
  const auto c = oracle::correlation_matrix(40, 20, 0.0, oracle::FreeInitial::ground);
  const double s2 = oracle::left_block_entropy(c, 20);
  g.report("5b", s1 < 0.25 * bound && s1 < 2.0 * s2 && s1 > 0.5 * s2,
           fmt("free ground state L=40 N=20: max S_n = %.4f (< 0.25 ln C(20,10) = %.4f; within x2 of the "
               "occupation-basis half-chain %.4f)",
               s1, 0.25 * bound, s2));
}

// 6: equation of state.
void equation_of_state(Gate& g) {
  auto gap_at_half = [](double V) {
    std::map<int, double> e;
    for (int N = 1; N < 12; ++N) e[N] = oracle::constrained_ed_ground(oracle::ConstrainedBasis(12, N), 1.0, V).energy;
    const auto table = eos_maxwell(e, 12);
    const auto& half = table.rows.at(5);
    return std::pair{e[7] + e[5] - 2.0 * e[6], half.vertex ? half.mu_high - half.mu_low : 0.0};
  };
  const auto [gap8, plateau8] = gap_at_half(8.0);
  g.report("6a", gap8 > 0.5 && plateau8 > 0.5,
           fmt("V=8 L=12: charge gap %.4f (> 0.5), half-filling plateau width %.4f", gap8, plateau8));
  const auto [gap1, plateau1] = gap_at_half(1.0);
  g.report("6b", gap1 < 0.1,
           fmt("V=1 L=12: charge gap %.4f (< 0.1); the free finite-size gap at L=12 is %.4f", gap1,
               oracle::free_ground_energy(12, 7) + oracle::free_ground_energy(12, 5) -
                   2.0 * oracle::free_ground_energy(12, 6)),
           true);
  ValidateOptions full;
  full.tier = Tier::full;
  bool ok = false;
  const auto j = app::detail::check_hole_particle(full, ok);
  g.report("6c", ok, fmt("hole vs particle picture, L=12, N in {5,6,7}, V=1: max |dE| %.2e (< 1e-9)",
                         double(j["max_energy_difference"])));
}

// 7-8: free domain wall.
void free_domain_wall(Gate& g) {
  const int L = 20, N = 10;
  const auto pr = make_problem(chain(L, N, 0.0), true);
  TdvpConfig cfg;
  cfg.dt = 0.02;
  cfg.t_final = 4.0;
  cfg.max_bond = 64;
  cfg.measure_stride = 10;
  const auto t0 = Clock::now();
  const auto rec = evolve_q1(pr, cfg);
  const double secs = seconds_since(t0);
  double dn = 0.0, dnorm = 0.0, de = 0.0;
  const double scale = std::max(std::abs(rec.front().energy), std::abs(pr.params.t));
  for (const auto& r : rec) {
    const auto c = oracle::correlation_matrix(L, N, r.time, oracle::FreeInitial::domain_wall);
    for (int x = 0; x < L; ++x) dn = std::max(dn, std::abs(r.density[std::size_t(x)] - c(x, x).real()));
    dnorm = std::max(dnorm, std::abs(r.norm - 1.0));
    de = std::max(de, std::abs(r.energy - rec.front().energy));
  }
  g.report("7a", dn < 2e-3,
           fmt("free domain wall L=20 dt=0.02 t<=4 D=64: max |n_x - C_xx| = %.2e (< 2e-3), %.0f s", dn, secs));
  g.report("7b", dnorm < 1e-9 && de < 1e-6 * scale,
           fmt("norm drift %.1e (< 1e-9), energy drift %.1e (< 1e-6 * max(|E|, t) = %.0e)", dnorm, de, 1e-6 * scale));

  const auto p10 = chain(10, 5, 1.0);
  const double e1 = ed_distance(p10, 0.1, 1.0), e2 = ed_distance(p10, 0.05, 1.0);
  const double ratio = e1 / e2;
  g.report("7c", ratio > 3.0 && ratio < 5.0,
           fmt("dt halving, L=10 N=5 V=1 t=1: |psi - psi_ED| %.2e -> %.2e, ratio %.2f (4 +- 25%%); full-rank "
               "integration is exact up to Krylov accuracy",
               e1, e2, ratio),
           true);

  auto q2 = evolve_q2_entropy(pr.params, cfg);
  const double s1 = max_of(rec.back().entropy), s2 = q2.back().second;
  g.report("8a", s1 < 0.5 * s2,
           fmt("t=4, D=64 both: max S_n first-quantized %.4f < half of occupation-basis %.4f", s1, s2));
  const auto& early = rec.at(1).entropy;
  const auto peak = std::size_t(std::max_element(early.begin(), early.end()) - early.begin());
  g.report("8b", peak + 1 == early.size() && early.back() > 0.0,
           fmt("t=%.2f: entropy peaks at bond %zu of %zu (the last); S = %.2e there, %.2e at the first bond",
               rec.at(1).time, peak + 1, early.size(), early.back(), early.front()));
}

// 9: interacting domain walls.
void interacting_domain_wall(Gate& g) {
  const int L = 24, N = 12;
  TdvpConfig cfg;
  cfg.dt = 0.02;
  cfg.t_final = 4.0;
  cfg.max_bond = 64;
  cfg.measure_stride = 25;
  std::map<double, std::vector<Q1Record>> runs;
  for (double V : {0.0, 1.0, 2.0, 4.0}) runs[V] = evolve_q1(make_problem(chain(L, N, V), true), cfg);
  auto at = [&](double V, double time) -> const Q1Record& {
    for (const auto& r : runs[V])
      if (std::abs(r.time - time) < 1e-9) return r;
    throw DomainError("no record at the requested time");
  };
  auto rate = [&](double V) { return (max_of(at(V, 4.0).entropy) - max_of(at(V, 2.0).entropy)) / 2.0; };
  const double r0 = rate(0.0), r4 = rate(4.0);
  g.report("9a", r4 < 0.2 * r0,
           fmt("L=24 entropy growth over t in [2,4]: V=4 %.4f/t < 0.2 x V=0 %.4f/t", r4, r0));
  std::string fronts;
  bool monotone = true;
  double prev = 1e9;
  for (double V : {0.0, 1.0, 2.0, 4.0}) {
    const double d = front_position(at(V, 4.0).density) - N;
    fronts += fmt(" V=%g:%.3f", V, d);
    monotone = monotone && d < prev;
    prev = d;
  }
  g.report("9b", monotone, "front distance at t=4 (n_x = 0.01 crossing) decreases with V:" + fronts);
}

// 10: distance and occupation sanity at L=40.
void long_domain_wall(Gate& g) {
  auto p = chain(40, 20, 0.0);
  p.q_max = 10;
  TdvpConfig cfg;
  cfg.dt = 0.02;
  cfg.t_final = 6.0;
  cfg.max_bond = 64;
  cfg.measure_stride = 25;
  const auto t0 = Clock::now();
  const auto rec = evolve_q1(make_problem(p, true), cfg);
  double qmax = 0.0, dsum = 0.0;
  for (const auto& r : rec) {
    qmax = std::max(qmax, max_of(r.q));
    double s = 0.0;
    for (double v : r.density) s += v;
    dsum = std::max(dsum, std::abs(s - 20.0));
  }
  g.report("10", qmax < 10.0 && dsum < 1e-8,
           fmt("domain wall L=40 Q_max=10 t<=6: max <q_n> = %.3f (< 10), |sum n_x - N| = %.1e (< 1e-8), %.0f s", qmax,
               dsum, seconds_since(t0)));
}

// 11: engineering.
void engineering(Gate& g) {
  const auto t0 = Clock::now();
  ValidateOptions quick;
  const auto rep = validate_suite(quick);
  const double secs = seconds_since(t0);
  std::string failed;
  for (const auto& c : rep.checks)
    if (!c.passed) failed += " " + c.name;
  g.report("11a", rep.passed() && secs <= 120.0,
           fmt("validate --tier quick: %s in %.1f s (<= 120 s)%s", rep.passed() ? "passed" : "FAILED", secs,
               failed.c_str()));

  const auto pr = make_problem(chain(12, 6, 2.0), true);
  Checkpoint a, b;
  a.model = b.model = pr.params;
  a.state = ground(pr, {16, 32, 64}).r.state;
  b.state = ground(pr, {16, 32, 64}).r.state;
  const auto bytes = encode_checkpoint(a);
  const bool roundtrip = encode_checkpoint(decode_checkpoint(bytes)) == bytes;
  g.report("11b", roundtrip, "checkpoint encode/decode/encode is bit-exact");

  const auto dw = make_problem(chain(10, 5, 1.0), true);
  TdvpConfig cfg;
  cfg.t_final = 0.5;
  cfg.max_bond = 12;
  Checkpoint c, d;
  c.model = d.model = dw.params;
  c.state = tdvp_step(dw.h.mpo.cast<cplx>(), domain_wall_start(dw), 0.05, cfg);
  d.state = tdvp_step(dw.h.mpo.cast<cplx>(), domain_wall_start(dw), 0.05, cfg);
  const bool same = encode_checkpoint(b) == bytes && encode_checkpoint(c) == encode_checkpoint(d);
  g.report("11c", same, "same-seed single-threaded DMRG and TDVP reruns produce identical bytes");
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0) {
      strict = true;
    } else {
      std::fprintf(stderr, "usage: %s [--strict]\n", argv[0]);
      return 2;
    }
  }
  Gate g;
  try {
    Mps<double> q1_L40;
    operators(g);
    ground_states(g, q1_L40);
    ground_entropy(g, q1_L40);
    equation_of_state(g);
    free_domain_wall(g);
    interacting_domain_wall(g);
    long_domain_wall(g);
    engineering(g);
  } catch (const std::exception& e) {
    std::printf("FAIL      aborted: %s\n", e.what());
    return 1;
  }
  g.summary();
  return g.exit_code(strict);
}
