#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "fqmps/app/checkpoint.hpp"
#include "fqmps/app/config.hpp"
#include "fqmps/app/eos.hpp"
#include "fqmps/app/problem.hpp"
#include "fqmps/model/builders.hpp"
#include "fqmps/model/observables.hpp"
#include "fqmps/oracle/constrained_ed.hpp"
#include "fqmps/oracle/dense.hpp"
#include "fqmps/oracle/free_fermions.hpp"
#include "fqmps/oracle/kron.hpp"
#include "fqmps/solvers/dmrg.hpp"
#include "fqmps/solvers/tdvp.hpp"
#include "json.hpp"

namespace fqmps::app {

struct ValidateOptions {
  Tier tier = Tier::quick;
  /// Build every hopping term without the last-particle hop.
  bool literal_hopping = false;
  /// Called with each check name before it runs.
  std::function<void(const std::string&)> on_start;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  nlohmann::json detail;
};

struct ValidateReport {
  Tier tier = Tier::quick;
  bool literal_hopping = false;
  std::vector<CheckResult> checks;
  nlohmann::json entropy_table;  // full tier only

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = kVersion;
    j["tier"] = to_string(tier);
    j["literal_hopping"] = literal_hopping;
    j["passed"] = passed();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
      j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"seconds", c.seconds}, {"detail", c.detail}});
    if (!entropy_table.is_null()) j["entropy_table"] = entropy_table;
    return j;
  }
};

namespace detail {

inline ModelParams chain_params(int L, int N, double V, bool literal) {
  ModelParams p;
  p.L = L;
  p.N = N;
  p.V = V;
  p.q_max = std::max(2, L - N + 1);
  p.literal_hopping = literal;
  return p;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline DmrgConfig validation_dmrg() {
  DmrgConfig c;
  c.bond_schedule = {16, 32, 64};
  c.max_sweeps = 20;
  return c;
}

inline nlohmann::json check_mpo_vs_dense(const ValidateOptions& o, bool& ok) {
  const int top = o.tier == Tier::full ? 4 : 3;
  double worst = 0.0, worst_idem = 0.0;
  int cases = 0;
  for (int N = 1; N <= top; ++N)
    for (int q = 2; q <= top; ++q)
      for (int L : {N, N + 1, N + 3}) {
        auto p = chain_params(L, N, 1.3, o.literal_hopping);
        p.t = 0.9;
        p.q_max = q;
        p.lambda = 17.0;
        const Eigen::MatrixXd hv = oracle::kron_hv(N, q, p.V), pairs = oracle::kron_pair_hops(N, q, p.t);
        const Eigen::MatrixXd lone = oracle::kron_last_hop(N, q, p.t);
        const Eigen::MatrixXd pc = oracle::enum_constraint_projector(L, N, q);
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(pc.rows(), pc.cols());
        worst = std::max(worst, max_abs(oracle::mpo_to_dense(build_hv(p)) - hv));
        worst = std::max(worst, max_abs(oracle::mpo_to_dense(build_ht(p, p.literal_hopping)) - pairs - lone));
        const Eigen::MatrixXd dpc = oracle::mpo_to_dense(build_projector_C(p));
        worst = std::max(worst, max_abs(dpc - pc));
        worst_idem = std::max(worst_idem, max_abs(dpc * dpc - dpc));
        const Eigen::MatrixXd h = oracle::mpo_to_dense(assemble_hamiltonian(p).mpo);
        worst = std::max(worst, max_abs(h - (pairs + hv + 17.0 * (id - pc) + pc * lone * pc)));
        ++cases;
      }
  ok = worst < 1e-13 && worst_idem < 1e-13;
  return {{"cases", cases}, {"max_abs_error", worst}, {"max_idempotence_error", worst_idem}, {"tolerance", 1e-13}};
}

inline nlohmann::json check_sector_equivalence(const ValidateOptions& o, bool& ok) {
  const int top = o.tier == Tier::full ? 10 : 8;
  double worst_ed = 0.0, worst_mpo = 0.0;
  nlohmann::json worst_case;
  for (int L = 2; L <= top; ++L)
    for (double V : {0.0, 1.0, 8.0}) {
      const Eigen::MatrixXd q2 = oracle::q2_dense_hamiltonian(L, 1.0, V);
      for (int N = 1; N <= L; ++N) {
        const Eigen::VectorXd sector = oracle::sector_spectrum(q2, L, N);
        const oracle::ConstrainedBasis b(L, N);
        const double e_ed = oracle::constrained_ed_ground(b, 1.0, V).energy;
        worst_ed = std::max(worst_ed, std::abs(e_ed - sector(0)));
        const auto p = chain_params(L, N, V, o.literal_hopping);
        const Eigen::MatrixXd h = oracle::mpo_on_sector(assemble_hamiltonian(p).mpo, b);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
        const double mismatch = (es.eigenvalues() - sector).cwiseAbs().maxCoeff();
        if (mismatch > worst_mpo) {
          worst_mpo = mismatch;
          worst_case = {{"L", L}, {"N", N}, {"V", V}};
        }
      }
    }
  ok = worst_ed < 1e-12 && worst_mpo < 1e-11;
  return {{"max_L", top},
          {"ed_ground_mismatch", worst_ed},
          {"mpo_spectral_mismatch", worst_mpo},
          {"worst_case", worst_case},
          {"tolerance_ground", 1e-12},
          {"tolerance_spectrum", 1e-11}};
}

inline nlohmann::json check_dmrg_vs_ed(const ValidateOptions& o, bool& ok) {
  nlohmann::json runs = nlohmann::json::array();
  ok = true;
  std::vector<std::array<double, 3>> cases{{10, 5, 2.0}};
  if (o.tier == Tier::full) cases.push_back({12, 6, 8.0});
  for (const auto& [Ld, Nd, V] : cases) {
    const int L = int(Ld), N = int(Nd);
    const auto pr = make_problem(chain_params(L, N, V, o.literal_hopping), true);
    const auto r = dmrg_run(pr.h.mpo, uniform_start(pr), validation_dmrg(), &pr.projector);
    const double ed = oracle::constrained_ed_ground(oracle::ConstrainedBasis(L, N), 1.0, V).energy;
    const double err = std::abs(r.sweeps.back().energy - ed);
    const double leak = std::abs(*r.sweeps.back().leakage);
    ok = ok && err < 1e-9 && leak < 1e-6;
    runs.push_back({{"L", L}, {"N", N}, {"V", V}, {"energy_error", err}, {"leakage", leak}});
  }
  return {{"runs", runs}, {"tolerance", 1e-9}};
}

inline nlohmann::json check_tdvp_vs_ed(const ValidateOptions& o, bool& ok) {
  const bool full = o.tier == Tier::full;
  const int L = full ? 12 : 10, N = L / 2;
  const double V = full ? 2.0 : 1.0, time = full ? 2.0 : 1.0;
  const auto pr = make_problem(chain_params(L, N, V, o.literal_hopping), true);
  TdvpConfig cfg;
  cfg.t_final = time;
  TdvpEngine e(pr.h.mpo.cast<cplx>(), domain_wall_start(pr));
  e.expand_basis(cfg, cfg.initial_expansion_sweeps);
  for (long s = 0; s < cfg.steps(); ++s) e.step(cfg.dt, cfg, s);
  const oracle::ConstrainedBasis b(L, N);
  const auto ed = oracle::constrained_ed_evolve(b, 1.0, V, oracle::ed_domain_wall(b), time);
  const Eigen::VectorXcd w = oracle::embed_in_q_space(b, ed, pr.params.q_max);
  const Eigen::VectorXcd v = oracle::mps_to_dense(e.state());
  const double fidelity = std::abs(w.dot(v)) / (w.norm() * v.norm());
  const auto n = occupation_profile(e.state(), pr.params);
  const auto ne = oracle::ed_occupations(b, ed);
  double dn = 0.0;
  for (std::size_t x = 0; x < n.size(); ++x) dn = std::max(dn, std::abs(n[x] - ne[x]));
  ok = 1.0 - fidelity < 1e-8 && dn < 1e-6;
  return {{"L", L}, {"N", N}, {"V", V}, {"time", time}, {"infidelity", 1.0 - fidelity}, {"max_density_error", dn}};
}

inline nlohmann::json check_entropy_cross(const ValidateOptions& o, bool& ok) {
  const int L = 10, N = 5;
  const auto pr = make_problem(chain_params(L, N, 2.0, o.literal_hopping), true);
  auto cfg = validation_dmrg();
  cfg.bond_schedule = {64, 400};
  const auto r = dmrg_run(pr.h.mpo, uniform_start(pr), cfg);
  const oracle::ConstrainedBasis b(L, N);
  const auto gs = oracle::constrained_ed_ground(b, 1.0, 2.0);
  const Eigen::VectorXd dense = oracle::embed_in_q_space(b, gs.state, pr.params.q_max);
  const auto s = entropy_profile(r.state);
  double worst = 0.0;
  for (int cut = 1; cut < N; ++cut) {
    worst = std::max(worst, std::abs(s.values[std::size_t(cut - 1)] - oracle::exact_q_entropy(dense, N, pr.params.q_max, cut)));
  }
  ok = worst < 1e-6;
  return {{"L", L}, {"N", N}, {"max_entropy_error", worst}, {"tolerance", 1e-6}};
}

inline nlohmann::json check_free_dmrg(const ValidateOptions& o, bool& ok) {
  const int L = 16, N = 8;
  const auto pr = make_problem(chain_params(L, N, 0.0, o.literal_hopping), true);
  const auto r = dmrg_run(pr.h.mpo, uniform_start(pr), validation_dmrg(), &pr.projector);
  const double exact = oracle::free_ground_energy(L, N);
  const double err = std::abs(r.sweeps.back().energy - exact) / L;
  ok = err < 1e-8;
  return {{"L", L}, {"N", N}, {"energy_error_per_site", err}, {"tolerance", 1e-8}};
}

inline nlohmann::json check_free_light_cone(const ValidateOptions& o, bool& ok) {
  const int L = 20, N = 10;
  const auto pr = make_problem(chain_params(L, N, 0.0, o.literal_hopping), true);
  TdvpConfig cfg;
  cfg.t_final = 2.0;
  cfg.measure_stride = 25;
  double worst = 0.0;
  tdvp_run(pr.h.mpo.cast<cplx>(), domain_wall_start(pr), cfg, [&](TrajectoryPoint& pt, const Mps<cplx>& s) {
    const auto n = occupation_profile(s, pr.params);
    const auto c = oracle::correlation_matrix(L, N, pt.time, oracle::FreeInitial::domain_wall);
    for (int x = 0; x < L; ++x) worst = std::max(worst, std::abs(n[std::size_t(x)] - c(x, x).real()));
  });
  ok = worst < 2e-3;
  return {{"L", L}, {"N", N}, {"t_final", cfg.t_final}, {"max_density_error", worst}, {"tolerance", 2e-3}};
}

inline nlohmann::json check_checkpoint(bool& ok) {
  Checkpoint ck;
  ck.model = chain_params(9, 4, 1.0, false);
  ck.metadata = R"({"probe":true})";
  ck.state = random_mps<cplx>(4, 6, 5, 99);
  const auto bytes = encode_checkpoint(ck);
  const auto back = decode_checkpoint(bytes);
  const auto& a = std::get<Mps<cplx>>(ck.state);
  const auto& b = std::get<Mps<cplx>>(back.state);
  bool exact = back.metadata == ck.metadata && a.length() == b.length();
  for (std::size_t n = 0; exact && n < a.length(); ++n) exact = a.sites[n] == b.sites[n];
  bool detected = false;
  auto bad = bytes;
  bad[bad.size() / 2] ^= 0x10;
  try {
    decode_checkpoint(bad);
  } catch (const FormatError&) {
    detected = true;
  }
  ok = exact && detected;
  return {{"bytes", bytes.size()}, {"bit_exact", exact}, {"corruption_detected", detected}};
}

inline nlohmann::json check_eos(bool& ok) {
  const int L = 12;
  std::map<int, double> e;
  for (int N = 1; N < L; ++N) e[N] = oracle::constrained_ed_ground(oracle::ConstrainedBasis(L, N), 1.0, 8.0).energy;
  const auto t = eos_maxwell(e, L);
  const auto& half = t.rows[std::size_t(L / 2 - 1)];
  const double gap = *half.charge_gap;
  bool monotone = true;
  const auto steps = t.steps();
  for (std::size_t i = 1; i < steps.size(); ++i) monotone = monotone && steps[i].mu > steps[i - 1].mu;
  for (const auto& s : steps) monotone = monotone && s.rho_above < s.rho_below;
  ok = half.vertex && gap > 0.5 && monotone;
  return {{"L", L}, {"V", 8.0}, {"charge_gap_half_filling", gap}, {"plateau_width", half.mu_high - half.mu_low},
          {"monotone", monotone}};
}

inline nlohmann::json check_hole_particle(const ValidateOptions& o, bool& ok) {
  const int L = 12;
  double worst = 0.0;
  for (int N : {5, 6, 7}) {
    auto p = chain_params(L, N, 1.0, o.literal_hopping);
    const auto part = make_problem(p, false);
    p.mode = Mode::hole;
    const auto hole = make_problem(p, false);
    const auto rp = dmrg_run(part.h.mpo, uniform_start(part), validation_dmrg());
    const auto rh = dmrg_run(hole.h.mpo, uniform_start(hole), validation_dmrg());
    worst = std::max(worst, std::abs(part.physical_energy(rp.sweeps.back().energy) -
                                     hole.physical_energy(rh.sweeps.back().energy)));
  }
  ok = worst < 1e-9;
  return {{"L", L}, {"V", 1.0}, {"max_energy_difference", worst}, {"tolerance", 1e-9}};
}

inline nlohmann::json entropy_table(const ValidateOptions& o) {
  nlohmann::json rows = nlohmann::json::array();
  for (int N : {8, 12, 16}) {
    const int L = 2 * N;
    const auto pr = make_problem(chain_params(L, N, 0.0, o.literal_hopping), true);
    auto cfg = validation_dmrg();
    cfg.bond_schedule = {32, 64, 128};
    const auto r = dmrg_run(pr.h.mpo, uniform_start(pr), cfg);
    const auto c = oracle::correlation_matrix(L, N, 0.0, oracle::FreeInitial::ground);
    double q2 = 0.0;
    for (int cut = 1; cut < L; ++cut) q2 = std::max(q2, oracle::left_block_entropy(c, cut));
    rows.push_back({{"N", N},
                    {"L", L},
                    {"particle_bound", particle_entropy_bound(N, N / 2)},
                    {"q1_max_entropy", entropy_profile(r.state).max()},
                    {"q2_max_entropy", q2}});
  }
  return rows;
}

}  // namespace detail

/// Oracle cross-checks of the whole pipeline.
inline ValidateReport validate_suite(const ValidateOptions& o) {
  ValidateReport rep;
  rep.tier = o.tier;
  rep.literal_hopping = o.literal_hopping;
  const bool full = o.tier == Tier::full;
  auto run = [&](const std::string& name, const std::function<nlohmann::json(bool&)>& f) {
    if (o.on_start) o.on_start(name);
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult c;
    c.name = name;
    try {
      c.detail = f(c.passed);
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = {{"error", e.what()}};
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.checks.push_back(std::move(c));
  };
  run("mpo_vs_dense", [&](bool& ok) { return detail::check_mpo_vs_dense(o, ok); });
  run("sector_equivalence", [&](bool& ok) { return detail::check_sector_equivalence(o, ok); });
  run("dmrg_vs_ed", [&](bool& ok) { return detail::check_dmrg_vs_ed(o, ok); });
  run("free_fermion_dmrg", [&](bool& ok) { return detail::check_free_dmrg(o, ok); });
  run("tdvp_vs_ed", [&](bool& ok) { return detail::check_tdvp_vs_ed(o, ok); });
  run("entropy_cross_validation", [&](bool& ok) { return detail::check_entropy_cross(o, ok); });
  run("checkpoint_roundtrip", [&](bool& ok) { return detail::check_checkpoint(ok); });
  run("eos_plateaus", [&](bool& ok) { return detail::check_eos(ok); });
  if (full) {
    run("hole_particle_agreement", [&](bool& ok) { return detail::check_hole_particle(o, ok); });
    run("free_light_cone", [&](bool& ok) { return detail::check_free_light_cone(o, ok); });
    if (o.on_start) o.on_start("entropy_table");
    rep.entropy_table = detail::entropy_table(o);
  }
  return rep;
}

}  // namespace fqmps::app
