#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fqmps/app/checkpoint.hpp"
#include "fqmps/app/config.hpp"
#include "fqmps/app/csv.hpp"
#include "fqmps/app/eos.hpp"
#include "fqmps/app/problem.hpp"
#include "fqmps/app/validate.hpp"
#include "fqmps/model/observables.hpp"
#include "fqmps/oracle/constrained_ed.hpp"
#include "fqmps/oracle/free_fermions.hpp"
#include "fqmps/solvers/dmrg.hpp"
#include "fqmps/solvers/tdvp.hpp"
#include "json.hpp"

namespace fqmps::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitValidation = 4;

struct RunContext {
  std::filesystem::path output_root = ".";
  int workers = 1;
  std::ostream* log = &std::cerr;
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::filesystem::path dir;
  nlohmann::json summary;
};

namespace detail {

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  const auto s = j.dump(2) + "\n";
  write_file_atomic(path, s.data(), s.size());
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

/// Header of a CSV holding one row per (record, index) pair.
inline CsvTable long_table(const std::string& index, const std::string& value) {
  CsvTable t;
  t.header = {"step", "time [1/t]", index, value};
  return t;
}

inline void add_profile(CsvTable& t, long step, double time, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    t.add_row({std::to_string(step), format_number(time), std::to_string(i + 1), format_number(v[i])});
  }
}

/// Drops rows recorded after `step` (column "step").
inline void keep_until(CsvTable& t, long step) {
  const auto c = t.column("step");
  std::vector<std::vector<std::string>> kept;
  for (auto& r : t.rows)
    if (std::stol(r[c]) <= step) kept.push_back(std::move(r));
  t.rows = std::move(kept);
}

class Logger {
 public:
  explicit Logger(std::ostream* os) : os_(os) {}
  template <class... A>
  void operator()(const A&... a) const {
    if (!os_) return;
    std::lock_guard lk(mu_);
    ((*os_) << ... << a) << '\n';
  }

 private:
  std::ostream* os_;
  mutable std::mutex mu_;
};

}  // namespace detail

/// Executes scenarios and owns their run directories.
class Runner {
 public:
  Runner(Scenario sc, RunContext ctx) : sc_(std::move(sc)), ctx_(std::move(ctx)), log_(ctx_.log) {
    dir_ = std::filesystem::path(sc_.output).is_absolute() ? std::filesystem::path(sc_.output)
                                                            : ctx_.output_root / sc_.output;
  }

  const std::filesystem::path& dir() const { return dir_; }

  /// Builds every model up front so bad parameters fail before any output exists.
  void preflight() {
    if (sc_.kind == ScenarioKind::validate) return;
    if (sc_.kind == ScenarioKind::eos) {
      for (int N = sc_.eos.n_min; N <= sc_.eos.n_max; ++N) eos_problem(N);
      return;
    }
    const auto pr = make_problem(sc_.model, sc_.q_max_set);
    if (sc_.kind == ScenarioKind::tdvp) {
      domain_wall_start(pr);
    } else {
      uniform_start(pr);
    }
  }

  RunOutcome run() { return guarded([&] { dispatch(); }); }

  /// Continues from a checkpoint written by a run of this scenario.
  RunOutcome resume(const Checkpoint& ck) {
    resuming_ = true;
    return guarded([&] {
      const auto meta = nlohmann::json::parse(ck.metadata);
      const std::string base = meta.at("baseline");
      const long step = meta.at("step");
      if (sc_.kind == ScenarioKind::tdvp) {
        log_("resuming ", base, " evolution at step ", step);
        run_tdvp_baseline(base, ck.complex_state(), step);
        if (base == "q1" && sc_.baseline == Baseline::both) run_tdvp_baseline("q2", std::nullopt, 0);
      } else if (sc_.kind == ScenarioKind::dmrg) {
        log_("refining ", base, " ground state from its checkpoint");
        run_dmrg_baseline(base, std::get<Mps<double>>(ck.state));
        if (base == "q1" && sc_.baseline == Baseline::both) run_dmrg_baseline("q2", std::nullopt);
      } else {
        throw ConfigError("checkpoints exist only for dmrg and tdvp runs");
      }
    });
  }

 private:
  template <class F>
  RunOutcome guarded(F&& body) {
    RunOutcome out;
    out.dir = dir_;
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
    meta_ = nlohmann::json::object();
    if (resuming_ && std::filesystem::exists(dir_ / "metadata.json")) {
      std::ifstream f(dir_ / "metadata.json");
      meta_ = nlohmann::json::parse(f, nullptr, false);
      if (meta_.is_discarded()) meta_ = nlohmann::json::object();
      meta_["resumed"].push_back(detail::utc_now());
      meta_.erase("failed");
    }
    meta_["version"] = kVersion;
    meta_["kind"] = to_string(sc_.kind);
    meta_["seed"] = sc_.seed;
    meta_["threads"] = sc_.kind == ScenarioKind::eos ? ctx_.workers : 1;
    meta_["config"] = scenario_to_json(sc_);
    if (!meta_.contains("started")) meta_["started"] = detail::utc_now();
    detail::write_json(dir_ / "config.json", scenario_to_json(sc_));
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
      out.exit_code = exit_code_;
    } catch (const NumericError& e) {
      nlohmann::json d{{"error", "numeric"}, {"message", e.what()}, {"stage", stage_}, {"time", detail::utc_now()}};
      detail::write_json(dir_ / "diagnostics.json", d);
      log_("numeric failure during ", stage_, ": ", e.what());
      meta_["failed"] = d;
      out.exit_code = kExitNumeric;
    }
    meta_["finished"] = detail::utc_now();
    meta_["timings"]["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::write_json(dir_ / "metadata.json", meta_);
    out.summary = meta_.value("results", nlohmann::json::object());
    return out;
  }

  void dispatch() {
    switch (sc_.kind) {
      case ScenarioKind::dmrg:
      case ScenarioKind::bench:
        if (sc_.baseline != Baseline::q2) run_dmrg_baseline("q1", std::nullopt);
        if (sc_.baseline != Baseline::q1) run_dmrg_baseline("q2", std::nullopt);
        break;
      case ScenarioKind::tdvp:
        if (sc_.baseline != Baseline::q2) run_tdvp_baseline("q1", std::nullopt, 0);
        if (sc_.baseline != Baseline::q1) run_tdvp_baseline("q2", std::nullopt, 0);
        break;
      case ScenarioKind::eos: run_eos(); break;
      case ScenarioKind::validate: run_validate(); break;
    }
  }

  std::string prefix(const std::string& base) const { return base == "q1" ? "" : base + "_"; }

  nlohmann::json checkpoint_meta(const std::string& base, long step) const {
    return {{"baseline", base}, {"step", step}, {"config", scenario_to_json(sc_)}, {"version", kVersion}};
  }

  // ---- ground states ----------------------------------------------------

  void run_dmrg_baseline(const std::string& base, std::optional<Mps<double>> start) {
    stage_ = base + " dmrg";
    const bool q1 = base == "q1";
    std::optional<Problem> pr;
    Mpo<double> h;
    ModelParams ck_params = sc_.model;
    if (q1) {
      pr = make_problem(sc_.model, sc_.q_max_set);
      h = pr->h.mpo;
      ck_params = pr->params;
    } else {
      if (sc_.model.mode == Mode::hole) log_("note: the q2 baseline always works with particles");
      auto p = sc_.model;
      p.mode = Mode::particle;
      h = build_q2_tv(p);
    }
    Mps<double> psi0 = start ? *start
                       : q1  ? uniform_start(*pr)
                             : occupation_product<double>(uniform_sites(sc_.model.L, sc_.model.N), sc_.model.L);
    CsvTable energy;
    energy.header = {"sweep",  "energy [t]", "variance [t^2]", "max_discarded", "leakage",
                     "max_bond", "mixing",     "seconds [s]"};
    const double offset = q1 ? pr->h.offset : 0.0;
    log_(base, " dmrg: L=", sc_.model.L, " N=", sc_.model.N, " V=", sc_.model.V);
    auto r = dmrg_run(h, psi0, sc_.dmrg, q1 ? &pr->projector : nullptr, [&](const SweepReport& s) {
      energy.add_row({std::to_string(s.sweep), format_number(s.energy + offset), detail::fmt_opt(s.variance),
                      format_number(s.max_discarded), detail::fmt_opt(s.leakage), std::to_string(s.max_bond),
                      format_number(s.mixing), format_number(s.seconds)});
      log_("  sweep ", s.sweep, "  E = ", format_number(s.energy + offset), "  D = ", s.max_bond,
           s.leakage ? "  leak = " + format_number(*s.leakage) : std::string(), s.leakage_warning ? "  (ALARM)" : "");
    });
    const auto pre = prefix(base);
    write_csv(dir_ / (pre + (sc_.kind == ScenarioKind::bench ? "bench.csv" : "energy.csv")), energy);

    const auto& last = r.sweeps.back();
    nlohmann::json res{{"energy", last.energy + offset},
                       {"sweeps", r.sweeps.size()},
                       {"converged", r.converged},
                       {"max_bond", r.state.max_bond()}};
    double seconds = 0.0;
    for (const auto& s : r.sweeps) seconds += s.seconds;
    meta_["timings"][base + "_dmrg_seconds"] = seconds;
    if (last.leakage) res["leakage"] = *last.leakage;
    if (sc_.model.V == 0.0 && sc_.model.t == 1.0) {
      const double exact = oracle::free_ground_energy(sc_.model.L, sc_.model.N);
      res["free_fermion_energy"] = exact;
      res["energy_error_per_site"] = std::abs(last.energy + offset - exact) / sc_.model.L;
    }

    CsvTable ent;
    ent.header = {"bond", "entropy"};
    const auto s = entropy_profile(r.state);
    for (std::size_t i = 0; i < s.values.size(); ++i) ent.add_row({std::to_string(i + 1), format_number(s.values[i])});
    write_csv(dir_ / (pre + "entropy.csv"), ent);
    res["max_entropy"] = s.max();

    CsvTable occ;
    occ.header = {"site", "density"};
    std::vector<double> n;
    if (q1) {
      n = pr->particle_density(occupation_profile(r.state, pr->params));
      CsvTable qp;
      qp.header = {"particle", "q_mean"};
      const auto q = interparticle_profile(r.state);
      for (std::size_t i = 0; i < q.size(); ++i) qp.add_row({std::to_string(i + 1), format_number(q[i])});
      write_csv(dir_ / "q_profile.csv", qp);
    } else {
      n = q2_density(r.state);
    }
    double total = 0.0;
    for (std::size_t x = 0; x < n.size(); ++x) {
      occ.add_row({std::to_string(x + 1), format_number(n[x])});
      total += n[x];
    }
    write_csv(dir_ / (pre + "occupation.csv"), occ);
    res["particle_number"] = total;

    if (sc_.kind != ScenarioKind::bench) {
      Checkpoint ck;
      ck.model = ck_params;
      ck.metadata = checkpoint_meta(base, long(r.sweeps.size())).dump();
      ck.state = r.state;
      save_checkpoint(dir_ / (pre + "state.ckpt"), ck);
    }
    meta_["results"][base] = res;
    log_(base, " dmrg done: E = ", format_number(last.energy + offset), r.converged ? "" : " (not converged)");
  }

  // ---- dynamics ---------------------------------------------------------

  void run_tdvp_baseline(const std::string& base, std::optional<Mps<cplx>> start, long first_step) {
    stage_ = base + " tdvp";
    const bool q1 = base == "q1";
    const auto pre = prefix(base);
    std::optional<Problem> pr;
    Mpo<cplx> h;
    Mpo<cplx> pc;
    ModelParams ck_params = sc_.model;
    if (q1) {
      pr = make_problem(sc_.model, sc_.q_max_set);
      h = pr->h.mpo.cast<cplx>();
      pc = pr->projector.cast<cplx>();
      ck_params = pr->params;
    } else {
      h = build_q2_tv(sc_.model).cast<cplx>();
    }
    Mps<cplx> psi0 = start ? *start
                     : q1  ? domain_wall_start(*pr)
                           : occupation_product<cplx>(domain_wall_sites(sc_.model.N), sc_.model.L);

    CsvTable traj;
    traj.header = {"step", "time [1/t]", "energy [t]", "norm", "max_discarded", "max_bond", "leakage", "max_entropy"};
    CsvTable ent = detail::long_table("bond", "entropy");
    CsvTable occ = detail::long_table("site", "density");
    CsvTable qp = detail::long_table("particle", "q_mean");
    if (first_step > 0) {
      traj = read_csv(dir_ / (pre + "trajectory.csv"));
      ent = read_csv(dir_ / (pre + "entropy.csv"));
      occ = read_csv(dir_ / (pre + "occupation.csv"));
      for (auto* t : {&traj, &ent, &occ}) detail::keep_until(*t, first_step);
      if (q1) {
        qp = read_csv(dir_ / "q_profile.csv");
        detail::keep_until(qp, first_step);
      }
    }
    auto flush = [&] {
      write_csv(dir_ / (pre + "trajectory.csv"), traj);
      write_csv(dir_ / (pre + "entropy.csv"), ent);
      write_csv(dir_ / (pre + "occupation.csv"), occ);
      if (q1) write_csv(dir_ / "q_profile.csv", qp);
    };
    auto observer = [&](TrajectoryPoint& pt, const Mps<cplx>& s) {
      if (q1) {
        pt.occupation = occupation_profile(s, pr->params);
        pt.q_profile = interparticle_profile(s);
        pt.leakage = 1.0 - real_of(expectation(s, pc));
      } else {
        pt.occupation = q2_density(s);
      }
    };
    auto on_point = [&](const TrajectoryPoint& pt) {
      const auto s = EntropyProfile{pt.entropy};
      traj.add_row({std::to_string(pt.step), format_number(pt.time), format_number(pt.energy), format_number(pt.norm),
                    format_number(pt.max_discarded), std::to_string(pt.max_bond), detail::fmt_opt(pt.leakage),
                    format_number(s.max())});
      detail::add_profile(ent, pt.step, pt.time, pt.entropy);
      detail::add_profile(occ, pt.step, pt.time, pt.occupation);
      if (q1) detail::add_profile(qp, pt.step, pt.time, pt.q_profile);
      log_("  ", base, " t = ", format_number(pt.time), "  E = ", format_number(pt.energy), "  D = ", pt.max_bond,
           "  S_max = ", format_number(s.max()));
    };
    auto on_checkpoint = [&](long step, const Mps<cplx>& s) {
      flush();
      Checkpoint ck;
      ck.model = ck_params;
      ck.metadata = checkpoint_meta(base, step).dump();
      ck.state = s;
      save_checkpoint(dir_ / (pre + "state.ckpt"), ck);
    };
    log_(base, " tdvp: L=", sc_.model.L, " N=", sc_.model.N, " V=", sc_.model.V, " dt=", format_number(sc_.tdvp.dt),
         " t_final=", format_number(sc_.tdvp.t_final));
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = tdvp_run(h, psi0, sc_.tdvp, observer, on_point, on_checkpoint, first_step);
    meta_["timings"][base + "_tdvp_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (out.points.empty()) flush();

    nlohmann::json res;
    const long n_rows = long(traj.rows.size());
    if (n_rows > 0) {
      res["final_time"] = traj.number(std::size_t(n_rows - 1), "time [1/t]");
      res["final_energy"] = traj.number(std::size_t(n_rows - 1), "energy [t]");
      res["final_max_entropy"] = traj.number(std::size_t(n_rows - 1), "max_entropy");
      double e0 = traj.number(0, "energy [t]"), drift = 0.0, norm_drift = 0.0;
      for (std::size_t i = 0; i < traj.rows.size(); ++i) {
        drift = std::max(drift, std::abs(traj.number(i, "energy [t]") - e0));
        norm_drift = std::max(norm_drift, std::abs(traj.number(i, "norm") - 1.0));
      }
      res["max_energy_drift"] = drift;
      res["max_norm_drift"] = norm_drift;
    }
    res["records"] = n_rows;
    meta_["results"][base] = res;
  }

  // ---- equation of state -----------------------------------------------

  Problem eos_problem(int N) const {
    auto m = sc_.model;
    m.N = N;
    m.mode = sc_.eos.method == EosMethod::dmrg && sc_.eos.holes_above_half && 2 * N > m.L ? Mode::hole : Mode::particle;
    return make_problem(m, sc_.q_max_set);
  }

  double eos_energy(int N) const {
    if (sc_.eos.method == EosMethod::ed) {
      return oracle::constrained_ed_ground(oracle::ConstrainedBasis(sc_.model.L, N), sc_.model.t, sc_.model.V).energy;
    }
    const auto pr = eos_problem(N);
    const auto r = dmrg_run(pr.h.mpo, uniform_start(pr), sc_.dmrg, &pr.projector);
    const auto& last = r.sweeps.back();
    if (last.leakage_warning) log_("  warning: leakage ", format_number(*last.leakage), " at N = ", N);
    return pr.physical_energy(last.energy);
  }

  void run_eos() {
    stage_ = "eos scan";
    const int lo = sc_.eos.n_min, hi = sc_.eos.n_max;
    const auto count = std::size_t(hi - lo + 1);
    std::vector<double> energies(count, 0.0);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    const int workers = std::max(1, std::min<int>(ctx_.workers, int(count)));
    log_("eos scan N = ", lo, "..", hi, " (", to_string(sc_.eos.method), ", ", workers, " worker",
         workers > 1 ? "s" : "", ")");
    auto work = [&] {
      for (std::size_t i; (i = next++) < count;) {
        try {
          energies[i] = eos_energy(lo + int(i));
          log_("  N = ", lo + int(i), "  E = ", format_number(energies[i]));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    meta_["timings"]["eos_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);

    std::map<int, double> e;
    for (std::size_t i = 0; i < count; ++i) e[lo + int(i)] = energies[i];
    const auto table = eos_maxwell(e, sc_.model.L);
    CsvTable rows;
    rows.header = {"N", "energy [t]", "on_hull", "vertex", "mu_low [t]", "mu_high [t]", "charge_gap [t]", "density"};
    for (const auto& r : table.rows) {
      rows.add_row({std::to_string(r.N), format_number(r.energy), r.on_hull ? "1" : "0", r.vertex ? "1" : "0",
                    r.on_hull ? format_number(r.mu_low) : "", r.on_hull ? format_number(r.mu_high) : "",
                    detail::fmt_opt(r.charge_gap), format_number(double(r.N) / sc_.model.L)});
    }
    write_csv(dir_ / "eos.csv", rows);
    CsvTable steps;
    steps.header = {"mu [t]", "density_below", "density_above"};
    for (const auto& s : table.steps())
      steps.add_numbers({s.mu, s.rho_below, s.rho_above});
    write_csv(dir_ / "density_steps.csv", steps);

    nlohmann::json off = nlohmann::json::array();
    for (const auto& r : table.rows)
      if (!r.on_hull) off.push_back(r.N);
    nlohmann::json res{{"points", count}, {"off_hull", off}};
    if (2 * lo <= sc_.model.L && 2 * hi >= sc_.model.L && sc_.model.L % 2 == 0) {
      const auto& half = table.rows[std::size_t(sc_.model.L / 2 - lo)];
      if (half.charge_gap) res["charge_gap_half_filling"] = *half.charge_gap;
    }
    meta_["results"]["eos"] = res;
  }

  // ---- validation -------------------------------------------------------

  void run_validate() {
    stage_ = "validation";
    ValidateOptions o;
    o.tier = sc_.tier;
    o.literal_hopping = false;
    o.on_start = [&](const std::string& n) { log_("  check ", n); };
    const auto rep = validate_suite(o);
    detail::write_json(dir_ / "report.json", rep.to_json());
    meta_["results"]["validate"] = {{"passed", rep.passed()}};
    if (!rep.passed()) exit_code_ = kExitValidation;
  }

  Scenario sc_;
  RunContext ctx_;
  detail::Logger log_;
  std::filesystem::path dir_;
  nlohmann::json meta_;
  std::string stage_ = "setup";
  int exit_code_ = kExitOk;
  bool resuming_ = false;
};

}  // namespace fqmps::app
