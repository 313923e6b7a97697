#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fqmps/core/errors.hpp"
#include "fqmps/model/params.hpp"
#include "fqmps/solvers/dmrg.hpp"
#include "fqmps/solvers/tdvp.hpp"
#include "json.hpp"

namespace fqmps::app {

enum class ScenarioKind { dmrg, tdvp, eos, validate, bench };
enum class Baseline { q1, q2, both };
enum class EosMethod { ed, dmrg };
enum class Tier { quick, full };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::dmrg: return "dmrg";
    case ScenarioKind::tdvp: return "tdvp";
    case ScenarioKind::eos: return "eos";
    case ScenarioKind::validate: return "validate";
    case ScenarioKind::bench: return "bench";
  }
  return "?";
}
inline std::string to_string(Baseline b) { return b == Baseline::q1 ? "q1" : b == Baseline::q2 ? "q2" : "both"; }
inline std::string to_string(EosMethod m) { return m == EosMethod::ed ? "ed" : "dmrg"; }
inline std::string to_string(Tier t) { return t == Tier::quick ? "quick" : "full"; }

struct EosSettings {
  int n_min = 1;
  int n_max = 0;  // 0: L - 1
  EosMethod method = EosMethod::ed;
  /// DMRG scans switch to the hole picture for N > L/2.
  bool holes_above_half = true;
};

/// One run. `model.N` always counts particles; `model.mode == hole` makes the
/// solvers work in the hole picture. An unset `model.q_max` means L - N + 1
/// in whichever picture is solved.
struct Scenario {
  ScenarioKind kind = ScenarioKind::dmrg;
  ModelParams model;
  bool q_max_set = false;
  DmrgConfig dmrg;
  TdvpConfig tdvp;
  EosSettings eos;
  Tier tier = Tier::quick;
  std::string output;
  std::uint64_t seed = 1;
  Baseline baseline = Baseline::q1;
};

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

/// Map reader that remembers which keys were consumed.
class Section {
 public:
  Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
    if (!node_.IsMap()) throw ConfigError("'" + name_ + "' must be a mapping", line_of(node_));
  }

  bool has(const std::string& key) const { return bool(node_[key]); }

  YAML::Node get(const std::string& key) {
    seen_.insert(key);
    return node_[key];
  }

  template <class U>
  bool read(const std::string& key, U& out) {
    const auto n = get(key);
    if (!n) return false;
    try {
      out = n.as<U>();
    } catch (const YAML::Exception&) {
      throw ConfigError(name_ + "." + key + ": expected " + type_name<U>(), line_of(n));
    }
    return true;
  }

  template <class U>
  bool read_list(const std::string& key, std::vector<U>& out) {
    const auto n = get(key);
    if (!n) return false;
    if (!n.IsSequence()) throw ConfigError(name_ + "." + key + ": expected a list", line_of(n));
    out.clear();
    for (const auto& e : n) {
      try {
        out.push_back(e.as<U>());
      } catch (const YAML::Exception&) {
        throw ConfigError(name_ + "." + key + ": list entries must be " + type_name<U>(), line_of(e));
      }
    }
    return true;
  }

  template <class U, class Pred>
  void check(const std::string& key, const U& value, Pred ok, const std::string& what) {
    if (!ok(value)) throw ConfigError(name_ + "." + key + " " + what, line_of(node_[key] ? node_[key] : node_));
  }

  std::string choice(const std::string& key, const std::vector<std::string>& options, std::string fallback) {
    const auto n = get(key);
    if (!n) return fallback;
    std::string v;
    try {
      v = n.as<std::string>();
    } catch (const YAML::Exception&) {
      v = "";
    }
    for (const auto& o : options)
      if (o == v) return v;
    std::string list;
    for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
    throw ConfigError(name_ + "." + key + ": expected one of " + list, line_of(n));
  }

  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'", line_of(kv.first));
    }
  }

  int line() const { return line_of(node_); }

 private:
  template <class U>
  static std::string type_name() {
    if constexpr (std::is_same_v<U, bool>) return "true or false";
    else if constexpr (std::is_integral_v<U>) return "an integer";
    else if constexpr (std::is_floating_point_v<U>) return "a number";
    else return "a string";
  }

  YAML::Node node_;
  std::string name_;
  std::set<std::string> seen_;
};

inline auto positive = [](auto v) { return v > 0; };
inline auto non_negative = [](auto v) { return v >= 0; };

inline void parse_model(Section s, Scenario& sc) {
  auto& m = sc.model;
  s.read("t", m.t);
  s.read("V", m.V);
  if (!s.read("L", m.L)) throw ConfigError("model.L is required", s.line());
  if (!s.read("N", m.N)) throw ConfigError("model.N is required", s.line());
  s.check("L", m.L, positive, "must be >= 1");
  s.check("N", m.N, [&](int n) { return n >= 1 && n <= m.L; }, "must satisfy 1 <= N <= L");
  sc.q_max_set = s.read("q_max", m.q_max);
  if (sc.q_max_set) s.check("q_max", m.q_max, [](int q) { return q >= 2; }, "must be >= 2");
  const auto lam = s.get("lambda");
  if (lam && !lam.IsNull()) {
    double v = 0.0;
    s.read("lambda", v);
    s.check("lambda", v, non_negative, "must be >= 0");
    m.lambda = v;
  }
  m.mode = s.choice("mode", {"particle", "hole"}, "particle") == "hole" ? Mode::hole : Mode::particle;
  m.projector_rep =
      s.choice("projector", {"exact", "truncated"}, "exact") == "truncated" ? ProjectorRep::truncated : ProjectorRep::exact;
  s.read("penalty_only", m.penalty_only);
  s.read("literal_hopping", m.literal_hopping);
  s.finish();
}

inline void parse_dmrg(Section s, DmrgConfig& c) {
  s.read("max_sweeps", c.max_sweeps);
  s.check("max_sweeps", c.max_sweeps, positive, "must be >= 1");
  std::vector<long> bonds;
  if (s.read_list("bond_schedule", bonds)) {
    s.check("bond_schedule", bonds, [](const auto& b) { return !b.empty(); }, "must not be empty");
    c.bond_schedule.clear();
    for (long b : bonds) {
      s.check("bond_schedule", b, positive, "entries must be >= 1");
      c.bond_schedule.push_back(std::size_t(b));
    }
  }
  if (s.read_list("mixing_schedule", c.mixing_schedule)) {
    s.check("mixing_schedule", c.mixing_schedule, [](const auto& v) { return !v.empty(); }, "must not be empty");
    for (double a : c.mixing_schedule) s.check("mixing_schedule", a, non_negative, "entries must be >= 0");
  }
  s.read("mixing_floor", c.mixing_floor);
  s.check("mixing_floor", c.mixing_floor, non_negative, "must be >= 0");
  const std::pair<const char*, double*> tolerances[] = {{"eig_tol", &c.eig_tol},
                                                        {"energy_tol", &c.energy_tol},
                                                        {"leakage_alarm", &c.leakage_alarm},
                                                        {"hermiticity_tol", &c.hermiticity_tol}};
  for (const auto& [k, f] : tolerances) {
    s.read(k, *f);
    s.check(k, *f, positive, "must be > 0");
  }
  s.read("eig_max_iter", c.eig_max_iter);
  s.check("eig_max_iter", c.eig_max_iter, positive, "must be >= 1");
  s.read("discard_tolerance", c.discard_tolerance);
  s.check("discard_tolerance", c.discard_tolerance, [](double v) { return v >= 0 && v < 1; }, "must lie in [0, 1)");
  s.read("report_variance", c.report_variance);
  s.finish();
}

inline void parse_tdvp(Section s, TdvpConfig& c) {
  s.read("dt", c.dt);
  s.check("dt", c.dt, positive, "must be > 0");
  s.read("t_final", c.t_final);
  s.check("t_final", c.t_final, non_negative, "must be >= 0");
  long bond = long(c.max_bond);
  s.read("max_bond", bond);
  s.check("max_bond", bond, positive, "must be >= 1");
  c.max_bond = std::size_t(bond);
  s.read("krylov_tol", c.krylov_tol);
  s.check("krylov_tol", c.krylov_tol, positive, "must be > 0");
  s.read("krylov_max_dim", c.krylov_max_dim);
  s.check("krylov_max_dim", c.krylov_max_dim, [](int k) { return k >= 2; }, "must be >= 2");
  s.read("measure_stride", c.measure_stride);
  s.check("measure_stride", c.measure_stride, positive, "must be >= 1");
  long exp = long(c.expansion);
  s.read("expansion", exp);
  s.check("expansion", exp, non_negative, "must be >= 0");
  c.expansion = std::size_t(exp);
  s.read("initial_expansion_sweeps", c.initial_expansion_sweeps);
  s.check("initial_expansion_sweeps", c.initial_expansion_sweeps, non_negative, "must be >= 0");
  s.read("discard_tolerance", c.discard_tolerance);
  s.check("discard_tolerance", c.discard_tolerance, [](double v) { return v >= 0 && v < 1; }, "must lie in [0, 1)");
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("tdvp: ") + e.what(), s.line());
  }
  s.finish();
}

inline void parse_eos(Section s, EosSettings& e, int L) {
  s.read("n_min", e.n_min);
  s.read("n_max", e.n_max);
  if (e.n_max == 0) e.n_max = L - 1;
  s.check("n_min", e.n_min, [&](int n) { return n >= 1 && n <= L; }, "must lie in [1, L]");
  s.check("n_max", e.n_max, [&](int n) { return n >= e.n_min + 1 && n <= L; }, "must lie in [n_min + 1, L]");
  e.method = s.choice("method", {"ed", "dmrg"}, "ed") == "dmrg" ? EosMethod::dmrg : EosMethod::ed;
  s.read("holes_above_half", e.holes_above_half);
  s.finish();
}

}  // namespace detail

/// Parses a scenario document. Every error is a ConfigError naming its line.
inline Scenario parse_scenario(const std::string& text, const std::string& default_output = "run") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("YAML syntax: " + e.msg, e.mark.line + 1);
  }
  if (!root || root.IsNull()) throw ConfigError("empty configuration", 1);
  detail::Section s(root, "config");
  Scenario sc;
  const auto kind = s.choice("kind", {"dmrg", "tdvp", "eos", "validate", "bench"}, "dmrg");
  sc.kind = kind == "dmrg"    ? ScenarioKind::dmrg
            : kind == "tdvp"  ? ScenarioKind::tdvp
            : kind == "eos"   ? ScenarioKind::eos
            : kind == "bench" ? ScenarioKind::bench
                              : ScenarioKind::validate;
  const auto b = s.choice("baseline", {"q1", "q2", "both"}, "q1");
  sc.baseline = b == "q1" ? Baseline::q1 : b == "q2" ? Baseline::q2 : Baseline::both;
  sc.output = default_output;
  s.read("output", sc.output);
  s.check("output", sc.output, [](const std::string& o) { return !o.empty(); }, "must not be empty");
  s.read("seed", sc.seed);
  sc.dmrg.seed = sc.seed;
  sc.tdvp.seed = sc.seed + 6;
  sc.tier = s.choice("tier", {"quick", "full"}, "quick") == "full" ? Tier::full : Tier::quick;

  if (sc.kind != ScenarioKind::validate) {
    const auto m = s.get("model");
    if (!m) throw ConfigError("'model' section is required", s.line());
    detail::parse_model(detail::Section(m, "model"), sc);
  } else if (s.has("model")) {
    throw ConfigError("validate scenarios take no 'model' section", detail::line_of(s.get("model")));
  }
  if (const auto n = s.get("dmrg")) detail::parse_dmrg(detail::Section(n, "dmrg"), sc.dmrg);
  if (const auto n = s.get("tdvp")) detail::parse_tdvp(detail::Section(n, "tdvp"), sc.tdvp);
  if (sc.kind == ScenarioKind::eos) {
    const auto n = s.get("eos");
    sc.eos.n_max = sc.model.L - 1;
    if (n) detail::parse_eos(detail::Section(n, "eos"), sc.eos, sc.model.L);
    if (sc.eos.n_max <= sc.eos.n_min) throw ConfigError("eos: the scan needs at least two particle numbers", s.line());
  } else if (s.has("eos")) {
    throw ConfigError("'eos' section is only valid for kind: eos", detail::line_of(s.get("eos")));
  }
  if (sc.kind == ScenarioKind::tdvp && sc.model.mode == Mode::hole) {
    throw ConfigError("tdvp runs are particle-mode only", s.line());
  }
  s.finish();
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str(), "runs/" + path.stem().string());
}

/// Fully resolved scenario; parse_scenario(dump()) reproduces it.
inline nlohmann::json scenario_to_json(const Scenario& sc) {
  using nlohmann::json;
  json j;
  j["kind"] = to_string(sc.kind);
  j["baseline"] = to_string(sc.baseline);
  j["output"] = sc.output;
  j["seed"] = sc.seed;
  j["tier"] = to_string(sc.tier);
  if (sc.kind != ScenarioKind::validate) {
    const auto& m = sc.model;
    json jm{{"t", m.t},
            {"V", m.V},
            {"L", m.L},
            {"N", m.N},
            {"mode", to_string(m.mode)},
            {"projector", to_string(m.projector_rep)},
            {"penalty_only", m.penalty_only},
            {"literal_hopping", m.literal_hopping}};
    if (sc.q_max_set) jm["q_max"] = m.q_max;
    jm["lambda"] = m.lambda ? json(*m.lambda) : json(nullptr);
    j["model"] = jm;
  }
  const auto& d = sc.dmrg;
  j["dmrg"] = {{"max_sweeps", d.max_sweeps},
               {"bond_schedule", d.bond_schedule},
               {"mixing_schedule", d.mixing_schedule},
               {"mixing_floor", d.mixing_floor},
               {"eig_tol", d.eig_tol},
               {"eig_max_iter", d.eig_max_iter},
               {"energy_tol", d.energy_tol},
               {"discard_tolerance", d.discard_tolerance},
               {"leakage_alarm", d.leakage_alarm},
               {"hermiticity_tol", d.hermiticity_tol},
               {"report_variance", d.report_variance}};
  const auto& t = sc.tdvp;
  j["tdvp"] = {{"dt", t.dt},
               {"t_final", t.t_final},
               {"max_bond", t.max_bond},
               {"krylov_tol", t.krylov_tol},
               {"krylov_max_dim", t.krylov_max_dim},
               {"measure_stride", t.measure_stride},
               {"expansion", t.expansion},
               {"initial_expansion_sweeps", t.initial_expansion_sweeps},
               {"discard_tolerance", t.discard_tolerance}};
  if (sc.kind == ScenarioKind::eos) {
    j["eos"] = {{"n_min", sc.eos.n_min},
                {"n_max", sc.eos.n_max},
                {"method", to_string(sc.eos.method)},
                {"holes_above_half", sc.eos.holes_above_half}};
  }
  return j;
}

}  // namespace fqmps::app
