#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "fqmps/app/checkpoint.hpp"
#include "fqmps/app/config.hpp"
#include "fqmps/app/csv.hpp"
#include "fqmps/app/eos.hpp"
#include "fqmps/app/problem.hpp"
#include "fqmps/app/runner.hpp"
#include "fqmps/mps/mps.hpp"
#include "fqmps/oracle/constrained_ed.hpp"
#include "fqmps/oracle/free_fermions.hpp"

using namespace fqmps;
using namespace fqmps::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("fqmps_test_app_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Checkpoint sample_checkpoint() {
  ModelParams m;
  m.L = 9;
  m.N = 4;
  m.V = 1.5;
  m.t = 0.7;
  m.q_max = 6;
  Checkpoint ck;
  ck.model = m;
  ck.metadata = R"({"baseline":"q1","step":3})";
  auto psi = random_mps<cplx>(4, 6, 5, 11);
  ck.state = normalized(std::move(psi), 0);
  return ck;
}

std::ostringstream sink;

RunContext quiet(const fs::path& root) {
  RunContext ctx;
  ctx.output_root = root;
  ctx.log = &sink;
  return ctx;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto ck = sample_checkpoint();
  const auto bytes = encode_checkpoint(ck);
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_EQ(back.metadata, ck.metadata);
  EXPECT_EQ(back.model.L, 9);
  EXPECT_DOUBLE_EQ(back.model.V, 1.5);
  ASSERT_TRUE(back.is_complex());
  const auto& a = std::get<Mps<cplx>>(ck.state);
  const auto& b = std::get<Mps<cplx>>(back.state);
  EXPECT_NEAR(std::abs(inner(a, b)), 1.0, 1e-14);
  for (std::size_t n = 0; n < a.length(); ++n) {
    ASSERT_EQ(a.sites[n].shape(), b.sites[n].shape());
    for (std::size_t i = 0; i < a.sites[n].size(); ++i) EXPECT_EQ(a.sites[n].data()[i], b.sites[n].data()[i]);
  }
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = scratch("ckfile");
  const auto ck = sample_checkpoint();
  save_checkpoint(dir / "s.ckpt", ck);
  EXPECT_FALSE(fs::exists(dir / "s.ckpt.tmp"));
  EXPECT_EQ(encode_checkpoint(load_checkpoint(dir / "s.ckpt")), encode_checkpoint(ck));
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  for (std::size_t pos : {std::size_t(14), bytes.size() / 2, bytes.size() - 5}) {
    auto bad = bytes;
    bad[pos] ^= 0x10;
    EXPECT_THROW(decode_checkpoint(bad), FormatError) << "byte " << pos;
  }
}

TEST(Checkpoint, VersionAndLengthAreChecked) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  auto wrong_version = bytes;
  wrong_version[0] = 7;
  EXPECT_THROW(decode_checkpoint(wrong_version), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 9);
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  auto padded = bytes;
  padded.push_back(0);
  EXPECT_THROW(decode_checkpoint(padded), FormatError);
  EXPECT_THROW(decode_checkpoint({}), FormatError);
}

TEST(Csv, RoundTripIsByteIdentical) {
  CsvTable t;
  t.header = {"step", "energy [t]", "note"};
  t.add_row({"0", format_number(-9.837951396750123), "plain"});
  t.add_row({"1", format_number(1e-300), "with, comma"});
  t.add_row({"2", format_number(0.1 + 0.2), "quote \"q\""});
  const auto text = to_csv(t);
  const auto back = parse_csv(text);
  EXPECT_EQ(to_csv(back), text);
  EXPECT_EQ(back.number(0, "energy [t]"), -9.837951396750123);
  EXPECT_EQ(back.number(2, "energy [t]"), 0.1 + 0.2);
  EXPECT_EQ(back.rows[1][2], "with, comma");
}

TEST(Csv, RejectsRaggedRows) {
  EXPECT_THROW(parse_csv("a,b\n1,2,3\n"), FormatError);
  CsvTable t;
  t.header = {"a"};
  EXPECT_THROW(t.add_row({"1", "2"}), DimensionError);
}

TEST(Eos, LinearEnergyHasOneBreakpoint) {
  const double c = -0.75;
  std::map<int, double> e;
  for (int N = 0; N <= 10; ++N) e[N] = c * N;
  const auto t = eos_maxwell(e, 10);
  const auto steps = t.steps();
  ASSERT_EQ(steps.size(), 1u);
  EXPECT_NEAR(steps[0].mu, -c, 1e-12);
  EXPECT_DOUBLE_EQ(steps[0].rho_below, 1.0);
  EXPECT_DOUBLE_EQ(steps[0].rho_above, 0.0);
  EXPECT_DOUBLE_EQ(t.density(-c - 0.1), 1.0);
  EXPECT_DOUBLE_EQ(t.density(-c + 0.1), 0.0);
  for (int N = 1; N < 10; ++N) EXPECT_TRUE(t.rows[std::size_t(N)].on_hull);
}

TEST(Eos, FreeFermionStaircase) {
  const int L = 16;
  std::map<int, double> e;
  for (int N = 0; N <= L; ++N) e[N] = oracle::free_ground_energy(L, N);
  const auto t = eos_maxwell(e, L);
  // Breakpoint k sits at minus the level -2 cos(k pi / (L+1)); steps run in increasing mu.
  const auto steps = t.steps();
  ASSERT_EQ(steps.size(), std::size_t(L));
  for (std::size_t i = 0; i < steps.size(); ++i) {
    EXPECT_NEAR(steps[i].mu, 2.0 * std::cos(double(L - int(i)) * std::numbers::pi / (L + 1)), 1e-10);
    EXPECT_GT(steps[i].rho_below, steps[i].rho_above);
  }
}

TEST(Eos, StrongRepulsionOpensAGapAtHalfFilling) {
  const int L = 12;
  std::map<int, double> e;
  for (int N = 1; N < L; ++N) e[N] = oracle::constrained_ed_ground(oracle::ConstrainedBasis(L, N), 1.0, 8.0).energy;
  const auto t = eos_maxwell(e, L);
  const auto& half = t.rows.at(5);
  ASSERT_EQ(half.N, 6);
  ASSERT_TRUE(half.vertex);
  EXPECT_GT(half.mu_high - half.mu_low, 0.5);
  double prev = 2.0;
  for (double mu = -20.0; mu <= 20.0; mu += 0.05) {
    const double rho = t.density(mu);
    EXPECT_LE(rho, prev);
    prev = rho;
  }
}

TEST(Eos, RejectsBadInput) {
  EXPECT_THROW(eos_maxwell({{3, 1.0}}, 8), DomainError);
  EXPECT_THROW(eos_maxwell({{1, 1.0}, {3, 2.0}}, 8), DomainError);
  EXPECT_THROW(eos_maxwell({{1, 1.0}, {2, std::nan("")}}, 8), DomainError);
}

TEST(Config, MinimalScenarioGetsDefaults) {
  const auto sc = parse_scenario("kind: dmrg\nmodel:\n  L: 10\n  N: 5\n");
  EXPECT_EQ(sc.kind, ScenarioKind::dmrg);
  EXPECT_EQ(sc.model.L, 10);
  EXPECT_DOUBLE_EQ(sc.model.t, 1.0);
  EXPECT_FALSE(sc.q_max_set);
  EXPECT_EQ(sc.output, "run");
}

TEST(Config, ErrorsCarryLineNumbers) {
  try {
    parse_scenario("kind: tdvp\nmodel:\n  L: 10\n  N: 5\ntdvp:\n  dt: -0.1\n");
    FAIL() << "negative dt accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 6);
    EXPECT_NE(std::string(e.what()).find("tdvp.dt"), std::string::npos);
  }
  try {
    parse_scenario("kind: dmrg\nmodel:\n  L: 10\n  N: 5\n  Vv: 2\n");
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 5);
  }
}

TEST(Config, RejectsInconsistentScenarios) {
  EXPECT_THROW(parse_scenario("kind: dmrg\nmodel:\n  L: 10\n"), ConfigError);
  EXPECT_THROW(parse_scenario("kind: dmrg\nmodel:\n  L: 4\n  N: 5\n"), ConfigError);
  EXPECT_THROW(parse_scenario("kind: banana\n"), ConfigError);
  EXPECT_THROW(parse_scenario("kind: tdvp\nmodel:\n  L: 10\n  N: 5\n  mode: hole\n"), ConfigError);
  EXPECT_THROW(parse_scenario("kind: dmrg\nmodel:\n  L: 10\n  N: 5\neos:\n  n_min: 1\n"), ConfigError);
  EXPECT_THROW(parse_scenario("kind: dmrg\nmodel: [1, 2\n"), ConfigError);
}

TEST(Config, ResolvedFormParsesBack) {
  const auto sc = parse_scenario(
      "kind: tdvp\nbaseline: both\nseed: 9\nmodel:\n  L: 12\n  N: 6\n  V: 2.5\n  q_max: 5\n"
      "tdvp:\n  dt: 0.02\n  t_final: 1.0\n  max_bond: 40\n");
  const auto j = scenario_to_json(sc);
  const auto again = parse_scenario(j.dump());
  EXPECT_EQ(scenario_to_json(again), j);
  EXPECT_EQ(again.model.q_max, 5);
  EXPECT_TRUE(again.q_max_set);
  EXPECT_DOUBLE_EQ(again.tdvp.dt, 0.02);
}

TEST(Problem, HoleModeMatchesParticleEnergy) {
  ModelParams m;
  m.L = 10;
  m.N = 7;
  m.V = 1.0;
  auto hole = m;
  hole.mode = Mode::hole;
  const auto pp = make_problem(m, false), ph = make_problem(hole, false);
  EXPECT_EQ(ph.params.N, 3);
  EXPECT_EQ(ph.particles, 7);
  const auto ep = dmrg_run(pp.h.mpo, uniform_start(pp), DmrgConfig{}).sweeps.back().energy;
  const auto eh = dmrg_run(ph.h.mpo, uniform_start(ph), DmrgConfig{}).sweeps.back().energy;
  EXPECT_NEAR(pp.physical_energy(ep), ph.physical_energy(eh), 1e-9);
}

TEST(Problem, StartStatesRespectTheCutoff) {
  ModelParams m;
  m.L = 12;
  m.N = 3;
  m.q_max = 3;
  EXPECT_THROW(uniform_start(make_problem(m, true)), DomainError);
  EXPECT_NO_THROW(domain_wall_start(make_problem(m, true)));
}

TEST(Runner, InvalidRunLeavesNoOutputs) {
  const auto root = scratch("invalid");
  auto sc = parse_scenario("kind: dmrg\noutput: bad\nmodel:\n  L: 12\n  N: 3\n  q_max: 3\n");
  Runner r(sc, quiet(root));
  EXPECT_THROW(r.preflight(), DomainError);
  EXPECT_FALSE(fs::exists(root / "bad"));
}

TEST(Runner, DmrgRunWritesItsFiles) {
  const auto root = scratch("dmrg");
  auto sc = parse_scenario("kind: dmrg\noutput: free\nmodel:\n  L: 10\n  N: 5\n  V: 0\n");
  Runner r(sc, quiet(root));
  r.preflight();
  const auto out = r.run();
  ASSERT_EQ(out.exit_code, kExitOk);
  for (const char* f : {"config.json", "metadata.json", "energy.csv", "entropy.csv", "occupation.csv",
                        "q_profile.csv", "state.ckpt"}) {
    EXPECT_TRUE(fs::exists(root / "free" / f)) << f;
  }
  const auto energy = read_csv(root / "free" / "energy.csv");
  const double e = energy.number(energy.rows.size() - 1, "energy [t]");
  EXPECT_NEAR(e, oracle::free_ground_energy(10, 5), 1e-9);
  const auto occ = read_csv(root / "free" / "occupation.csv");
  double total = 0.0;
  for (std::size_t i = 0; i < occ.rows.size(); ++i) total += occ.number(i, "density");
  EXPECT_NEAR(total, 5.0, 1e-10);
}

TEST(Runner, TdvpResumeContinuesTheTrajectory) {
  const auto root = scratch("resume");
  const std::string base = "kind: tdvp\nmodel:\n  L: 10\n  N: 5\n  V: 1\ntdvp:\n  measure_stride: 5\n";
  auto full = parse_scenario(base + "  t_final: 0.4\noutput: full\n");
  Runner(full, quiet(root)).run();

  auto first = parse_scenario(base + "  t_final: 0.2\noutput: split\n");
  Runner(first, quiet(root)).run();
  auto ck = load_checkpoint(root / "split" / "state.ckpt");
  auto meta = nlohmann::json::parse(ck.metadata);
  EXPECT_EQ(meta.at("step"), 10);
  meta["config"]["tdvp"]["t_final"] = 0.4;
  ck.metadata = meta.dump();
  auto rest = parse_scenario(meta["config"].dump());
  rest.output = (root / "split").string();
  ASSERT_EQ(Runner(rest, quiet(root)).resume(ck).exit_code, kExitOk);

  const auto a = read_csv(root / "full" / "trajectory.csv");
  const auto b = read_csv(root / "split" / "trajectory.csv");
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i][0], b.rows[i][0]);
    EXPECT_NEAR(a.number(i, "energy [t]"), b.number(i, "energy [t]"), 1e-9);
    EXPECT_NEAR(a.number(i, "max_entropy"), b.number(i, "max_entropy"), 1e-9);
  }
  const auto oa = read_csv(root / "full" / "occupation.csv");
  const auto ob = read_csv(root / "split" / "occupation.csv");
  ASSERT_EQ(oa.rows.size(), ob.rows.size());
  for (std::size_t i = 0; i < oa.rows.size(); ++i) EXPECT_NEAR(oa.number(i, "density"), ob.number(i, "density"), 1e-9);
  const auto resumed = nlohmann::json::parse(std::ifstream(root / "split" / "metadata.json"));
  EXPECT_TRUE(resumed.contains("resumed"));
}

TEST(Runner, EosIsIndependentOfWorkerCount) {
  const auto root = scratch("eos");
  const std::string text = "kind: eos\nmodel:\n  L: 10\n  N: 5\n  V: 4\neos:\n  method: ed\n";
  auto one = parse_scenario(text + "output: w1\n");
  auto three = parse_scenario(text + "output: w3\n");
  auto ctx = quiet(root);
  Runner(one, ctx).run();
  ctx.workers = 3;
  Runner(three, ctx).run();
  std::ifstream fa(root / "w1" / "eos.csv"), fb(root / "w3" / "eos.csv");
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  EXPECT_FALSE(sa.str().empty());
  EXPECT_EQ(sa.str(), sb.str());
}
