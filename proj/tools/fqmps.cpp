// Command-line front end: run, eos, validate, resume, info.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fqmps/app/checkpoint.hpp"
#include "fqmps/app/config.hpp"
#include "fqmps/app/runner.hpp"
#include "fqmps/app/validate.hpp"

namespace fs = std::filesystem;
using namespace fqmps;
using namespace fqmps::app;

namespace {

RunContext context_from_env() {
  RunContext ctx;
  if (const char* root = std::getenv("FQMPS_OUTPUT_ROOT"); root && *root) ctx.output_root = root;
  if (const char* w = std::getenv("FQMPS_WORKERS"); w && *w) {
    try {
      ctx.workers = std::stoi(w);
    } catch (const std::exception&) {
      throw ConfigError(std::string("FQMPS_WORKERS must be an integer, got '") + w + "'");
    }
    if (ctx.workers < 1) throw ConfigError("FQMPS_WORKERS must be >= 1");
  }
  return ctx;
}

void print_summary(const RunOutcome& out) {
  std::cout << out.summary.dump(2) << "\n";
  std::cerr << "outputs in " << out.dir.string() << "\n";
}

int cmd_run(const std::string& path, bool force_eos) {
  auto sc = load_scenario(path);
  if (force_eos && sc.kind != ScenarioKind::eos) {
    throw ConfigError("'eos' expects a configuration with kind: eos");
  }
  Runner r(sc, context_from_env());
  r.preflight();
  const auto out = r.run();
  print_summary(out);
  return out.exit_code;
}

int cmd_resume(const std::string& path) {
  const auto ck = load_checkpoint(path);
  const auto meta = nlohmann::json::parse(ck.metadata, nullptr, false);
  if (meta.is_discarded() || !meta.contains("config")) {
    throw FormatError("checkpoint metadata carries no run configuration");
  }
  auto sc = parse_scenario(meta["config"].dump());
  sc.output = fs::absolute(fs::path(path)).parent_path().string();
  Runner r(sc, context_from_env());
  const auto out = r.resume(ck);
  print_summary(out);
  return out.exit_code;
}

int cmd_info(const std::string& path) {
  const auto ck = load_checkpoint(path);
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["model"] = {{"t", ck.model.t},
                {"V", ck.model.V},
                {"L", ck.model.L},
                {"N", ck.model.N},
                {"q_max", ck.model.q_max},
                {"mode", to_string(ck.model.mode)},
                {"projector", to_string(ck.model.projector_rep)}};
  std::visit(
      [&](const auto& psi) {
        j["state"] = {{"sites", psi.length()},
                      {"max_bond", psi.max_bond()},
                      {"complex", ck.is_complex()},
                      {"norm_log", psi.norm_log},
                      {"center", psi.center ? nlohmann::json(*psi.center) : nlohmann::json(nullptr)}};
      },
      ck.state);
  const auto meta = nlohmann::json::parse(ck.metadata, nullptr, false);
  j["metadata"] = meta.is_discarded() ? nlohmann::json(ck.metadata) : meta;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& tier, bool literal, const std::string& report) {
  ValidateOptions o;
  o.tier = tier == "full" ? Tier::full : Tier::quick;
  o.literal_hopping = literal;
  o.on_start = [](const std::string& n) { std::cerr << "  check " << n << "\n"; };
  const auto rep = validate_suite(o);
  const auto j = rep.to_json();
  if (!report.empty()) {
    const auto s = j.dump(2) + "\n";
    write_file_atomic(report, s.data(), s.size());
  }
  std::cout << j.dump(2) << "\n";
  for (const auto& c : rep.checks) std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << "\n";
  return rep.passed() ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-quantized MPS simulations of the 1D t-V chain"};
  app.require_subcommand(1);

  std::string config, checkpoint, tier = "quick", report;
  bool literal = false;
  auto* run = app.add_subcommand("run", "Run the scenario described by a configuration file");
  run->add_option("config", config, "Scenario file (YAML)")->required();
  auto* eos = app.add_subcommand("eos", "Run an equation-of-state scan (kind: eos)");
  eos->add_option("config", config, "Scenario file (YAML)")->required();
  auto* val = app.add_subcommand("validate", "Cross-check the build against exact references");
  val->add_option("--tier", tier, "quick (about 2 min) or full")->check(CLI::IsMember({"quick", "full"}));
  val->add_flag("--literal-hopping", literal, "Drop the last-particle hop everywhere (must fail)");
  val->add_option("--report", report, "Also write the JSON report to this file");
  auto* resume = app.add_subcommand("resume", "Continue a run from its checkpoint");
  resume->add_option("checkpoint", checkpoint, "state.ckpt of an earlier run")->required();
  auto* info = app.add_subcommand("info", "Describe a checkpoint");
  info->add_option("checkpoint", checkpoint, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, false);
    if (*eos) return cmd_run(config, true);
    if (*val) return cmd_validate(tier, literal, report);
    if (*resume) return cmd_resume(checkpoint);
    if (*info) return cmd_info(checkpoint);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
