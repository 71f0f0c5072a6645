#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cammvp/config.hpp"
#include "cammvp/harness.hpp"
#include "cammvp/io.hpp"
#include "cammvp/steady.hpp"

namespace {

struct CommonArgs {
  std::string config;
  bool allow_out_of_range = false;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  cmd->add_option("--config", args.config, "experiment configuration file")->required(config_required)->check(CLI::ExistingFile);
  cmd->add_flag("--allow-out-of-range", args.allow_out_of_range,
                "accept exponents outside 0 < k1, k2, k3 < l + 3/2");
  cmd->add_option("--seed", args.seed, "override experiment.seed");
  cmd->add_option("--out", args.out, "override experiment.out");
}

std::optional<cammvp::ExperimentConfig> load(const std::string& verb, const CommonArgs& args) {
  using namespace cammvp;
  ExperimentConfig cfg;
  try {
    cfg = load_config(args.config, ParseOptions{args.allow_out_of_range});
  } catch (const ConfigError& e) {
    std::cerr << args.config << ": " << e.what() << '\n';
    return std::nullopt;
  }
  if (to_string(cfg.kind) != verb) {
    std::cerr << args.config << ": experiment.kind is '" << to_string(cfg.kind) << "' but the verb is '" << verb
              << "'\n";
    return std::nullopt;
  }
  if (args.seed) set_seed(cfg, *args.seed);
  if (!args.out.empty()) cfg.out_dir = args.out;
  return cfg;
}

int report(const cammvp::RunManifest& man, const std::filesystem::path& out_dir) {
  std::size_t failed = 0;
  for (const auto& c : man.checks) {
    if (!c.asserted) continue;
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  value=" << c.value << "  threshold=" << c.threshold
              << '\n';
    if (!c.passed) ++failed;
  }
  if (!man.error.empty()) std::cerr << "error: " << man.error << '\n';
  std::cout << man.kind << ": " << man.checks.size() << " checks, " << failed << " failed; outputs in "
            << out_dir.string() << '\n';
  return man.exit_code();
}

int run(const std::string& verb, const CommonArgs& args, const cammvp::RunOptions& opts) {
  auto cfg = load(verb, args);
  if (!cfg) return 2;
  return report(cammvp::run_experiment(*cfg, opts), cfg->out_dir);
}

/// steady solve: shoot from model.central_psi. steady match-mass: match model.mass.
int steady_path(const CommonArgs& args, bool from_psi, const cammvp::RunOptions& opts) {
  auto cfg = load("steady", args);
  if (!cfg) return 2;
  if (from_psi && !(cfg->central_psi > 0.0)) {
    std::cerr << args.config << ": steady solve needs model.central_psi > 0\n";
    return 2;
  }
  if (!from_psi) cfg->central_psi = 0.0;
  return report(cammvp::run_experiment(*cfg, opts), cfg->out_dir);
}

int steady_scf(const CommonArgs& args) {
  using namespace cammvp;
  auto cfg = load("steady", args);
  if (!cfg) return 2;
  const AnsatzState shoot = match_mass(cfg->model, cfg->mass, cfg->solver);
  ScfOptions so;
  so.r_max = shoot.compact ? 1.5 * shoot.R_supp : 20.0 * shoot.core_scale;
  const AnsatzState scf = scf_minimize(cfg->model, cfg->mass, so);
  double worst = 0.0;
  for (std::size_t i = 0; i < scf.r.size(); ++i)
    worst = std::max(worst, std::abs(scf.U[i] - shoot.U_at(scf.r[i])) / std::abs(shoot.U.front()));
  std::filesystem::create_directories(cfg->out_dir);
  store_state(cfg->out_dir / "profile_scf.txt", scf);
  nlohmann::json j = {{"scf", state_summary(scf)},
                      {"iterations", scf.iterations},
                      {"shooting_E0", shoot.E0},
                      {"max_rel_U_difference", worst},
                      {"d_trace", scf.d_trace}};
  write_file(cfg->out_dir / "scf.json", j.dump(2) + "\n");
  const bool ok = worst < 1e-6;
  std::cout << (ok ? "PASS " : "FAIL ") << "steady.scf_vs_shooting  value=" << worst << "  threshold=1e-06\n"
            << "scf: " << scf.iterations << " iterations, E0 = " << scf.E0 << " (shooting " << shoot.E0
            << "); outputs in " << cfg->out_dir.string() << '\n';
  return ok ? 0 : 1;
}

int steady_check(const std::string& profile) {
  using namespace cammvp;
  const AnsatzState s = load_state(profile);
  std::size_t failed = 0;
  auto line = [&](const char* name, bool ok, double value, double threshold) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  value=" << value << "  threshold=" << threshold << '\n';
    if (!ok) ++failed;
  };
  const ElResidual el = el_residual(s);
  line("steady.el_sup", el.sup_on_support < 1e-6 * std::abs(s.E0), el.sup_on_support, 1e-6 * std::abs(s.E0));
  line("steady.el_off_support", el.min_off_support >= -1e-10, el.min_off_support, -1e-10);
  const E0Check e0 = e0_consistency(s);
  line("steady.e0_consistency", e0.mismatch < 1e-6, e0.mismatch, 1e-6);
  line("steady.e0_negative", s.E0 < 0.0, s.E0, 0.0);
  if (s.compact) line("steady.virial", virial_ratio(s) <= 1e-4, virial_ratio(s), 1e-4);
  std::cout << profile << ": " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camm-type steady states of the gravitational Vlasov-Poisson system"};
  app.require_subcommand(1);
  CommonArgs args;
  cammvp::RunOptions opts;
  opts.log = [](const std::string& line) { std::cerr << line << '\n'; };

  for (const char* verb : {"scaling", "stability", "checks"}) add_common(app.add_subcommand(verb), args);

  CLI::App* steady = app.add_subcommand("steady", "steady state; without a sub-verb the config chooses");
  steady->require_subcommand(0, 1);
  add_common(steady, args, false);
  CLI::App* solve = steady->add_subcommand("solve", "shoot from model.central_psi");
  CLI::App* match = steady->add_subcommand("match-mass", "find the central value that gives model.mass");
  CLI::App* scf = steady->add_subcommand("scf", "self-consistent field minimizer, compared with shooting");
  for (CLI::App* cmd : {solve, match, scf}) add_common(cmd, args);
  CLI::App* check = steady->add_subcommand("check", "validate a stored profile");
  std::string profile;
  check->add_option("--profile", profile, "profile file")->required()->check(CLI::ExistingFile);

  CLI::App* sim = app.add_subcommand("sim", "shell-particle simulation with snapshots");
  sim->require_subcommand(1);
  add_common(sim->add_subcommand("run", "start from the sampled steady state"), args);
  CLI::App* resume = sim->add_subcommand("resume", "continue from a snapshot");
  add_common(resume, args);
  std::string snapshot;
  resume->add_option("--snapshot", snapshot, "snapshot file written by sim run")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  for (CLI::App* cmd : app.get_subcommands()) {
    const std::string verb = cmd->get_name();
    if (verb == "sim") {
      opts.sim_verb = resume->parsed() ? cammvp::SimVerb::Resume : cammvp::SimVerb::Run;
      opts.snapshot = snapshot;
    }
    try {
      if (verb == "steady") {
        if (solve->parsed()) return steady_path(args, true, opts);
        if (match->parsed()) return steady_path(args, false, opts);
        if (scf->parsed()) return steady_scf(args);
        if (check->parsed()) return steady_check(profile);
        if (args.config.empty()) {
          std::cerr << "steady needs --config or a sub-verb\n";
          return 2;
        }
      }
      return run(verb, args, opts);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}
