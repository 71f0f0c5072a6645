#include "doctest.h"

#include <filesystem>

#include "cammvp/harness.hpp"
#include "cammvp/io.hpp"
#include "oracles.hpp"

using namespace cammvp;

namespace {

ExperimentConfig config_in(const std::string& text, const std::filesystem::path& out) {
  ExperimentConfig c = parse_config(text);
  c.out_dir = out;
  return c;
}

const char* kSteady =
    "experiment.kind = steady\n"
    "experiment.name = unit-steady\n"
    "model.k1 = 1\n"
    "model.l = 0\n"
    "grid.nr = 48\n"
    "grid.nu = 32\n"
    "grid.nw = 24\n";

const char* kSim =
    "experiment.kind = sim\n"
    "experiment.seed = 4\n"
    "model.k1 = 1\n"
    "sim.N = 20000\n"
    "sim.dt = 0.002\n"
    "sim.diag_every = 25\n"
    "sim.kernel = serial\n"
    "sim.perturbation = dilation\n"
    "sim.amplitude = 0.02\n"
    "sim.max_energy_drift = 1e-2\n";

const CheckResult* find_check(const RunManifest& m, const std::string& name) {
  for (const auto& c : m.checks)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("steady run writes its outputs and a manifest") {
    const auto dir = oracle::temp_dir("steady");
    const RunManifest m = run_experiment(config_in(kSteady, dir / "a"));
    INFO(m.error);
    CHECK(m.error.empty());
    CHECK(m.passed());
    CHECK(m.exit_code() == 0);
    for (const char* f : {"profile.txt", "summary.json", "manifest.json", "plots/rho.dat"})
      CHECK(std::filesystem::exists(dir / "a" / f));
    const auto j = nlohmann::json::parse(read_file(dir / "a" / "manifest.json"));
    CHECK(j.at("kind") == "steady");
    CHECK(j.at("name") == "unit-steady");
    CHECK(j.at("config").size() == 7);
    CHECK(load_state(dir / "a" / "profile.txt").mass == doctest::Approx(1.0).epsilon(1e-10));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("outputs are deterministic for a given config and seed") {
    const auto dir = oracle::temp_dir("determinism");
    const RunManifest a = run_experiment(config_in(kSteady, dir / "a"));
    const RunManifest b = run_experiment(config_in(kSteady, dir / "b"));
    REQUIRE(a.files.size() == b.files.size());
    for (std::size_t i = 0; i < a.files.size(); ++i) {
      CHECK(a.files[i].path == b.files[i].path);
      CHECK(a.files[i].checksum == b.files[i].checksum);
    }
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("pipeline errors are recorded, not thrown") {
    const auto dir = oracle::temp_dir("error");
    ExperimentConfig c = config_in(kSim, dir);
    RunOptions opts;
    opts.sim_verb = SimVerb::Resume;
    const RunManifest m = run_experiment(c, opts);
    CHECK_FALSE(m.error.empty());
    CHECK(m.exit_code() == 1);
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("sim run and resume reach the same final state") {
    const auto dir = oracle::temp_dir("sim");
    const RunManifest full = run_experiment(config_in(std::string(kSim) + "sim.t_end = 1\n", dir / "full"));
    INFO(full.error);
    REQUIRE(full.error.empty());
    for (const char* name : {"sim.L_drift", "sim.mass_drift", "sim.energy_drift"}) {
      INFO(name);
      REQUIRE(find_check(full, name) != nullptr);
      CHECK(find_check(full, name)->passed);
    }
    CHECK(find_check(full, "sim.deviation_ratio") != nullptr);

    const RunManifest half = run_experiment(config_in(std::string(kSim) + "sim.t_end = 0.5\n", dir / "half"));
    REQUIRE(half.error.empty());
    RunOptions opts;
    opts.sim_verb = SimVerb::Resume;
    opts.snapshot = dir / "half" / "final.bin";
    const RunManifest rest = run_experiment(config_in(std::string(kSim) + "sim.t_end = 1\n", dir / "rest"), opts);
    INFO(rest.error);
    REQUIRE(rest.error.empty());
    CHECK(rest.kind == "sim resume");

    const Snapshot a = load_snapshot(dir / "full" / "final.bin"), b = load_snapshot(dir / "rest" / "final.bin");
    CHECK(a.ensemble.t == b.ensemble.t);
    REQUIRE(a.ensemble.size() == b.ensemble.size());
    bool same = true;
    for (std::size_t i = 0; i < a.ensemble.size(); ++i) {
      const Particle &p = a.ensemble.particles[i], &q = b.ensemble.particles[i];
      same = same && p.r == q.r && p.u == q.u && p.id == q.id;
    }
    CHECK(same);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("scaling run writes the witness sweep") {
    const auto dir = oracle::temp_dir("scaling");
    const RunManifest m = run_experiment(config_in(
        "experiment.kind = scaling\nmodel.k1 = 1\nscaling.M1 = 0.5\nscaling.M2 = 1\nscaling.gammas = 0, 1e-3\n", dir));
    INFO(m.error);
    CHECK(m.error.empty());
    CHECK(m.passed());
    REQUIRE(find_check(m, "scaling.witness_gamma_0") != nullptr);
    CHECK(find_check(m, "scaling.witness_gamma_0")->passed);
    const std::string sweep = read_file(dir / "plots" / "witness_sweep.dat");
    CHECK(sweep.rfind("# gamma b D\n", 0) == 0);
    CHECK(sweep.size() > 40);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("invariant suite passes for an in-range model") {
    ExperimentConfig c = parse_config("experiment.kind = checks\nmodel.k1 = 1\ngrid.nr = 96\n");
    const auto checks = invariant_suite(c);
    CHECK(checks.size() > 15);
    for (const auto& ch : checks) {
      INFO(ch.name, " value ", ch.value, " threshold ", ch.threshold, " ", ch.detail);
      if (ch.asserted) CHECK(ch.passed);
    }
  }
}
