#include "doctest.h"

#include <algorithm>
#include <filesystem>

#include "cammvp/config.hpp"

using namespace cammvp;

namespace {

const char* kMinimal =
    "experiment.kind = steady\n"
    "model.k1 = 1\n"
    "grid.nr = 48\n";

std::vector<std::string> errors_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& errs, const std::string& needle) {
  return std::any_of(errs.begin(), errs.end(), [&](const std::string& e) { return e.find(needle) != std::string::npos; });
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults fill in unset keys") {
    const ExperimentConfig c = parse_config(kMinimal);
    CHECK(c.kind == ExperimentKind::Steady);
    CHECK(c.model.k1 == 1.0);
    CHECK(c.model.k2 == 1.0);
    CHECK(c.model.c1 == 1.0);
    CHECK(c.model.c2 == 0.0);
    CHECK(c.mass == 1.0);
    CHECK(c.grid.nr == 48);
    CHECK(c.grid.nu == 64);
    CHECK(c.grid.nw == 48);
    CHECK(c.grid.rule == NodeRule::Cubic);
    CHECK(c.sim.integrator == Integrator::FreeDrift);
    CHECK(c.seed == 1);
    CHECK(c.lines.at("grid.nr") == 3);
    CHECK(c.echo.size() == 3);
  }

  TEST_CASE("comments and blank lines are ignored") {
    const ExperimentConfig c = parse_config(std::string("# header\n\n") + kMinimal + "model.l = 0.5  # trailing\n");
    CHECK(c.model.l == 0.5);
    CHECK(c.lines.at("model.l") == 6);
  }

  TEST_CASE("out-of-range exponents name the line and the bound") {
    const auto errs = errors_of("experiment.kind = steady\nmodel.k1 = 2\ngrid.nr = 48\n");
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("line 2") != std::string::npos);
    CHECK(errs[0].find("k1") != std::string::npos);
    CHECK(errs[0].find("l + 3/2 = 1.5") != std::string::npos);

    ParseOptions opts;
    opts.allow_out_of_range = true;
    const ExperimentConfig c = parse_config("experiment.kind = steady\nmodel.k1 = 2\ngrid.nr = 48\n", opts);
    CHECK(c.solver.allow_out_of_range);
  }

  TEST_CASE("every problem in a file is reported") {
    const auto errs = errors_of(
        "experiment.kind = steady\n"
        "model.k1 = 1\n"
        "model.k1 = 0.5\n"
        "model.colour = red\n"
        "grid.nr = many\n"
        "no equals sign\n"
        "model.mass = -1\n");
    CHECK(any_contains(errs, "line 3: duplicate key 'model.k1' (first set on line 2"));
    CHECK(any_contains(errs, "line 4: unknown key 'model.colour'"));
    CHECK(any_contains(errs, "line 5: type mismatch for 'grid.nr'"));
    CHECK(any_contains(errs, "line 6: expected 'section.key = value'"));
    CHECK(any_contains(errs, "line 7: model.mass must be positive"));
    CHECK(errs.size() == 5);
  }

  TEST_CASE("missing sections and keys") {
    CHECK(any_contains(errors_of("experiment.kind = stability\nmodel.k1 = 1\n"), "missing section 'sim'"));
    CHECK(any_contains(errors_of("model.k1 = 1\ngrid.nr = 48\n"), "missing key 'experiment.kind'"));
    CHECK(any_contains(errors_of("experiment.kind = scaling\nmodel.k1 = 1\n"), "missing section 'scaling'"));
  }

  TEST_CASE("enumerations, booleans and lists") {
    const ExperimentConfig c = parse_config(
        "experiment.kind = stability\n"
        "model.k1 = 1\n"
        "sim.integrator = radial\n"
        "sim.perturbation = dilation\n"
        "sim.amplitude = 0.01\n"
        "sim.dynamical_units = no\n"
        "scaling.gammas = 0, 0.5,1\n");
    CHECK(c.kind == ExperimentKind::Stability);
    CHECK(c.sim.integrator == Integrator::Radial);
    CHECK(c.perturbation.kind == PerturbationKind::VelocityDilation);
    CHECK(c.perturbation.amplitude == 0.01);
    CHECK_FALSE(c.sim.dynamical_units);
    CHECK(c.scaling.gammas == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(any_contains(errors_of("experiment.kind = sideways\nmodel.k1 = 1\n"), "type mismatch for 'experiment.kind'"));
    CHECK(any_contains(errors_of(std::string(kMinimal) + "solver.allow_out_of_range = maybe\n"), "expected true or false"));
    CHECK(any_contains(errors_of(std::string(kMinimal) + "scaling.gammas = 1,,2\n"), "empty entry"));
  }

  TEST_CASE("set_seed overrides every seed") {
    ExperimentConfig c = parse_config(kMinimal);
    set_seed(c, 99);
    CHECK(c.seed == 99);
    CHECK(c.sim.seed == 99);
    CHECK(c.perturbation.seed == 99);
  }

  TEST_CASE("shipped configs parse") {
    int count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(CAMMVP_CONFIG_DIR)) {
      if (entry.path().extension() != ".cfg") continue;
      INFO(entry.path().string());
      ParseOptions opts;
      const auto name = entry.path().filename();
      opts.allow_out_of_range = name == "contrast_k2.cfg" || name == "plummer.cfg";
      CHECK_NOTHROW(load_config(entry.path(), opts));
      ++count;
    }
    CHECK(count >= 5);
  }
}
