#include "doctest.h"

#include <cmath>

#include "cammvp/dynamics.hpp"
#include "cammvp/phasespace.hpp"
#include "cammvp/steady.hpp"
#include "oracles.hpp"

using namespace cammvp;
using oracle::pi;

namespace {

double node_sum(const GridDensity& f, const std::function<double(double, double, double, double)>& g) {
  double s = 0.0;
  const auto& r = f.r_grid().r();
  const auto& u = f.u_axis().nodes();
  const auto& w = f.w_axis().nodes();
  for (std::size_t i = 0; i < f.nr(); ++i)
    for (std::size_t j = 0; j < f.nu(); ++j)
      for (std::size_t k = 0; k < f.nw(); ++k) s += f.node_weight(i, j, k) * g(r[i], u[j], w[k], f(i, j, k));
  return s;
}

GridDensity gaussian(double r_max, double v_max, std::size_t nr, std::size_t nu, std::size_t nw) {
  return GridDensity::from_function(GridDensity::zeros(r_max, v_max, nr, nu, nw),
                                    [](double r, double u, double w) { return std::exp(-r * r - u * u - w * w); });
}

struct Fixture {
  AnsatzState state = match_mass(CasimirModel::polytrope(1.0, 0.0), 1.0);
  GridDensity layout = GridDensity::zeros(state.R_supp, state.v_escape());
  GridSteady steady = make_grid_steady(state, layout);
};

const Fixture& fixture() {
  static const Fixture fx;
  return fx;
}

}  // namespace

TEST_SUITE("phasespace") {
  TEST_CASE("zero density gives zero functionals") {
    const GridDensity f = GridDensity::zeros(1.0, 1.0, 24, 24, 24);
    CHECK(f.mass() == 0.0);
    CHECK(kinetic_energy(f) == 0.0);
    CHECK(casimir_functional(f, CasimirModel::polytrope(1.0, 0.5)) == 0.0);
    CHECK(f_norm(f, 1.0, 0.0) == 0.0);
    const FunctionalReport rep = functional_report(f, CasimirModel::polytrope(1.0, 0.0, 0.1));
    CHECK(rep.total == 0.0);
    CHECK(rep.positive == 0.0);
    for (double v : rho_from_f(f).values) CHECK(v == 0.0);
  }

  TEST_CASE("unit velocity ball") {
    const GridDensity f = GridDensity::from_function(GridDensity::zeros(1.0, 1.0, 48, 192, 96),
                                                     [](double, double u, double w) { return u * u + w * w <= 1.0 ? 1.0 : 0.0; });
    const SpatialDensity rho = rho_from_f(f);
    for (double v : rho.values) CHECK(v == doctest::Approx(4.0 * pi / 3.0).epsilon(1e-2));
    CHECK(kinetic_energy(f) == doctest::Approx(8.0 * pi * pi / 15.0).epsilon(2e-2));
  }

  TEST_CASE("gaussian moments against closed forms") {
    const GridDensity f = gaussian(6.0, 6.0, 96, 64, 48);
    const double x = oracle::integrate([](double r) { return 4.0 * pi * r * r * std::exp(-r * r); }, 0.0, 6.0);
    const double v = std::pow(pi, 1.5);
    CHECK(f.mass() == doctest::Approx(x * v).epsilon(5e-5));
    CHECK(kinetic_energy(f) == doctest::Approx(0.75 * x * v).epsilon(5e-5));
    const SpatialDensity rho = rho_from_f(f);
    for (std::size_t i = 0; i < rho.values.size(); i += 8) {
      const double r = rho.grid.r()[i];
      CHECK(rho.values[i] == doctest::Approx(v * std::exp(-r * r)).epsilon(5e-5));
    }
    // Fourth-order convergence in the tangential direction.
    auto err = [&](std::size_t nw) { return std::abs(rho_from_f(gaussian(6.0, 6.0, 24, 64, nw)).values[0] / v - 1.0); };
    CHECK(std::log2(err(96) / err(192)) > 3.5);
  }

  TEST_CASE("l = 0, Q = phi^2 gives the L2 norm") {
    const GridDensity f = gaussian(4.0, 4.0, 48, 32, 24);
    const double direct = node_sum(f, [](double, double, double, double v) { return v * v; });
    CHECK(casimir_functional(f, CasimirModel::polytrope(1.0, 0.0)) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(f_norm(f, 1.0, 0.0) == doctest::Approx(std::sqrt(direct)).epsilon(1e-12));
  }

  TEST_CASE("l = 1 Casimir of f = c L on a box") {
    const double c = 0.7, R = 1.0, V = 1.0;
    const GridDensity f = GridDensity::from_function(GridDensity::zeros(R, V, 96, 32, 96),
                                                     [&](double r, double, double w) { return c * r * r * w * w; });
    // Q(c) L integrated over the box.
    const double expected = c * c * 8.0 * pi * pi * std::pow(R, 5) / 5.0 * 2.0 * V * std::pow(V, 4) / 4.0;
    const WeightedIntegral ci = casimir_integral(f, CasimirModel::polytrope(1.0, 1.0));
    CHECK_FALSE(ci.divergent_cells);
    CHECK(ci.value == doctest::Approx(expected).epsilon(1e-7));
  }

  TEST_CASE("weighted integral flags f > 0 at L = 0") {
    const GridDensity f = gaussian(2.0, 2.0, 24, 24, 24);
    CHECK(weighted_f_integral(f, 0.5, 1.0).divergent_cells);
    CHECK_FALSE(weighted_f_integral(f, 1.0, 0.0).divergent_cells);
  }

  TEST_CASE("f_norm converges under refinement") {
    // int int exp(-2 r^2 - 2 |v|^2) over the full space is (pi/2)^3.
    const double coarse = f_norm(gaussian(5.0, 5.0, 96, 64, 48), 1.0, 0.0);
    const double fine = f_norm(gaussian(5.0, 5.0, 192, 128, 96), 1.0, 0.0);
    CHECK(std::abs(coarse - fine) < 1e-4 * fine);
    CHECK(fine == doctest::Approx(std::pow(pi / 2.0, 1.5)).epsilon(1e-5));
  }

  TEST_CASE("rescale identities") {
    const GridDensity f = gaussian(3.0, 3.0, 48, 32, 24);
    const double a = 1.7, b = 0.6, c = 1.3;
    CHECK(rescale(f, 1.0, 1.0, 1.0).values() == f.values());
    const GridDensity g = rescale(f, a, b, c);
    CHECK(std::abs(g.mass() - a * std::pow(b, -3) * std::pow(c, -3) * f.mass()) < 1e-12 * g.mass());
    CHECK(std::abs(kinetic_energy(g) - a * std::pow(b, -3) * std::pow(c, -5) * kinetic_energy(f)) < 1e-12 * kinetic_energy(g));
    CHECK(std::abs(angular_moment(g) - a * std::pow(b, -5) * std::pow(c, -5) * angular_moment(f)) < 1e-12 * angular_moment(g));
    CHECK(g(3, 4, 5) == a * f(3, 4, 5));
  }

  TEST_CASE("functional report assembly") {
    const GridDensity f = gaussian(3.0, 3.0, 48, 32, 24);
    const FunctionalReport p = functional_report(f, CasimirModel::polytrope(1.0, 0.0));
    CHECK(p.angular == 0.0);
    CHECK(p.positive == p.casimir + p.kinetic);
    CHECK(p.total == p.positive + p.potential);
    const FunctionalReport g = functional_report(f, CasimirModel::polytrope(1.0, 0.0, 0.2));
    CHECK(g.angular == doctest::Approx(0.2 * angular_moment(f)).epsilon(1e-14));
    CHECK(g.positive == g.angular + g.casimir + g.kinetic);
  }

  TEST_CASE("steady density on the grid reproduces the closed-form reduction") {
    auto worst = [](const AnsatzState& s, std::size_t nu) {
      const GridDensity layout = GridDensity::zeros(s.R_supp, s.v_escape(), 96, nu, nu * 3 / 4);
      const SpatialDensity rho = rho_from_f(grid_from_state(s, layout));
      double w = 0.0;
      for (std::size_t i = 0; i < rho.values.size(); ++i) {
        w = std::max(w, std::abs(rho.values[i] - s.rho_at(rho.grid.r()[i])) / s.rho_at(0.0));
      }
      return w;
    };
    const Fixture& fx = fixture();
    // f0 has a kink at the cut-off energy, which limits the velocity quadrature.
    const double coarse = worst(fx.state, 96), fine = worst(fx.state, 192);
    CHECK(coarse < 5e-5);
    CHECK(coarse / fine > 4.0);
    CHECK(worst(match_mass(CasimirModel::polytrope(1.4, 0.0), 1.0), 192) < 1e-6);
    CHECK(functional_report(fx.steady.f0, fx.state.model).total < 0.0);
  }

  TEST_CASE("d distance properties") {
    const Fixture& fx = fixture();
    CHECK(std::abs(d_distance(fx.steady.f0, fx.steady)) < 1e-10);
    CHECK(field_distance(fx.steady.f0, fx.steady) < 1e-20);
    Rng rng(21);
    const double M = fx.steady.f0.mass();
    for (int i = 0; i < 25; ++i) {
      const GridDensity f = random_density(fx.layout, rng, M);
      CHECK(f.mass() == doctest::Approx(M).epsilon(1e-12));
      CHECK(d_distance(f, fx.steady) >= -1e-12);
      const double D = functional_report(f, fx.state.model).total;
      CHECK(dd_identity_residual(f, fx.steady) < 1e-8 * (1.0 + std::abs(D)));
    }
  }

  TEST_CASE("d is quadratic for small mass-neutral perturbations") {
    const Fixture& fx = fixture();
    for (auto kind : {PerturbationKind::DensityModulation, PerturbationKind::VelocityDilation}) {
      const double d1 = d_distance(perturb(fx.steady.f0, {kind, 0.005, 3}, fx.state), fx.steady);
      const double d2 = d_distance(perturb(fx.steady.f0, {kind, 0.01, 3}, fx.state), fx.steady);
      CHECK(d1 > 0.0);
      CHECK(d2 / d1 == doctest::Approx(4.0).epsilon(0.05));
    }
  }

  TEST_CASE("field distance is a quadratic form") {
    const Fixture& fx = fixture();
    const PerturbationSpec p1{PerturbationKind::DensityModulation, 0.01, 5};
    const PerturbationSpec p2{PerturbationKind::DensityModulation, 0.02, 5};
    const double a = field_distance(perturb(fx.steady.f0, p1, fx.state), fx.steady);
    const double b = field_distance(perturb(fx.steady.f0, p2, fx.state), fx.steady);
    CHECK(b / a == doctest::Approx(4.0).epsilon(1e-3));
  }

  TEST_CASE("interpolation and pointwise bounds") {
    const Fixture& fx = fixture();
    const CasimirModel& model = fx.state.model;
    Rng rng(8);
    const double C = interpolation_constant(model);
    for (int i = 0; i < 10; ++i) {
      const GridDensity f = random_density(fx.layout, rng, rng.uniform(0.2, 3.0));
      CHECK(interpolation_ratio(f, model) <= C * (1.0 + 1e-12));
      CHECK(pointwise_rho_margin(f, model.k1, model.l) >= -1e-12);
    }
  }
}
