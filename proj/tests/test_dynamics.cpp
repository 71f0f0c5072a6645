#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cammvp/dynamics.hpp"
#include "cammvp/phasespace.hpp"
#include "cammvp/steady.hpp"

using namespace cammvp;

namespace {

const AnsatzState& polytrope_state() {
  static const AnsatzState s = match_mass(CasimirModel::polytrope(1.0, 0.0), 1.0);
  return s;
}

double kepler_drift(Integrator integ, double dt) {
  ParticleEnsemble one;
  one.particles.push_back({1.0, 0.0, 0.5, 1e-3, 0});
  ForceField field;
  field.external_mass = [](double) { return 1.0; };
  accelerations(one, field, KernelMode::Serial, integ == Integrator::Radial);
  auto H = [&] {
    const Particle& p = one.particles[0];
    return 0.5 * p.u * p.u + p.L / (2.0 * p.r * p.r) - 1.0 / p.r;
  };
  const double H0 = H();
  double worst = 0.0;
  const int n = static_cast<int>(std::llround(10.0 / dt));
  for (int i = 0; i < n; ++i) {
    step(one, dt, field, 0.0, KernelMode::Serial, integ);
    worst = std::max(worst, std::abs(H() - H0));
  }
  return worst;
}

/// Five well-separated shells on near-circular orbits: the radial excursions are
/// far smaller than the spacing, so the order never changes.
ParticleEnsemble separated_shells() {
  ParticleEnsemble e;
  double inside = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double r = 1.0 + i, w = 0.2;
    const double m = inside + 0.5 * w;
    e.particles.push_back({r, 0.02, m * r, w, static_cast<std::uint64_t>(i)});
    inside += w;
  }
  return e;
}

double separated_drift(Integrator integ, double dt) {
  ParticleEnsemble e = separated_shells();
  ForceField field;
  accelerations(e, field, KernelMode::Serial, integ == Integrator::Radial);
  const double E0 = kinetic_energy(e) + potential_energy(e);
  double worst = 0.0;
  const int n = static_cast<int>(std::llround(20.0 / dt));
  for (int i = 0; i < n; ++i) {
    step(e, dt, field, 0.0, KernelMode::Serial, integ);
    for (std::size_t j = 0; j < e.size(); ++j) REQUIRE(e.particles[j].id == j);
    worst = std::max(worst, std::abs(kinetic_energy(e) + potential_energy(e) - E0));
  }
  return worst;
}

double lyapunov_grid(const AnsatzState& s, const PerturbationSpec& p) {
  const GridDensity layout = GridDensity::zeros(s.R_supp, s.v_escape());
  const GridSteady gs = make_grid_steady(s, layout);
  const GridDensity f = perturb(gs.f0, p, s);
  return d_distance(f, gs) + field_distance(f, gs) / (8.0 * M_PI);
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("circular orbit in a point-mass field stays circular") {
    ParticleEnsemble one;
    one.particles.push_back({1.0, 0.0, 1.0, 1.0, 0});
    ForceField field;
    field.external_mass = [](double) { return 1.0; };
    accelerations(one, field, KernelMode::Serial, true);
    for (int i = 0; i < 10000; ++i) step(one, 1e-3, field, 0.0, KernelMode::Serial, Integrator::Radial);
    CHECK(std::abs(one.particles[0].r - 1.0) <= 1e-12);
    CHECK(std::abs(one.particles[0].u) <= 1e-12);
  }

  TEST_CASE("Kepler energy error is second order for both integrators") {
    for (Integrator integ : {Integrator::Radial, Integrator::FreeDrift}) {
      const double a = kepler_drift(integ, 2e-3), b = kepler_drift(integ, 1e-3);
      CHECK(a / b == doctest::Approx(4.0).epsilon(0.125));
    }
  }

  TEST_CASE("self-gravitating shells without crossings are second order") {
    for (Integrator integ : {Integrator::Radial, Integrator::FreeDrift}) {
      const double a = separated_drift(integ, 0.02), b = separated_drift(integ, 0.01);
      CHECK(a > 0.0);
      CHECK(a / b == doctest::Approx(4.0).epsilon(0.125));
    }
  }

  TEST_CASE("time reversal returns to the initial state") {
    const AnsatzState& s = polytrope_state();
    for (Integrator integ : {Integrator::Radial, Integrator::FreeDrift}) {
      ParticleEnsemble e = sample_from(s, 200, 5);
      const ParticleEnsemble start = e;
      ForceField field;
      field.softening = 1e-3 * s.R_supp;
      const double dt = s.dynamical_time() / 1000.0;
      const bool cen = integ == Integrator::Radial;
      accelerations(e, field, KernelMode::Serial, cen);
      for (int i = 0; i < 100; ++i) step(e, dt, field, 0.0, KernelMode::Serial, integ);
      for (Particle& p : e.particles) p.u = -p.u;
      accelerations(e, field, KernelMode::Serial, cen);
      for (int i = 0; i < 100; ++i) step(e, dt, field, 0.0, KernelMode::Serial, integ);
      std::vector<Particle> a = e.particles, b = start.particles;
      auto by_id = [](const Particle& x, const Particle& y) { return x.id < y.id; };
      std::sort(a.begin(), a.end(), by_id);
      std::sort(b.begin(), b.end(), by_id);
      double worst = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i].r - b[i].r) / s.R_supp);
        worst = std::max(worst, std::abs(a[i].u + b[i].u) / s.v_escape());
      }
      CHECK(worst <= 1e-10);
    }
  }

  TEST_CASE("angular momentum and mass are conserved exactly") {
    const AnsatzState& s = polytrope_state();
    ParticleEnsemble e = sample_from(s, 1000, 9);
    const std::vector<double> L0 = e.L_by_id();
    const double M0 = e.total_mass();
    ForceField field;
    field.softening = 1e-3 * s.R_supp;
    accelerations(e, field, KernelMode::Serial, false);
    for (int i = 0; i < 200; ++i)
      step(e, s.dynamical_time() / 500.0, field, 1e-6 * s.R_supp, KernelMode::Serial, Integrator::FreeDrift);
    CHECK(e.L_by_id() == L0);
    CHECK(e.total_mass() == M0);
  }

  TEST_CASE("serial and parallel kernels agree bit for bit") {
    const AnsatzState& s = polytrope_state();
    ParticleEnsemble a = sample_from(s, 5000, 3);
    ParticleEnsemble b = a;
    std::vector<double> ms, mp;
    shell_mass_serial(a.particles, ms);
    shell_mass_parallel(a.particles, mp);
    CHECK(ms == mp);
    ForceField field;
    field.softening = 1e-3 * s.R_supp;
    for (Integrator integ : {Integrator::Radial, Integrator::FreeDrift}) {
      accelerations(a, field, KernelMode::Serial, integ == Integrator::Radial);
      accelerations(b, field, KernelMode::Parallel, integ == Integrator::Radial);
      CHECK(a.accel == b.accel);
      for (int i = 0; i < 50; ++i) {
        step(a, 1e-3, field, 1e-6, KernelMode::Serial, integ);
        step(b, 1e-3, field, 1e-6, KernelMode::Parallel, integ);
      }
      bool same = a.accel == b.accel;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const Particle &p = a.particles[i], &q = b.particles[i];
        same = same && p.r == q.r && p.u == q.u && p.id == q.id;
      }
      CHECK(same);
    }
  }

  TEST_CASE("sampled radii follow the steady mass profile") {
    const AnsatzState& s = polytrope_state();
    const std::size_t N = 100000;
    const ParticleEnsemble e = sample_from(s, N, 11);
    const int bins = 20;
    std::vector<double> mass(bins, 0.0);
    for (const Particle& p : e.particles) {
      REQUIRE(p.r <= s.R_supp);
      mass[std::min(bins - 1, static_cast<int>(p.r / s.R_supp * bins))] += p.w;
    }
    for (int b = 0; b < bins; ++b) {
      const double p = (s.m_at(s.R_supp * (b + 1) / bins) - s.m_at(s.R_supp * b / bins)) / s.mass;
      const double sigma = s.mass * std::sqrt(p * (1.0 - p) / N);
      CHECK(std::abs(mass[b] - p * s.mass) <= 3.0 * sigma);
    }
  }

  TEST_CASE("sampling is deterministic in the seed") {
    const AnsatzState& s = polytrope_state();
    const ParticleEnsemble a = sample_from(s, 500, 4), b = sample_from(s, 500, 4), c = sample_from(s, 500, 5);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      same = same && a.particles[i].r == b.particles[i].r && a.particles[i].u == b.particles[i].u &&
             a.particles[i].L == b.particles[i].L;
      differs = differs || a.particles[i].r != c.particles[i].r;
    }
    CHECK(same);
    CHECK(differs);
    CHECK(a.total_mass() == doctest::Approx(s.mass).epsilon(1e-14));
  }

  TEST_CASE("perturbations: zero amplitude is the identity and mass is kept") {
    const AnsatzState& s = polytrope_state();
    const ParticleEnsemble e = sample_from(s, 2000, 2);
    for (PerturbationKind kind : {PerturbationKind::VelocityDilation, PerturbationKind::DensityModulation}) {
      const ParticleEnsemble same = perturb(e, {kind, 0.0, 7}, s);
      bool equal = true;
      for (std::size_t i = 0; i < e.size(); ++i) {
        equal = equal && same.particles[i].r == e.particles[i].r && same.particles[i].u == e.particles[i].u &&
                same.particles[i].w == e.particles[i].w;
      }
      CHECK(equal);
      const ParticleEnsemble moved = perturb(e, {kind, 0.05, 7}, s);
      CHECK(moved.total_mass() == doctest::Approx(e.total_mass()).epsilon(1e-13));
      CHECK(moved.L_by_id() == e.L_by_id());
    }
    const Modulation g = make_modulation(s, 7);
    double mean = 0.0;
    for (std::size_t i = 1; i < s.r.size(); ++i) {
      const double a = s.r[i - 1], b = s.r[i];
      mean += 0.5 * (g(a) * s.rho[i - 1] * a * a + g(b) * s.rho[i] * b * b) * (b - a);
    }
    CHECK(std::abs(4.0 * M_PI * mean) <= 1e-4 * s.mass);
  }

  TEST_CASE("enclosed mass is monotone and ends at the total") {
    const AnsatzState& s = polytrope_state();
    const ParticleEnsemble e = sample_from(s, 3000, 6);
    std::vector<double> m;
    shell_mass_serial(e.particles, m);
    for (std::size_t i = 1; i < m.size(); ++i) CHECK(m[i] >= m[i - 1]);
    CHECK(m.back() + 0.5 * e.particles.back().w == doctest::Approx(e.total_mass()).epsilon(1e-13));
  }

  TEST_CASE("particle and grid Lyapunov sums agree at t = 0") {
    const CasimirModel model = CasimirModel::polytrope(1.0, 0.0);
    for (PerturbationKind kind : {PerturbationKind::DensityModulation, PerturbationKind::VelocityDilation}) {
      SimConfig c;
      c.N = 100000;
      c.mode = KernelMode::Serial;
      const PerturbationSpec p{kind, 0.02, 7};
      StabilitySetup setup = prepare_stability(c, model, 1.0, p);
      setup.context.steady = &setup.state;
      const DiagnosticSample d = diagnostics(setup.ensemble, setup.context);
      const double grid = lyapunov_grid(setup.state, p);
      INFO(to_string(kind), " particle ", d.lyapunov_sum, " grid ", grid);
      CHECK(std::abs(d.lyapunov_sum - grid) <= 0.1 * grid);
    }
  }

  TEST_CASE("unperturbed runs: energy conserved, noise floor falls with N") {
    const CasimirModel model = CasimirModel::polytrope(1.0, 0.0);
    double floor_small = 0.0, floor_large = 0.0;
    for (std::size_t N : {2000, 20000}) {
      SimConfig c;
      c.N = N;
      c.mode = KernelMode::Serial;
      c.dt = 1.0 / 500.0;
      c.t_end = 2.0;
      c.diag_every = 25;
      const StabilityResult r = run_stability(c, model, 1.0, {});
      CHECK(r.max_L_drift == 0.0);
      CHECK(r.max_mass_drift <= 1e-14);
      CHECK(r.energy_drift <= 1e-3);
      double floor = 0.0;
      for (const DiagnosticSample& d : r.series) floor = std::max(floor, d.lyapunov_sum);
      (N == 2000 ? floor_small : floor_large) = floor;
    }
    INFO("floor N=2000 ", floor_small, " N=20000 ", floor_large);
    CHECK(floor_large < 0.5 * floor_small);
  }
}
