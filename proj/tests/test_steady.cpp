#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "cammvp/steady.hpp"
#include "oracles.hpp"

using namespace cammvp;
using oracle::pi;

namespace {

CasimirModel two_term() {
  CasimirModel m;
  m.c1 = 1.0;
  m.c2 = 0.5;
  m.k1 = 0.8;
  m.k2 = 1.2;
  return m;
}

std::vector<CasimirModel> el_models() {
  return {CasimirModel::polytrope(1.0, 0.0), CasimirModel::polytrope(0.5, 0.0), CasimirModel::polytrope(1.2, 0.5, 0.02),
          CasimirModel::polytrope(1.0, 1.0, 0.01), two_term()};
}

}  // namespace

TEST_SUITE("steady") {
  TEST_CASE("closed-form reduction matches the velocity quadrature oracle") {
    Rng rng(2024);
    for (int i = 0; i < 40; ++i) {
      const double l = rng.uniform(0.0, 1.5);
      const double k = rng.uniform(0.1, l + 1.45);
      const CasimirModel m = CasimirModel::polytrope(k, l, rng.uniform(0.0, 0.5));
      const double psi = rng.uniform(0.01, 3.0), r = rng.uniform(0.01, 3.0);
      const double expected = oracle::ansatz_density(m, psi, r);
      CHECK(std::abs(rho_of_potential(m, psi, r) - expected) <= 1e-8 * expected);
    }
    CHECK(std::abs(rho_of_potential(two_term(), 0.8, 0.5) - oracle::ansatz_density(two_term(), 0.8, 0.5)) <=
          1e-8 * rho_of_potential(two_term(), 0.8, 0.5));
  }

  TEST_CASE("k = 1, l = 0 reduction in closed form") {
    // int (psi - |v|^2/2)_+ dv = 4 pi int_0^{sqrt(2 psi)} (psi - s^2/2) s^2 ds = (16 sqrt 2 / 15) pi psi^{5/2}
    const double expected = 16.0 * std::sqrt(2.0) / 15.0 * pi;
    CHECK(rho_of_potential(CasimirModel::polytrope(1.0, 0.0), 1.0, 0.7) == doctest::Approx(expected / 2.0).epsilon(1e-14));
    CHECK(ansatz_constant(1.0, 0.0) == doctest::Approx(expected / 2.0).epsilon(1e-14));
  }

  TEST_CASE("non-positive psi gives zero density") {
    for (const auto& m : el_models()) {
      CHECK(rho_of_potential(m, 0.0, 0.5) == 0.0);
      CHECK(rho_of_potential(m, -1.0, 0.5) == 0.0);
    }
  }

  TEST_CASE("compact polytrope") {
    const AnsatzState s = solve_steady(CasimirModel::polytrope(1.0, 0.0), 1.0);
    CHECK(s.compact);
    CHECK(std::isfinite(s.R_supp));
    CHECK(s.E0 < 0.0);
    CHECK(s.mass > 0.0);
    CHECK(s.m.back() == doctest::Approx(s.mass).epsilon(1e-14));
    CHECK(s.rho.back() == 0.0);
    CHECK(s.U_at(2.0 * s.R_supp) == doctest::Approx(-s.mass / (2.0 * s.R_supp)).epsilon(1e-14));
    CHECK(s.U_at(s.R_supp) == doctest::Approx(-s.mass / s.R_supp).epsilon(1e-12));
    for (std::size_t i = 0; i + 1 < s.r.size(); ++i) CHECK(s.rho[i] > 0.0);
    CHECK(s.rho_at(1.01 * s.R_supp) == 0.0);
  }

  TEST_CASE("polytrope homology in the central value") {
    // Lane-Emden homology for n = k + l + 3/2: R ~ psi0^{-(n-1)/2}, M ~ psi0^{(3-n)/2}.
    const CasimirModel m = CasimirModel::polytrope(1.0, 0.0);
    const AnsatzState a = solve_steady(m, 1.0), b = solve_steady(m, 4.0);
    const double n = 2.5;
    CHECK(b.R_supp / a.R_supp == doctest::Approx(std::pow(4.0, -(n - 1.0) / 2.0)).epsilon(1e-8));
    CHECK(b.mass / a.mass == doctest::Approx(std::pow(4.0, (3.0 - n) / 2.0)).epsilon(1e-8));
  }

  TEST_CASE("Plummer sphere") {
    const CasimirModel m = CasimirModel::polytrope(3.5, 0.0);
    CHECK_THROWS(solve_steady(m, 1.0));
    SolverOptions opt;
    opt.allow_out_of_range = true;
    const AnsatzState s = solve_steady(m, 1.0, opt);
    CHECK_FALSE(s.compact);
    CHECK_FALSE(s.admissible);
    const PlummerCheck pc = plummer_check(s);
    CHECK(pc.applicable);
    CHECK(pc.max_rel_error < 1e-5);
    // a^2 = 3 / (4 pi c psi0^4), M = a psi0 for the n = 5 Lane-Emden sphere.
    const double c = ansatz_constant(3.5, 0.0);
    CHECK(pc.a == doctest::Approx(std::sqrt(3.0 / (4.0 * pi * c))).epsilon(1e-12));
    CHECK(pc.M_inf == doctest::Approx(pc.a).epsilon(1e-12));
  }

  TEST_CASE("gamma scan detects loss of compact support") {
    const auto scan = gamma_support_scan(CasimirModel::polytrope(1.0, 0.0), 1.0, {0.0, 0.01, 0.1, 1.0, 10.0});
    REQUIRE(scan.size() == 5);
    CHECK(scan[0].compact);
    CHECK(scan[1].compact);
    CHECK(scan[1].R_supp > scan[0].R_supp);
    bool lost = false;
    for (const auto& e : scan) lost = lost || !e.compact;
    CHECK(lost);
  }

  TEST_CASE("match_mass") {
    const AnsatzState s = match_mass(CasimirModel::polytrope(1.0, 0.0), 1.0);
    CHECK(std::abs(s.mass - 1.0) < 1e-8);
    const AnsatzState t = solve_steady(s.model, s.central_psi);
    CHECK(t.mass == s.mass);
    CHECK_THROWS_AS(match_mass(s.model, 0.0), std::domain_error);
    const AnsatzState half = match_mass(s.model, 0.5);
    CHECK(std::abs(half.mass - 0.5) < 5e-9);
  }

  TEST_CASE("Euler-Lagrange suite") {
    for (const auto& m : el_models()) {
      CAPTURE(describe(m));
      const AnsatzState s = match_mass(m, 1.0);
      REQUIRE(s.compact);
      CHECK(s.E0 < 0.0);
      const ElResidual el = el_residual(s);
      CHECK(el.support_points > 100);
      CHECK(el.off_points > 100);
      CHECK(el.sup_on_support < 1e-6 * std::abs(s.E0));
      CHECK(el.min_off_support >= -1e-10);
      const E0Check e0 = e0_consistency(s);
      CHECK(e0.e0_negative);
      CHECK(e0.mismatch < 1e-6);
      CHECK(s.report.total < 0.0);
      CHECK(virial_ratio(s) < 1e-4);
    }
  }

  TEST_CASE("shifted cut-off energy and scaled f0 are detected") {
    const AnsatzState s = match_mass(CasimirModel::polytrope(1.0, 0.0), 1.0);
    CHECK(el_residual(s, 0.1).sup_on_support >= 0.1 * (1.0 - 1e-6));
    const double a = e0_consistency(s, 1.01).mismatch, b = e0_consistency(s, 1.02).mismatch;
    CHECK(a > 1e-4);
    CHECK(b / a == doctest::Approx(2.0).epsilon(0.1));
  }

  TEST_CASE("functionals from the profile") {
    const AnsatzState s = match_mass(CasimirModel::polytrope(1.0, 0.0, 0.01), 1.0);
    const FunctionalReport& r = s.report;
    CHECK(r.mass == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(r.positive == doctest::Approx(r.angular + r.casimir + r.kinetic).epsilon(1e-15));
    CHECK(r.total == doctest::Approx(r.positive + r.potential).epsilon(1e-15));
    CHECK(r.angular > 0.0);
    CHECK(std::abs(2.0 * r.kinetic + r.potential) < 1e-4 * std::abs(r.potential));
  }

  TEST_CASE("SCF minimizer agrees with the shooting solution") {
    const AnsatzState shoot = match_mass(CasimirModel::polytrope(1.0, 0.0), 1.0);
    ScfOptions opt;
    opt.r_max = 1.5 * shoot.R_supp;
    const AnsatzState scf = scf_minimize(shoot.model, 1.0, opt);
    CHECK(scf.iterations > 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < scf.r.size(); ++i) worst = std::max(worst, std::abs(scf.U[i] - shoot.U_at(scf.r[i])));
    CHECK(worst < 1e-6);
    CHECK(scf.E0 == doctest::Approx(shoot.E0).epsilon(1e-6));
    REQUIRE_FALSE(scf.d_trace.empty());
    CHECK(scf.d_trace.back() < 0.0);

    // The state stops at the support edge; restart from its potential on the full
    // grid, which differs from the iterate only by the exterior interpolation.
    const RadialGrid grid = RadialGrid::sinh_spaced(opt.nodes, opt.r_max, opt.r_max / 20.0);
    for (double r : grid.r()) opt.initial_U.push_back(scf.U_at(r));
    const AnsatzState again = scf_minimize(shoot.model, 1.0, opt);
    CHECK(again.iterations <= 2);
    CHECK(again.E0 == doctest::Approx(scf.E0).epsilon(1e-9));
  }

  TEST_CASE("dynamical time and escape speed") {
    const AnsatzState s = match_mass(CasimirModel::polytrope(1.0, 0.0), 1.0);
    CHECK(s.dynamical_time() == doctest::Approx(2.0 * pi * std::sqrt(std::pow(s.R_supp, 3) / s.mass)));
    CHECK(s.v_escape() == doctest::Approx(std::sqrt(2.0 * s.central_psi)));
    const double r = 0.5 * s.R_supp;
    CHECK(s.f0(r, 0.0, 0.0) == doctest::Approx(qprime_inverse(s.model, s.psi_at(r))).epsilon(1e-14));
    CHECK(s.f0(r, 0.0, s.v_escape()) == 0.0);
  }
}
