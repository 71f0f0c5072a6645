#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "cammvp/scaling.hpp"
#include "cammvp/steady.hpp"

using namespace cammvp;

namespace {

double brute_force_constant(double alpha, int n) {
  const double p = 1.0 + alpha;
  double best = p;
  for (int i = 1; i < n; ++i) {
    const double x = static_cast<double>(i) / n;
    best = std::min(best, (1.0 - std::pow(1.0 - x, p) - std::pow(x, p)) / ((1.0 - x) * x));
  }
  return best;
}

}  // namespace

TEST_SUITE("scaling") {
  TEST_CASE("scaling exponent") {
    CHECK(scaling_exponent_alpha(0.0, 1.0) == 4.0);
    CHECK(scaling_exponent_alpha(0.0, 0.5) == 2.0);
    CHECK(scaling_exponent_alpha(1.0, 1.0) == doctest::Approx(8.0 / 3.0));
    CHECK_THROWS_AS(scaling_exponent_alpha(0.0, 1.5), std::domain_error);
    CHECK_THROWS_AS(scaling_exponent_alpha(0.0, 2.0), std::domain_error);
  }

  TEST_CASE("concentration constant") {
    CHECK(concentration_constant(1.0) == 2.0);
    const double c4 = concentration_constant(4.0);
    CHECK(c4 > 0.0);
    CHECK(c4 <= 5.0);
    CHECK(c4 == doctest::Approx(brute_force_constant(4.0, 1000000)).epsilon(1e-6));
    const double c01 = concentration_constant(0.1);
    CHECK(c01 > 0.0);
    CHECK(c01 < concentration_constant(1.0));
    CHECK_THROWS_AS(concentration_constant(0.0), std::domain_error);
  }

  TEST_CASE("concentration inequality holds on a dense grid") {
    for (double alpha : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      const double C = concentration_constant(alpha), p = 1.0 + alpha;
      double worst = INFINITY;
      for (int i = 0; i <= 1000000; ++i) {
        const double x = i * 1e-6;
        worst = std::min(worst, -C * (1.0 - x) * x - (std::pow(1.0 - x, p) + std::pow(x, p) - 1.0));
      }
      CAPTURE(alpha);
      CHECK(worst >= -1e-14);
    }
  }

  TEST_CASE("R_M") {
    CHECK(r_m(1.0, -0.5, 2.0) == 1.0);
    CHECK(r_m(2.0, -0.5, 2.0) == 4.0);
    CHECK_THROWS_AS(r_m(1.0, 0.0, 2.0), std::domain_error);
  }

  TEST_CASE("balanced scaling parameters") {
    const ScalingParams p = balanced_scaling(0.5, 0.0, 1.0);
    CHECK(p.b * p.c == doctest::Approx(0.5).epsilon(1e-15));
    // mass ratio a b^-3 c^-3 = m
    CHECK(p.a * std::pow(p.b * p.c, -3.0) == doctest::Approx(0.5).epsilon(1e-15));
    for (double l : {0.0, 0.5, 1.0}) {
      for (double k3 : {0.3, 1.0, l + 1.2}) {
        const double m = 0.37;
        const ScalingParams q = balanced_scaling(m, l, k3);
        CHECK(q.a * std::pow(q.b * q.c, 2.0 * l) == doctest::Approx(std::pow(m, 2.0 * k3 * (1.0 + l) / (l + 1.5 - k3))).epsilon(1e-13));
      }
    }
  }

  TEST_CASE("scaling identities on steady grid data") {
    const AnsatzState s = match_mass(CasimirModel::polytrope(1.0, 0.0), 1.0);
    const GridDensity f0 = grid_from_state(s, GridDensity::zeros(s.R_supp, s.v_escape()));
    for (double m : {0.3, 3.0}) {
      const ScalingParams p = balanced_scaling(m, 0.0, 1.0);
      CHECK(mscale_residual(f0, p.a, p.b, p.c) < 1e-12);
      CHECK(dscale_residual(f0, s.model, p.a, p.b, p.c) < 1e-6);
    }
    const CasimirModel camm = CasimirModel::polytrope(1.2, 0.5, 0.02);
    const AnsatzState t = match_mass(camm, 1.0);
    const GridDensity g0 = grid_from_state(t, GridDensity::zeros(t.R_supp, t.v_escape()));
    CHECK(dscale_residual(g0, camm, 1.3, 0.8, 1.1) < 1e-6);
  }

  TEST_CASE("negativity witness") {
    const CasimirModel m = CasimirModel::polytrope(1.0, 0.0);
    const WitnessSummary ws = negativity_witness(m, 1.0, {0.0, 1e-3});
    REQUIRE(ws.per_gamma.size() == 2);
    for (const auto& w : ws.per_gamma) {
      CAPTURE(w.gamma);
      CHECK(w.found);
      CHECK(w.D < 0.0);
      CHECK(w.eta > 1.0);
      CHECK(w.eta < 2.0);
      CHECK((1.0 - w.eta / 2.0) * 3.0 / m.k2 > 1.0);
      CHECK(w.a_bc_2l <= 1.0);
      CHECK(w.c == doctest::Approx(std::pow(w.b, -w.eta / 2.0)));
      CHECK(w.a == doctest::Approx(std::pow(w.b * w.c, 3.0)));
      CHECK_FALSE(w.sweep.empty());
    }
    CHECK(ws.largest_gamma >= 1e-3);
  }

  TEST_CASE("witness base density respects the F0 cap") {
    CasimirModel m = CasimirModel::polytrope(1.0, 0.5);
    m.f0_threshold = 0.05;
    const GridDensity f = witness_base_density(m);
    CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-12));
    const auto& r = f.r_grid().r();
    const auto& w = f.w_axis().nodes();
    double worst = 0.0;
    for (std::size_t i = 0; i < f.nr(); ++i)
      for (std::size_t j = 0; j < f.nu(); ++j)
        for (std::size_t k = 0; k < f.nw(); ++k) {
          const double L = r[i] * r[i] * w[k] * w[k];
          if (f(i, j, k) > 0.0) worst = std::max(worst, f(i, j, k) * std::pow(L, -m.l));
        }
    CHECK(worst <= m.f0_threshold * (1.0 + 1e-12));
  }

  TEST_CASE("witness fails at k2 = 3/2") {
    CasimirModel m = CasimirModel::polytrope(1.5, 0.0);
    const WitnessSummary ws = negativity_witness(m, 1.0, {0.0});
    REQUIRE(ws.per_gamma.size() == 1);
    CHECK_FALSE(ws.per_gamma[0].found);
    CHECK(ws.per_gamma[0].failure.find("eta") != std::string::npos);
    CHECK(ws.largest_gamma < 0.0);
  }

  TEST_CASE("scaling inequality") {
    const CasimirModel m = CasimirModel::polytrope(1.0, 0.0);
    const ScalingCheck chk = scaling_inequality_check(m, 0.5, 1.0);
    CHECK(chk.alpha == 4.0);
    CHECK(chk.D1 < 0.0);
    CHECK(chk.D2 < 0.0);
    CHECK(chk.margin >= -1e-6);
    CHECK(chk.exponent_identity_error < 1e-13);
    CHECK(chk.params.b * chk.params.c == doctest::Approx(0.5));
    const ScalingCheck same = scaling_inequality_check(m, 1.0, 1.0);
    CHECK(std::abs(same.margin) < 1e-8);
  }

  TEST_CASE("split gap") {
    const CasimirModel model = CasimirModel::polytrope(1.0, 0.0);
    const AnsatzState s = match_mass(model, 1.0);
    const GridDensity f0 = grid_from_state(s, GridDensity::zeros(1.2 * s.R_supp, s.v_escape()));
    const double DM = functional_report(f0, model).total;
    const double CA = concentration_constant(scaling_exponent_alpha(0.0, 1.0));
    const double RM = r_m(f0.mass(), DM, CA);
    const SplitGap at_RM = split_gap(f0, DM, RM, model);
    CHECK(at_RM.rhs == doctest::Approx(0.0).epsilon(1e-12));
    const SplitGap outside = split_gap(f0, DM, 1.1 * s.R_supp, model);
    CHECK(std::abs(outside.lhs) < 1e-12);
    CHECK(std::abs(outside.rhs) < 1e-8);
  }

  TEST_CASE("split estimate on the perturbed-minimizer family") {
    const SplitFamilyResult res = split_family_check(CasimirModel::polytrope(1.0, 0.0), 1.0);
    CHECK(res.D_M < 0.0);
    CHECK(res.R_M > 0.0);
    CHECK(res.checks > 10);
    CHECK(res.min_margin >= 0.0);
    CHECK_FALSE(res.D_M_source.empty());
  }

  TEST_CASE("scaling report") {
    const ScalingReport rep = scaling_report(CasimirModel::polytrope(1.0, 0.0), 1.0, {0.0, 1e-3});
    CHECK(rep.alpha == 4.0);
    CHECK(rep.C_alpha > 0.0);
    CHECK(rep.R_M > 0.0);
    CHECK(rep.passed);
  }
}
