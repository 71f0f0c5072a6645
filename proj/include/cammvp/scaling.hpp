#pragma once

#include <array>
#include <string>
#include <vector>

#include "cammvp/casimir.hpp"
#include "cammvp/phasespace.hpp"

namespace cammvp {

double scaling_exponent_alpha(double l, double k3);

/// Largest C with (1-x)^{1+alpha} + x^{1+alpha} - 1 <= -C (1-x) x on [0, 1].
double concentration_constant(double alpha);

double r_m(double M, double D_M, double C_alpha);

/// Rescaling parameters (a, b, c) that map F_{M2} to F_{M1} with m = M1/M2 and
/// balance the Casimir, kinetic and potential terms.
struct ScalingParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};
ScalingParams balanced_scaling(double m, double l, double k3);

struct WitnessResult {
  double gamma = 0.0;
  bool found = false;
  double eta = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double D = 0.0;
  double a_bc_2l = 0.0;  // a (bc)^{2l}, must stay <= 1
  std::string failure;
  /// (b, D(f_bar)) pairs evaluated during the sweep.
  std::vector<std::pair<double, double>> sweep;
};

struct WitnessSummary {
  std::vector<WitnessResult> per_gamma;
  /// Largest gamma on the grid that admits a witness, negative when none does.
  double largest_gamma = -1.0;
};

/// Base test function: constant on {r <= 1} x {|v|^2 <= 2}, capped so that
/// L^{-l} f <= F0, normalized to unit grid mass.
GridDensity witness_base_density(const CasimirModel& model, std::size_t nr = 48, std::size_t nu = 48,
                                 std::size_t nw = 32);

WitnessSummary negativity_witness(const CasimirModel& model, double M, const std::vector<double>& gamma_grid,
                                  int max_halvings = 60);

struct ScalingCheck {
  double alpha = 0.0;
  double D1 = 0.0;
  double D2 = 0.0;
  double margin = 0.0;  // D1 - (M1/M2)^{1+alpha} D2
  /// |a (bc)^{2l} - m^{2 k3 (1+l)/(l+3/2-k3)}| relative, for the balanced parameters.
  double exponent_identity_error = 0.0;
  ScalingParams params;
  std::string interpretation;
};

ScalingCheck scaling_inequality_check(const CasimirModel& model, double M1, double M2);

struct SplitGap {
  double lhs = 0.0;
  double rhs = 0.0;
  double R_M = 0.0;
  double m_R = 0.0;
};

SplitGap split_gap(const GridDensity& f, double steady_DM, double R, const CasimirModel& model);

/// Relative residual of the mass scaling law for f_bar = a f(b x, c v).
double mscale_residual(const GridDensity& f, double a, double b, double c);
/// Relative residual of the energy-Casimir scaling law for the same map.
double dscale_residual(const GridDensity& f, const CasimirModel& model, double a, double b, double c);

struct SplitFamilyResult {
  double D_M = 0.0;
  std::string D_M_source;
  double R_M = 0.0;
  double C_alpha = 0.0;
  /// min over family members and radii R > R_M of lhs - rhs + 1e-8 (1 + |lhs|).
  double min_margin = 0.0;
  std::size_t checks = 0;
  /// (epsilon, R, lhs, rhs) for every evaluated pair.
  std::vector<std::array<double, 4>> rows;
};

/// Minimizer of mass M sampled on a grid, plus copies with a fraction
/// epsilon of the mass moved to a distant shell, tested against the split
/// estimate at a range of radii beyond R_M.
SplitFamilyResult split_family_check(const CasimirModel& model, double M,
                                     const std::vector<double>& epsilons = {0.0, 0.05, 0.1, 0.2});

struct ScalingReport {
  double alpha = 0.0;
  double C_alpha = 0.0;
  double R_M = 0.0;
  double D_M = 0.0;
  std::string D_M_source;
  ScalingCheck inequality;
  WitnessSummary witness;
  SplitFamilyResult split;
  bool passed = false;
};

/// All scaling-law checks for one model and mass; the scaling inequality uses
/// masses M/2 and M.
ScalingReport scaling_report(const CasimirModel& model, double M,
                             const std::vector<double>& gamma_grid = {0.0, 1e-4, 1e-3, 1e-2, 1e-1});

}  // namespace cammvp
