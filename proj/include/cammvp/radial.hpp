#pragma once

#include <functional>
#include <vector>

#include "cammvp/numerics.hpp"

namespace cammvp {

/// Radial nodes r_0 = 0 < r_1 < ... < r_N with the quadrature rule attached.
class RadialGrid {
 public:
  RadialGrid() = default;
  RadialGrid(std::vector<double> nodes, NodeRule rule = NodeRule::Cubic);

  /// r_i = s * sinh(i t / N) with t chosen so that r_N = r_max: uniform
  /// spacing ~ s near the centre, logarithmic spacing far out.
  static RadialGrid sinh_spaced(std::size_t count, double r_max, double core_scale,
                                NodeRule rule = NodeRule::Cubic);
  static RadialGrid uniform(std::size_t count, double r_max, NodeRule rule = NodeRule::Cubic);

  const std::vector<double>& r() const { return axis_.nodes(); }
  std::size_t size() const { return axis_.size(); }
  double r_max() const { return axis_.nodes().back(); }
  const AxisRule& axis() const { return axis_; }

 private:
  AxisRule axis_;
};

/// Infinitely thin shell of mass M at radius R, handled analytically.
struct Shell {
  double radius = 0.0;
  double mass = 0.0;
};

struct SpatialDensity {
  RadialGrid grid;
  std::vector<double> values;
  std::vector<Shell> shells;
  /// Signed values are accepted only where a caller opts in (norms, identities).
  bool allow_signed = false;

  SpatialDensity() = default;
  SpatialDensity(RadialGrid g, std::vector<double> v, bool signed_ok = false);
  static SpatialDensity from_function(const RadialGrid& g, const std::function<double(double)>& rho);
  void validate() const;
};

struct MassFunction {
  RadialGrid grid;
  std::vector<double> values;
  std::vector<double> slope;  // dm/dr = 4 pi r^2 rho at nodes (continuous part)
  double total = 0.0;
  std::vector<Shell> shells;

  double at(double r) const;
};

struct Potential {
  RadialGrid grid;
  std::vector<double> values;
  std::vector<double> slope;  // U' = m / r^2
  double total_mass = 0.0;
  std::vector<Shell> shells;
  /// Raised when the outermost node still carries a non-negligible mass density.
  bool truncated_mass_warning = false;

  double at(double r) const;
};

MassFunction mass_function(const SpatialDensity& rho);
Potential potential_from_density(const SpatialDensity& rho);

/// -(1/2) int_0^inf m^2 / r^2 dr, exterior tail and shells handled analytically.
double field_energy(const SpatialDensity& rho);

/// (1/4pi) int grad U_1 . grad U_2 dx = int_0^inf m_1 m_2 / r^2 dr for
/// continuous densities on a shared grid.
double field_inner_product(const MassFunction& m1, const MassFunction& m2);

/// |lhs - rhs| / max(|lhs|, |rhs|) for int grad U_1 . grad U_2 = -4 pi int U_1 rho_2.
double green_identity_residual(const SpatialDensity& rho1, const SpatialDensity& rho2);

/// Potential constructed as the discrete adjoint of the cumulative mass map, so
/// that sum_i W_i r_i^2 rho2_i U_i reproduces -int m1 m2 / r^2 exactly in
/// the rule's arithmetic. Used where discrete identities must close to roundoff.
std::vector<double> green_potential(const SpatialDensity& rho);

double rho_norm(const SpatialDensity& rho, double n1, double l);

struct BoundMargin {
  double margin = 0.0;   // min over tested radii of (bound - value)
  double at_radius = 0.0;
};

/// min over grid radii of (4pi)^{1/(1+n1)} ||rho||_{n1,l} r^{(2l+3)/(n1+1)} - |m(r)|.
BoundMargin mass_bound_margin(const SpatialDensity& rho, double n1, double l);

/// min over grid radii R > 0 of [4pi int_0^R m^2/r^2 dr + 4pi M^2 / R] - int |grad U|^2 dx,
/// with rho taken piecewise linear between the nodes.
BoundMargin field_split_margin(const SpatialDensity& rho);

/// 4 pi int_0^inf (m_1 - m_2)^2 / r^2 dr on a shared grid.
double field_distance(const MassFunction& m1, const MassFunction& m2);

}  // namespace cammvp
