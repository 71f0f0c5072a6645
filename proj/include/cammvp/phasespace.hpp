#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cammvp/casimir.hpp"
#include "cammvp/numerics.hpp"
#include "cammvp/radial.hpp"

namespace cammvp {

struct AnsatzState;

struct FunctionalReport {
  double mass = 0.0;
  double kinetic = 0.0;
  double potential = 0.0;
  double casimir = 0.0;
  double angular = 0.0;  // gamma * int int L f
  double positive = 0.0;
  double total = 0.0;

  /// Fill P = angular + casimir + kinetic and D = P + potential.
  void assemble();
};

/// Spherically symmetric phase-space density sampled on (r, u, w) nodes,
/// u = radial velocity in [-V, V], w = tangential speed in [0, V].
/// Measure element: 8 pi^2 r^2 w dr du dw.
class GridDensity {
 public:
  GridDensity() = default;
  GridDensity(RadialGrid r, AxisRule u, AxisRule w, std::vector<double> values);

  /// Uniform axes: r in [0, r_max], u in [-v_max, v_max], w in [0, v_max].
  static GridDensity zeros(double r_max, double v_max, std::size_t nr = 96, std::size_t nu = 64,
                           std::size_t nw = 48, NodeRule rule = NodeRule::Cubic);
  static GridDensity from_function(const GridDensity& layout,
                                   const std::function<double(double, double, double)>& f);

  const RadialGrid& r_grid() const { return r_; }
  const AxisRule& r_axis() const { return r_.axis(); }
  const AxisRule& u_axis() const { return u_; }
  const AxisRule& w_axis() const { return w_; }
  std::size_t nr() const { return r_.size(); }
  std::size_t nu() const { return u_.size(); }
  std::size_t nw() const { return w_.size(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * nu() + j) * nw() + k; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const { return values_[index(i, j, k)]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) { return values_[index(i, j, k)]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Phase-space volume weight of node (i, j, k) (positive for the built-in rules).
  double node_weight(std::size_t i, std::size_t j, std::size_t k) const;
  double mass() const;
  void validate() const;
  bool same_layout(const GridDensity& other) const;

 private:
  RadialGrid r_;
  AxisRule u_;
  AxisRule w_;
  std::vector<double> values_;
};

SpatialDensity rho_from_f(const GridDensity& f);
double kinetic_energy(const GridDensity& f);
/// int int L f dv dx
double angular_moment(const GridDensity& f);

/// Result of an integral whose weight can be singular at L = 0.
struct WeightedIntegral {
  double value = 0.0;
  /// Set when f > 0 at L = 0 makes the first tangential cell divergent; that
  /// cell is then replaced by a principal-value estimate.
  bool divergent_cells = false;
};

/// int int Q(L^{-l} f) L^l dv dx. The first tangential cell is integrated
/// semi-analytically when l != 0.
WeightedIntegral casimir_integral(const GridDensity& f, const CasimirModel& model);
double casimir_functional(const GridDensity& f, const CasimirModel& model);

/// int int f^{1+1/k1} L^{-l/k1} dv dx, and its (k1/(k1+1)) power.
WeightedIntegral weighted_f_integral(const GridDensity& f, double k1, double l);
double f_norm(const GridDensity& f, double k1, double l);

FunctionalReport functional_report(const GridDensity& f, const CasimirModel& model);

/// f_bar(r, u, w) = a f(b r, c u, c w) represented by scaling the nodes.
GridDensity rescale(const GridDensity& f, double a, double b, double c);

/// Steady-state density f0 of the state sampled on the layout of `layout`.
GridDensity grid_from_state(const AnsatzState& state, const GridDensity& layout);

/// Potential of rho_from_f(f0) on the radial nodes, built as the discrete
/// adjoint of the mass map so that the energy-Casimir identity closes exactly.
std::vector<double> grid_steady_potential(const GridDensity& f0);

/// Pieces shared by d_distance and the identity check for a given f0 layout.
struct GridSteady {
  GridDensity f0;
  std::vector<double> U0;  // on radial nodes
  double E0 = 0.0;
  CasimirModel model;
};

GridSteady make_grid_steady(const AnsatzState& state, const GridDensity& layout);

double d_distance(const GridDensity& f, const GridSteady& steady);
double d_distance(const GridDensity& f, const AnsatzState& steady);

/// 4 pi int (m_f - m_0)^2 / r^2 dr with both mass functions on f's radial grid.
double field_distance(const GridDensity& f, const GridSteady& steady);
double field_distance(const GridDensity& f, const AnsatzState& steady);

/// |[D(f) - D(f0)] - [d(f, f0) - field/(8 pi)]|, all on the grid.
double dd_identity_residual(const GridDensity& f, const GridSteady& steady);

/// Smooth positive bump mixture confined to the grid box, scaled to `mass`.
GridDensity random_density(const GridDensity& layout, Rng& rng, double mass, int bumps = 4);

/// Ratio of int int f^{1+1/k1} L^{-l/k1} to 1 + P(f).
double interpolation_ratio(const GridDensity& f, const CasimirModel& model);
/// Constant for the ratio above that follows from (Q1) with F0 = 0.
double interpolation_constant(const CasimirModel& model);

/// Constant of the pointwise bound rho(x) <= C |x|^{2l/(k1+l+5/2)} (X + Y)^{n1/(n1+1)}
/// with X = int f^{1+1/k1} L^{-l/k1} dv and Y = int |v|^2 f dv.
double pointwise_rho_constant(double k1, double l);

/// min over radial nodes of (bound - rho)/max(bound, tiny).
double pointwise_rho_margin(const GridDensity& f, double k1, double l);

}  // namespace cammvp
