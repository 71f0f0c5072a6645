#pragma once

#include <limits>
#include <string>
#include <vector>

#include "cammvp/casimir.hpp"
#include "cammvp/phasespace.hpp"
#include "cammvp/radial.hpp"

namespace cammvp {

/// Velocity moments of the ansatz f0 = (Q')^{-1}((psi - 1/2 u^2 - (1/2 + gamma r^2) w^2)_+) L^l
/// at a point with psi = E0 - U(r).
enum class Moment {
  Density,         // int f0 dv
  KineticEnergy,   // int 1/2 |v|^2 f0 dv
  AngularMomentum, // int L f0 dv
  Casimir,         // int Q(L^{-l} f0) L^l dv
  QprimeWeighted,  // int Q'(L^{-l} f0) f0 dv
};

double ansatz_moment(const CasimirModel& model, Moment moment, double psi, double r);

/// Spatial density of the ansatz at radius r for psi = E0 - U(r).
double rho_of_potential(const CasimirModel& model, double psi, double r);

/// Constant c_{k,l} of the single-power reduction
/// rho = c_{k,l} r^{2l} (1 + 2 gamma r^2)^{-(l+1)} psi_+^{k+l+3/2}.
double ansatz_constant(double k, double l, double c1 = 1.0);

/// Pointwise ansatz value for given psi(r).
double ansatz_f(const CasimirModel& model, double psi, double r, double u, double w);

struct SolverOptions {
  double rtol = 1e-11;
  double start_fraction = 1e-5;   // series start radius / core scale
  double max_step_fraction = 0.003; // step cap relative to max(r, core scale)
  double r_max_factor = 1e4;      // non-compact cut-off / core scale
  int max_steps = 2000000;
  bool allow_out_of_range = false;
};

struct AnsatzState {
  CasimirModel model;
  double E0 = 0.0;
  double central_psi = 0.0;
  double R_supp = std::numeric_limits<double>::infinity();
  double mass = 0.0;
  bool compact = true;
  bool admissible = true;
  double core_scale = 0.0;

  /// Profile nodes, starting at r = 0; for compact states the last node is R_supp.
  std::vector<double> r;
  std::vector<double> U;
  std::vector<double> rho;
  std::vector<double> m;

  FunctionalReport report;
  int steps = 0;
  int rejected_steps = 0;
  int iterations = 0;
  std::vector<double> d_trace;
  std::string note;

  double r_end() const { return r.back(); }
  double psi_at(double radius) const;
  double U_at(double radius) const;
  double m_at(double radius) const;
  double rho_at(double radius) const;
  double f0(double radius, double u, double w) const;
  /// Largest speed found in the support: sqrt(2 * central psi) for gamma >= 0.
  double v_escape() const;
  /// 2 pi (R^3 / M)^{1/2}, with R the support radius (or the profile end).
  double dynamical_time() const;
};

/// Shoot the semilinear Poisson equation outward from the centre.
AnsatzState solve_steady(const CasimirModel& model, double central_psi, const SolverOptions& opts = {});

/// Central value of psi that gives the requested mass.
AnsatzState match_mass(const CasimirModel& model, double target_mass, const SolverOptions& opts = {});

struct ScfOptions {
  std::size_t nodes = 2048;
  double r_max = 10.0;
  double core_scale = 0.0;  // 0: r_max / 20
  double damping = 0.5;
  double tolerance = 1e-9;
  int max_iterations = 2000;
  /// Optional starting potential on the grid; empty selects a Plummer guess.
  std::vector<double> initial_U;
};

AnsatzState scf_minimize(const CasimirModel& model, double target_mass, const ScfOptions& opts = {});

/// Radial integrals of the velocity moments over the state's profile.
FunctionalReport steady_functionals(const AnsatzState& state);

struct ElResidual {
  double sup_on_support = 0.0;
  double min_off_support = 0.0;
  std::size_t support_points = 0;
  std::size_t off_points = 0;
};

/// Euler-Lagrange residual on an (r, u, w) lattice; E uses the potential obtained
/// from the state's density by an independent radial Poisson solve.
ElResidual el_residual(const AnsatzState& state, double e0_shift = 0.0);

struct E0Check {
  double value = 0.0;     // (1/M) int int (Q'(L^{-l} s f0) + E + gamma L) s f0
  double mismatch = 0.0;  // |value - E0| / |E0|
  bool e0_negative = false;
};

/// Recompute E0 from its integral characterization with f0 scaled by s.
E0Check e0_consistency(const AnsatzState& state, double scale = 1.0);

/// |2 Ekin + Epot| / |Epot| from the state's own profile.
double virial_ratio(const AnsatzState& state);

/// Comparison with the analytic Plummer sphere -M_inf (a^2 + r^2)^{-1/2}, valid for
/// k = 7/2, l = 0, gamma = 0, where rho = c psi^5 gives a^2 = 3 / (4 pi c psi0^4).
struct PlummerCheck {
  bool applicable = false;
  double M_inf = 0.0;
  double a = 0.0;
  double max_rel_error = 0.0;
  double r_limit = 0.0;  // radius where the analytic m(r) reaches 0.999 M_inf
};
PlummerCheck plummer_check(const AnsatzState& state);

struct GammaScanEntry {
  double gamma = 0.0;
  bool compact = false;
  double R_supp = 0.0;
  double mass = 0.0;
};

/// Support radius versus gamma at fixed central psi. The threshold is the
/// first gamma whose state is non-compact within the solver's cut-off.
std::vector<GammaScanEntry> gamma_support_scan(CasimirModel model, double central_psi,
                                               const std::vector<double>& gammas,
                                               const SolverOptions& opts = {});

}  // namespace cammvp
