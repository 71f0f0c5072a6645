#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cammvp/phasespace.hpp"
#include "cammvp/steady.hpp"

namespace cammvp {

/// One spherical shell: radius, radial velocity, squared angular momentum
/// L = r^2 w^2 and mass. `id` is the tie-break key for equal radii.
struct Particle {
  double r = 0.0;
  double u = 0.0;
  double L = 0.0;
  double w = 0.0;
  std::uint64_t id = 0;
};

/// Shells kept sorted by (r, id); `accel` is aligned with `particles` and holds
/// the radial acceleration at the current positions once forces are evaluated.
struct ParticleEnsemble {
  std::vector<Particle> particles;
  std::vector<double> accel;
  double t = 0.0;

  std::size_t size() const { return particles.size(); }
  /// Sum of weights in id order, so the value does not depend on the sort.
  double total_mass() const;
  /// Angular momenta indexed by id.
  std::vector<double> L_by_id() const;
};

enum class KernelMode { Serial, Parallel };

/// Enclosed mass seen by each shell. Empty `external_mass` selects self-gravity,
/// m_i = (mass strictly inside) + w_i / 2; otherwise the shells are test
/// particles in the frozen mass profile.
struct ForceField {
  std::function<double(double)> external_mass;
  /// Plummer length eps: the pair potential -m/r becomes -m/sqrt(r^2 + eps^2).
  double softening = 0.0;
  bool self_gravity() const { return !external_mass; }
};

/// Restore (r, id) order. Nearly sorted input is repaired by insertion; a full
/// sort is used when that would be expensive. Returns the number of element moves.
std::size_t sort_shells(std::vector<Particle>& p);

/// m_i = sum_{j < i} w_j + w_i / 2 over sorted shells. The parallel version uses a
/// fixed block decomposition, so its result does not depend on the thread count.
void shell_mass_serial(const std::vector<Particle>& p, std::vector<double>& m);
void shell_mass_parallel(const std::vector<Particle>& p, std::vector<double>& m);

/// a_i = L_i / r_i^3 - m_i / r_i^2, or -m_i / r_i^2 when `centrifugal` is false.
void accelerations(ParticleEnsemble& ens, const ForceField& field, KernelMode mode, bool centrifugal = true);

/// Splitting of the shell Hamiltonian H = u^2/2 + L/(2 r^2) + Phi(r).
/// `Radial`: kick with L/r^3 - m/r^2, drift r += dt u.
/// `FreeDrift`: kick with -m/r^2 only; the drift follows the exact straight-line
/// motion of u^2/2 + L/(2 r^2), so pericentre passages of low-L shells are exact.
enum class Integrator { Radial, FreeDrift };

std::string to_string(Integrator integrator);
Integrator integrator_from_string(const std::string& name);

struct StepStats {
  std::size_t reflections = 0;
  std::size_t sort_moves = 0;
};

/// One kick-drift-kick leapfrog step. Forces must be current on entry (see
/// accelerations with the same integrator); they are current again on exit.
/// With the radial splitting, shells that cross r < eps_r are reflected about eps_r.
StepStats step(ParticleEnsemble& ens, double dt, const ForceField& field, double eps_r,
               KernelMode mode = KernelMode::Parallel, Integrator integrator = Integrator::Radial);

double kinetic_energy(const ParticleEnsemble& ens);
/// -sum_i w_i m_i / sqrt(r_i^2 + eps^2) with the same m_i as the force law.
double potential_energy(const ParticleEnsemble& ens, double softening = 0.0);

/// Equal-weight shells drawn from f0 of the state. Radii come from the inverse
/// mass profile at shifted-Halton points; velocities by rejection against the
/// exact L^l factor. Deterministic given the seed.
ParticleEnsemble sample_from(const AnsatzState& state, std::size_t N, std::uint64_t seed);

/// Equal-weight shells drawn from the trilinear interpolant of grid data.
ParticleEnsemble sample_from(const GridDensity& f, std::size_t N, std::uint64_t seed);

enum class PerturbationKind { None, VelocityDilation, DensityModulation };

std::string to_string(PerturbationKind kind);
PerturbationKind perturbation_from_string(const std::string& name);

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::None;
  double amplitude = 0.0;
  std::uint64_t seed = 0;
};

/// Mass-neutral radial modulation g with int rho0 g = 0, used by kind (ii).
struct Modulation {
  double R = 1.0;
  double phase = 0.0;
  double offset = 0.0;
  double operator()(double r) const;
};
Modulation make_modulation(const AnsatzState& state, std::uint64_t seed);

/// Dilation maps u -> (1 + a) u with weights kept; modulation scales weights by
/// 1 + a g(r) and renormalizes to the original mass.
ParticleEnsemble perturb(const ParticleEnsemble& ens, const PerturbationSpec& spec, const AnsatzState& state);

/// Same perturbations applied to grid data of the steady state, with the
/// grid mass of `f0` preserved.
GridDensity perturb(const GridDensity& f0, const PerturbationSpec& spec, const AnsatzState& state);

struct DiagnosticSample {
  double t = 0.0;
  double Ekin = 0.0;
  double Epot = 0.0;
  double Etot = 0.0;
  double d_surrogate = 0.0;
  double field_dist = 0.0;     // ||grad U_f - grad U_0||^2
  double lyapunov_sum = 0.0;   // d + field / (8 pi)
  double mass = 0.0;
  double L_drift_max = 0.0;
};

/// Constants that enter the d-surrogate.
struct DiagnosticContext {
  const AnsatzState* steady = nullptr;
  /// [C + gamma L-term](initial data) - [C + gamma L-term](f0), evaluated on one grid.
  double casimir_excess = 0.0;
  /// Reference value of sum_i w_i (E_i + gamma L_i - E0) for f0: either the exact
  /// integral or the same sum over the unperturbed sample.
  double reference = 0.0;
  std::vector<double> L0;  // by id
  double softening = 0.0;
};

/// int int (E + gamma L - E0) f0 from the state's profile moments.
double steady_linear_term(const AnsatzState& state);
/// sum_i w_i (E_i + gamma L_i - E0) with E from the steady potential.
double sample_linear_term(const ParticleEnsemble& ens, const AnsatzState& state);
/// 4 pi int (m_f - m_0)^2 / r^2 dr with m_f the step function of the sorted shells.
double particle_field_distance(const ParticleEnsemble& ens, const AnsatzState& state);

DiagnosticSample diagnostics(const ParticleEnsemble& ens, const DiagnosticContext& ctx);

struct SimConfig {
  double dt = 1.0 / 2000.0;
  double t_end = 50.0;
  /// When set, dt and t_end are multiples of the dynamical time of the state.
  bool dynamical_units = true;
  int diag_every = 100;
  std::uint64_t seed = 1;
  double eps_r_fraction = 1e-6;  // inner reflection radius / support radius
  double softening_fraction = 1e-3;  // force softening length / support radius
  std::size_t N = 100000;
  KernelMode mode = KernelMode::Parallel;
  Integrator integrator = Integrator::FreeDrift;
};

struct StabilityResult {
  std::vector<DiagnosticSample> series;
  double t_dyn = 0.0;
  double dt = 0.0;
  double initial_deviation = 0.0;  // lyapunov_sum just after the perturbation
  double max_deviation = 0.0;
  double deviation_ratio = 0.0;    // max / initial
  double energy_drift = 0.0;       // max |Etot - Etot(0)| / |Etot(0)|
  double max_L_drift = 0.0;
  double max_mass_drift = 0.0;
  std::size_t reflections = 0;
  std::size_t steps = 0;
  double runtime_seconds = 0.0;
  std::string note;
};

using SampleCallback = std::function<void(const DiagnosticSample&)>;

/// Everything a stability run needs after sampling and perturbing.
struct StabilitySetup {
  AnsatzState state;
  ParticleEnsemble ensemble;
  DiagnosticContext context;  // `steady` is bound by evolve
  double dt = 0.0;
  double t_end = 0.0;
  double eps_r = 0.0;
  int diag_every = 100;
  KernelMode mode = KernelMode::Parallel;
  Integrator integrator = Integrator::FreeDrift;
};

/// Build the steady state of mass M, sample it and apply the perturbation.
StabilitySetup prepare_stability(const SimConfig& config, const CasimirModel& model, double M,
                                 const PerturbationSpec& perturbation, const SolverOptions& solver = {});

/// Advance the prepared ensemble from its current time to t_end.
StabilityResult evolve(StabilitySetup& setup, double t_end, const SampleCallback& on_sample = {});

/// prepare_stability followed by evolve to the configured end time.
StabilityResult run_stability(const SimConfig& config, const CasimirModel& model, double M,
                              const PerturbationSpec& perturbation, const SolverOptions& solver = {},
                              const SampleCallback& on_sample = {});

/// Evolve an existing ensemble against a steady state with a prepared context.
StabilityResult evolve(ParticleEnsemble& ens, const AnsatzState& state, const DiagnosticContext& ctx,
                       double dt, double t_end, int diag_every, KernelMode mode, double eps_r,
                       Integrator integrator, const SampleCallback& on_sample = {});

}  // namespace cammvp
