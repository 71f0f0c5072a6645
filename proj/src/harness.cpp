#include "cammvp/harness.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "cammvp/io.hpp"
#include "cammvp/phasespace.hpp"
#include "cammvp/radial.hpp"
#include "cammvp/scaling.hpp"

namespace cammvp {

bool RunManifest::passed() const {
  if (!error.empty()) return false;
  for (const auto& c : checks)
    if (c.asserted && !c.passed) return false;
  return true;
}

nlohmann::json to_json(const CheckResult& c) {
  auto finite_or_string = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  };
  return {{"name", c.name},
          {"passed", c.passed},
          {"asserted", c.asserted},
          {"value", finite_or_string(c.value)},
          {"threshold", finite_or_string(c.threshold)},
          {"detail", c.detail}};
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : m.config) config[k] = v;
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"bytes", f.bytes}, {"fnv1a64", f.checksum}});
  nlohmann::json checks = nlohmann::json::array();
  std::size_t asserted = 0, failed = 0;
  for (const auto& c : m.checks) {
    checks.push_back(to_json(c));
    if (c.asserted) {
      ++asserted;
      if (!c.passed) ++failed;
    }
  }
  return {{"version", m.version},
          {"kind", m.kind},
          {"name", m.name},
          {"seed", m.seed},
          {"config", config},
          {"timestamps", {{"started", m.started}, {"finished", m.finished}, {"runtime_seconds", m.runtime_seconds}}},
          {"files", files},
          {"checks", checks},
          {"summary",
           {{"checks", m.checks.size()}, {"asserted", asserted}, {"failed", failed}, {"passed", m.passed()}}},
          {"error", m.error}};
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Files written under one output directory, listed in write order.
class Outputs {
 public:
  explicit Outputs(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }
  std::filesystem::path path(const std::string& rel) {
    add(rel);
    const auto p = root_ / rel;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    return p;
  }
  void write(const std::string& rel, const std::string& text) { write_file(path(rel), text); }
  void add(const std::string& rel) {
    for (const auto& f : files_)
      if (f == rel) return;
    files_.push_back(rel);
  }
  std::vector<FileEntry> inventory() const {
    std::vector<FileEntry> out;
    for (const auto& rel : files_) {
      const auto p = root_ / rel;
      if (!std::filesystem::exists(p)) continue;
      const std::string data = read_file(p);
      out.push_back({rel, data.size(), hex64(fnv1a64(data))});
    }
    return out;
  }
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

std::string plot_data(const std::string& xlabel, const std::string& ylabel, const std::vector<double>& x,
                      const std::vector<double>& y) {
  std::ostringstream os;
  os << "# " << xlabel << ' ' << ylabel << '\n';
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) os << format_exact(x[i]) << ' ' << format_exact(y[i]) << '\n';
  return os.str();
}

struct Checks {
  std::vector<CheckResult> list;

  CheckResult& add(std::string name, bool passed, double value, double threshold, std::string detail = {},
                   bool asserted = true) {
    list.push_back({std::move(name), passed, asserted, value, threshold, std::move(detail)});
    return list.back();
  }
  void below(std::string name, double value, double threshold, std::string detail = {}, bool asserted = true) {
    add(std::move(name), value < threshold, value, threshold, std::move(detail), asserted);
  }
  void at_least(std::string name, double value, double threshold, std::string detail = {}, bool asserted = true) {
    add(std::move(name), value >= threshold, value, threshold, std::move(detail), asserted);
  }
  void info(std::string name, double value, std::string detail = {}) {
    add(std::move(name), true, value, std::numeric_limits<double>::quiet_NaN(), std::move(detail), false);
  }
};

AnsatzState build_state(const ExperimentConfig& cfg) {
  if (cfg.central_psi > 0.0) return solve_steady(cfg.model, cfg.central_psi, cfg.solver);
  return match_mass(cfg.model, cfg.mass, cfg.solver);
}

GridDensity layout_for(const ExperimentConfig& cfg, const AnsatzState& s) {
  const double r_max = cfg.grid.r_max > 0.0 ? cfg.grid.r_max : (s.compact ? s.R_supp : 20.0 * s.core_scale);
  const double v_max = cfg.grid.v_max > 0.0 ? cfg.grid.v_max : s.v_escape();
  return GridDensity::zeros(r_max, v_max, cfg.grid.nr, cfg.grid.nu, cfg.grid.nw, cfg.grid.rule);
}

void steady_checks(const AnsatzState& s, Checks& out) {
  const bool compact = s.compact;
  const std::string skip = compact ? std::string() : "informational: non-compact state";
  out.at_least("steady.E0_negative", -s.E0, std::numeric_limits<double>::min(), compact ? "" : skip, compact);
  out.at_least("steady.D_negative", -s.report.total, std::numeric_limits<double>::min(), skip, compact);
  if (compact) {
    out.below("steady.virial", virial_ratio(s), 1e-4, "|2 Ekin + Epot| / |Epot|");
    const ElResidual el = el_residual(s);
    out.below("steady.el_sup_on_support", el.sup_on_support / std::abs(s.E0), 1e-6, "relative to |E0|");
    out.at_least("steady.el_min_off_support", el.min_off_support, -1e-10);
    out.below("steady.e0_consistency", e0_consistency(s).mismatch, 1e-6);
  } else {
    out.info("steady.virial", virial_ratio(s), "non-compact state: the virial identity is not asserted");
  }
  const PlummerCheck pc = plummer_check(s);
  if (pc.applicable) {
    std::ostringstream os;
    os << "analytic Plummer sphere with M_inf = " << pc.M_inf << ", a = " << pc.a << ", tested up to r = "
       << pc.r_limit;
    out.below("steady.plummer", pc.max_rel_error, 1e-5, os.str());
  }
}

/// rho = 2 pi int int f w dw du by nested double-exponential quadrature, in the
/// variable t = w^2 so the tangential weight becomes dt / 2.
double velocity_quadrature_density(const CasimirModel& model, double psi, double r) {
  if (psi <= 0.0) return 0.0;
  boost::math::quadrature::tanh_sinh<double> ts;
  const double umax = std::sqrt(2.0 * psi);
  const double tfac = 0.5 + model.gamma * r * r;
  auto outer = [&](double u) {
    const double tmax = (psi - 0.5 * u * u) / tfac;
    if (tmax <= 0.0) return 0.0;
    auto inner = [&](double t) { return ansatz_f(model, psi, r, u, std::sqrt(t)); };
    return ts.integrate(inner, 0.0, tmax);
  };
  return 2.0 * boost::math::constants::pi<double>() * ts.integrate(outer, 0.0, umax);
}

void sim_checks(const ExperimentConfig& cfg, const StabilityResult& res, Checks& out) {
  out.add("sim.L_drift", res.max_L_drift == 0.0, res.max_L_drift, 0.0, "max_i |L_i(t) - L_i(0)|, exact");
  out.add("sim.mass_drift", res.max_mass_drift == 0.0, res.max_mass_drift, 0.0, "|sum w(t) - sum w(0)|, exact");
  out.below("sim.energy_drift", res.energy_drift, cfg.max_energy_drift, "max |Etot - Etot(0)| / |Etot(0)|");
  const bool perturbed = cfg.perturbation.kind != PerturbationKind::None && cfg.perturbation.amplitude > 0.0;
  const bool in_range = cfg.model.exponents_in_range();
  if (perturbed) {
    std::string detail = "max_t (d + field/8pi) / its value just after the perturbation; numerical evidence only";
    if (!in_range) detail += "; out-of-range model, no bound asserted";
    out.add("sim.deviation_ratio", res.deviation_ratio <= cfg.max_deviation_ratio, res.deviation_ratio,
            cfg.max_deviation_ratio, detail, in_range);
  } else {
    out.info("sim.noise_floor", res.max_deviation, "unperturbed run: max (d + field/8pi) is the sampling-noise floor");
  }
}

void run_steady(const ExperimentConfig& cfg, Outputs& files, Checks& checks) {
  const AnsatzState s = build_state(cfg);
  store_state(files.path("profile.txt"), s);
  steady_checks(s, checks);

  nlohmann::json grid_block = nullptr;
  if (s.compact) {
    const GridDensity f0 = grid_from_state(s, layout_for(cfg, s));
    const SpatialDensity rho = rho_from_f(f0);
    double worst = 0.0;
    const double floor = 1e-3 * s.rho.front();
    for (std::size_t i = 0; i < rho.values.size(); ++i) {
      const double exact = s.rho_at(rho.grid.r()[i]);
      if (exact > floor) worst = std::max(worst, std::abs(rho.values[i] - exact) / exact);
    }
    checks.info("steady.grid_density_delta", worst, "grid quadrature of f0 vs closed-form rho, relative");
    const FunctionalReport gr = functional_report(f0, cfg.model);
    checks.info("steady.grid_D_delta", std::abs(gr.total - s.report.total) / std::abs(s.report.total),
                "grid D(f0) vs profile D, relative");
    grid_block = {{"nr", f0.nr()}, {"nu", f0.nu()}, {"nw", f0.nw()}, {"functionals", to_json(gr)}};
  }

  const AssumptionReport ar = validate_assumptions(cfg.model);
  nlohmann::json summary = {{"state", state_summary(s)},
                            {"assumptions",
                             {{"passed", ar.passed()},
                              {"range_ok", ar.range_ok},
                              {"range_note", ar.range_note},
                              {"Q1_margin", ar.q1.margin},
                              {"Q2_margin", ar.q2.margin},
                              {"Q3_margin", ar.q3.margin},
                              {"Q4_margin", ar.q4.margin},
                              {"C1", ar.C1},
                              {"C2", ar.C2 ? nlohmann::json(*ar.C2) : nlohmann::json(nullptr)}}},
                            {"grid", grid_block}};
  const PlummerCheck pc = plummer_check(s);
  if (pc.applicable)
    summary["plummer"] = {{"M_inf", pc.M_inf}, {"a", pc.a}, {"max_rel_error", pc.max_rel_error}, {"r_limit", pc.r_limit}};
  nlohmann::json cj = nlohmann::json::array();
  for (const auto& c : checks.list) cj.push_back(to_json(c));
  summary["checks"] = cj;
  files.write("summary.json", summary.dump(2) + "\n");

  files.write("plots/rho.dat", plot_data("r", "rho", s.r, s.rho));
  files.write("plots/U.dat", plot_data("r", "U", s.r, s.U));
  files.write("plots/m.dat", plot_data("r", "m", s.r, s.m));
  files.write("plots/README.txt",
              "Column files for external plotting, first line is the header.\n"
              "rho.dat  density rho(r) of the steady state\n"
              "U.dat    potential U(r); tends to -M/r outside the support\n"
              "m.dat    enclosed mass m(r)\n");
}

void run_scaling(const ExperimentConfig& cfg, Outputs& files, Checks& checks) {
  const CasimirModel& model = cfg.model;
  ScalingReport rep = scaling_report(model, cfg.mass, cfg.scaling.gammas);
  rep.inequality = scaling_inequality_check(model, cfg.scaling.M1, cfg.scaling.M2);

  checks.add("scaling.concentration_constant_alpha1", concentration_constant(1.0) == 2.0, concentration_constant(1.0),
             2.0, "C_1 = 2 exactly");
  checks.info("scaling.alpha", rep.alpha);
  checks.info("scaling.C_alpha", rep.C_alpha);
  checks.info("scaling.R_M", rep.R_M, "-M^2 / (C_alpha D_M), D_M from " + rep.D_M_source);
  checks.at_least("scaling.inequality_margin", rep.inequality.margin, -1e-6,
                  "D_M2 - (M2/M1)^alpha D_M1 at (" + format_exact(cfg.scaling.M1) + ", " +
                      format_exact(cfg.scaling.M2) + "); " + rep.inequality.interpretation);
  checks.below("scaling.exponent_identity", rep.inequality.exponent_identity_error, 1e-12);
  for (const auto& w : rep.witness.per_gamma) {
    const bool asserted = w.gamma == 0.0;
    checks.add("scaling.witness_gamma_" + format_exact(w.gamma), w.found, w.D, 0.0,
               w.found ? "D(f_bar) < 0 with a (bc)^{2l} = " + format_exact(w.a_bc_2l) : w.failure, asserted);
  }
  checks.at_least("scaling.split_margin", rep.split.min_margin, 0.0,
                  "min of lhs - rhs + 1e-8 (1 + |lhs|) over " + std::to_string(rep.split.checks) + " pairs");

  const GridDensity base = witness_base_density(model);
  const ScalingParams p = balanced_scaling(3.0, model.l, model.k3());
  checks.below("scaling.mscale", mscale_residual(base, p.a, p.b, p.c), 1e-12);
  checks.below("scaling.dscale", dscale_residual(base, model, p.a, p.b, p.c), 1e-6);

  nlohmann::json j = to_json(rep);
  nlohmann::json cj = nlohmann::json::array();
  for (const auto& c : checks.list) cj.push_back(to_json(c));
  j["checks"] = cj;
  files.write("scaling.json", j.dump(2) + "\n");

  std::ostringstream split;
  split << "# eps R lhs rhs\n";
  for (const auto& r : rep.split.rows)
    split << format_exact(r[0]) << ' ' << format_exact(r[1]) << ' ' << format_exact(r[2]) << ' '
          << format_exact(r[3]) << '\n';
  files.write("plots/split.dat", split.str());
  std::ostringstream sweep;
  sweep << "# gamma b D\n";
  for (const auto& w : rep.witness.per_gamma)
    for (const auto& [b, D] : w.sweep) sweep << format_exact(w.gamma) << ' ' << format_exact(b) << ' ' << format_exact(D) << '\n';
  files.write("plots/witness_sweep.dat", sweep.str());
  files.write("plots/README.txt",
              "split.dat          lhs and rhs of the split estimate against R, one block per epsilon\n"
              "witness_sweep.dat  D of the scaled test function against b, one block per gamma\n");
}

std::map<std::string, std::string> sim_meta(const ExperimentConfig& cfg, const StabilitySetup& setup,
                                           const DiagnosticSample& first) {
  const CasimirModel& m = setup.state.model;
  std::map<std::string, std::string> meta = {
      {"model.c1", format_exact(m.c1)},
      {"model.c2", format_exact(m.c2)},
      {"model.k1", format_exact(m.k1)},
      {"model.k2", format_exact(m.k2)},
      {"model.l", format_exact(m.l)},
      {"model.gamma", format_exact(m.gamma)},
      {"model.f0_threshold", format_exact(m.f0_threshold)},
      {"central_psi", format_exact(setup.state.central_psi)},
      {"casimir_excess", format_exact(setup.context.casimir_excess)},
      {"reference", format_exact(setup.context.reference)},
      {"softening", format_exact(setup.context.softening)},
      {"dt", format_exact(setup.dt)},
      {"eps_r", format_exact(setup.eps_r)},
      {"diag_every", std::to_string(setup.diag_every)},
      {"integrator", to_string(setup.integrator)},
      {"kernel", setup.mode == KernelMode::Serial ? "serial" : "parallel"},
      {"perturbation", to_string(cfg.perturbation.kind)},
      {"amplitude", format_exact(cfg.perturbation.amplitude)},
      {"seed", std::to_string(cfg.seed)},
      {"initial.Etot", format_exact(first.Etot)},
      {"initial.lyapunov_sum", format_exact(first.lyapunov_sum)},
      {"initial.mass", format_exact(first.mass)},
  };
  return meta;
}

const std::string& meta_at(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw FormatError("snapshot metadata lacks '" + key + "'");
  return it->second;
}

/// Recompute the drift and ratio fields against the first sample of the
/// original run rather than the first sample of this segment.
void rebase(StabilityResult& r, double E_initial, double lyap_initial, double mass_initial) {
  r.initial_deviation = lyap_initial;
  r.energy_drift = 0.0;
  r.max_mass_drift = 0.0;
  for (const auto& s : r.series) {
    r.energy_drift = std::max(r.energy_drift, std::abs(s.Etot - E_initial) / std::abs(E_initial));
    r.max_mass_drift = std::max(r.max_mass_drift, std::abs(s.mass - mass_initial));
  }
  r.deviation_ratio = lyap_initial > 0.0 ? r.max_deviation / lyap_initial : std::numeric_limits<double>::infinity();
}

void run_dynamics(const ExperimentConfig& cfg, const RunOptions& opts, Outputs& files, Checks& checks) {
  const bool is_sim = cfg.kind == ExperimentKind::Sim;
  const bool resume = is_sim && opts.sim_verb == SimVerb::Resume;
  auto log = [&](const std::string& line) {
    if (opts.log) opts.log(line);
  };

  StabilitySetup setup;
  double t_end = 0.0;
  std::map<std::string, std::string> resume_meta;
  if (resume) {
    if (opts.snapshot.empty()) throw std::invalid_argument("sim resume needs --snapshot");
    Snapshot snap = load_snapshot(opts.snapshot);
    resume_meta = snap.meta;
    const auto& meta = snap.meta;
    CasimirModel m;
    m.c1 = parse_double(meta_at(meta, "model.c1"));
    m.c2 = parse_double(meta_at(meta, "model.c2"));
    m.k1 = parse_double(meta_at(meta, "model.k1"));
    m.k2 = parse_double(meta_at(meta, "model.k2"));
    m.l = parse_double(meta_at(meta, "model.l"));
    m.gamma = parse_double(meta_at(meta, "model.gamma"));
    m.f0_threshold = parse_double(meta_at(meta, "model.f0_threshold"));
    const CasimirModel& c = cfg.model;
    if (m.c1 != c.c1 || m.c2 != c.c2 || m.k1 != c.k1 || m.k2 != c.k2 || m.l != c.l || m.gamma != c.gamma ||
        m.f0_threshold != c.f0_threshold)
      throw std::invalid_argument("snapshot was written for a different model than the configuration");
    setup.state = solve_steady(m, parse_double(meta_at(meta, "central_psi")), cfg.solver);
    setup.ensemble = std::move(snap.ensemble);
    setup.context.casimir_excess = parse_double(meta_at(meta, "casimir_excess"));
    setup.context.reference = parse_double(meta_at(meta, "reference"));
    setup.context.softening = parse_double(meta_at(meta, "softening"));
    // L is conserved exactly, so the snapshot values are the initial ones.
    setup.context.L0 = setup.ensemble.L_by_id();
    setup.dt = parse_double(meta_at(meta, "dt"));
    setup.eps_r = parse_double(meta_at(meta, "eps_r"));
    setup.diag_every = std::stoi(meta_at(meta, "diag_every"));
    setup.integrator = integrator_from_string(meta_at(meta, "integrator"));
    setup.mode = meta_at(meta, "kernel") == "serial" ? KernelMode::Serial : KernelMode::Parallel;
    const double t_dyn = setup.state.dynamical_time();
    t_end = cfg.sim.dynamical_units ? cfg.sim.t_end * t_dyn : cfg.sim.t_end;
    log("resuming at t = " + format_exact(setup.ensemble.t) + " with " + std::to_string(setup.ensemble.size()) +
        " shells");
  } else {
    setup = prepare_stability(cfg.sim, cfg.model, cfg.mass, cfg.perturbation, cfg.solver);
    t_end = setup.t_end;
    log("sampled " + std::to_string(setup.ensemble.size()) + " shells, t_dyn = " +
        format_exact(setup.state.dynamical_time()) + ", dt = " + format_exact(setup.dt));
  }
  store_state(files.path("profile.txt"), setup.state);

  std::ofstream csv(files.path("diagnostics.csv"));
  if (!csv) throw std::runtime_error("cannot write diagnostics.csv");
  write_diagnostics_header(csv);

  std::map<std::string, std::string> meta = resume_meta;
  bool have_meta = resume;
  std::size_t samples = 0;
  const double t_start = setup.ensemble.t;
  const std::size_t total_samples =
      static_cast<std::size_t>(std::llround((t_end - t_start) / setup.dt)) / static_cast<std::size_t>(setup.diag_every) + 1;
  auto on_sample = [&](const DiagnosticSample& s) {
    write_diagnostics_row(csv, s);
    if (!have_meta) {
      meta = sim_meta(cfg, setup, s);
      have_meta = true;
    }
    ++samples;
    if (total_samples >= 10 && samples % (total_samples / 10) == 0)
      log("t = " + format_exact(s.t) + "  d + field/8pi = " + format_exact(s.lyapunov_sum));
    if (is_sim && cfg.snapshot_every > 0 && samples > 1 && (samples - 1) % cfg.snapshot_every == 0) {
      std::ostringstream name;
      name << "snapshots/snap_" << std::setw(6) << std::setfill('0') << samples - 1 << ".bin";
      store_snapshot(files.path(name.str()), Snapshot{setup.ensemble, meta});
    }
  };
  StabilityResult res = evolve(setup, t_end, on_sample);
  csv.close();
  if (resume) {
    rebase(res, parse_double(meta_at(meta, "initial.Etot")), parse_double(meta_at(meta, "initial.lyapunov_sum")),
           parse_double(meta_at(meta, "initial.mass")));
  }
  if (is_sim) store_snapshot(files.path("final.bin"), Snapshot{setup.ensemble, meta});

  sim_checks(cfg, res, checks);
  nlohmann::json j = to_json(res);
  j["model"] = to_json(setup.state.model);
  j["perturbation"] = {{"kind", to_string(cfg.perturbation.kind)}, {"amplitude", cfg.perturbation.amplitude}};
  j["N"] = setup.ensemble.size();
  j["t_end"] = t_end;
  j["softening"] = setup.context.softening;
  j["integrator"] = to_string(setup.integrator);
  j["resumed_from_t"] = resume ? nlohmann::json(t_start) : nlohmann::json(nullptr);
  nlohmann::json cj = nlohmann::json::array();
  for (const auto& c : checks.list) cj.push_back(to_json(c));
  j["checks"] = cj;
  files.write("summary.json", j.dump(2) + "\n");

  std::vector<double> t, lyap, d, field, etot;
  for (const auto& s : res.series) {
    t.push_back(s.t);
    lyap.push_back(s.lyapunov_sum);
    d.push_back(s.d_surrogate);
    field.push_back(s.field_dist);
    etot.push_back(s.Etot);
  }
  files.write("plots/lyapunov.dat", plot_data("t", "d+field/8pi", t, lyap));
  files.write("plots/d_surrogate.dat", plot_data("t", "d", t, d));
  files.write("plots/field_distance.dat", plot_data("t", "field", t, field));
  files.write("plots/energy.dat", plot_data("t", "Etot", t, etot));
  files.write("plots/README.txt",
              "lyapunov.dat        d + field/8pi against t; compare with its value at t = 0\n"
              "d_surrogate.dat     d-distance surrogate against t\n"
              "field_distance.dat  ||grad U_f - grad U_0||^2 against t\n"
              "energy.dat          total energy against t\n");
}

}  // namespace

std::vector<CheckResult> invariant_suite(const ExperimentConfig& cfg) {
  Checks out;
  const CasimirModel& model = cfg.model;
  const bool in_range = model.exponents_in_range();

  const AssumptionReport ar = validate_assumptions(model);
  const double q_margin = std::min({ar.q1.margin, ar.q2.margin, ar.q3.margin, ar.q4.margin});
  out.add("casimir.assumptions", ar.passed(), q_margin, 0.0, ar.range_note, in_range);

  Rng rng(cfg.seed);
  for (int i = 0; i < 5; ++i) {
    const double psi = rng.uniform(0.05, 2.0), r = rng.uniform(0.01, 2.0);
    const double closed = rho_of_potential(model, psi, r);
    const double quad = velocity_quadrature_density(model, psi, r);
    out.below("steady.ansatz_reduction_" + std::to_string(i), std::abs(closed - quad) / std::abs(quad), 1e-8);
  }

  const AnsatzState s = build_state(cfg);
  steady_checks(s, out);
  if (!s.compact) {
    out.info("phasespace.skipped", 0.0, "grid checks need a compactly supported state");
    return out.list;
  }

  const GridDensity layout = layout_for(cfg, s);
  const GridSteady gs = make_grid_steady(s, layout);
  const double M0 = gs.f0.mass();
  out.below("phasespace.d_self", std::abs(d_distance(gs.f0, gs)), 1e-10, "|d(f0, f0)|");
  double d_min = std::numeric_limits<double>::infinity(), dd_worst = 0.0;
  double green_worst = 0.0, mass_margin = std::numeric_limits<double>::infinity();
  double split_margin = std::numeric_limits<double>::infinity();
  const double n1 = model.k1 + model.l + 1.5;
  for (int i = 0; i < 10; ++i) {
    const GridDensity f = random_density(layout, rng, M0);
    d_min = std::min(d_min, d_distance(f, gs));
    dd_worst = std::max(dd_worst, dd_identity_residual(f, gs) / (1.0 + std::abs(functional_report(f, model).total)));
    const SpatialDensity rho = rho_from_f(f);
    const SpatialDensity rho2 = rho_from_f(random_density(layout, rng, 1.0));
    green_worst = std::max(green_worst, green_identity_residual(rho, rho2));
    mass_margin = std::min(mass_margin, mass_bound_margin(rho, n1, model.l).margin);
    split_margin = std::min(split_margin, field_split_margin(rho).margin);
  }
  out.at_least("phasespace.d_nonnegative", d_min, -1e-12, "min over 10 random mass-M densities");
  out.below("phasespace.dd_identity", dd_worst, 1e-8, "relative to 1 + |D(f)|");
  out.below("radial.green_identity", green_worst, 1e-6, "max over 10 random pairs");
  out.at_least("radial.mass_bound", mass_margin, -1e-10, "constant (4 pi)^{1/(1+n1)}");
  out.at_least("radial.field_split", split_margin, -1e-10);

  const PerturbationSpec p1{PerturbationKind::DensityModulation, 0.005, cfg.seed};
  const PerturbationSpec p2{PerturbationKind::DensityModulation, 0.01, cfg.seed};
  const double d1 = d_distance(perturb(gs.f0, p1, s), gs);
  const double d2 = d_distance(perturb(gs.f0, p2, s), gs);
  const double ratio = d2 / d1;
  out.add("phasespace.quadratic_ratio", ratio >= 3.5 && ratio <= 4.5, ratio, 4.0, "d(2 delta) / d(delta), accept [3.5, 4.5]");

  out.add("scaling.concentration_constant_alpha1", concentration_constant(1.0) == 2.0, concentration_constant(1.0), 2.0);
  const ScalingParams sp = balanced_scaling(3.0, model.l, model.k3());
  out.below("scaling.mscale", mscale_residual(gs.f0, sp.a, sp.b, sp.c), 1e-12);
  out.below("scaling.dscale", dscale_residual(gs.f0, model, sp.a, sp.b, sp.c), 1e-6);

  {
    ParticleEnsemble ens = sample_from(s, 2000, cfg.seed);
    const double mass0 = ens.total_mass();
    const auto L0 = ens.L_by_id();
    ForceField field;
    field.softening = 1e-3 * s.R_supp;
    const double dt = s.dynamical_time() / 2000.0;
    accelerations(ens, field, KernelMode::Parallel, false);
    for (int n = 0; n < 200; ++n) step(ens, dt, field, 1e-6 * s.R_supp, KernelMode::Parallel, Integrator::FreeDrift);
    const auto L1 = ens.L_by_id();
    double L_drift = 0.0;
    for (std::size_t i = 0; i < L0.size(); ++i) L_drift = std::max(L_drift, std::abs(L1[i] - L0[i]));
    out.add("dynamics.L_exact", L_drift == 0.0, L_drift, 0.0);
    out.add("dynamics.mass_exact", ens.total_mass() == mass0, std::abs(ens.total_mass() - mass0), 0.0);
  }
  {
    ParticleEnsemble one;
    one.particles.push_back({1.0, 0.1, 0.8, 1e-3, 0});
    ForceField frozen;
    frozen.external_mass = [](double) { return 1.0; };
    accelerations(one, frozen, KernelMode::Serial);
    const Particle start = one.particles[0];
    for (int n = 0; n < 1000; ++n) step(one, 1e-3, frozen, 0.0, KernelMode::Serial);
    one.particles[0].u = -one.particles[0].u;
    accelerations(one, frozen, KernelMode::Serial);
    for (int n = 0; n < 1000; ++n) step(one, 1e-3, frozen, 0.0, KernelMode::Serial);
    const double err = std::max(std::abs(one.particles[0].r - start.r), std::abs(one.particles[0].u + start.u));
    out.below("dynamics.reversibility", err, 1e-10, "frozen potential, 1000 steps forward and back");
  }
  {
    std::stringstream buf;
    store_state(buf, s);
    const AnsatzState back = load_state(buf);
    bool same = back.r == s.r && back.U == s.U && back.rho == s.rho && back.m == s.m && back.E0 == s.E0 &&
                back.central_psi == s.central_psi && back.mass == s.mass;
    out.add("io.profile_round_trip", same, same ? 0.0 : 1.0, 0.0, "bit-exact");
  }
  return out.list;
}

RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  RunManifest man;
  man.kind = to_string(cfg.kind);
  if (cfg.kind == ExperimentKind::Sim) man.kind += opts.sim_verb == SimVerb::Resume ? " resume" : " run";
  man.name = cfg.name;
  man.seed = cfg.seed;
  man.config = cfg.echo;
  man.started = utc_now();
  const auto start = std::chrono::steady_clock::now();

  Outputs files(cfg.out_dir);
  Checks checks;
  try {
    switch (cfg.kind) {
      case ExperimentKind::Steady: run_steady(cfg, files, checks); break;
      case ExperimentKind::Scaling: run_scaling(cfg, files, checks); break;
      case ExperimentKind::Stability:
      case ExperimentKind::Sim: run_dynamics(cfg, opts, files, checks); break;
      case ExperimentKind::Checks: {
        checks.list = invariant_suite(cfg);
        nlohmann::json cj = nlohmann::json::array();
        for (const auto& c : checks.list) cj.push_back(to_json(c));
        files.write("checks.json", cj.dump(2) + "\n");
        break;
      }
    }
  } catch (const std::exception& e) {
    man.error = e.what();
  }
  man.checks = checks.list;
  man.files = files.inventory();
  man.finished = utc_now();
  man.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(files.root() / "manifest.json", to_json(man).dump(2) + "\n");
  return man;
}

}  // namespace cammvp
