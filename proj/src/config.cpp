#include "cammvp/config.hpp"

#include <cctype>
#include <functional>
#include <sstream>

#include "cammvp/io.hpp"

namespace cammvp {

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Steady: return "steady";
    case ExperimentKind::Scaling: return "scaling";
    case ExperimentKind::Stability: return "stability";
    case ExperimentKind::Checks: return "checks";
    case ExperimentKind::Sim: return "sim";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (auto k : {ExperimentKind::Steady, ExperimentKind::Scaling, ExperimentKind::Stability, ExperimentKind::Checks,
                 ExperimentKind::Sim}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown experiment kind '" + name + "' (steady, scaling, stability, checks, sim)");
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid configuration:";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

struct TypeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double as_double(const std::string& v) {
  try {
    return parse_double(v);
  } catch (const std::exception&) {
    throw TypeMismatch("expected a number, got '" + v + "'");
  }
}

std::int64_t as_int(const std::string& v) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw TypeMismatch("expected an integer, got '" + v + "'");
  return x;
}

std::size_t as_count(const std::string& v) {
  const auto x = as_int(v);
  if (x < 0) throw TypeMismatch("expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

bool as_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw TypeMismatch("expected true or false, got '" + v + "'");
}

std::vector<double> as_list(const std::string& v) {
  std::vector<double> out;
  std::string item;
  std::istringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw TypeMismatch("empty entry in list '" + v + "'");
    out.push_back(as_double(item));
  }
  if (out.empty()) throw TypeMismatch("expected a comma-separated list of numbers");
  return out;
}

template <class F>
auto as_enum(F parse, const std::string& v) {
  try {
    return parse(v);
  } catch (const std::invalid_argument& e) {
    throw TypeMismatch(e.what());
  }
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = {
      {"experiment.kind",
       [](auto& c, const auto& v) { c.kind = as_enum(experiment_kind_from_string, v); }},
      {"experiment.name", [](auto& c, const auto& v) { c.name = v; }},
      {"experiment.out", [](auto& c, const auto& v) { c.out_dir = v; }},
      {"experiment.seed", [](auto& c, const auto& v) { c.seed = as_count(v); }},

      {"model.c1", [](auto& c, const auto& v) { c.model.c1 = as_double(v); }},
      {"model.c2", [](auto& c, const auto& v) { c.model.c2 = as_double(v); }},
      {"model.k1", [](auto& c, const auto& v) { c.model.k1 = as_double(v); }},
      {"model.k2", [](auto& c, const auto& v) { c.model.k2 = as_double(v); }},
      {"model.l", [](auto& c, const auto& v) { c.model.l = as_double(v); }},
      {"model.gamma", [](auto& c, const auto& v) { c.model.gamma = as_double(v); }},
      {"model.f0_threshold", [](auto& c, const auto& v) { c.model.f0_threshold = as_double(v); }},
      {"model.mass", [](auto& c, const auto& v) { c.mass = as_double(v); }},
      {"model.central_psi", [](auto& c, const auto& v) { c.central_psi = as_double(v); }},

      {"grid.nr", [](auto& c, const auto& v) { c.grid.nr = as_count(v); }},
      {"grid.nu", [](auto& c, const auto& v) { c.grid.nu = as_count(v); }},
      {"grid.nw", [](auto& c, const auto& v) { c.grid.nw = as_count(v); }},
      {"grid.r_max", [](auto& c, const auto& v) { c.grid.r_max = as_double(v); }},
      {"grid.v_max", [](auto& c, const auto& v) { c.grid.v_max = as_double(v); }},
      {"grid.rule",
       [](auto& c, const auto& v) { c.grid.rule = as_enum([](const std::string& s) { return node_rule_from_string(s); }, v); }},

      {"solver.rtol", [](auto& c, const auto& v) { c.solver.rtol = as_double(v); }},
      {"solver.start_fraction", [](auto& c, const auto& v) { c.solver.start_fraction = as_double(v); }},
      {"solver.max_step_fraction", [](auto& c, const auto& v) { c.solver.max_step_fraction = as_double(v); }},
      {"solver.r_max_factor", [](auto& c, const auto& v) { c.solver.r_max_factor = as_double(v); }},
      {"solver.max_steps", [](auto& c, const auto& v) { c.solver.max_steps = static_cast<int>(as_count(v)); }},
      {"solver.allow_out_of_range", [](auto& c, const auto& v) { c.solver.allow_out_of_range = as_bool(v); }},

      {"sim.dt", [](auto& c, const auto& v) { c.sim.dt = as_double(v); }},
      {"sim.t_end", [](auto& c, const auto& v) { c.sim.t_end = as_double(v); }},
      {"sim.dynamical_units", [](auto& c, const auto& v) { c.sim.dynamical_units = as_bool(v); }},
      {"sim.diag_every", [](auto& c, const auto& v) { c.sim.diag_every = static_cast<int>(as_int(v)); }},
      {"sim.N", [](auto& c, const auto& v) { c.sim.N = as_count(v); }},
      {"sim.eps_r_fraction", [](auto& c, const auto& v) { c.sim.eps_r_fraction = as_double(v); }},
      {"sim.softening_fraction", [](auto& c, const auto& v) { c.sim.softening_fraction = as_double(v); }},
      {"sim.integrator", [](auto& c, const auto& v) { c.sim.integrator = as_enum(integrator_from_string, v); }},
      {"sim.kernel",
       [](auto& c, const auto& v) {
         if (v == "serial")
           c.sim.mode = KernelMode::Serial;
         else if (v == "parallel")
           c.sim.mode = KernelMode::Parallel;
         else
           throw TypeMismatch("expected serial or parallel, got '" + v + "'");
       }},
      {"sim.perturbation", [](auto& c, const auto& v) { c.perturbation.kind = as_enum(perturbation_from_string, v); }},
      {"sim.amplitude", [](auto& c, const auto& v) { c.perturbation.amplitude = as_double(v); }},
      {"sim.max_deviation_ratio", [](auto& c, const auto& v) { c.max_deviation_ratio = as_double(v); }},
      {"sim.max_energy_drift", [](auto& c, const auto& v) { c.max_energy_drift = as_double(v); }},
      {"sim.snapshot_every", [](auto& c, const auto& v) { c.snapshot_every = static_cast<int>(as_count(v)); }},

      {"scaling.M1", [](auto& c, const auto& v) { c.scaling.M1 = as_double(v); }},
      {"scaling.M2", [](auto& c, const auto& v) { c.scaling.M2 = as_double(v); }},
      {"scaling.gammas", [](auto& c, const auto& v) { c.scaling.gammas = as_list(v); }},
  };
  return table;
}

std::vector<std::string> required_sections(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Steady:
    case ExperimentKind::Checks: return {"experiment", "model", "grid"};
    case ExperimentKind::Scaling: return {"experiment", "model", "scaling"};
    case ExperimentKind::Stability:
    case ExperimentKind::Sim: return {"experiment", "model", "sim"};
  }
  return {};
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

ExperimentConfig parse_config(const std::string& text, const ParseOptions& opts) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  const auto& table = key_table();
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected 'section.key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
      errors.push_back(where + "key '" + key + "' is not of the form section.key");
      continue;
    }
    auto it = table.find(key);
    if (it == table.end()) {
      errors.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    if (auto prev = cfg.lines.find(key); prev != cfg.lines.end()) {
      errors.push_back(where + "duplicate key '" + key + "' (first set on line " + std::to_string(prev->second) +
                       ", again on line " + std::to_string(lineno) + ")");
      continue;
    }
    if (value.empty()) {
      errors.push_back(where + "key '" + key + "' has no value");
      continue;
    }
    cfg.lines[key] = lineno;
    cfg.sections.insert(key.substr(0, dot));
    cfg.echo.emplace_back(key, value);
    try {
      it->second(cfg, value);
    } catch (const TypeMismatch& e) {
      errors.push_back(where + "type mismatch for '" + key + "': " + e.what());
    }
  }

  auto line_of = [&](const std::string& key) {
    auto it = cfg.lines.find(key);
    return it == cfg.lines.end() ? std::string() : "line " + std::to_string(it->second) + ": ";
  };

  if (!cfg.lines.count("experiment.kind")) errors.push_back("missing key 'experiment.kind'");
  for (const auto& s : required_sections(cfg.kind)) {
    if (!cfg.sections.count(s))
      errors.push_back("missing section '" + s + "' required by experiment kind " + to_string(cfg.kind));
  }

  // Single-power models carry k2 = k1 so the range check sees the pair consistently.
  if (cfg.model.c2 == 0.0) cfg.model.k2 = cfg.model.k1;
  cfg.solver.allow_out_of_range = cfg.solver.allow_out_of_range || opts.allow_out_of_range;
  try {
    cfg.model.check_well_formed();
  } catch (const std::invalid_argument& e) {
    errors.push_back(line_of("model.k1") + e.what());
  }
  if (!cfg.solver.allow_out_of_range && !cfg.model.exponents_in_range()) {
    std::string key = "model.k1";
    double value = cfg.model.k1;
    const double top = cfg.model.l + 1.5;
    if (cfg.model.k1 > 0.0 && cfg.model.k1 < top) {
      key = "model.k2";
      value = cfg.model.k2;
    }
    std::ostringstream os;
    os << line_of(cfg.lines.count(key) ? key : "model.l") << "exponent " << key.substr(6) << " = " << value
       << " violates 0 < k1, k2, k3 < l + 3/2 = " << top << " (pass --allow-out-of-range to override)";
    errors.push_back(os.str());
  }

  if (!(cfg.mass > 0.0)) errors.push_back(line_of("model.mass") + "model.mass must be positive");
  if (cfg.central_psi < 0.0) errors.push_back(line_of("model.central_psi") + "model.central_psi must be >= 0");
  if (!(cfg.sim.dt > 0.0)) errors.push_back(line_of("sim.dt") + "sim.dt must be positive");
  if (!(cfg.sim.t_end >= 0.0)) errors.push_back(line_of("sim.t_end") + "sim.t_end must be >= 0");
  if (!(cfg.sim.eps_r_fraction >= 0.0))
    errors.push_back(line_of("sim.eps_r_fraction") + "sim.eps_r_fraction must be >= 0");
  if (!(cfg.sim.softening_fraction >= 0.0))
    errors.push_back(line_of("sim.softening_fraction") + "sim.softening_fraction must be >= 0");
  if (cfg.sim.diag_every < 1) errors.push_back(line_of("sim.diag_every") + "sim.diag_every must be >= 1");
  if (cfg.sim.N == 0) errors.push_back(line_of("sim.N") + "sim.N must be positive");
  if (!(cfg.perturbation.amplitude >= 0.0))
    errors.push_back(line_of("sim.amplitude") + "sim.amplitude must be >= 0");
  if (cfg.grid.nr < 17) errors.push_back(line_of("grid.nr") + "grid.nr must be at least 17");
  if (cfg.grid.nu < 4 || cfg.grid.nw < 4) errors.push_back(line_of("grid.nu") + "grid.nu and grid.nw must be >= 4");
  if (cfg.grid.r_max < 0.0 || cfg.grid.v_max < 0.0)
    errors.push_back(line_of("grid.r_max") + "grid extents must be >= 0 (0 selects automatic)");
  if (!(cfg.scaling.M1 > 0.0 && cfg.scaling.M2 > 0.0))
    errors.push_back(line_of("scaling.M1") + "scaling masses must be positive");

  if (!errors.empty()) throw ConfigError(std::move(errors));
  set_seed(cfg, cfg.seed);
  return cfg;
}

void set_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.sim.seed = seed;
  cfg.perturbation.seed = seed;
}

ExperimentConfig load_config(const std::filesystem::path& path, const ParseOptions& opts) {
  return parse_config(read_file(path), opts);
}

}  // namespace cammvp
