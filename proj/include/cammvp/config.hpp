#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cammvp/casimir.hpp"
#include "cammvp/dynamics.hpp"
#include "cammvp/numerics.hpp"
#include "cammvp/steady.hpp"

namespace cammvp {

enum class ExperimentKind { Steady, Scaling, Stability, Checks, Sim };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

/// Phase-space grid used by the grid-based checks. Zero extents are filled
/// in from the steady state (support radius, escape speed).
struct GridConfig {
  std::size_t nr = 96;
  std::size_t nu = 64;
  std::size_t nw = 48;
  double r_max = 0.0;
  double v_max = 0.0;
  NodeRule rule = NodeRule::Cubic;
};

struct ScalingConfig {
  double M1 = 0.5;
  double M2 = 1.0;
  std::vector<double> gammas{0.0, 1e-4, 1e-3, 1e-2, 1e-1};
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Steady;
  std::string name = "experiment";
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;

  CasimirModel model;
  /// Target mass; when central_psi > 0 the state is shot from that value instead.
  double mass = 1.0;
  double central_psi = 0.0;

  GridConfig grid;
  SolverOptions solver;
  SimConfig sim;
  PerturbationSpec perturbation;
  /// Bound on max(d + field/8pi) / its initial value; asserted only for in-range models.
  double max_deviation_ratio = 5.0;
  double max_energy_drift = 1e-4;
  /// Write a snapshot every this many diagnostic samples in `sim`; 0 writes only the final one.
  int snapshot_every = 0;
  ScalingConfig scaling;

  std::set<std::string> sections;
  /// Line of every key that was set, keyed "section.key".
  std::map<std::string, int> lines;
  /// The parsed key/value pairs in file order, for echoing into the manifest.
  std::vector<std::pair<std::string, std::string>> echo;
};

/// All problems found in one parse, one message per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct ParseOptions {
  bool allow_out_of_range = false;
};

/// Parse `section.key = value` lines ('#' starts a comment). Throws ConfigError
/// listing every unknown key, type mismatch, duplicate, missing section and
/// range violation with its line number.
ExperimentConfig parse_config(const std::string& text, const ParseOptions& opts = {});
/// Override the seed everywhere it is used (sampling and perturbation).
void set_seed(ExperimentConfig& cfg, std::uint64_t seed);

ExperimentConfig load_config(const std::filesystem::path& path, const ParseOptions& opts = {});

}  // namespace cammvp
