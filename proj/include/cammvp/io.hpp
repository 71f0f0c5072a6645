#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "json.hpp"

#include "cammvp/dynamics.hpp"
#include "cammvp/phasespace.hpp"
#include "cammvp/scaling.hpp"
#include "cammvp/steady.hpp"

namespace cammvp {

/// Raised for unreadable files: wrong magic, unsupported version, checksum or shape errors.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text profile: "# camm-vp profile v1" header with model and state metadata,
/// columns r U rho m in round-trip precision, FNV-1a checksum trailer.
void store_state(std::ostream& os, const AnsatzState& state);
AnsatzState load_state(std::istream& is);
void store_state(const std::filesystem::path& path, const AnsatzState& state);
AnsatzState load_state(const std::filesystem::path& path);

/// Sibling format for grid data: header, axis vectors and the row-major value block.
void store_grid(std::ostream& os, const GridDensity& f);
GridDensity load_grid(std::istream& is);

struct Snapshot {
  ParticleEnsemble ensemble;
  std::map<std::string, std::string> meta;
};
void store_snapshot(const std::filesystem::path& path, const Snapshot& snap);
Snapshot load_snapshot(const std::filesystem::path& path);

nlohmann::json to_json(const CasimirModel& model);
nlohmann::json to_json(const FunctionalReport& report);
nlohmann::json state_summary(const AnsatzState& state);
nlohmann::json to_json(const ScalingReport& report);
nlohmann::json to_json(const StabilityResult& result);

/// Diagnostic CSV with the columns t, Ekin, Epot, Etot, d_surrogate, field_dist,
/// lyapunov_sum, mass, L_drift_max.
void write_diagnostics_header(std::ostream& os);
void write_diagnostics_row(std::ostream& os, const DiagnosticSample& s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cammvp
