#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cammvp/config.hpp"

namespace cammvp {

inline constexpr const char* kVersion = "1.0.0";

struct CheckResult {
  std::string name;
  bool passed = true;
  /// Informational checks are reported but do not affect the exit code.
  bool asserted = true;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct FileEntry {
  std::string path;  // relative to the output directory
  std::uintmax_t bytes = 0;
  std::string checksum;  // FNV-1a 64, hex
};

struct RunManifest {
  std::string version = kVersion;
  std::string kind;
  std::string name;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  double runtime_seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<FileEntry> files;
  std::vector<CheckResult> checks;
  std::string error;

  /// No pipeline error and every asserted check passed.
  bool passed() const;
  int exit_code() const { return passed() ? 0 : 1; }
};

enum class SimVerb { Run, Resume };

struct RunOptions {
  SimVerb sim_verb = SimVerb::Run;
  std::filesystem::path snapshot;  // for SimVerb::Resume
  /// Progress lines; empty discards them.
  std::function<void(const std::string&)> log;
};

/// Run the pipeline for the configured kind, write every output under
/// config.out_dir and finish with manifest.json. Component errors are caught
/// and recorded in the manifest.
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& opts = {});

/// The invariant suite behind kind=checks, for the configured model.
std::vector<CheckResult> invariant_suite(const ExperimentConfig& config);

nlohmann::json to_json(const CheckResult& check);
nlohmann::json to_json(const RunManifest& manifest);

}  // namespace cammvp
