#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutbias/experiment.hpp"

namespace cutbias {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kThreadsEnvVar = "CUTOFF_BIAS_THREADS";

// Configuration problems: schema violations (reported with JSON-pointer
// paths) and invariant violations (reported per scenario index).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses a JSON document {"scenarios": [...]} whose objects mirror
// ScenarioConfig in snake_case. Scalar fields may hold arrays instead;
// those expand by Cartesian product. Throws ConfigError.
std::vector<ScenarioConfig> parse_config(const std::filesystem::path& path);
std::vector<ScenarioConfig> parse_config_text(const std::string& json_text);

// Canonical JSON rendering (sorted keys, every field explicit) and its
// FNV-1a 64-bit hash; stable across field reordering in the source file.
std::string canonical_config_json(const ScenarioConfig& config);
std::uint64_t config_hash(const ScenarioConfig& config);
std::string config_hash_hex(const ScenarioConfig& config);

// Records CSV. Header:
// sim_index,selected_cutoff,theta_true_selected,estimate_mle,estimate_bootstrap,bootstrap_fallback,estimate_abc,abc_failed
// Absent values are empty fields; reals carry 17 significant digits.
std::string records_to_csv(const std::vector<SimulationRecord>& records);
std::vector<SimulationRecord> records_from_csv(const std::string& text);
void write_records(const std::vector<SimulationRecord>& records,
                   const std::filesystem::path& path);
std::vector<SimulationRecord> read_records(const std::filesystem::path& path);

// Bias report CSV. Header:
// estimator,selected_cutoff,n_selected,selection_probability,conditional_bias,sd,se
// One row per (estimator, cutoff) plus a single `none` row.
std::string bias_report_to_csv(const BiasReport& report);
BiasReport bias_report_from_csv(const std::string& text);
void write_bias_report(const BiasReport& report,
                       const std::filesystem::path& path);
BiasReport read_bias_report(const std::filesystem::path& path);

struct ManifestEntry {
  std::size_t scenario_index = 0;
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::string records_path;
  std::string report_path;
};

// Makes every output file traceable to an exact configuration and seed.
struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string timestamp;  // ISO 8601 UTC
  std::vector<ManifestEntry> entries;
};

void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& path);

// Entry point behind the `cutoff-bias` executable. Exit status: 0 success,
// 1 configuration error, 2 runtime failure.
int cli_main(int argc, const char* const* argv);

}  // namespace cutbias
