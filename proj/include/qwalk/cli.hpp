#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "qwalk/ensemble.hpp"
#include "qwalk/error.hpp"

namespace qwalk::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Bad or inconsistent configuration; maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class CommandKind { Trace, Run, Scan, PhaseDiagram };

std::string_view to_string(CommandKind kind) noexcept;

struct Preset {
  std::string name;
  CommandKind kind;
  nlohmann::json parameters;
  std::string description;
};

/// Names of all shipped presets (fig1a ... fig7).
std::vector<std::string> preset_names();

/// Preset at scale "desk" or "paper". Throws ConfigError on unknown names.
Preset find_preset(std::string_view name, std::string_view scale = "desk");

struct TraceSpec {
  CorrelationSpec correlation{0.0, 200, 1};
};

struct RunSpec {
  EnsembleConfig ensemble;
  std::optional<TimeWindow> hurst_window;
};

struct ScanSpec {
  EnsembleConfig base;
  std::vector<Eigen::Index> sizes;
  std::size_t window_len = 100;
};

struct SweepSpec {
  EnsembleConfig base;
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<Eigen::Index> sizes;
  std::size_t window_len = 100;
};

// Parsers reject unknown fields and report the offending field by name.
// A run manifest is accepted too; its "parameters" object is used.
TraceSpec parse_trace_config(const nlohmann::json& j);
RunSpec parse_run_config(const nlohmann::json& j);
ScanSpec parse_scan_config(const nlohmann::json& j);
SweepSpec parse_sweep_config(const nlohmann::json& j);

nlohmann::json to_json(const TraceSpec& spec);
nlohmann::json to_json(const RunSpec& spec);
nlohmann::json to_json(const ScanSpec& spec);
nlohmann::json to_json(const SweepSpec& spec);

/// Reads a JSON file; ConfigError on I/O or syntax failure.
nlohmann::json load_json(const std::filesystem::path& path);

// Drivers: write the manifest, then the data files, then the summary.
// Each returns the summary JSON.
nlohmann::json execute_trace(const TraceSpec& spec, const std::filesystem::path& out_dir);
nlohmann::json execute_run(const RunSpec& spec, const std::filesystem::path& out_dir);
nlohmann::json execute_scan(const ScanSpec& spec, const std::filesystem::path& out_dir);
nlohmann::json execute_sweep(const SweepSpec& spec, const std::filesystem::path& out_dir,
                             bool force);

/// Full command line; returns 0 on success, 2 on configuration errors and
/// 1 on runtime failures.
int main(int argc, const char* const* argv);

}  // namespace qwalk::cli
