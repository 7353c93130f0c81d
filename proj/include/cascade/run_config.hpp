#pragma once

// Single-file run description (YAML): dataset manifest, cascade settings,
// exactly one backend section, evaluation grid and output directory.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cascade/config.hpp"
#include "cascade/refiner.hpp"
#include "cascade/remote_refiner.hpp"

namespace cascade {

struct OracleBackend {
  double in_candidate_accuracy = 1.0;
};
struct FirstPickBackend {};
struct ReplayBackend {
  std::filesystem::path path;
};
struct RemoteBackend {
  EndpointConfig endpoint;
  std::optional<std::filesystem::path> record_path;
};

using BackendSpec = std::variant<OracleBackend, FirstPickBackend, ReplayBackend, RemoteBackend>;

std::string_view backend_kind(const BackendSpec& spec);

struct EvaluationSettings {
  std::vector<double> taus;
  std::vector<std::size_t> ks;
  std::optional<double> base_latency_ms;
  std::optional<double> refine_latency_ms;
};

struct RunConfig {
  std::filesystem::path source;
  std::filesystem::path manifest;
  CascadeConfig cascade;
  BackendSpec backend = OracleBackend{};
  EvaluationSettings evaluation;
  std::filesystem::path output_dir = "out";
  std::size_t max_in_flight = 1;
};

/// Throws ValidationError with file:line context.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& yaml_text, const std::filesystem::path& base_dir,
                           const std::string& source = "<config>");

/// Switches the backend kind from the command line. A replay override reads
/// the replay section, else the remote section's record_path.
void override_backend(RunConfig& config, std::string_view kind);

/// Constructs the backend; the recorder is set when a remote run records.
struct BuiltBackend {
  std::unique_ptr<Refiner> refiner;
  std::shared_ptr<ReplayRecorder> recorder;
  std::optional<std::filesystem::path> record_path;
};
BuiltBackend build_backend(const RunConfig& config);

}  // namespace cascade
