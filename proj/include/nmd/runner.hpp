#pragma once

// Executes configured experiments and writes CSV outputs plus a JSON manifest.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nmd/config.hpp"

namespace nmd {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// A computation failed; carries the experiment kind and its key parameters.
class RunError : public std::runtime_error {
public:
    RunError(std::string operation, std::string parameters, const std::string& message)
        : std::runtime_error(message),
          operation_(std::move(operation)),
          parameters_(std::move(parameters)) {}
    const std::string& operation() const noexcept { return operation_; }
    const std::string& parameters() const noexcept { return parameters_; }

private:
    std::string operation_;
    std::string parameters_;
};

struct EmittedFile {
    std::string name;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

using Summary = std::vector<std::pair<std::string, double>>;

struct RunManifest {
    std::string kind;
    std::string config_hash;
    std::string config_toml;
    std::uint64_t master_seed = 0;
    std::map<std::string, std::uint64_t> seeds;
    std::string started;
    std::string finished;
    std::vector<EmittedFile> files;
    Summary summary;
};

/// In-memory result of one experiment before anything touches the disk.
struct ExperimentOutput {
    std::vector<std::pair<std::string, std::string>> files;  ///< name, content
    Summary summary;
    std::map<std::string, std::uint64_t> seeds;
};

/// Computes one non-sweep experiment.
ExperimentOutput compute_experiment(const ExperimentConfig& cfg, int threads = 0);

/// Runs one experiment (or a sweep when kind = "sweep") into `out_dir`; the
/// manifest is written last.
RunManifest run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                           int threads = 0);

struct SweepResult {
    std::vector<RunManifest> runs;  ///< successful runs in value order
    std::vector<std::string> failures;
    std::filesystem::path summary_path;
    bool ok() const noexcept { return failures.empty(); }
};

/// One child run per value in `out_dir/value_<i>`, seeded with
/// derive_seed(master, i), plus `summary.csv` and `sweep_manifest.json`.
SweepResult run_sweep(const ExperimentConfig& base, const std::string& axis,
                      const std::vector<double>& values, const std::filesystem::path& out_dir,
                      int threads = 0);

/// Machine-readable error report used by the command-line tool.
std::string error_json(const std::string& kind, const std::string& field, const std::string& message);

}  // namespace nmd
