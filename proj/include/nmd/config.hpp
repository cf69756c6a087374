#pragma once

// Experiment configuration: a TOML document describing one run.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmd/dynamics.hpp"
#include "nmd/estimators.hpp"
#include "nmd/grid.hpp"
#include "nmd/model.hpp"

namespace nmd {

/// Validation failure tied to one config field (dotted path).
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct PotentialConfig {
    std::string family = "one_d";  ///< one_d | two_d_line | two_d_cone
    double delta = 0.1;
    double a_l = -2.0;
    double a_r = 3.0;
    double alpha = 1.4142135623730951;
    double beta = 2.0;
    double eta = 0.5;
    double a1 = 0.0;
    double a2 = 0.0;

    PotentialSpec to_spec() const;
    bool operator==(const PotentialConfig&) const = default;
};

struct GridConfig {
    /// auto (default-1d or default-2d by dimension) | default-1d | default-2d | fine-2d | explicit
    std::string preset = "auto";
    double h = 0.1;
    double lo = -1.0;
    double hi = 1.0;

    GridPreset to_preset(int dim) const;
    bool operator==(const GridConfig&) const = default;
};

struct SpectrumConfig {
    int k = 10;                      ///< eigenpairs nearest E when no window is given
    std::vector<double> window;      ///< [lo, hi]; empty selects the k nearest
    double tol = 1e-8;
    std::string inner = "direct";    ///< direct | minres
    bool dump_eigenvectors = false;
    std::vector<double> c_breakpoints;  ///< resonance estimate segments (1D pe-eig)

    bool operator==(const SpectrumConfig&) const = default;
};

struct DynamicsConfig {
    double dt = 0.01;
    double T = 10.0;
    int stride = 1;
    std::vector<double> X0;          ///< empty: kind-specific default
    std::vector<double> P0;          ///< empty: placed on the energy shell
    std::string mode = "canonical";  ///< canonical | literal
    std::string norm = "unit";       ///< unit | scaled
    std::string init = "ground";     ///< ground | excited
    int renorm_every = 10;

    bool operator==(const DynamicsConfig&) const = default;
};

struct EstimatorConfig {
    std::string events = "plane";  ///< plane | poisson
    std::vector<double> plane_point;
    std::vector<double> plane_normal;
    double poisson_rate = 0.0;  ///< 0: calibrated from the plane-crossing rate
    std::int64_t n_samples = 1000000;
    std::vector<double> box_lo{-4.0, -4.0};
    std::vector<double> box_hi{4.0, 4.0};
    std::string observable = "sin_x1x2";
    std::string window = "full";  ///< full | tail_half
    std::vector<double> T_list;
    std::vector<std::int64_t> N_list;
    double delta_v = 1e-6;
    double base_angle = 1.2;
    int paths = 1;                ///< initial points for ergodicity scans
    std::optional<double> g_md_ref;
    int n_bins = 20;
    int schrodinger_k = 0;        ///< eigenpairs for g_S in observable runs

    bool operator==(const EstimatorConfig&) const = default;
};

struct LandauZenerConfig {
    double P0 = 1.0;
    double T0 = 200.0;
    double dt = 0.0;  ///< 0 selects the stability limit
    int trace_points = 0;

    bool operator==(const LandauZenerConfig&) const = default;
};

struct SweepConfig {
    std::string axis;
    std::vector<double> values;
    std::string experiment;  ///< kind run at each value

    bool operator==(const SweepConfig&) const = default;
};

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds{
        "spectrum",   "pe-eig",       "pe-md",    "observable", "ergodicity", "landau-zener",
        "lyapunov",   "multipath",    "hitting-times", "ehrenfest", "sweep"};
    return kinds;
}

struct ExperimentConfig {
    std::string kind = "spectrum";
    std::uint64_t seed = 0;
    std::string output = "out";
    double M = 100.0;
    double E = 1.0;
    PotentialConfig potential;
    GridConfig grid;
    SpectrumConfig spectrum;
    DynamicsConfig dynamics;
    EstimatorConfig estimator;
    LandauZenerConfig landau_zener;
    SweepConfig sweep;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const std::string& toml_text, const std::string& source = "<string>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical TOML rendering with every field present.
std::string serialize_config(const ExperimentConfig& cfg);

/// Range and consistency checks (parse_config already calls this).
void validate_config(const ExperimentConfig& cfg);

/// Returns a copy with the dotted leaf `axis` set to `value`; throws
/// ConfigError when the axis is not a numeric leaf of the schema.
ExperimentConfig with_axis_value(const ExperimentConfig& cfg, const std::string& axis, double value);

/// Named observables g(X) usable from configs.
Observable observable_by_name(const std::string& name);

}  // namespace nmd
