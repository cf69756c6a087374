#pragma once

// Quantities derived from discrete eigenpairs: excited-state probability,
// scalar surface spectra, the resonance estimate and Schroedinger observables.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nmd/eigensolve.hpp"

namespace nmd {

struct ExcitedProbability {
    double p_e = 0.0;
    std::size_t excluded_nodes = 0;
    /// More than 0.1% of the nodes sat on an exact intersection.
    bool warning = false;
};

ExcitedProbability excited_probability(const EigenPair& pair, const PotentialSpec& spec,
                                       const Grid& grid);

enum class Branch { Minus, Plus };

/// Eigenvalues of -(1/2M) Delta_h + lambda_branch inside [lo, hi], ascending.
std::vector<double> scalar_spectra(const Grid& grid, const PotentialSpec& spec, double M,
                                   Branch branch, double lo, double hi,
                                   const EigsOptions& opts = {});

/// Piecewise-constant C: values[i] applies on [breakpoints[i-1], breakpoints[i]).
struct PiecewiseC {
    std::vector<double> breakpoints;  ///< strictly increasing interior breakpoints
    std::vector<double> values;       ///< breakpoints.size() + 1 entries

    double at(double E) const;
};

/// Inputs of the resonance estimate that depend on the spectra, not on C.
struct ResonanceTerms {
    double E_minus_l = 0.0;  ///< minus-eigenvalue nearest E
    double E_minus_m = 0.0;  ///< distinct minus-eigenvalue nearest E_minus_l
    double E_plus_l = 0.0;   ///< plus-eigenvalue nearest E_minus_l
    double p_lz = 0.0;
    /// |E_minus_l - E_plus_l|^2 / |E_minus_l - E_minus_m|^2
    double gap_ratio_sq = 0.0;
};

ResonanceTerms resonance_terms(double E, const std::vector<double>& minus_spectrum,
                               const std::vector<double>& plus_spectrum, double delta, double M,
                               double lambda_minus_0);

/// p_lz / (gap_ratio_sq / C + p_lz)
double resonance_formula(const ResonanceTerms& terms, double C);

double resonance_estimate(double E, const std::vector<double>& minus_spectrum,
                          const std::vector<double>& plus_spectrum, double delta, double M,
                          double lambda_minus_0, const PiecewiseC& C);

struct ResonanceSample {
    double E = 0.0;
    double p_e = 0.0;
    ResonanceTerms terms;
};

/// Per-segment least-squares C by golden-section search over ln C in [-6, 6].
PiecewiseC fit_C(const std::vector<ResonanceSample>& samples, const std::vector<double>& breakpoints);

/// sum g rho / sum rho with rho = |Phi|^2 at interior nodes.
double schrodinger_observable(const EigenPair& pair, const std::function<double(const Vec&)>& g,
                              const Grid& grid);

/// Binary eigenvector dump: three little-endian uint64 (dim, n per axis,
/// components) followed by the values as little-endian float64, node-major
/// with the components of a node adjacent.
std::string encode_eigenvector(const EigenPair& pair, const Grid& grid, int components);
void write_eigenvector(const std::filesystem::path& path, const EigenPair& pair, const Grid& grid,
                       int components);
EigenPair read_eigenvector(const std::filesystem::path& path, Grid* grid_shape = nullptr);

}  // namespace nmd
