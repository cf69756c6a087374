#pragma once

// Discrete Schroedinger Hamiltonians on uniform grids and a shift-invert
// Lanczos eigensolver for interior eigenpairs.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "nmd/grid.hpp"
#include "nmd/model.hpp"

namespace nmd {

/// Symmetric sparse operator, stored as its lower triangle (CSC).
///
/// Two-state Hamiltonians interleave the components: unknown 2p + c is
/// component c at grid node p.
struct SparseHamiltonian {
    Eigen::SparseMatrix<double> lower;
    double mass = 1.0;
    int components = 2;
    Grid grid;

    Eigen::Index size() const noexcept { return lower.rows(); }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

/// -(1/2M) Delta_h I_2 + V(X_node) with Dirichlet walls.
SparseHamiltonian assemble_hamiltonian(const Grid& grid, const PotentialSpec& spec, double M);

/// -(1/2M) Delta_h + potential(X_node) for a scalar surface.
SparseHamiltonian assemble_scalar_hamiltonian(const Grid& grid, double M,
                                              const std::function<double(const Vec&)>& potential);

struct EigenPair {
    double E = 0.0;
    /// Grid function, `components` values per node, normalized so that
    /// sum |Phi|^2 h^dim = 1.
    Eigen::VectorXd Phi;
    /// ||H Phi - E Phi||_2 / ||Phi||_2
    double residual_norm = 0.0;
    double norm = 1.0;
};

enum class InnerSolver { Direct, Minres };

struct EigsOptions {
    double tol = 1e-8;
    int basis_size = 0;          ///< 0 selects max(2k + 20, 40)
    int max_restarts = 300;
    std::uint64_t seed = 0x5EED;
    InnerSolver inner = InnerSolver::Direct;
};

/// The k eigenpairs closest to sigma, sorted by |E - sigma|.
std::vector<EigenPair> eigs_near(const SparseHamiltonian& H, double sigma, int k,
                                 const EigsOptions& opts = {});

/// Number of eigenvalues strictly below `shift` (Sylvester inertia of H - shift).
Eigen::Index count_below(const SparseHamiltonian& H, double shift);

/// Every eigenpair with eigenvalue in [lo, hi], ascending.
std::vector<EigenPair> eigs_in_window(const SparseHamiltonian& H, double lo, double hi,
                                      const EigsOptions& opts = {});

}  // namespace nmd
