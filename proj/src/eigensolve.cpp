#include "nmd/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/IterativeSolvers>

#include "nmd/errors.hpp"
#include "nmd/rng.hpp"

namespace nmd {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

VectorXd SparseHamiltonian::apply(const VectorXd& x) const {
    return lower.selfadjointView<Eigen::Lower>() * x;
}

namespace {

// Grid neighbours with a larger index, the only ones the lower triangle needs.
template <typename Fn>
void for_each_upper_neighbour(const Grid& grid, std::size_t p, Fn&& fn) {
    const auto n = static_cast<std::size_t>(grid.n);
    if (grid.dim == 1) {
        if (p + 1 < n) fn(p + 1);
        return;
    }
    const std::size_t i2 = p % n;
    if (i2 + 1 < n) fn(p + 1);
    if (p + n < n * n) fn(p + n);
}

SparseHamiltonian assemble(const Grid& grid, double M, int components,
                           const std::function<SymMat2(const Vec&)>& block) {
    if (!(M > 0.0)) throw InvalidArgument("mass ratio M must be positive");
    const std::size_t nodes = grid.num_nodes();
    const double off = -0.5 / (M * grid.h * grid.h);
    const double diag = -2.0 * grid.dim * off;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(nodes * static_cast<std::size_t>(components) * (grid.dim + 2));
    for (std::size_t p = 0; p < nodes; ++p) {
        const SymMat2 v = block(grid.node(p));
        const auto row = static_cast<Index>(p) * components;
        if (components == 1) {
            trip.emplace_back(row, row, diag + v.v11);
        } else {
            trip.emplace_back(row, row, diag + v.v11);
            trip.emplace_back(row + 1, row, v.v12);
            trip.emplace_back(row + 1, row + 1, diag + v.v22);
        }
        for_each_upper_neighbour(grid, p, [&](std::size_t q) {
            const auto qrow = static_cast<Index>(q) * components;
            for (int c = 0; c < components; ++c) trip.emplace_back(qrow + c, row + c, off);
        });
    }
    SparseHamiltonian H;
    H.mass = M;
    H.components = components;
    H.grid = grid;
    const auto dimension = static_cast<Index>(nodes) * components;
    H.lower.resize(dimension, dimension);
    H.lower.setFromTriplets(trip.begin(), trip.end());
    H.lower.makeCompressed();
    return H;
}

SpMat shifted(const SparseHamiltonian& H, double sigma) {
    SpMat A = H.lower;
    for (Index j = 0; j < A.outerSize(); ++j) A.coeffRef(j, j) -= sigma;
    return A;
}

using Factor = Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;

// y = (H - sigma)^{-1} x, by sparse LDL^T or by MINRES.
class ShiftInvert {
public:
    ShiftInvert(const SparseHamiltonian& H, double sigma, const EigsOptions& opts)
        : inner_(opts.inner), A_(shifted(H, sigma)) {
        if (inner_ == InnerSolver::Direct) {
            ldlt_ = std::make_unique<Factor>();
            ldlt_->compute(A_);
            ok_ = ldlt_->info() == Eigen::Success && ldlt_->vectorD().cwiseAbs().minCoeff() > 0.0;
        } else {
            minres_ = std::make_unique<Eigen::MINRES<SpMat, Eigen::Lower>>();
            minres_->compute(A_);
            minres_->setTolerance(1e-2 * opts.tol);
            minres_->setMaxIterations(20 * A_.rows());
            ok_ = true;
        }
    }
    bool ok() const noexcept { return ok_; }
    VectorXd operator()(const VectorXd& x) const {
        if (inner_ == InnerSolver::Direct) return ldlt_->solve(x);
        return minres_->solve(x);
    }

private:
    InnerSolver inner_;
    SpMat A_;
    std::unique_ptr<Factor> ldlt_;
    std::unique_ptr<Eigen::MINRES<SpMat, Eigen::Lower>> minres_;
    bool ok_ = false;
};

VectorXd start_vector(Index n, std::uint64_t seed) {
    RandomStream rng(seed);
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
    return v / v.norm();
}

// Two passes of classical Gram-Schmidt against the first `cols` basis vectors.
VectorXd orthogonalize(const MatrixXd& V, Index cols, VectorXd w, VectorXd* coeffs) {
    VectorXd h = V.leftCols(cols).transpose() * w;
    w.noalias() -= V.leftCols(cols) * h;
    VectorXd h2 = V.leftCols(cols).transpose() * w;
    w.noalias() -= V.leftCols(cols) * h2;
    if (coeffs) *coeffs = h + h2;
    return w;
}

}  // namespace

SparseHamiltonian assemble_hamiltonian(const Grid& grid, const PotentialSpec& spec, double M) {
    if (grid.dim != spec.dim()) throw InvalidArgument("grid and potential dimensions differ");
    return assemble(grid, M, 2, [&](const Vec& X) { return eval_potential(spec, X); });
}

SparseHamiltonian assemble_scalar_hamiltonian(const Grid& grid, double M,
                                              const std::function<double(const Vec&)>& potential) {
    return assemble(grid, M, 1, [&](const Vec& X) { return SymMat2{potential(X), 0.0, 0.0}; });
}

std::vector<EigenPair> eigs_near(const SparseHamiltonian& H, double sigma, int k,
                                 const EigsOptions& opts) {
    const Index n = H.size();
    if (k < 1) throw InvalidArgument("eigs_near needs k >= 1");
    if (k > n) throw InvalidArgument("eigs_near: k exceeds the matrix dimension");
    if (!(opts.tol > 0.0)) throw InvalidArgument("eigs_near: tolerance must be positive");

    // Nudge the shift off an eigenvalue when the factorization hits a zero pivot.
    double shift = sigma;
    std::unique_ptr<ShiftInvert> op;
    for (int attempt = 0; attempt < 8; ++attempt) {
        op = std::make_unique<ShiftInvert>(H, shift, opts);
        if (op->ok()) break;
        shift = sigma + opts.tol * (1.0 + std::abs(sigma)) * std::ldexp(1.0, attempt);
    }
    if (!op->ok()) throw SolverFailure("shift-invert factorization failed", 0, 0);

    const Index m = std::min<Index>(n, opts.basis_size > 0 ? opts.basis_size
                                                           : std::max(2 * k + 20, 40));
    const Index keep_max = std::max<Index>(k, std::min<Index>(m - 1, k + (m - k) / 2));
    MatrixXd V(n, m + 1);
    MatrixXd T = MatrixXd::Zero(m + 1, m + 1);
    V.col(0) = start_vector(n, opts.seed);
    Index filled = 0;
    std::uint64_t restart_seed = opts.seed;
    int converged = 0;

    for (int restart = 0; restart <= opts.max_restarts; ++restart) {
        for (Index j = filled; j < m; ++j) {
            VectorXd coeffs;
            VectorXd w = orthogonalize(V, j + 1, (*op)(V.col(j)), &coeffs);
            T.col(j).head(j + 1) = coeffs;
            double beta = w.norm();
            if (beta < 1e-14 * std::max(1.0, coeffs.cwiseAbs().maxCoeff())) {
                // Invariant subspace: continue with a fresh orthogonal direction.
                beta = 0.0;
                if (j + 1 < n) {
                    w = orthogonalize(V, j + 1, start_vector(n, splitmix64(++restart_seed)), nullptr);
                    V.col(j + 1) = w / w.norm();
                } else {
                    V.col(j + 1).setZero();
                }
            } else {
                V.col(j + 1) = w / beta;
            }
            T(j + 1, j) = beta;
        }
        const double beta_m = T(m, m - 1);
        const MatrixXd Tm = 0.5 * (T.topLeftCorner(m, m) + T.topLeftCorner(m, m).transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(Tm);
        // Largest |theta| are the eigenvalues of H nearest the shift.
        std::vector<Index> order(static_cast<std::size_t>(m));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]);
        });
        const Index keep = std::min<Index>(keep_max, m);
        MatrixXd Y(m, keep);
        for (Index i = 0; i < keep; ++i) Y.col(i) = es.eigenvectors().col(order[static_cast<std::size_t>(i)]);
        MatrixXd X = V.leftCols(m) * Y;

        std::vector<EigenPair> pairs;
        converged = 0;
        for (Index i = 0; i < k; ++i) {
            VectorXd x = X.col(i);
            x.normalize();
            const VectorXd Hx = H.apply(x);
            const double E = x.dot(Hx);
            const double res = (Hx - E * x).norm();
            if (res <= opts.tol) ++converged;
            pairs.push_back(EigenPair{E, std::move(x), res, 1.0});
        }
        if (converged == k || m == n) {
            const double scale = 1.0 / std::sqrt(H.grid.cell_volume());
            for (auto& p : pairs) p.Phi *= scale;
            std::stable_sort(pairs.begin(), pairs.end(), [&](const EigenPair& a, const EigenPair& b) {
                const double da = std::abs(a.E - sigma);
                const double db = std::abs(b.E - sigma);
                return da != db ? da < db : a.E < b.E;
            });
            if (converged < k) {
                throw SolverFailure("eigs_near: full Krylov space reached without convergence",
                                    restart, converged);
            }
            return pairs;
        }

        // Thick restart: keep the wanted Ritz vectors and the residual direction.
        const VectorXd residual_dir = V.col(m);
        V.leftCols(keep) = X;
        V.col(keep) = residual_dir;
        T.setZero();
        for (Index i = 0; i < keep; ++i) {
            T(i, i) = es.eigenvalues()[order[static_cast<std::size_t>(i)]];
            const double s = beta_m * Y(m - 1, i);
            T(keep, i) = s;
            T(i, keep) = s;
        }
        filled = keep;
    }
    std::ostringstream msg;
    msg << "eigs_near: " << converged << " of " << k << " eigenpairs converged after "
        << opts.max_restarts << " restarts (sigma = " << sigma << ", tol = " << opts.tol << ")";
    throw SolverFailure(msg.str(), opts.max_restarts, converged);
}

Index count_below(const SparseHamiltonian& H, double shift) {
    for (int attempt = 0; attempt < 8; ++attempt) {
        const double s = shift * (1.0 + 1e-15 * attempt) + 1e-15 * attempt;
        Factor f(shifted(H, s));
        if (f.info() != Eigen::Success) continue;
        const VectorXd& d = f.vectorD();
        if (d.cwiseAbs().minCoeff() == 0.0) continue;
        return static_cast<Index>((d.array() < 0.0).count());
    }
    throw SolverFailure("inertia count failed: shift coincides with an eigenvalue", 0, 0);
}

namespace {

constexpr Index kWindowChunk = 48;

void collect_window(const SparseHamiltonian& H, double lo, double hi, Index below_lo,
                    Index below_hi, const EigsOptions& opts, std::vector<EigenPair>& out) {
    const Index count = below_hi - below_lo;
    if (count <= 0) return;
    if (count > kWindowChunk) {
        const double mid = 0.5 * (lo + hi);
        const Index below_mid = count_below(H, mid);
        collect_window(H, lo, mid, below_lo, below_mid, opts, out);
        collect_window(H, mid, hi, below_mid, below_hi, opts, out);
        return;
    }
    // Every eigenvalue in [lo, hi) is nearer the midpoint than any outside it.
    auto pairs = eigs_near(H, 0.5 * (lo + hi), static_cast<int>(count), opts);
    Index inside = 0;
    for (auto& p : pairs) {
        if (p.E >= lo && p.E < hi) {
            out.push_back(std::move(p));
            ++inside;
        }
    }
    if (inside != count) {
        std::ostringstream msg;
        msg << "eigs_in_window: expected " << count << " eigenvalues in [" << lo << ", " << hi
            << ") but found " << inside;
        throw SolverFailure(msg.str(), 0, static_cast<int>(inside));
    }
}

}  // namespace

std::vector<EigenPair> eigs_in_window(const SparseHamiltonian& H, double lo, double hi,
                                      const EigsOptions& opts) {
    if (!(hi > lo)) throw InvalidArgument("eigs_in_window: empty interval");
    std::vector<EigenPair> out;
    collect_window(H, lo, hi, count_below(H, lo), count_below(H, hi), opts, out);
    std::sort(out.begin(), out.end(), [](const EigenPair& a, const EigenPair& b) { return a.E < b.E; });
    return out;
}

}  // namespace nmd
