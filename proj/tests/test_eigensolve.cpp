#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "nmd/eigensolve.hpp"
#include "nmd/spectral.hpp"

using namespace nmd;

namespace {

constexpr double kPi = std::numbers::pi;

// Closed-form spectrum of -(1/2M) Delta_h on n interior points per axis.
std::vector<double> laplacian_spectrum(int dim, int n, double h, double M) {
    std::vector<double> axis;
    for (int j = 1; j <= n; ++j) {
        const double s = std::sin(j * kPi / (2.0 * (n + 1)));
        axis.push_back(2.0 / (M * h * h) * s * s);
    }
    if (dim == 1) return axis;
    std::vector<double> all;
    for (double a : axis)
        for (double b : axis) all.push_back(a + b);
    std::sort(all.begin(), all.end());
    return all;
}

Eigen::MatrixXd dense(const SparseHamiltonian& H) {
    Eigen::MatrixXd L = Eigen::MatrixXd(H.lower);
    Eigen::MatrixXd A = L + L.transpose();
    A.diagonal() = L.diagonal();
    return A;
}

}  // namespace

TEST_CASE("Dirichlet Laplacian eigenvalues match the closed form") {
    SUBCASE("1D") {
        const double M = 7.0;
        const Grid grid = grid_from_cells(1, -1.0, 2.0, 300);
        const auto H = assemble_scalar_hamiltonian(grid, M, [](const Vec&) { return 0.0; });
        const auto exact = laplacian_spectrum(1, grid.n, grid.h, M);
        auto pairs = eigs_near(H, exact[120] + 1e-3, 12);
        for (const auto& p : pairs) {
            const auto it = std::min_element(exact.begin(), exact.end(),
                                             [&](double a, double b) { return std::abs(a - p.E) < std::abs(b - p.E); });
            CHECK(std::abs(p.E - *it) <= 1e-10 * *it);
            CHECK(p.residual_norm <= 1e-8);
        }
        CHECK(count_below(H, exact[120] + 1e-9) == 121);
    }
    SUBCASE("2D window") {
        const double M = 3.0;
        const Grid grid = grid_from_cells(2, 0.0, 1.0, 40);
        const auto H = assemble_scalar_hamiltonian(grid, M, [](const Vec&) { return 0.0; });
        const auto exact = laplacian_spectrum(2, grid.n, grid.h, M);
        // Window edges placed midway between distinct closed-form levels.
        const double lo = 0.5 * (exact[99] + exact[100]);
        double hi_level = exact[140];
        std::size_t last = 140;
        while (exact[last + 1] - hi_level < 1e-9) hi_level = exact[++last];
        const double hi = 0.5 * (hi_level + exact[last + 1]);
        REQUIRE(exact[100] - exact[99] > 1e-6);
        const auto pairs = eigs_in_window(H, lo, hi);
        REQUIRE(pairs.size() == last - 99);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            CHECK(std::abs(pairs[i].E - exact[100 + i]) <= 1e-10 * exact[100 + i]);
            CHECK(pairs[i].residual_norm <= 1e-8);
        }
    }
}

TEST_CASE("harmonic oscillator levels within the second-order stencil bound") {
    const double M = 100.0;
    const Grid grid = grid_from_cells(1, -3.0, 3.0, 600);
    const auto H = assemble_scalar_hamiltonian(grid, M, [](const Vec& X) { return 0.5 * X[0] * X[0]; });
    auto pairs = eigs_near(H, 0.0, 3);
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.E < b.E; });
    REQUIRE(pairs.size() == 3);
    // In y = M^(1/4) X the stencil shifts level k by -(h_y^2 / 24) <p^4> M^(-1/2),
    // <p^4> = 3 (2k^2 + 2k + 1) / 4. The walls at |X| = 3 cost exp(-sqrt(M) 9) ~ 1e-39.
    const double hy = grid.h * std::pow(M, 0.25);
    for (int k = 0; k < 3; ++k) {
        const double exact = (k + 0.5) / std::sqrt(M);
        const double p4 = 0.75 * (2.0 * k * k + 2.0 * k + 1.0);
        const double leading = hy * hy / 24.0 * p4 / std::sqrt(M);
        const double bound = 2.0 * leading + 1e-14;
        CAPTURE(k);
        CHECK(std::abs(pairs[static_cast<std::size_t>(k)].E - exact) <= bound);
        CHECK(pairs[static_cast<std::size_t>(k)].E < exact);
        CHECK(pairs[static_cast<std::size_t>(k)].residual_norm <= 1e-8);
    }
}

TEST_CASE("two-state window agrees with dense diagonalization") {
    const PotentialSpec spec = TwoDCone{{0.5, 0.0}, std::sqrt(2.0), 2.0, 0.5};
    const Grid grid = grid_from_cells(2, -3.0, 3.0, 24);
    const auto H = assemble_hamiltonian(grid, spec, 4.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(H));
    const auto& ev = es.eigenvalues();
    const double lo = 1.2, hi = 1.9;
    std::vector<double> expected;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] >= lo && ev[i] <= hi) expected.push_back(ev[i]);
    const auto pairs = eigs_in_window(H, lo, hi);
    REQUIRE(pairs.size() == expected.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].E == doctest::Approx(expected[i]).epsilon(1e-10));
        CHECK(pairs[i].residual_norm <= 1e-8);
        CHECK(pairs[i].norm == doctest::Approx(1.0).epsilon(1e-10));
        double quad = pairs[i].Phi.squaredNorm() * grid.cell_volume();
        CHECK(std::abs(quad - 1.0) <= 1e-10);
    }
    CHECK(count_below(H, lo) == std::count_if(ev.begin(), ev.end(), [&](double e) { return e < lo; }));
}

TEST_CASE("MINRES inner solves reach the same eigenpairs") {
    const PotentialSpec spec = OneD{0.2, -2.0, 3.0};
    const Grid grid = build_grid(spec, 50.0, Default1DGrid{});
    const auto H = assemble_hamiltonian(grid, spec, 50.0);
    EigsOptions direct, minres;
    minres.inner = InnerSolver::Minres;
    auto a = eigs_near(H, 1.0, 4, direct);
    auto b = eigs_near(H, 1.0, 4, minres);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].E == doctest::Approx(b[i].E).epsilon(1e-9));
        CHECK(b[i].residual_norm <= 1e-8);
    }
}

TEST_CASE("derived quantities stay in their analytic ranges") {
    const PotentialSpec spec = TwoDCone{{1.5, 0.0}, std::sqrt(2.0), 2.0, 0.5};
    const double M = 30.0;
    const Grid grid = build_grid(spec, M, Default2DGrid{});
    const auto H = assemble_hamiltonian(grid, spec, M);
    const auto pairs = eigs_near(H, 1.5, 12);
    for (const auto& p : pairs) {
        CHECK(p.residual_norm <= 1e-8);
        const double pe = excited_probability(p, spec, grid).p_e;
        CHECK(pe >= 0.0);
        CHECK(pe <= 1.0);
        const double gs = schrodinger_observable(p, [](const Vec& X) { return std::sin(X[0] * X[1]); }, grid);
        CHECK(gs >= -1.0);
        CHECK(gs <= 1.0);
    }
}

TEST_CASE("block-diagonal potential gives p_e in {0, 1}") {
    // With delta = 0 the eigenvectors are diabatic. Away from the diabatic
    // crossing at X = 0 each diabat lies on one adiabatic surface.
    const PotentialSpec spec = OneD{0.0, -2.0, 3.0};
    const double M = 200.0;
    const Grid grid = build_grid(spec, M, ExplicitGrid{0.01, 0.5, 6.0});
    const auto H = assemble_hamiltonian(grid, spec, M);
    for (const auto& p : eigs_near(H, 1.0, 10)) {
        const double pe = excited_probability(p, spec, grid).p_e;
        CHECK(std::min(pe, 1.0 - pe) <= 1e-8);
    }
}

TEST_CASE("resonance formula and C fit") {
    ResonanceTerms t;
    t.p_lz = 0.2;
    t.gap_ratio_sq = 0.5;
    CHECK(resonance_formula(t, 10.0) == doctest::Approx(0.2 / (0.05 + 0.2)));

    // Samples generated from a known piecewise C are fitted back.
    std::vector<ResonanceSample> samples;
    for (int i = 0; i < 20; ++i) {
        ResonanceSample s;
        s.E = 0.9 + 0.01 * i;
        s.terms.p_lz = 0.1 + 0.01 * i;
        s.terms.gap_ratio_sq = 0.05 + 0.1 * (i % 5);
        s.p_e = resonance_formula(s.terms, s.E < 1.0 ? 3.0 : 0.5);
        samples.push_back(s);
    }
    const PiecewiseC C = fit_C(samples, {1.0});
    REQUIRE(C.values.size() == 2);
    CHECK(C.values[0] == doctest::Approx(3.0).epsilon(1e-4));
    CHECK(C.values[1] == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("eigenvector dump round-trips") {
    const PotentialSpec spec = OneD{0.2, -2.0, 3.0};
    const Grid grid = build_grid(spec, 20.0, Default1DGrid{});
    const auto H = assemble_hamiltonian(grid, spec, 20.0);
    const auto p = eigs_near(H, 1.0, 1).front();
    const auto path = std::filesystem::temp_directory_path() / "nmd_test_eigvec.bin";
    write_eigenvector(path, p, grid, 2);
    Grid shape;
    const EigenPair back = read_eigenvector(path, &shape);
    CHECK(shape.n == grid.n);
    CHECK((back.Phi - p.Phi).norm() == 0.0);
    std::filesystem::remove(path);
}
