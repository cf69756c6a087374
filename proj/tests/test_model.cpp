#include <doctest.h>

#include <cmath>

#include "nmd/errors.hpp"
#include "nmd/model.hpp"

using namespace nmd;

namespace {

const PotentialSpec kSpecs[] = {
    OneD{0.1, -2.0, 3.0},
    TwoDLine{0.3, std::sqrt(2.0), 2.0, 0.5},
    TwoDCone{{0.7, -0.4}, std::sqrt(2.0), 2.0, 0.5},
};

Vec probe_point(const PotentialSpec& spec) {
    return spec.dim() == 1 ? Vec(0.37) : Vec(0.37, -0.81);
}

Vec shifted(Vec X, int axis, double h) {
    X[axis] += h;
    return X;
}

}  // namespace

TEST_CASE("eigen-decomposition reproduces V") {
    for (const auto& spec : kSpecs) {
        const Vec X = probe_point(spec);
        const SymMat2 V = eval_potential(spec, X);
        const AdiabaticFrame f = adiabatic_decompose(V);
        CHECK(f.lambda_minus <= f.lambda_plus);
        CHECK(f.lambda_minus == doctest::Approx(lambda_minus(spec, X)).epsilon(1e-13));
        CHECK(f.lambda_plus == doctest::Approx(lambda_plus(spec, X)).epsilon(1e-13));
        const auto Vm = V.apply(f.psi_minus);
        const auto Vp = V.apply(f.psi_plus);
        for (int i = 0; i < 2; ++i) {
            CHECK(Vm[i] == doctest::Approx(f.lambda_minus * f.psi_minus[i]).epsilon(1e-12));
            CHECK(Vp[i] == doctest::Approx(f.lambda_plus * f.psi_plus[i]).epsilon(1e-12));
        }
        const double overlap = f.psi_minus[0] * f.psi_plus[0] + f.psi_minus[1] * f.psi_plus[1];
        CHECK(std::abs(overlap) < 1e-14);
    }
}

TEST_CASE("analytic derivatives agree with central differences") {
    const double h = 1e-5;
    for (const auto& spec : kSpecs) {
        CAPTURE(spec.kind());
        const Vec X = probe_point(spec);
        const PotentialGradient g = grad_potential(spec, X);
        const SymMat2 hess = hessian_lambda_minus(spec, X);
        for (int a = 0; a < spec.dim(); ++a) {
            const SymMat2 Vp = eval_potential(spec, shifted(X, a, h));
            const SymMat2 Vm = eval_potential(spec, shifted(X, a, -h));
            CHECK(g.dV[a].v11 == doctest::Approx((Vp.v11 - Vm.v11) / (2 * h)).epsilon(1e-7));
            CHECK(g.dV[a].v12 == doctest::Approx((Vp.v12 - Vm.v12) / (2 * h)).epsilon(1e-7));
            CHECK(g.dV[a].v22 == doctest::Approx((Vp.v22 - Vm.v22) / (2 * h)).epsilon(1e-7));

            const double fd = (lambda_minus(spec, shifted(X, a, h)) - lambda_minus(spec, shifted(X, a, -h))) / (2 * h);
            CHECK(g.grad_lambda_minus[a] == doctest::Approx(fd).epsilon(1e-7));

            const Vec dp = grad_lambda_minus(spec, shifted(X, a, h));
            const Vec dm = grad_lambda_minus(spec, shifted(X, a, -h));
            const double row0 = (dp[0] - dm[0]) / (2 * h);
            CHECK((a == 0 ? hess.v11 : hess.v12) == doctest::Approx(row0).epsilon(1e-6));
            if (spec.dim() == 2) {
                const double row1 = (dp[1] - dm[1]) / (2 * h);
                CHECK((a == 0 ? hess.v12 : hess.v22) == doctest::Approx(row1).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("gap closes only where the family says it does") {
    const OneD one{0.25, -2.0, 3.0};
    CHECK(lambda_plus(one, Vec(0.0)) - lambda_minus(one, Vec(0.0)) == doctest::Approx(0.5));

    const TwoDCone cone{{0.7, -0.4}, std::sqrt(2.0), 2.0, 0.5};
    CHECK(lambda_plus(cone, Vec(0.7, -0.4)) == doctest::Approx(lambda_minus(cone, Vec(0.7, -0.4))));
    CHECK_THROWS_AS(grad_lambda_minus(cone, Vec(0.7, -0.4)), DegeneratePointError);

    // eta = 0: both surfaces equal lambda_s, and derivatives stay defined.
    const TwoDCone flat{{0.0, 0.0}, std::sqrt(2.0), 2.0, 0.0};
    const Vec X(0.3, 0.9);
    CHECK(lambda_minus(flat, X) == doctest::Approx(0.5 * (0.09 + std::sqrt(2.0) * 0.81) + 2.0 * std::sin(0.27)));
    CHECK_NOTHROW(grad_lambda_minus(flat, Vec(0.0, 0.0)));
}

TEST_CASE("eigenvector gauge follows the previous frame") {
    const PotentialSpec spec = TwoDLine{0.2, std::sqrt(2.0), 2.0, 0.5};
    std::optional<AdiabaticFrame> prev;
    for (int i = 0; i <= 200; ++i) {
        const Vec X(-2.0 + 0.02 * i, 0.1);
        const AdiabaticFrame f = adiabatic_decompose(eval_potential(spec, X), prev);
        if (prev) {
            CHECK(f.psi_minus[0] * prev->psi_minus[0] + f.psi_minus[1] * prev->psi_minus[1] > 0.0);
            CHECK(f.psi_plus[0] * prev->psi_plus[0] + f.psi_plus[1] * prev->psi_plus[1] > 0.0);
        }
        prev = f;
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(PotentialSpec(OneD{-0.1, -2.0, 3.0}).validate(), InvalidArgument);
    CHECK_THROWS_AS(PotentialSpec(TwoDLine{0.1, std::sqrt(2.0), 2.0, -1.0}).validate(), InvalidArgument);
    CHECK_NOTHROW(PotentialSpec(OneD{0.0, -2.0, 3.0}).validate());
}
