#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nmd/dynamics.hpp"
#include "nmd/errors.hpp"

using namespace nmd;

namespace {

const PotentialSpec kFig45 = TwoDCone{{0.0, 0.0}, std::sqrt(2.0), 2.0, 0.0};

PhasePoint shell_point(const PotentialSpec& spec, double E, double angle) {
    const double p = std::sqrt(2.0 * (E - lambda_minus(spec, Vec(0.0, 0.0))));
    return PhasePoint{Vec(0.0, 0.0), Vec(p * std::cos(angle), p * std::sin(angle)), 0.0};
}

double max_energy_error(const PotentialSpec& spec, const PhasePoint& init, double dt, double T) {
    const double H0 = hamiltonian_bo(spec, init);
    double worst = 0.0;
    propagate_bo(spec, init, dt, step_count(T, dt), [&](std::size_t, const PhasePoint& s) {
        worst = std::max(worst, std::abs(hamiltonian_bo(spec, s) - H0));
        return true;
    });
    return worst;
}

}  // namespace

TEST_CASE("Verlet is time-reversible") {
    const PhasePoint start = shell_point(kFig45, 1.5, 1.2);
    PhasePoint s = start;
    for (int i = 0; i < 1000; ++i) s = bo_step(kFig45, s, 0.01);
    s.P *= -1.0;
    for (int i = 0; i < 1000; ++i) s = bo_step(kFig45, s, 0.01);
    CHECK((s.X - start.X).norm() <= 1e-9);
    CHECK((s.P + start.P).norm() <= 1e-9);
}

TEST_CASE("energy error scales with dt^2") {
    const PhasePoint start = shell_point(kFig45, 1.5, 0.4);
    const double coarse = max_energy_error(kFig45, start, 0.02, 20.0);
    const double fine = max_energy_error(kFig45, start, 0.01, 20.0);
    CHECK(coarse / fine >= 3.2);
    CHECK(coarse / fine <= 4.8);
}

TEST_CASE("step_count needs an integer number of steps") {
    CHECK(step_count(1.0, 0.25) == 4);
    CHECK(step_count(140.0, 0.01) == 14000);
    CHECK_THROWS_AS(step_count(1.0, 0.3), InvalidArgument);
}

TEST_CASE("harmonic bowl returns to its start after one period") {
    const PotentialSpec bowl = TwoDCone{{0.0, 0.0}, 1.0, 0.0, 0.0};
    const PhasePoint start{Vec(1.0, 0.0), Vec(0.0, 0.0), 0.0};
    const double T = 2.0 * std::numbers::pi;
    const double dt = T / 6283.0;
    const double H0 = hamiltonian_bo(bowl, start);
    double drift = 0.0;
    const PhasePoint end = propagate_bo(bowl, start, dt, 6283, [&](std::size_t, const PhasePoint& s) {
        drift = std::max(drift, std::abs(hamiltonian_bo(bowl, s) - H0));
        return true;
    });
    CHECK((end.X - start.X).norm() <= 1e-4);
    CHECK(end.P.norm() <= 1e-4);
    CHECK(drift <= 1e-6);
}

namespace {

struct EhrenfestDrift {
    double norm = 0.0;
    double energy = 0.0;
};

EhrenfestDrift ehrenfest_drift(double dt) {
    const PotentialSpec spec = OneD{0.1, -2.0, 3.0};
    const double M = 400.0, T = 2.0;
    const PhasePoint start{Vec(-1.5), Vec(std::sqrt(2.0 * (1.0 - lambda_minus(spec, Vec(-1.5))))), 0.0};
    const auto init = ground_state_init(spec, start, M);
    const double H0 = hamiltonian_ehrenfest(spec, init, M);
    EhrenfestDrift d;
    propagate_ehrenfest(spec, init, dt, M, step_count(T, dt), {}, [&](std::size_t, const EhrenfestState& s) {
        d.norm = std::max(d.norm, std::abs(s.norm2() - 1.0));
        d.energy = std::max(d.energy, std::abs(hamiltonian_ehrenfest(spec, s, M) - H0));
        return true;
    });
    return d;
}

}  // namespace

TEST_CASE("Ehrenfest norm and H_E errors are second order") {
    // Regression constant measured for this setup (C = 137 at dt = 5e-4 .. 4e-3).
    const double C = 150.0, T = 2.0;
    const auto coarse = ehrenfest_drift(0.002);
    const auto fine = ehrenfest_drift(0.001);
    CHECK(coarse.norm <= C * 0.002 * 0.002 * T);
    CHECK(fine.norm <= C * 0.001 * 0.001 * T);
    CHECK(coarse.energy / fine.energy >= 3.2);
    CHECK(coarse.energy / fine.energy <= 4.8);
}

TEST_CASE("unit and scaled amplitudes give the same dynamics") {
    const PotentialSpec spec = OneD{0.05, -2.0, 2.0};
    const double M = 900.0;
    const PhasePoint start{Vec(-3.0), Vec(1.5), 0.0};
    const auto a = ehrenfest_trajectory(spec, ground_state_init(spec, start, M, NormConvention::Unit), 0.002, 4.0, M, 50);
    const auto b = ehrenfest_trajectory(spec, ground_state_init(spec, start, M, NormConvention::Scaled), 0.002, 4.0, M, 50);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].p_E == doctest::Approx(b.samples[i].p_E).epsilon(1e-9));
        CHECK(a.samples[i].X[0] == doctest::Approx(b.samples[i].X[0]).epsilon(1e-12));
    }
    CHECK(b.samples.front().norm2 == doctest::Approx(2.0 / std::sqrt(M)));
}

TEST_CASE("frozen nuclei keep adiabatic states") {
    const PotentialSpec spec = TwoDLine{0.2, std::sqrt(2.0), 2.0, 0.5};
    const PhasePoint at{Vec(0.3, -0.2), Vec(0.5, 0.5), 0.0};
    EhrenfestOptions opts;
    opts.freeze_nuclei = true;
    auto ground = ground_state_init(spec, at, 100.0);
    auto excited = excited_state_init(spec, at, 100.0);
    for (int i = 0; i < 500; ++i) {
        ground = ehrenfest_step(spec, ground, 0.01, 100.0, opts);
        excited = ehrenfest_step(spec, excited, 0.01, 100.0, opts);
    }
    CHECK(transition_probability(ground, spec) <= 1e-20);
    CHECK(transition_probability(excited, spec) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((ground.phase.X - at.X).norm() == 0.0);
}

TEST_CASE("Landau-Zener ODE approaches the closed form") {
    const double M = 1.0, P0 = 1.0, T0 = 200.0;
    for (double x : {0.2, 1.0}) {
        const double delta = std::sqrt(x);
        const double dt = landau_zener_max_dt(delta, M, P0, T0);
        const auto r = landau_zener_ode(delta, M, P0, T0, dt);
        CHECK(r.adiabatic_excited == doctest::Approx(landau_zener_closed_form(delta, M, P0)).epsilon(0.02));
        CHECK(r.norm_drift <= 1e-10);
        CHECK_FALSE(r.short_horizon);
    }
    CHECK(landau_zener_ode(1.0, 1.0, 1.0, 2.0, 0.001).short_horizon);
    CHECK(landau_zener_closed_form_energy(0.1, 100.0, 1.5, 1.0) == doctest::Approx(std::exp(-3.141592653589793 * 0.01 * 10.0)));
}

TEST_CASE("Lyapunov exponent separates regular and chaotic motion") {
    const PotentialSpec line = OneD{0.3, -2.0, 3.0};
    const auto regular = max_lyapunov(line, PhasePoint{Vec(-1.0), Vec(0.5), 0.0}, 0.01, 2000.0);
    CHECK(regular.exponent < 0.02);

    const auto chaotic = max_lyapunov(kFig45, shell_point(kFig45, 1.5, 1.2), 0.01, 2000.0);
    CHECK(chaotic.exponent > 0.2);
    CHECK(chaotic.renormalizations > 0);
}
