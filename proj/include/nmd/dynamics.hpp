#pragma once

// Born-Oppenheimer and Ehrenfest propagators (Stoermer-Verlet), the
// Landau-Zener two-level model and the maximal Lyapunov exponent.

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "nmd/model.hpp"

namespace nmd {

/// Nuclear phase-space point; unit nuclear mass (time is already rescaled).
struct PhasePoint {
    Vec X;
    Vec P;
    double t = 0.0;
};

/// Normalization the electronic amplitude is carried in.
enum class NormConvention {
    Unit,         ///< <psi, psi> = 1
    Scaled,  ///< <psi, psi> = 2 M^(-1/2)
};

enum class EhrenfestMode {
    /// Stoermer-Verlet for H_E = |P|^2/2 + lambda_-(X) + w <psi, (V - lambda_-) psi>,
    /// w = sqrt(M)/2 for Scaled amplitudes and w = 1 for Unit ones.
    Canonical,
    /// The six-line scheme with the full V and a unit coupling weight, as
    /// published; it is not a discretization of H_E.
    Literal,
};

using Spinor = std::array<double, 2>;

struct EhrenfestState {
    PhasePoint phase;
    Spinor psi_r{1.0, 0.0};
    Spinor psi_i{0.0, 0.0};
    NormConvention norm = NormConvention::Unit;

    double norm2() const noexcept {
        return psi_r[0] * psi_r[0] + psi_r[1] * psi_r[1] + psi_i[0] * psi_i[0] +
               psi_i[1] * psi_i[1];
    }
};

struct EhrenfestOptions {
    EhrenfestMode mode = EhrenfestMode::Canonical;
    /// Hold X and P fixed and evolve only psi (test hook).
    bool freeze_nuclei = false;
};

struct TrajectorySample {
    double t = 0.0;
    Vec X;
    Vec P;
    double H = 0.0;  ///< H_0 for BO runs, H_E for Ehrenfest runs
    Spinor psi_r{0.0, 0.0};
    Spinor psi_i{0.0, 0.0};
    double norm2 = 0.0;
    double p_E = 0.0;
    double potential_energy = 0.0;  ///< <psi, V psi> / <psi, psi> (Ehrenfest only)
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    double dt = 0.0;
    int stride = 1;
    std::string integrator;
    bool ehrenfest = false;
};

// --- Born-Oppenheimer --------------------------------------------------------

double hamiltonian_bo(const PotentialSpec& spec, const PhasePoint& phase);

/// One velocity-Verlet step with force -grad lambda_-.
PhasePoint bo_step(const PotentialSpec& spec, const PhasePoint& state, double dt);

/// Streams every step (including step 0) to `visit(step, state, force)`;
/// returning false stops the run early. Returns the final state.
PhasePoint propagate_bo(const PotentialSpec& spec, const PhasePoint& init, double dt,
                        std::size_t steps,
                        const std::function<bool(std::size_t, const PhasePoint&)>& visit);

Trajectory bo_trajectory(const PotentialSpec& spec, const PhasePoint& init, double dt, double T,
                         int stride = 1);

/// Number of steps for horizon T; throws unless T/dt is (nearly) an integer.
std::size_t step_count(double T, double dt);

// --- Ehrenfest ---------------------------------------------------------------

double hamiltonian_ehrenfest(const PotentialSpec& spec, const EhrenfestState& state, double M);

/// |<Psi_+(X), psi>|^2 / <psi, psi>
double transition_probability(const EhrenfestState& state, const PotentialSpec& spec);

/// Ground-state initialization psi = Psi_-(X) in the requested convention.
EhrenfestState ground_state_init(const PotentialSpec& spec, const PhasePoint& phase, double M,
                                 NormConvention norm = NormConvention::Unit);
EhrenfestState excited_state_init(const PotentialSpec& spec, const PhasePoint& phase, double M,
                                  NormConvention norm = NormConvention::Unit);

EhrenfestState ehrenfest_step(const PotentialSpec& spec, const EhrenfestState& state, double dt,
                              double M, const EhrenfestOptions& opts = {});

EhrenfestState propagate_ehrenfest(
    const PotentialSpec& spec, const EhrenfestState& init, double dt, double M, std::size_t steps,
    const EhrenfestOptions& opts,
    const std::function<bool(std::size_t, const EhrenfestState&)>& visit);

Trajectory ehrenfest_trajectory(const PotentialSpec& spec, const EhrenfestState& init, double dt,
                                double T, double M, int stride = 1,
                                const EhrenfestOptions& opts = {});

// --- Landau-Zener ------------------------------------------------------------

/// exp(-pi delta^2 sqrt(M) / P0)
double landau_zener_closed_form(double delta, double M, double P0);
/// Same with P0 = sqrt(2 (E - lambda_minus_0)).
double landau_zener_closed_form_energy(double delta, double M, double E, double lambda_minus_0);

struct LandauZenerTracePoint {
    double t = 0.0;
    double phi1_sq = 0.0;
    double phi2_sq = 0.0;
    double adiabatic_excited = 0.0;
};

struct LandauZenerResult {
    double survival_diabatic = 0.0;  ///< |phi_1(T0)|^2
    double adiabatic_excited = 0.0;  ///< |<Psi_+(T0), phi(T0)>|^2
    double norm_drift = 0.0;         ///< | |phi(T0)|^2 - 1 |
    bool short_horizon = false;      ///< P0 T0 < 10 delta
    std::size_t steps = 0;
    std::vector<LandauZenerTracePoint> trace;
};

/// Integrates i M^(-1/2) phi' = [[P0 t, delta], [delta, -P0 t]] phi over
/// [-T0, T0] from the adiabatic ground state, one exact 2x2 exponential of the
/// midpoint generator per step.
LandauZenerResult landau_zener_ode(double delta, double M, double P0, double T0, double dt,
                                   std::size_t trace_points = 0);

/// Largest stable step for landau_zener_ode.
double landau_zener_max_dt(double delta, double M, double P0, double T0);

// --- chaos diagnostics -------------------------------------------------------

struct LyapunovResult {
    double exponent = 0.0;
    std::size_t renormalizations = 0;
};

/// Benettin estimate: linearized Verlet flow of one tangent vector,
/// renormalized every `renorm_every` steps.
LyapunovResult max_lyapunov(const PotentialSpec& spec, const PhasePoint& init, double dt, double T,
                            int renorm_every = 10);

}  // namespace nmd
