#include "nmd/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "nmd/errors.hpp"

namespace nmd {

namespace {

// True when the two surfaces can touch somewhere, so steps must watch the gap.
bool can_intersect(const PotentialSpec& spec) {
    if (const auto* p = std::get_if<OneD>(&spec.variant)) return p->delta == 0.0;
    if (const auto* p = std::get_if<TwoDLine>(&spec.variant)) return p->delta == 0.0 && p->eta > 0.0;
    return std::get<TwoDCone>(spec.variant).eta > 0.0;
}

void check_gap(const PotentialSpec& spec, const Vec& X) {
    if (can_intersect(spec) && lambda_plus(spec, X) - lambda_minus(spec, X) < 1e-12) {
        std::ostringstream msg;
        msg << "trajectory reached a conical point at X = (" << X[0];
        if (X.size() == 2) msg << ", " << X[1];
        msg << ")";
        throw DegeneratePointError(msg.str());
    }
}

Vec bo_force(const PotentialSpec& spec, const Vec& X) {
    check_gap(spec, X);
    return -1.0 * grad_lambda_minus(spec, X);
}

// Everything the Ehrenfest step needs at one nuclear position.
struct Local {
    SymMat2 V;                  // V or V - lambda_- I, depending on the mode
    std::array<SymMat2, 2> dV;  // matching gradient
    Vec grad_lambda;
};

Local local_fields(const PotentialSpec& spec, const Vec& X, EhrenfestMode mode) {
    check_gap(spec, X);
    const PotentialGradient g = grad_potential(spec, X);
    Local out;
    out.V = eval_potential(spec, X);
    out.dV = g.dV;
    out.grad_lambda = g.grad_lambda_minus;
    if (mode == EhrenfestMode::Canonical) {
        const double lam = lambda_minus(spec, X);
        out.V.v11 -= lam;
        out.V.v22 -= lam;
        for (int i = 0; i < X.size(); ++i) {
            auto& d = out.dV[static_cast<std::size_t>(i)];
            d.v11 -= g.grad_lambda_minus[i];
            d.v22 -= g.grad_lambda_minus[i];
        }
    }
    return out;
}

double coupling_weight(EhrenfestMode mode, NormConvention norm, double M) {
    if (mode == EhrenfestMode::Literal) return 1.0;
    return norm == NormConvention::Scaled ? 0.5 * std::sqrt(M) : 1.0;
}

double amplitude_scale(NormConvention norm, double M) {
    return norm == NormConvention::Scaled ? std::sqrt(2.0 / std::sqrt(M)) : 1.0;
}

// dH/dX = grad lambda_- + w (<a, dV a> + <b, dV b>)
Vec nuclear_gradient(const Local& f, const Spinor& a, const Spinor& b, double w, int dim) {
    Vec g = Vec::zeros(dim);
    for (int i = 0; i < dim; ++i) {
        const auto& d = f.dV[static_cast<std::size_t>(i)];
        g[i] = f.grad_lambda[i] + w * (d.bilinear(a, a) + d.bilinear(b, b));
    }
    return g;
}

void axpy(Spinor& y, double s, const Spinor& x) {
    y[0] += s * x[0];
    y[1] += s * x[1];
}

// One Stoermer-Verlet step given the fields at X_k; fills `next` with the
// fields at X_{k+1} for reuse.
EhrenfestState verlet_step(const PotentialSpec& spec, const EhrenfestState& s, const Local& here,
                           Local& next, double dt, double M, const EhrenfestOptions& opts) {
    const double rootM = std::sqrt(M);
    const double w = coupling_weight(opts.mode, s.norm, M);
    const int dim = s.phase.X.size();
    EhrenfestState out = s;
    const double half = 0.5 * dt;

    Spinor psi_i_half = s.psi_i;
    axpy(psi_i_half, -half * rootM, here.V.apply(s.psi_r));

    Vec P_half = s.phase.P;
    Vec X_next = s.phase.X;
    if (!opts.freeze_nuclei) {
        P_half -= half * nuclear_gradient(here, s.psi_r, psi_i_half, w, dim);
        X_next += dt * P_half;
        next = local_fields(spec, X_next, opts.mode);
    } else {
        next = here;
    }

    Spinor psi_r_next = s.psi_r;
    const Spinor a = here.V.apply(psi_i_half);
    const Spinor b = next.V.apply(psi_i_half);
    psi_r_next[0] += half * rootM * (a[0] + b[0]);
    psi_r_next[1] += half * rootM * (a[1] + b[1]);

    Spinor psi_i_next = psi_i_half;
    axpy(psi_i_next, -half * rootM, next.V.apply(psi_r_next));

    Vec P_next = P_half;
    if (!opts.freeze_nuclei) {
        P_next -= half * nuclear_gradient(next, psi_r_next, psi_i_half, w, dim);
    }

    out.phase.X = X_next;
    out.phase.P = P_next;
    out.phase.t = s.phase.t + dt;
    out.psi_r = psi_r_next;
    out.psi_i = psi_i_next;
    if (out.norm2() < 1e-300) throw NumericalUnderflow("electronic amplitude underflowed");
    return out;
}

}  // namespace

std::size_t step_count(double T, double dt) {
    if (!(dt > 0.0) || !(T >= 0.0)) throw InvalidArgument("time step and horizon must be positive");
    const double ratio = T / dt;
    const double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-6 * std::max(1.0, ratio)) {
        std::ostringstream msg;
        msg << "horizon T = " << T << " is not a whole number of steps dt = " << dt;
        throw InvalidArgument(msg.str());
    }
    return static_cast<std::size_t>(n);
}

// --- Born-Oppenheimer --------------------------------------------------------

double hamiltonian_bo(const PotentialSpec& spec, const PhasePoint& phase) {
    return 0.5 * phase.P.norm2() + lambda_minus(spec, phase.X);
}

PhasePoint bo_step(const PotentialSpec& spec, const PhasePoint& state, double dt) {
    PhasePoint out = state;
    out.P += (0.5 * dt) * bo_force(spec, state.X);
    out.X += dt * out.P;
    out.P += (0.5 * dt) * bo_force(spec, out.X);
    out.t += dt;
    return out;
}

PhasePoint propagate_bo(const PotentialSpec& spec, const PhasePoint& init, double dt,
                        std::size_t steps,
                        const std::function<bool(std::size_t, const PhasePoint&)>& visit) {
    if (init.X.size() != spec.dim() || init.P.size() != spec.dim())
        throw InvalidArgument("phase point dimension does not match the potential");
    PhasePoint s = init;
    Vec force = bo_force(spec, s.X);
    if (visit && !visit(0, s)) return s;
    const double half = 0.5 * dt;
    for (std::size_t k = 1; k <= steps; ++k) {
        s.P += half * force;
        s.X += dt * s.P;
        force = bo_force(spec, s.X);
        s.P += half * force;
        s.t = init.t + static_cast<double>(k) * dt;
        if (visit && !visit(k, s)) break;
    }
    return s;
}

Trajectory bo_trajectory(const PotentialSpec& spec, const PhasePoint& init, double dt, double T,
                         int stride) {
    const std::size_t steps = step_count(T, dt);
    if (stride < 1 || steps % static_cast<std::size_t>(stride) != 0)
        throw InvalidArgument("stride must be positive and divide the step count");
    Trajectory traj;
    traj.dt = dt;
    traj.stride = stride;
    traj.integrator = "velocity-verlet";
    traj.samples.reserve(steps / static_cast<std::size_t>(stride) + 1);
    propagate_bo(spec, init, dt, steps, [&](std::size_t k, const PhasePoint& s) {
        if (k % static_cast<std::size_t>(stride) == 0) {
            TrajectorySample smp;
            smp.t = s.t;
            smp.X = s.X;
            smp.P = s.P;
            smp.H = hamiltonian_bo(spec, s);
            traj.samples.push_back(smp);
        }
        return true;
    });
    return traj;
}

// --- Ehrenfest ---------------------------------------------------------------

double hamiltonian_ehrenfest(const PotentialSpec& spec, const EhrenfestState& state, double M) {
    const Vec& X = state.phase.X;
    const double lam = lambda_minus(spec, X);
    SymMat2 Vc = eval_potential(spec, X);
    Vc.v11 -= lam;
    Vc.v22 -= lam;
    const double w = coupling_weight(EhrenfestMode::Canonical, state.norm, M);
    return 0.5 * state.phase.P.norm2() + lam +
           w * (Vc.bilinear(state.psi_r, state.psi_r) + Vc.bilinear(state.psi_i, state.psi_i));
}

double transition_probability(const EhrenfestState& state, const PotentialSpec& spec) {
    const AdiabaticFrame f = adiabatic_decompose(eval_potential(spec, state.phase.X));
    const double re = f.psi_plus[0] * state.psi_r[0] + f.psi_plus[1] * state.psi_r[1];
    const double im = f.psi_plus[0] * state.psi_i[0] + f.psi_plus[1] * state.psi_i[1];
    const double n2 = state.norm2();
    if (n2 < 1e-300) throw NumericalUnderflow("electronic amplitude underflowed");
    return std::clamp((re * re + im * im) / n2, 0.0, 1.0);
}

namespace {

EhrenfestState adiabatic_init(const PotentialSpec& spec, const PhasePoint& phase, double M,
                              NormConvention norm, bool excited) {
    const AdiabaticFrame f = adiabatic_decompose(eval_potential(spec, phase.X));
    const double scale = amplitude_scale(norm, M);
    EhrenfestState s;
    s.phase = phase;
    s.norm = norm;
    const Spinor& v = excited ? f.psi_plus : f.psi_minus;
    s.psi_r = {scale * v[0], scale * v[1]};
    s.psi_i = {0.0, 0.0};
    return s;
}

}  // namespace

EhrenfestState ground_state_init(const PotentialSpec& spec, const PhasePoint& phase, double M,
                                 NormConvention norm) {
    return adiabatic_init(spec, phase, M, norm, false);
}

EhrenfestState excited_state_init(const PotentialSpec& spec, const PhasePoint& phase, double M,
                                  NormConvention norm) {
    return adiabatic_init(spec, phase, M, norm, true);
}

EhrenfestState ehrenfest_step(const PotentialSpec& spec, const EhrenfestState& state, double dt,
                              double M, const EhrenfestOptions& opts) {
    if (!(M > 0.0)) throw InvalidArgument("mass ratio M must be positive");
    if (state.norm2() < 1e-300) throw NumericalUnderflow("electronic amplitude underflowed");
    const Local here = local_fields(spec, state.phase.X, opts.mode);
    Local next;
    return verlet_step(spec, state, here, next, dt, M, opts);
}

EhrenfestState propagate_ehrenfest(
    const PotentialSpec& spec, const EhrenfestState& init, double dt, double M, std::size_t steps,
    const EhrenfestOptions& opts,
    const std::function<bool(std::size_t, const EhrenfestState&)>& visit) {
    if (!(M > 0.0)) throw InvalidArgument("mass ratio M must be positive");
    if (init.phase.X.size() != spec.dim() || init.phase.P.size() != spec.dim())
        throw InvalidArgument("phase point dimension does not match the potential");
    if (init.norm2() < 1e-300) throw NumericalUnderflow("electronic amplitude underflowed");
    EhrenfestState s = init;
    Local here = local_fields(spec, s.phase.X, opts.mode);
    Local next;
    if (visit && !visit(0, s)) return s;
    for (std::size_t k = 1; k <= steps; ++k) {
        s = verlet_step(spec, s, here, next, dt, M, opts);
        s.phase.t = init.phase.t + static_cast<double>(k) * dt;
        here = next;
        if (visit && !visit(k, s)) break;
    }
    return s;
}

Trajectory ehrenfest_trajectory(const PotentialSpec& spec, const EhrenfestState& init, double dt,
                                double T, double M, int stride, const EhrenfestOptions& opts) {
    const std::size_t steps = step_count(T, dt);
    if (stride < 1 || steps % static_cast<std::size_t>(stride) != 0)
        throw InvalidArgument("stride must be positive and divide the step count");
    Trajectory traj;
    traj.dt = dt;
    traj.stride = stride;
    traj.integrator =
        opts.mode == EhrenfestMode::Canonical ? "stoermer-verlet" : "stoermer-verlet-literal";
    traj.ehrenfest = true;
    traj.samples.reserve(steps / static_cast<std::size_t>(stride) + 1);
    propagate_ehrenfest(spec, init, dt, M, steps, opts, [&](std::size_t k, const EhrenfestState& s) {
        if (k % static_cast<std::size_t>(stride) != 0) return true;
        TrajectorySample smp;
        smp.t = s.phase.t;
        smp.X = s.phase.X;
        smp.P = s.phase.P;
        smp.H = hamiltonian_ehrenfest(spec, s, M);
        smp.psi_r = s.psi_r;
        smp.psi_i = s.psi_i;
        smp.norm2 = s.norm2();
        smp.p_E = transition_probability(s, spec);
        const SymMat2 V = eval_potential(spec, s.phase.X);
        smp.potential_energy = (V.bilinear(s.psi_r, s.psi_r) + V.bilinear(s.psi_i, s.psi_i)) / smp.norm2;
        traj.samples.push_back(smp);
        return true;
    });
    return traj;
}

// --- Landau-Zener ------------------------------------------------------------

double landau_zener_closed_form(double delta, double M, double P0) {
    if (!(P0 > 0.0)) throw InvalidArgument("Landau-Zener momentum P0 must be positive");
    if (!(M > 0.0)) throw InvalidArgument("mass ratio M must be positive");
    if (!(delta >= 0.0)) throw InvalidArgument("delta must be >= 0");
    return std::exp(-std::numbers::pi * delta * delta * std::sqrt(M) / P0);
}

double landau_zener_closed_form_energy(double delta, double M, double E, double lambda_minus_0) {
    if (!(E > lambda_minus_0)) {
        throw InvalidArgument("energy must exceed lambda_minus at the crossing");
    }
    return landau_zener_closed_form(delta, M, std::sqrt(2.0 * (E - lambda_minus_0)));
}

double landau_zener_max_dt(double delta, double M, double P0, double T0) {
    return 0.1 / (std::sqrt(M) * (P0 * T0 + delta));
}

LandauZenerResult landau_zener_ode(double delta, double M, double P0, double T0, double dt,
                                   std::size_t trace_points) {
    if (!(M > 0.0) || !(P0 > 0.0) || !(delta >= 0.0) || !(T0 > 0.0) || !(dt > 0.0))
        throw InvalidArgument("landau_zener_ode: parameters must be positive");
    const double limit = landau_zener_max_dt(delta, M, P0, T0);
    if (dt > limit) {
        std::ostringstream msg;
        msg << "landau_zener_ode: dt = " << dt << " exceeds the phase-resolution limit " << limit;
        throw InvalidArgument(msg.str());
    }
    using cd = std::complex<double>;
    const double rootM = std::sqrt(M);
    const auto steps = static_cast<std::size_t>(std::ceil(2.0 * T0 / dt));
    const double h = 2.0 * T0 / static_cast<double>(steps);

    auto frame_at = [&](double t) { return adiabatic_decompose(SymMat2{P0 * t, delta, -P0 * t}); };
    const auto start = frame_at(-T0);
    cd phi1 = start.psi_minus[0];
    cd phi2 = start.psi_minus[1];

    LandauZenerResult res;
    res.steps = steps;
    res.short_horizon = P0 * T0 < 10.0 * delta;
    const std::size_t every =
        trace_points > 0 ? std::max<std::size_t>(1, steps / trace_points) : steps + 1;
    auto record = [&](double t) {
        LandauZenerTracePoint pt;
        pt.t = t;
        pt.phi1_sq = std::norm(phi1);
        pt.phi2_sq = std::norm(phi2);
        if (P0 * t != 0.0 || delta != 0.0) {
            const auto f = frame_at(t);
            pt.adiabatic_excited = std::norm(f.psi_plus[0] * phi1 + f.psi_plus[1] * phi2);
        }
        res.trace.push_back(pt);
    };
    if (trace_points > 0) record(-T0);
    for (std::size_t k = 0; k < steps; ++k) {
        const double tm = -T0 + (static_cast<double>(k) + 0.5) * h;
        // exp(-i sqrt(M) A h) = cos(theta) I - i sin(theta) A / r, A = r n.sigma
        const double a = P0 * tm;
        const double r = std::hypot(a, delta);
        const double theta = rootM * r * h;
        const double c = std::cos(theta);
        const double s = r > 0.0 ? std::sin(theta) / r : rootM * h;
        const cd mi(0.0, -1.0);
        const cd n1 = c * phi1 + mi * s * (a * phi1 + delta * phi2);
        const cd n2 = c * phi2 + mi * s * (delta * phi1 - a * phi2);
        phi1 = n1;
        phi2 = n2;
        if (trace_points > 0 && (k + 1) % every == 0) record(-T0 + static_cast<double>(k + 1) * h);
    }
    const auto end = frame_at(T0);
    res.survival_diabatic = std::norm(phi1);
    res.adiabatic_excited = std::norm(end.psi_plus[0] * phi1 + end.psi_plus[1] * phi2);
    res.norm_drift = std::abs(std::norm(phi1) + std::norm(phi2) - 1.0);
    return res;
}

// --- chaos diagnostics -------------------------------------------------------

LyapunovResult max_lyapunov(const PotentialSpec& spec, const PhasePoint& init, double dt, double T,
                            int renorm_every) {
    if (renorm_every < 1) throw InvalidArgument("renormalization interval must be >= 1");
    const std::size_t steps = step_count(T, dt);
    if (steps == 0) throw InvalidArgument("max_lyapunov needs a positive horizon");
    const int dim = spec.dim();
    if (init.X.size() != dim || init.P.size() != dim)
        throw InvalidArgument("phase point dimension does not match the potential");

    auto hess_apply = [&](const Vec& X, const Vec& v) {
        const SymMat2 Hs = hessian_lambda_minus(spec, X);
        if (dim == 1) return Vec(Hs.v11 * v[0]);
        return Vec(Hs.v11 * v[0] + Hs.v12 * v[1], Hs.v12 * v[0] + Hs.v22 * v[1]);
    };

    // Fixed, generic initial tangent direction.
    Vec dX = Vec::zeros(dim);
    Vec dP = Vec::zeros(dim);
    for (int i = 0; i < dim; ++i) {
        dX[i] = 1.0;
        dP[i] = 1.0;
    }
    double n0 = std::sqrt(dX.norm2() + dP.norm2());
    dX *= 1.0 / n0;
    dP *= 1.0 / n0;

    PhasePoint s = init;
    Vec force = bo_force(spec, s.X);
    double log_sum = 0.0;
    LyapunovResult out;
    const double half = 0.5 * dt;
    for (std::size_t k = 1; k <= steps; ++k) {
        s.P += half * force;
        dP -= half * hess_apply(s.X, dX);
        s.X += dt * s.P;
        dX += dt * dP;
        force = bo_force(spec, s.X);
        s.P += half * force;
        dP -= half * hess_apply(s.X, dX);
        if (k % static_cast<std::size_t>(renorm_every) == 0 || k == steps) {
            const double len = std::sqrt(dX.norm2() + dP.norm2());
            if (!std::isfinite(len) || len > 1e300 || len < 1e-300) {
                throw InvalidArgument("tangent vector left the representable range; renormalize more often");
            }
            log_sum += std::log(len);
            dX *= 1.0 / len;
            dP *= 1.0 / len;
            ++out.renormalizations;
        }
    }
    out.exponent = log_sum / (static_cast<double>(steps) * dt);
    return out;
}

}  // namespace nmd
