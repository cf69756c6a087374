#include <algorithm>
#include <cmath>
#include <sstream>

#include "nmd/errors.hpp"
#include "nmd/estimators.hpp"
#include "nmd/io.hpp"
#include "nmd/rng.hpp"
#include "nmd/runner.hpp"
#include "nmd/spectral.hpp"

namespace nmd {

namespace {

// Stream indices under the master seed; fixed so manifests stay comparable.
enum SeedStream : std::uint64_t { kMonteCarlo = 0, kPoisson = 1, kEigensolver = 2 };

using num = CsvTable;

Vec to_vec(const std::vector<double>& v) { return v.size() == 1 ? Vec(v[0]) : Vec(v[0], v[1]); }

double shell_momentum(const PotentialSpec& spec, double E, const Vec& X) {
    const double kinetic = E - lambda_minus(spec, X);
    if (kinetic < 0.0) {
        std::ostringstream msg;
        msg << "initial position is outside the classically allowed region (lambda_- = "
            << lambda_minus(spec, X) << " > E = " << E << ")";
        throw InvalidArgument(msg.str());
    }
    return std::sqrt(2.0 * kinetic);
}

// Initial phase point. X0 defaults to -4 (1D) or the origin (2D); an empty P0
// is placed on the energy shell, along +X in 1D and along base_angle in 2D.
// Algorithm-1 runs default to P0 = (1, sqrt(2(E - lambda_-) - 1)) instead.
PhasePoint initial_point(const ExperimentConfig& cfg, const PotentialSpec& spec, bool algorithm1) {
    const auto& d = cfg.dynamics;
    const int dim = spec.dim();
    Vec X = d.X0.empty() ? (dim == 1 ? Vec(-4.0) : Vec(0.0, 0.0)) : to_vec(d.X0);
    if (!d.P0.empty()) return PhasePoint{X, to_vec(d.P0), 0.0};
    const double p = shell_momentum(spec, cfg.E, X);
    if (dim == 1) return PhasePoint{X, Vec(p), 0.0};
    if (algorithm1 && p * p >= 1.0) return PhasePoint{X, Vec(1.0, std::sqrt(p * p - 1.0)), 0.0};
    const double angle = cfg.estimator.base_angle;
    return PhasePoint{X, Vec(p * std::cos(angle), p * std::sin(angle)), 0.0};
}

Box config_box(const ExperimentConfig& cfg) {
    Box b;
    for (std::size_t i = 0; i < cfg.estimator.box_lo.size(); ++i) b.lo[i] = cfg.estimator.box_lo[i];
    for (std::size_t i = 0; i < cfg.estimator.box_hi.size(); ++i) b.hi[i] = cfg.estimator.box_hi[i];
    return b;
}

EigsOptions eigs_options(const ExperimentConfig& cfg) {
    EigsOptions o;
    o.tol = cfg.spectrum.tol;
    o.inner = cfg.spectrum.inner == "minres" ? InnerSolver::Minres : InnerSolver::Direct;
    o.seed = derive_seed(cfg.seed, kEigensolver);
    return o;
}

std::vector<EigenPair> solve_spectrum(const ExperimentConfig& cfg, const SparseHamiltonian& H, int k) {
    const auto opts = eigs_options(cfg);
    if (!cfg.spectrum.window.empty()) return eigs_in_window(H, cfg.spectrum.window[0], cfg.spectrum.window[1], opts);
    auto pairs = eigs_near(H, cfg.E, k, opts);
    std::sort(pairs.begin(), pairs.end(), [](const EigenPair& a, const EigenPair& b) { return a.E < b.E; });
    return pairs;
}

EhrenfestOptions ehrenfest_options(const ExperimentConfig& cfg) {
    EhrenfestOptions o;
    o.mode = cfg.dynamics.mode == "literal" ? EhrenfestMode::Literal : EhrenfestMode::Canonical;
    return o;
}

NormConvention norm_convention(const ExperimentConfig& cfg) {
    return cfg.dynamics.norm == "scaled" ? NormConvention::Scaled : NormConvention::Unit;
}

void add_slope(Summary& s, const ScanTable& t) {
    if (t.slope) s.emplace_back("slope", *t.slope);
}

ExperimentOutput spectrum_like(const ExperimentConfig& cfg, bool with_pe) {
    const auto spec = cfg.potential.to_spec();
    const Grid grid = build_grid(spec, cfg.M, cfg.grid.to_preset(spec.dim()));
    const auto H = assemble_hamiltonian(grid, spec, cfg.M);
    const auto pairs = solve_spectrum(cfg, H, cfg.spectrum.k);

    ExperimentOutput out;
    out.seeds["eigensolver"] = derive_seed(cfg.seed, kEigensolver);
    double max_res = 0.0;
    for (const auto& p : pairs) max_res = std::max(max_res, p.residual_norm);

    if (!with_pe) {
        CsvTable csv({"index", "E", "residual_norm"});
        for (std::size_t i = 0; i < pairs.size(); ++i)
            csv.row({std::to_string(i), num::num(pairs[i].E), num::num(pairs[i].residual_norm)});
        out.files.emplace_back("spectrum.csv", csv.str());
    } else {
        std::vector<ExcitedProbability> pe;
        for (const auto& p : pairs) pe.push_back(excited_probability(p, spec, grid));
        const bool resonance = spec.dim() == 1 && pairs.size() >= 1;
        std::vector<double> p_hat(pairs.size(), std::nan(""));
        std::vector<double> c_used(pairs.size(), std::nan(""));
        if (resonance) {
            const double lo = pairs.front().E;
            const double hi = pairs.back().E;
            const double pad = 0.25 * (hi - lo) + 0.2;
            const auto minus = scalar_spectra(grid, spec, cfg.M, Branch::Minus, lo - pad, hi + pad, eigs_options(cfg));
            const auto plus = scalar_spectra(grid, spec, cfg.M, Branch::Plus, lo - pad, hi + pad, eigs_options(cfg));
            const double lam0 = lambda_minus_at_origin(spec);
            std::vector<ResonanceSample> samples;
            std::vector<std::size_t> index;
            if (minus.size() >= 2 && !plus.empty()) {
                for (std::size_t i = 0; i < pairs.size(); ++i) {
                    if (pairs[i].E <= lam0) continue;
                    samples.push_back({pairs[i].E, pe[i].p_e,
                                       resonance_terms(pairs[i].E, minus, plus, spec.dim() == 1 ? std::get<OneD>(spec.variant).delta : 0.0, cfg.M, lam0)});
                    index.push_back(i);
                }
            }
            if (!samples.empty()) {
                const PiecewiseC C = fit_C(samples, cfg.spectrum.c_breakpoints);
                for (std::size_t j = 0; j < samples.size(); ++j) {
                    c_used[index[j]] = C.at(samples[j].E);
                    p_hat[index[j]] = resonance_formula(samples[j].terms, c_used[index[j]]);
                }
                for (std::size_t s = 0; s < C.values.size(); ++s) out.summary.emplace_back("C_" + std::to_string(s), C.values[s]);
            }
        }
        CsvTable csv({"index", "E", "p_e", "p_hat", "C", "excluded_nodes", "residual_norm"});
        double mean = 0.0;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            csv.row({std::to_string(i), num::num(pairs[i].E), num::num(pe[i].p_e), num::num(p_hat[i]),
                     num::num(c_used[i]), std::to_string(pe[i].excluded_nodes), num::num(pairs[i].residual_norm)});
            mean += pe[i].p_e;
        }
        out.files.emplace_back("pe_eig.csv", csv.str());
        if (!pairs.empty()) out.summary.emplace_back("mean_p_e", mean / static_cast<double>(pairs.size()));
    }
    if (cfg.spectrum.dump_eigenvectors) {
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            out.files.emplace_back("eigenvector_" + std::to_string(i) + ".bin",
                                   encode_eigenvector(pairs[i], grid, H.components));
        }
    }
    out.summary.emplace_back("eigenpairs", static_cast<double>(pairs.size()));
    if (!pairs.empty()) {
        out.summary.emplace_back("E_min", pairs.front().E);
        out.summary.emplace_back("E_max", pairs.back().E);
    }
    out.summary.emplace_back("max_residual", max_res);
    out.summary.emplace_back("grid_h", grid.h);
    out.summary.emplace_back("grid_n", grid.n);
    return out;
}

EventMode event_mode(const ExperimentConfig& cfg, const PotentialSpec& spec, const PhasePoint& init,
                     ExperimentOutput& out) {
    const auto& e = cfg.estimator;
    PlaneEvents plane;
    if (!e.plane_normal.empty()) {
        plane.normal = to_vec(e.plane_normal);
        plane.point = e.plane_point.empty() ? Vec::zeros(spec.dim()) : to_vec(e.plane_point);
    }
    if (e.events == "plane") return plane;
    PoissonEvents pm;
    pm.seed = derive_seed(cfg.seed, kPoisson);
    out.seeds["poisson"] = pm.seed;
    pm.rate = e.poisson_rate;
    if (pm.rate == 0.0) {
        if (e.plane_normal.empty())
            throw InvalidArgument("poisson_rate = 0 asks for calibration, which needs a hitting plane");
        pm.rate = calibrate_poisson_rate(spec, init, plane, cfg.dynamics.dt, cfg.dynamics.T);
    }
    out.summary.emplace_back("poisson_rate", pm.rate);
    return pm;
}

ExperimentOutput pe_md_run(const ExperimentConfig& cfg, int threads) {
    const auto spec = cfg.potential.to_spec();
    const PhasePoint init = initial_point(cfg, spec, true);
    ExperimentOutput out;
    const EventMode mode = event_mode(cfg, spec, init, out);
    PeMdOptions opts;
    opts.mode = ehrenfest_options(cfg).mode;
    opts.excited_start = cfg.dynamics.init == "excited";
    opts.threads = threads;
    const auto res = pe_md(spec, cfg.E, init, mode, cfg.M, cfg.dynamics.dt, cfg.dynamics.T, opts);

    CsvTable main({"E", "M", "T", "pe_hat", "events"});
    main.row({num::num(cfg.E), num::num(cfg.M), num::num(cfg.dynamics.T), num::num(res.pe_hat), std::to_string(res.events)});
    CsvTable seg({"segment", "t_start", "t_end", "steps", "integral"});
    for (std::size_t i = 0; i < res.segments.size(); ++i) {
        const auto& s = res.segments[i];
        seg.row({std::to_string(i), num::num(s.t_start), num::num(s.t_end), std::to_string(s.steps), num::num(s.integral)});
    }
    out.files.emplace_back("pe_md.csv", main.str());
    out.files.emplace_back("segments.csv", seg.str());
    out.summary.insert(out.summary.begin(), {"pe_hat", res.pe_hat});
    out.summary.emplace_back("events", static_cast<double>(res.events));
    return out;
}

McEstimate monte_carlo(const ExperimentConfig& cfg, const PotentialSpec& spec, const Observable& g,
                       ExperimentOutput& out, int threads) {
    const auto seed = derive_seed(cfg.seed, kMonteCarlo);
    out.seeds["monte_carlo"] = seed;
    return gmd_monte_carlo(spec, g, cfg.E, static_cast<std::size_t>(cfg.estimator.n_samples), seed,
                           config_box(cfg), threads);
}

ExperimentOutput observable_run(const ExperimentConfig& cfg, int threads) {
    const auto spec = cfg.potential.to_spec();
    const auto g = observable_by_name(cfg.estimator.observable);
    ExperimentOutput out;
    const auto mc = monte_carlo(cfg, spec, g, out, threads);
    const PhasePoint init = initial_point(cfg, spec, false);
    const auto traj = bo_trajectory(spec, init, cfg.dynamics.dt, cfg.dynamics.T, cfg.dynamics.stride);
    const auto window = cfg.estimator.window == "tail_half" ? AverageWindow::TailHalf : AverageWindow::Full;
    const double g_bo = gbo_time_average(traj, g, window);

    CsvTable csv({"quantity", "E", "value", "standard_error"});
    csv.row({"g_md", num::num(cfg.E), num::num(mc.value), num::num(mc.standard_error)});
    csv.row({"g_bo", num::num(cfg.E), num::num(g_bo), ""});
    if (cfg.estimator.schrodinger_k > 0) {
        const Grid grid = build_grid(spec, cfg.M, cfg.grid.to_preset(spec.dim()));
        const auto H = assemble_hamiltonian(grid, spec, cfg.M);
        out.seeds["eigensolver"] = derive_seed(cfg.seed, kEigensolver);
        for (const auto& p : solve_spectrum(cfg, H, cfg.estimator.schrodinger_k))
            csv.row({"g_s", num::num(p.E), num::num(schrodinger_observable(p, g, grid)), ""});
    }
    out.files.emplace_back("observable.csv", csv.str());

    const int dim = spec.dim();
    std::vector<std::string> header{"t"};
    for (int i = 1; i <= dim; ++i) header.push_back("X" + std::to_string(i));
    for (int i = 1; i <= dim; ++i) header.push_back("P" + std::to_string(i));
    header.push_back("H");
    CsvTable tcsv(header);
    for (const auto& s : traj.samples) {
        std::vector<std::string> r{num::num(s.t)};
        for (int i = 0; i < dim; ++i) r.push_back(num::num(s.X[i]));
        for (int i = 0; i < dim; ++i) r.push_back(num::num(s.P[i]));
        r.push_back(num::num(s.H));
        tcsv.row(std::move(r));
    }
    out.files.emplace_back("trajectory.csv", tcsv.str());
    out.summary = {{"g_md", mc.value}, {"g_md_standard_error", mc.standard_error}, {"g_bo", g_bo},
                   {"mc_boundary_hits", static_cast<double>(mc.boundary_hits)}};
    return out;
}

double reference_gmd(const ExperimentConfig& cfg, const PotentialSpec& spec, const Observable& g,
                     ExperimentOutput& out, int threads) {
    if (cfg.estimator.g_md_ref) return *cfg.estimator.g_md_ref;
    const auto mc = monte_carlo(cfg, spec, g, out, threads);
    out.summary.emplace_back("g_md_standard_error", mc.standard_error);
    return mc.value;
}

ExperimentOutput ergodicity_run(const ExperimentConfig& cfg, int threads) {
    const auto spec = cfg.potential.to_spec();
    const auto g = observable_by_name(cfg.estimator.observable);
    ExperimentOutput out;
    const double g_md = reference_gmd(cfg, spec, g, out, threads);
    std::vector<PhasePoint> inits;
    const auto paths = static_cast<std::size_t>(cfg.estimator.paths);
    if (spec.dim() == 2 && cfg.dynamics.X0.empty() && cfg.dynamics.P0.empty()) {
        inits = fan_initial_points(spec, cfg.E, paths, cfg.estimator.delta_v, cfg.estimator.base_angle);
    } else {
        inits.assign(1, initial_point(cfg, spec, false));
    }
    const auto table = ergodicity_scan(spec, g, g_md, inits, cfg.dynamics.dt, cfg.estimator.T_list, threads);
    CsvTable csv({"T", "error"});
    for (const auto& r : table.rows) csv.row({num::num(r.x), num::num(r.error)});
    out.files.emplace_back("ergodicity.csv", csv.str());
    out.summary.insert(out.summary.begin(), {"g_md", g_md});
    add_slope(out.summary, table);
    return out;
}

ExperimentOutput landau_zener_run(const ExperimentConfig& cfg) {
    const auto& lz = cfg.landau_zener;
    const double delta = cfg.potential.delta;
    const double dt = lz.dt > 0.0 ? lz.dt : landau_zener_max_dt(delta, cfg.M, lz.P0, lz.T0);
    const auto res = landau_zener_ode(delta, cfg.M, lz.P0, lz.T0, dt, static_cast<std::size_t>(lz.trace_points));
    const double closed = landau_zener_closed_form(delta, cfg.M, lz.P0);
    ExperimentOutput out;
    CsvTable csv({"delta", "M", "P0", "T0", "dt", "closed_form", "adiabatic_excited", "survival_diabatic",
                  "norm_drift", "short_horizon"});
    csv.row({num::num(delta), num::num(cfg.M), num::num(lz.P0), num::num(lz.T0), num::num(dt), num::num(closed),
             num::num(res.adiabatic_excited), num::num(res.survival_diabatic), num::num(res.norm_drift),
             res.short_horizon ? "1" : "0"});
    out.files.emplace_back("landau_zener.csv", csv.str());
    if (!res.trace.empty()) {
        CsvTable tr({"t", "phi1_sq", "phi2_sq", "adiabatic_excited"});
        for (const auto& p : res.trace)
            tr.row({num::num(p.t), num::num(p.phi1_sq), num::num(p.phi2_sq), num::num(p.adiabatic_excited)});
        out.files.emplace_back("landau_zener_trace.csv", tr.str());
    }
    out.summary = {{"closed_form", closed}, {"adiabatic_excited", res.adiabatic_excited},
                   {"survival_diabatic", res.survival_diabatic}, {"norm_drift", res.norm_drift}};
    return out;
}

ExperimentOutput lyapunov_run(const ExperimentConfig& cfg) {
    const auto spec = cfg.potential.to_spec();
    const PhasePoint init = initial_point(cfg, spec, false);
    const auto res = max_lyapunov(spec, init, cfg.dynamics.dt, cfg.dynamics.T, cfg.dynamics.renorm_every);
    ExperimentOutput out;
    CsvTable csv({"T", "dt", "exponent", "renormalizations"});
    csv.row({num::num(cfg.dynamics.T), num::num(cfg.dynamics.dt), num::num(res.exponent), std::to_string(res.renormalizations)});
    out.files.emplace_back("lyapunov.csv", csv.str());
    out.summary = {{"exponent", res.exponent}};
    return out;
}

ExperimentOutput multipath_run(const ExperimentConfig& cfg, int threads) {
    const auto spec = cfg.potential.to_spec();
    const auto g = observable_by_name(cfg.estimator.observable);
    ExperimentOutput out;
    const double g_md = reference_gmd(cfg, spec, g, out, threads);
    std::vector<std::size_t> N_list;
    for (auto n : cfg.estimator.N_list) N_list.push_back(static_cast<std::size_t>(n));
    const auto table = multipath_sampling_error(spec, g, cfg.E, N_list, cfg.estimator.delta_v,
                                                cfg.estimator.base_angle, cfg.dynamics.dt, cfg.dynamics.T,
                                                g_md, threads);
    CsvTable csv({"N", "error"});
    for (const auto& r : table.rows) csv.row({num::num(r.x), num::num(r.error)});
    out.files.emplace_back("multipath.csv", csv.str());
    out.summary.insert(out.summary.begin(), {"g_md", g_md});
    add_slope(out.summary, table);
    return out;
}

ExperimentOutput hitting_times_run(const ExperimentConfig& cfg) {
    const auto spec = cfg.potential.to_spec();
    const PhasePoint init = initial_point(cfg, spec, false);
    const auto traj = bo_trajectory(spec, init, cfg.dynamics.dt, cfg.dynamics.T, cfg.dynamics.stride);
    PlaneEvents plane;
    plane.normal = to_vec(cfg.estimator.plane_normal);
    plane.point = cfg.estimator.plane_point.empty() ? Vec::zeros(spec.dim()) : to_vec(cfg.estimator.plane_point);
    const auto st = hitting_time_histogram(traj, plane, cfg.estimator.n_bins);
    ExperimentOutput out;
    CsvTable csv({"bin_lo", "bin_hi", "count"});
    for (std::size_t b = 0; b < st.counts.size(); ++b)
        csv.row({num::num(st.bin_edges[b]), num::num(st.bin_edges[b + 1]), std::to_string(st.counts[b])});
    out.files.emplace_back("hitting_times.csv", csv.str());
    out.summary = {{"rate", st.rate}, {"ks_distance", st.ks_distance}, {"ks_critical_5", st.ks_critical_5},
                   {"crossings", static_cast<double>(st.crossings)}};
    return out;
}

ExperimentOutput ehrenfest_run(const ExperimentConfig& cfg) {
    const auto spec = cfg.potential.to_spec();
    const PhasePoint phase = initial_point(cfg, spec, true);
    const auto norm = norm_convention(cfg);
    const auto init = cfg.dynamics.init == "excited" ? excited_state_init(spec, phase, cfg.M, norm)
                                                     : ground_state_init(spec, phase, cfg.M, norm);
    const auto traj = ehrenfest_trajectory(spec, init, cfg.dynamics.dt, cfg.dynamics.T, cfg.M, cfg.dynamics.stride,
                                           ehrenfest_options(cfg));
    const int dim = spec.dim();
    std::vector<std::string> header{"t"};
    for (int i = 1; i <= dim; ++i) header.push_back("X" + std::to_string(i));
    for (int i = 1; i <= dim; ++i) header.push_back("P" + std::to_string(i));
    for (const char* h : {"H", "psi_r1", "psi_r2", "psi_i1", "psi_i2", "p_E", "potential_energy"}) header.push_back(h);
    CsvTable csv(header);
    double p_max = 0.0;
    for (const auto& s : traj.samples) {
        std::vector<std::string> r{num::num(s.t)};
        for (int i = 0; i < dim; ++i) r.push_back(num::num(s.X[i]));
        for (int i = 0; i < dim; ++i) r.push_back(num::num(s.P[i]));
        for (double v : {s.H, s.psi_r[0], s.psi_r[1], s.psi_i[0], s.psi_i[1], s.p_E, s.potential_energy})
            r.push_back(num::num(v));
        csv.row(std::move(r));
        p_max = std::max(p_max, s.p_E);
    }
    const std::size_t n = traj.samples.size();
    const std::size_t from = n - std::max<std::size_t>(1, n / 5);
    double tail = 0.0;
    for (std::size_t i = from; i < n; ++i) tail += traj.samples[i].p_E;
    tail /= static_cast<double>(n - from);
    ExperimentOutput out;
    out.files.emplace_back("trajectory.csv", csv.str());
    out.summary = {{"p_E_tail", tail}, {"p_E_max", p_max}, {"p_E_final", traj.samples.back().p_E}};
    if (dim == 1) {
        const double lam0 = lambda_minus_at_origin(spec);
        if (cfg.E > lam0)
            out.summary.emplace_back("p_lz", landau_zener_closed_form_energy(cfg.potential.delta, cfg.M, cfg.E, lam0));
    }
    return out;
}

std::string key_parameters(const ExperimentConfig& cfg) {
    std::ostringstream s;
    s << "family=" << cfg.potential.family << " M=" << cfg.M << " E=" << cfg.E << " dt=" << cfg.dynamics.dt
      << " T=" << cfg.dynamics.T << " seed=" << cfg.seed;
    return s.str();
}

}  // namespace

ExperimentOutput compute_experiment(const ExperimentConfig& cfg, int threads) {
    const std::string& k = cfg.kind;
    try {
        if (k == "spectrum") return spectrum_like(cfg, false);
        if (k == "pe-eig") return spectrum_like(cfg, true);
        if (k == "pe-md") return pe_md_run(cfg, threads);
        if (k == "observable") return observable_run(cfg, threads);
        if (k == "ergodicity") return ergodicity_run(cfg, threads);
        if (k == "landau-zener") return landau_zener_run(cfg);
        if (k == "lyapunov") return lyapunov_run(cfg);
        if (k == "multipath") return multipath_run(cfg, threads);
        if (k == "hitting-times") return hitting_times_run(cfg);
        if (k == "ehrenfest") return ehrenfest_run(cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        throw RunError(k, key_parameters(cfg), ex.what());
    }
    throw ConfigError("kind", "experiment kind '" + k + "' cannot be computed directly");
}

}  // namespace nmd
