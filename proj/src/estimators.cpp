#include "nmd/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nmd/errors.hpp"
#include "nmd/parallel.hpp"
#include "nmd/rng.hpp"

namespace nmd {

namespace {

Event lerp(const Event& a, const Event& b, double theta) {
    Event e;
    e.X = a.X + theta * (b.X - a.X);
    e.P = a.P + theta * (b.P - a.P);
    e.t = a.t + theta * (b.t - a.t);
    return e;
}

// Sign changes of (X - point) . normal along a stream of samples. A sample
// exactly on the plane ends the previous side; the event is reported once.
class PlaneDetector {
public:
    explicit PlaneDetector(const PlaneEvents& plane) : plane_(plane) {
        if (plane_.normal.norm2() == 0.0) throw InvalidArgument("hitting plane normal must be nonzero");
    }

    /// Feeds the next sample; returns true and fills `out` on a crossing.
    bool push(const Event& sample, Event& out) {
        const double s = (sample.X - plane_.point).dot(plane_.normal);
        bool hit = false;
        if (started_ && s != 0.0 && side_ != 0 && (s > 0.0) != (side_ > 0)) {
            const double theta = prev_s_ == 0.0 ? 0.0 : prev_s_ / (prev_s_ - s);
            out = lerp(prev_, sample, theta);
            hit = true;
        }
        if (s != 0.0) side_ = s > 0.0 ? 1 : -1;
        prev_ = sample;
        prev_s_ = s;
        started_ = true;
        return hit;
    }

private:
    PlaneEvents plane_;
    Event prev_;
    double prev_s_ = 0.0;
    int side_ = 0;
    bool started_ = false;
};

Event to_event(const PhasePoint& p) { return Event{p.X, p.P, p.t}; }

void check_plane_dim(const PlaneEvents& plane, int dim) {
    if (plane.point.size() != dim || plane.normal.size() != dim)
        throw InvalidArgument("hitting plane dimension does not match the potential");
}

void require_events(const EventList& list) {
    if (list.count() == 0) throw EmptyEvents("no re-initialization events inside (0, T)");
}

// Sample indices in (0, last] nearest to the Poisson times, deduplicated.
std::vector<std::size_t> poisson_indices(const PoissonEvents& mode, double t0, double step,
                                         std::size_t last) {
    std::vector<std::size_t> idx;
    for (double tau : poisson_times(mode.rate, mode.seed, t0, step * static_cast<double>(last))) {
        const auto k = static_cast<std::size_t>(std::llround((tau - t0) / step));
        if (k == 0 || k > last) continue;
        if (!idx.empty() && idx.back() == k) continue;
        idx.push_back(k);
    }
    return idx;
}

}  // namespace

std::vector<double> poisson_times(double rate, std::uint64_t seed, double t0, double T) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw InvalidArgument("Poisson rate must be positive");
    RandomStream rng(seed);
    std::vector<double> times;
    double t = t0;
    for (;;) {
        t += rng.exponential(rate);
        if (t >= t0 + T) break;
        times.push_back(t);
    }
    return times;
}

EventList generate_events(const Trajectory& traj, const EventMode& mode) {
    if (traj.samples.empty()) throw InvalidArgument("trajectory has no samples");
    EventList list;
    list.mode = mode;
    const auto& first = traj.samples.front();
    list.records.push_back(Event{first.X, first.P, first.t});
    if (const auto* plane = std::get_if<PlaneEvents>(&mode)) {
        check_plane_dim(*plane, first.X.size());
        PlaneDetector det(*plane);
        Event e;
        for (const auto& s : traj.samples) {
            if (det.push(Event{s.X, s.P, s.t}, e) && e.t > list.records.back().t) list.records.push_back(e);
        }
    } else {
        const auto& pm = std::get<PoissonEvents>(mode);
        if (traj.samples.size() > 1) {
            const double step = traj.samples[1].t - traj.samples[0].t;
            for (std::size_t k : poisson_indices(pm, first.t, step, traj.samples.size() - 1)) {
                const auto& s = traj.samples[k];
                list.records.push_back(Event{s.X, s.P, s.t});
            }
        } else {
            poisson_times(pm.rate, pm.seed, first.t, 0.0);  // validates the rate
        }
    }
    require_events(list);
    return list;
}

// --- Algorithm 1 -------------------------------------------------------------

namespace {

EventList bo_events(const PotentialSpec& spec, const PhasePoint& init, const EventMode& mode,
                    double dt, std::size_t steps) {
    EventList list;
    list.mode = mode;
    list.records.push_back(to_event(init));
    if (const auto* plane = std::get_if<PlaneEvents>(&mode)) {
        check_plane_dim(*plane, spec.dim());
        PlaneDetector det(*plane);
        Event e;
        propagate_bo(spec, init, dt, steps, [&](std::size_t, const PhasePoint& s) {
            if (det.push(to_event(s), e) && e.t > list.records.back().t) list.records.push_back(e);
            return true;
        });
    } else {
        const auto idx = poisson_indices(std::get<PoissonEvents>(mode), init.t, dt, steps);
        std::size_t next = 0;
        propagate_bo(spec, init, dt, steps, [&](std::size_t k, const PhasePoint& s) {
            if (next < idx.size() && idx[next] == k) {
                list.records.push_back(to_event(s));
                ++next;
            }
            return next < idx.size();
        });
    }
    return list;
}

double excited_amplitude(const EhrenfestState& s, const PotentialSpec& spec) {
    return std::sqrt(transition_probability(s, spec));
}

PeSegment run_segment(const PotentialSpec& spec, const Event& from, double t_end, double M,
                      double dt, bool excited, const PeMdOptions& opts) {
    PeSegment seg;
    seg.t_start = from.t;
    seg.t_end = t_end;
    const double span = t_end - from.t;
    seg.steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / dt - 1e-9)));
    const double h = span / static_cast<double>(seg.steps);

    const PhasePoint start{from.X, from.P, from.t};
    EhrenfestState s = excited ? excited_state_init(spec, start, M) : ground_state_init(spec, start, M);
    double sum = 0.5 * excited_amplitude(s, spec);
    if (opts.stepper) {
        for (std::size_t k = 1; k <= seg.steps; ++k) {
            s = opts.stepper(s, h);
            const double f = excited_amplitude(s, spec);
            sum += k == seg.steps ? 0.5 * f : f;
        }
    } else {
        EhrenfestOptions eo;
        eo.mode = opts.mode;
        propagate_ehrenfest(spec, s, h, M, seg.steps, eo, [&](std::size_t k, const EhrenfestState& st) {
            if (k == 0) return true;
            const double f = excited_amplitude(st, spec);
            sum += k == seg.steps ? 0.5 * f : f;
            return true;
        });
    }
    seg.integral = h * sum;
    return seg;
}

}  // namespace

PeMdResult pe_md(const PotentialSpec& spec, double E, const PhasePoint& init,
                 const EventMode& events, double M, double dt, double T, const PeMdOptions& opts) {
    if (!(M > 0.0)) throw InvalidArgument("mass ratio M must be positive");
    if (init.X.size() != spec.dim() || init.P.size() != spec.dim())
        throw InvalidArgument("initial phase point dimension does not match the potential");
    if (!classically_allowed(spec, E, init.X)) {
        std::ostringstream msg;
        msg << "initial position is outside the classically allowed region for E = " << E;
        throw InvalidArgument(msg.str());
    }
    const std::size_t steps = step_count(T, dt);
    if (steps == 0) throw InvalidArgument("pe_md needs a positive horizon T");

    const EventList list = bo_events(spec, init, events, dt, steps);
    require_events(list);

    PeMdResult out;
    out.events = list.count();
    out.segments.resize(list.records.size() - 1);
    parallel_for(out.segments.size(), opts.threads, [&](std::size_t k) {
        const bool excited = k == 0 && opts.excited_start;
        out.segments[k] = run_segment(spec, list.records[k], list.records[k + 1].t, M, dt, excited, opts);
    });
    double total = 0.0;
    for (const auto& seg : out.segments) total += seg.integral;
    out.pe_hat = std::clamp(total / T, 0.0, 1.0);
    return out;
}

double calibrate_poisson_rate(const PotentialSpec& spec, const PhasePoint& init,
                              const PlaneEvents& plane, double dt, double T) {
    const EventList list = bo_events(spec, init, plane, dt, step_count(T, dt));
    require_events(list);
    return static_cast<double>(list.count()) / T;
}

// --- observables -------------------------------------------------------------

McEstimate gmd_monte_carlo(const PotentialSpec& spec, const Observable& g, double E,
                           std::size_t n_samples, std::uint64_t seed, const Box& box, int threads) {
    const int dim = spec.dim();
    for (int a = 0; a < dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        if (!(box.lo[i] < box.hi[i])) throw InvalidArgument("bounding box must satisfy lo < hi");
    }
    if (n_samples == 0) throw InvalidArgument("n_samples must be positive");

    constexpr std::size_t kChunk = 1u << 16;
    const std::size_t chunks = (n_samples + kChunk - 1) / kChunk;
    struct Partial {
        std::size_t accepted = 0;
        std::size_t edge = 0;
        double sum = 0.0;
        double sum_sq = 0.0;
    };
    std::vector<Partial> parts(chunks);
    parallel_for(chunks, threads, [&](std::size_t c) {
        RandomStream rng(derive_seed(seed, c));
        const std::size_t count = std::min(kChunk, n_samples - c * kChunk);
        Partial p;
        for (std::size_t k = 0; k < count; ++k) {
            Vec X = Vec::zeros(dim);
            bool near_edge = false;
            for (int a = 0; a < dim; ++a) {
                const auto i = static_cast<std::size_t>(a);
                X[a] = rng.uniform(box.lo[i], box.hi[i]);
                const double margin = 0.01 * (box.hi[i] - box.lo[i]);
                near_edge = near_edge || X[a] - box.lo[i] < margin || box.hi[i] - X[a] < margin;
            }
            if (lambda_minus(spec, X) > E) continue;
            const double v = g(X);
            ++p.accepted;
            p.edge += near_edge ? 1 : 0;
            p.sum += v;
            p.sum_sq += v * v;
        }
        parts[c] = p;
    });

    McEstimate out;
    out.n_samples = n_samples;
    out.seed = seed;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& p : parts) {
        out.n_accepted += p.accepted;
        out.boundary_hits += p.edge;
        sum += p.sum;
        sum_sq += p.sum_sq;
    }
    if (out.n_accepted == 0)
        throw InvalidArgument("no Monte Carlo sample was accepted; check the box and the energy");
    const auto n = static_cast<double>(out.n_accepted);
    out.value = sum / n;
    if (out.n_accepted > 1) {
        const double var = std::max(0.0, (sum_sq - n * out.value * out.value) / (n - 1.0));
        out.standard_error = std::sqrt(var / n);
    }
    return out;
}

double gbo_time_average(const Trajectory& traj, const Observable& g, AverageWindow window) {
    const auto& s = traj.samples;
    if (s.empty()) throw InvalidArgument("trajectory has no samples");
    if (s.size() == 1) return g(s.front().X);
    const double t_end = s.back().t;
    double t_from = s.front().t;
    if (window == AverageWindow::TailHalf) t_from = 0.5 * (s.front().t + t_end);

    auto first = static_cast<std::size_t>(
        std::lower_bound(s.begin(), s.end(), t_from,
                         [](const TrajectorySample& a, double t) { return a.t < t; }) -
        s.begin());
    double integral = 0.0;
    double g_prev = g(s[first].X);
    if (first > 0 && s[first].t > t_from) {
        // The window starts between two samples: interpolate g at t_from.
        const double g_before = g(s[first - 1].X);
        const double theta = (t_from - s[first - 1].t) / (s[first].t - s[first - 1].t);
        const double g_from = g_before + theta * (g_prev - g_before);
        integral += 0.5 * (g_from + g_prev) * (s[first].t - t_from);
    }
    for (std::size_t k = first + 1; k < s.size(); ++k) {
        const double gk = g(s[k].X);
        integral += 0.5 * (g_prev + gk) * (s[k].t - s[k - 1].t);
        g_prev = gk;
    }
    return integral / (t_end - t_from);
}

void RunningAverage::push(double value) {
    if (prefix_.empty()) {
        prefix_.push_back(0.0);
    } else {
        prefix_.push_back(prefix_.back() + 0.5 * (values_.back() + value));
    }
    values_.push_back(value);
}

double RunningAverage::mean(std::size_t first, std::size_t last) const {
    if (last >= values_.size() || first > last) throw InvalidArgument("RunningAverage: bad window");
    if (first == last) return values_[first];
    return (prefix_[last] - prefix_[first]) / static_cast<double>(last - first);
}

namespace {

RunningAverage observe_path(const PotentialSpec& spec, const Observable& g, const PhasePoint& init,
                            double dt, std::size_t steps) {
    RunningAverage avg;
    propagate_bo(spec, init, dt, steps, [&](std::size_t, const PhasePoint& s) {
        avg.push(g(s.X));
        return true;
    });
    return avg;
}

}  // namespace

std::vector<double> gbo_prefix_averages(const PotentialSpec& spec, const Observable& g,
                                        const PhasePoint& init, double dt,
                                        const std::vector<double>& T_list) {
    if (T_list.empty()) return {};
    if (!std::is_sorted(T_list.begin(), T_list.end())) throw InvalidArgument("T_list must be ascending");
    std::vector<std::size_t> steps;
    for (double T : T_list) {
        steps.push_back(step_count(T, dt));
        if (steps.back() == 0) throw InvalidArgument("T_list entries must be positive");
    }
    const RunningAverage avg = observe_path(spec, g, init, dt, steps.back());
    std::vector<double> out;
    for (std::size_t k : steps) out.push_back(avg.mean(0, k));
    return out;
}

std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    if (lx.size() < 2) return std::nullopt;
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) return std::nullopt;
    return sxy / sxx;
}

namespace {

void fill_slope(ScanTable& table) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& r : table.rows) {
        x.push_back(r.x);
        y.push_back(r.error);
    }
    table.slope = loglog_slope(x, y);
}

}  // namespace

ScanTable ergodicity_scan(const PotentialSpec& spec, const Observable& g, double g_md,
                          const std::vector<PhasePoint>& inits, double dt,
                          const std::vector<double>& T_list, int threads) {
    if (inits.empty()) throw InvalidArgument("ergodicity_scan needs at least one initial point");
    std::vector<std::vector<double>> per_path(inits.size());
    parallel_for(inits.size(), threads, [&](std::size_t i) {
        per_path[i] = gbo_prefix_averages(spec, g, inits[i], dt, T_list);
    });
    ScanTable table;
    for (std::size_t j = 0; j < T_list.size(); ++j) {
        double sq = 0.0;
        for (const auto& path : per_path) sq += (path[j] - g_md) * (path[j] - g_md);
        table.rows.push_back(ScanRow{T_list[j], std::sqrt(sq / static_cast<double>(inits.size()))});
    }
    fill_slope(table);
    return table;
}

std::vector<PhasePoint> fan_initial_points(const PotentialSpec& spec, double E, std::size_t N,
                                           double delta_v, double base_angle) {
    if (spec.dim() != 2) throw InvalidArgument("fan initial points need a 2D potential");
    const double lam0 = lambda_minus(spec, Vec(0.0, 0.0));
    if (!(E > lam0)) throw InvalidArgument("energy must exceed lambda_minus at the origin");
    const double p = std::sqrt(2.0 * (E - lam0));
    std::vector<PhasePoint> out;
    out.reserve(N);
    for (std::size_t n = 1; n <= N; ++n) {
        const double angle = base_angle + static_cast<double>(n) * delta_v;
        out.push_back(PhasePoint{Vec(0.0, 0.0), Vec(p * std::cos(angle), p * std::sin(angle)), 0.0});
    }
    return out;
}

ScanTable multipath_sampling_error(const PotentialSpec& spec, const Observable& g, double E,
                                   const std::vector<std::size_t>& N_list, double delta_v,
                                   double base_angle, double dt, double T, double g_md_ref,
                                   int threads) {
    if (N_list.empty()) return {};
    const std::size_t n_max = *std::max_element(N_list.begin(), N_list.end());
    if (N_list.front() == 0 || *std::min_element(N_list.begin(), N_list.end()) == 0)
        throw InvalidArgument("N_list entries must be positive");
    const std::size_t steps = step_count(T, dt);
    if (steps < 2) throw InvalidArgument("multipath horizon needs at least two steps");
    const auto inits = fan_initial_points(spec, E, n_max, delta_v, base_angle);
    std::vector<double> tail(n_max);
    parallel_for(n_max, threads, [&](std::size_t i) {
        const RunningAverage avg = observe_path(spec, g, inits[i], dt, steps);
        tail[i] = avg.mean((steps + 1) / 2, steps);
    });
    ScanTable table;
    for (std::size_t N : N_list) {
        double sum = 0.0;
        for (std::size_t i = 0; i < N; ++i) sum += tail[i];
        table.rows.push_back(ScanRow{static_cast<double>(N), std::abs(sum / static_cast<double>(N) - g_md_ref)});
    }
    fill_slope(table);
    return table;
}

HittingTimeStats hitting_time_stats(const std::vector<double>& times, int n_bins) {
    if (n_bins < 1) throw InvalidArgument("n_bins must be >= 1");
    if (times.size() < 20) {
        std::ostringstream msg;
        msg << "hitting-time statistics need at least 20 crossings, got " << times.size();
        throw InsufficientData(msg.str());
    }
    std::vector<double> gaps;
    for (std::size_t i = 1; i < times.size(); ++i) gaps.push_back(times[i] - times[i - 1]);
    std::sort(gaps.begin(), gaps.end());

    HittingTimeStats out;
    out.crossings = times.size();
    const double n = static_cast<double>(gaps.size());
    const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / n;
    if (!(mean > 0.0)) throw InvalidArgument("event times must be strictly increasing");
    out.rate = 1.0 / mean;

    for (std::size_t i = 0; i < gaps.size(); ++i) {
        const double F = 1.0 - std::exp(-out.rate * gaps[i]);
        out.ks_distance = std::max({out.ks_distance, static_cast<double>(i + 1) / n - F,
                                    F - static_cast<double>(i) / n});
    }
    out.ks_critical_5 = 1.358 / std::sqrt(n);

    const double top = gaps.back();
    out.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
    for (int b = 0; b <= n_bins; ++b) out.bin_edges[static_cast<std::size_t>(b)] = top * b / n_bins;
    out.counts.assign(static_cast<std::size_t>(n_bins), 0);
    for (double gap : gaps) {
        auto b = top > 0.0 ? static_cast<std::size_t>(gap / top * n_bins) : 0;
        ++out.counts[std::min(b, static_cast<std::size_t>(n_bins) - 1)];
    }
    return out;
}

HittingTimeStats hitting_time_histogram(const Trajectory& traj, const PlaneEvents& plane, int n_bins) {
    if (traj.samples.empty()) throw InvalidArgument("trajectory has no samples");
    check_plane_dim(plane, traj.samples.front().X.size());
    PlaneDetector det(plane);
    std::vector<double> times;
    Event e;
    for (const auto& s : traj.samples) {
        if (det.push(Event{s.X, s.P, s.t}, e)) times.push_back(e.t);
    }
    return hitting_time_stats(times, n_bins);
}

}  // namespace nmd
