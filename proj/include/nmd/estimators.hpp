#pragma once

// Molecular-dynamics estimators: the event-segmented excited-state
// probability, Monte Carlo and time-average observables, and the
// statistical harnesses built on them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "nmd/dynamics.hpp"

namespace nmd {

using Observable = std::function<double(const Vec&)>;

struct PlaneEvents {
    Vec point;
    Vec normal;
};

struct PoissonEvents {
    double rate = 1.0;
    std::uint64_t seed = 0;
};

using EventMode = std::variant<PlaneEvents, PoissonEvents>;

struct Event {
    Vec X;
    Vec P;
    double t = 0.0;
};

/// Re-initialization events along a trajectory. records[0] is always the
/// trajectory start; times are strictly increasing.
struct EventList {
    std::vector<Event> records;
    EventMode mode;

    /// Number of detected events (the start record is not counted).
    std::size_t count() const noexcept { return records.empty() ? 0 : records.size() - 1; }
};

/// Throws EmptyEvents when nothing happens inside (t_start, t_end).
EventList generate_events(const Trajectory& traj, const EventMode& mode);

/// Poisson event times in (t0, t0 + T), exponential gaps from `seed`.
std::vector<double> poisson_times(double rate, std::uint64_t seed, double t0, double T);

// --- excited-state probability from molecular dynamics ----------------------

/// Advances the Ehrenfest state over one step of length h. The default is
/// ehrenfest_step; tests inject stubs here.
using SegmentStepper = std::function<EhrenfestState(const EhrenfestState&, double h)>;

struct PeMdOptions {
    EhrenfestMode mode = EhrenfestMode::Canonical;
    /// Start the first segment from Psi_+(X0) instead of Psi_-(X0).
    bool excited_start = false;
    int threads = 0;  ///< 0 = thread_budget()
    SegmentStepper stepper;
};

struct PeSegment {
    double t_start = 0.0;
    double t_end = 0.0;
    std::size_t steps = 0;
    double integral = 0.0;  ///< trapezoid of |<psi, Psi_+>| over the segment
};

struct PeMdResult {
    double pe_hat = 0.0;
    std::vector<PeSegment> segments;
    std::size_t events = 0;
};

/// Two-phase estimate: a BO run collects events, then each event-to-event
/// interval is re-run with Ehrenfest dynamics from the ground state, and
/// sum_k integral_k / T is returned.
PeMdResult pe_md(const PotentialSpec& spec, double E, const PhasePoint& init,
                 const EventMode& events, double M, double dt, double T,
                 const PeMdOptions& opts = {});

/// Mean plane-crossing rate of a BO run, the default Poisson rate.
double calibrate_poisson_rate(const PotentialSpec& spec, const PhasePoint& init,
                              const PlaneEvents& plane, double dt, double T);

// --- observables -------------------------------------------------------------

struct Box {
    std::array<double, 2> lo{-4.0, -4.0};
    std::array<double, 2> hi{4.0, 4.0};
};

struct McEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_accepted = 0;
    std::uint64_t seed = 0;
    /// Accepted samples within 1% of the box edge; nonzero means the box may
    /// clip the allowed region.
    std::size_t boundary_hits = 0;
};

/// Rejection sampling of {X in box : lambda_-(X) <= E}; average of g over the
/// accepted points. Streams are split into fixed chunks, so the result does
/// not depend on the thread count.
McEstimate gmd_monte_carlo(const PotentialSpec& spec, const Observable& g, double E,
                           std::size_t n_samples, std::uint64_t seed, const Box& box,
                           int threads = 0);

enum class AverageWindow { Full, TailHalf };

double gbo_time_average(const Trajectory& traj, const Observable& g,
                        AverageWindow window = AverageWindow::Full);

/// Streaming trapezoid accumulator of g along a uniformly stepped path,
/// queried at any step count.
class RunningAverage {
public:
    RunningAverage() = default;
    void push(double value);
    std::size_t samples() const noexcept { return prefix_.size(); }
    /// Time average over samples [first, last] (inclusive indices), dt-free.
    double mean(std::size_t first, std::size_t last) const;

private:
    std::vector<double> values_;
    std::vector<double> prefix_;  ///< trapezoid integral from sample 0, in steps
};

/// Full-window g_BO(T) for every T in T_list from one path (T_list ascending).
std::vector<double> gbo_prefix_averages(const PotentialSpec& spec, const Observable& g,
                                        const PhasePoint& init, double dt,
                                        const std::vector<double>& T_list);

struct ScanRow {
    double x = 0.0;
    double error = 0.0;
};

struct ScanTable {
    std::vector<ScanRow> rows;
    std::optional<double> slope;  ///< log-log least squares; absent below 2 rows
};

/// Least-squares slope of log y against log x; nullopt with fewer than two
/// usable points.
std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// |g_BO(T) - g_MD| per T. With several initial points the row holds the
/// root-mean-square error across them.
ScanTable ergodicity_scan(const PotentialSpec& spec, const Observable& g, double g_md,
                          const std::vector<PhasePoint>& inits, double dt,
                          const std::vector<double>& T_list, int threads = 0);

/// Initial points (0, 0, |P| cos(angle_n), |P| sin(angle_n)) with
/// angle_n = base_angle + n delta_v, n = 1..N, on the energy shell.
std::vector<PhasePoint> fan_initial_points(const PotentialSpec& spec, double E, std::size_t N,
                                           double delta_v, double base_angle);

/// |(1/N) sum_n tail-half average along path n - g_md_ref| for every N.
ScanTable multipath_sampling_error(const PotentialSpec& spec, const Observable& g, double E,
                                   const std::vector<std::size_t>& N_list, double delta_v,
                                   double base_angle, double dt, double T, double g_md_ref,
                                   int threads = 0);

struct HittingTimeStats {
    std::vector<double> bin_edges;  ///< n_bins + 1 edges from 0 to the largest gap
    std::vector<std::size_t> counts;
    double rate = 0.0;        ///< maximum-likelihood exponential rate, 1 / mean gap
    double ks_distance = 0.0;  ///< sup |F_empirical - F_exponential|
    double ks_critical_5 = 0.0;  ///< asymptotic 5% critical value 1.358 / sqrt(n)
    std::size_t crossings = 0;
};

/// Gap statistics of a sorted list of event times; needs at least 20 times.
HittingTimeStats hitting_time_stats(const std::vector<double>& times, int n_bins);

HittingTimeStats hitting_time_histogram(const Trajectory& traj, const PlaneEvents& plane,
                                        int n_bins);

}  // namespace nmd
