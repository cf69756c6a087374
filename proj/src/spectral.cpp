#include "nmd/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>

#include "nmd/dynamics.hpp"
#include "nmd/errors.hpp"

namespace nmd {

ExcitedProbability excited_probability(const EigenPair& pair, const PotentialSpec& spec,
                                       const Grid& grid) {
    const std::size_t nodes = grid.num_nodes();
    if (static_cast<std::size_t>(pair.Phi.size()) != 2 * nodes)
        throw InvalidArgument("eigenvector does not match a two-state grid function");
    double excited = 0.0;
    double total = 0.0;
    ExcitedProbability out;
    for (std::size_t p = 0; p < nodes; ++p) {
        const double a = pair.Phi[static_cast<Eigen::Index>(2 * p)];
        const double b = pair.Phi[static_cast<Eigen::Index>(2 * p + 1)];
        AdiabaticFrame f;
        try {
            f = adiabatic_decompose(eval_potential(spec, grid.node(p)));
        } catch (const DegeneratePointError&) {
            ++out.excluded_nodes;
            continue;
        }
        const double proj = a * f.psi_plus[0] + b * f.psi_plus[1];
        excited += proj * proj;
        total += a * a + b * b;
    }
    out.p_e = total > 0.0 ? std::clamp(excited / total, 0.0, 1.0) : 0.0;
    out.warning = static_cast<double>(out.excluded_nodes) > 1e-3 * static_cast<double>(nodes);
    return out;
}

std::vector<double> scalar_spectra(const Grid& grid, const PotentialSpec& spec, double M,
                                   Branch branch, double lo, double hi, const EigsOptions& opts) {
    if (grid.dim != spec.dim()) throw InvalidArgument("grid and potential dimensions differ");
    const auto H = assemble_scalar_hamiltonian(grid, M, [&](const Vec& X) {
        return branch == Branch::Minus ? lambda_minus(spec, X) : lambda_plus(spec, X);
    });
    std::vector<double> out;
    for (const auto& p : eigs_in_window(H, lo, hi, opts)) out.push_back(p.E);
    return out;
}

double PiecewiseC::at(double E) const {
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), E);
    return values.at(static_cast<std::size_t>(it - breakpoints.begin()));
}

namespace {

// Nearest entry to `target`, ties resolved toward the smaller value;
// `exclude` (when non-null) removes one value from consideration.
double nearest(const std::vector<double>& values, double target, const double* exclude) {
    bool found = false;
    double best = 0.0;
    for (double v : values) {
        if (exclude && v == *exclude) continue;
        const double d = std::abs(v - target);
        const double db = std::abs(best - target);
        if (!found || d < db || (d == db && v < best)) {
            best = v;
            found = true;
        }
    }
    if (!found) throw InvalidArgument("resonance estimate: spectrum has too few distinct values");
    return best;
}

}  // namespace

ResonanceTerms resonance_terms(double E, const std::vector<double>& minus_spectrum,
                               const std::vector<double>& plus_spectrum, double delta, double M,
                               double lambda_minus_0) {
    if (minus_spectrum.size() < 2) throw InvalidArgument("minus spectrum needs at least 2 entries");
    if (plus_spectrum.empty()) throw InvalidArgument("plus spectrum is empty");
    ResonanceTerms t;
    t.p_lz = landau_zener_closed_form_energy(delta, M, E, lambda_minus_0);
    t.E_minus_l = nearest(minus_spectrum, E, nullptr);
    t.E_minus_m = nearest(minus_spectrum, t.E_minus_l, &t.E_minus_l);
    t.E_plus_l = nearest(plus_spectrum, t.E_minus_l, nullptr);
    const double num = t.E_minus_l - t.E_plus_l;
    const double den = t.E_minus_l - t.E_minus_m;
    t.gap_ratio_sq = (num * num) / (den * den);
    return t;
}

double resonance_formula(const ResonanceTerms& terms, double C) {
    if (!(C > 0.0)) throw InvalidArgument("resonance estimate needs C > 0");
    if (terms.p_lz <= 0.0) return 0.0;
    return terms.p_lz / (terms.gap_ratio_sq / C + terms.p_lz);
}

double resonance_estimate(double E, const std::vector<double>& minus_spectrum,
                          const std::vector<double>& plus_spectrum, double delta, double M,
                          double lambda_minus_0, const PiecewiseC& C) {
    const auto t = resonance_terms(E, minus_spectrum, plus_spectrum, delta, M, lambda_minus_0);
    return resonance_formula(t, C.at(E));
}

PiecewiseC fit_C(const std::vector<ResonanceSample>& samples, const std::vector<double>& breakpoints) {
    if (!std::is_sorted(breakpoints.begin(), breakpoints.end()) ||
        std::adjacent_find(breakpoints.begin(), breakpoints.end()) != breakpoints.end())
        throw InvalidArgument("fit_C: breakpoints must be strictly increasing");
    PiecewiseC out;
    out.breakpoints = breakpoints;
    const std::size_t segments = breakpoints.size() + 1;
    std::vector<std::vector<const ResonanceSample*>> groups(segments);
    for (const auto& s : samples) {
        const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), s.E);
        groups[static_cast<std::size_t>(it - breakpoints.begin())].push_back(&s);
    }
    constexpr double lo = -6.0;
    constexpr double hi = 6.0;
    for (std::size_t seg = 0; seg < segments; ++seg) {
        const auto& group = groups[seg];
        if (group.empty()) {
            std::ostringstream msg;
            msg << "fit_C: segment " << seg << " contains no samples";
            throw InvalidArgument(msg.str());
        }
        auto objective = [&](double logC) {
            const double C = std::exp(logC);
            double sum = 0.0;
            for (const auto* s : group) {
                const double r = s->p_e - resonance_formula(s->terms, C);
                sum += r * r;
            }
            return sum;
        };
        // A flat objective carries no information about C: report the midpoint.
        const double f_lo = objective(lo);
        const double f_mid = objective(0.5 * (lo + hi));
        const double f_hi = objective(hi);
        const double spread = std::max({f_lo, f_mid, f_hi}) - std::min({f_lo, f_mid, f_hi});
        if (spread <= 1e-15 * (1.0 + f_mid)) {
            out.values.push_back(std::exp(0.5 * (lo + hi)));
            continue;
        }
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = lo;
        double b = hi;
        double c = b - inv_phi * (b - a);
        double d = a + inv_phi * (b - a);
        double fc = objective(c);
        double fd = objective(d);
        while (b - a > 1e-10) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = objective(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = objective(d);
            }
        }
        out.values.push_back(std::exp(0.5 * (a + b)));
    }
    return out;
}

double schrodinger_observable(const EigenPair& pair, const std::function<double(const Vec&)>& g,
                              const Grid& grid) {
    const std::size_t nodes = grid.num_nodes();
    const auto comps = static_cast<std::size_t>(pair.Phi.size()) / nodes;
    if (comps * nodes != static_cast<std::size_t>(pair.Phi.size()))
        throw InvalidArgument("eigenvector size is not a multiple of the node count");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t p = 0; p < nodes; ++p) {
        double rho = 0.0;
        for (std::size_t c = 0; c < comps; ++c) {
            const double v = pair.Phi[static_cast<Eigen::Index>(comps * p + c)];
            rho += v * v;
        }
        if (rho == 0.0) continue;
        num += g(grid.node(p)) * rho;
        den += rho;
    }
    if (den == 0.0) throw InvalidArgument("schrodinger_observable: zero density");
    return num / den;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "eigenvector dumps assume a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

}  // namespace

std::string encode_eigenvector(const EigenPair& pair, const Grid& grid, int components) {
    if (static_cast<std::size_t>(pair.Phi.size()) !=
        grid.num_nodes() * static_cast<std::size_t>(components))
        throw InvalidArgument("encode_eigenvector: size mismatch");
    std::string out;
    out.reserve(24 + sizeof(double) * static_cast<std::size_t>(pair.Phi.size()));
    put_u64(out, static_cast<std::uint64_t>(grid.dim));
    put_u64(out, static_cast<std::uint64_t>(grid.n));
    put_u64(out, static_cast<std::uint64_t>(components));
    out.append(reinterpret_cast<const char*>(pair.Phi.data()),
               sizeof(double) * static_cast<std::size_t>(pair.Phi.size()));
    return out;
}

void write_eigenvector(const std::filesystem::path& path, const EigenPair& pair, const Grid& grid,
                       int components) {
    const std::string bytes = encode_eigenvector(pair, grid, components);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

EigenPair read_eigenvector(const std::filesystem::path& path, Grid* grid_shape) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const auto dim = get_u64(in);
    const auto n = get_u64(in);
    const auto comps = get_u64(in);
    if (!in || (dim != 1 && dim != 2) || n == 0 || (comps != 1 && comps != 2))
        throw InvalidArgument("read_eigenvector: malformed header");
    const std::uint64_t count = (dim == 1 ? n : n * n) * comps;
    EigenPair pair;
    pair.Phi.resize(static_cast<Eigen::Index>(count));
    in.read(reinterpret_cast<char*>(pair.Phi.data()),
            static_cast<std::streamsize>(sizeof(double) * count));
    if (!in) throw InvalidArgument("read_eigenvector: truncated data");
    if (grid_shape) {
        grid_shape->dim = static_cast<int>(dim);
        grid_shape->n = static_cast<int>(n);
    }
    return pair;
}

}  // namespace nmd
