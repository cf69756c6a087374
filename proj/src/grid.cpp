#include "nmd/grid.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace nmd {

namespace {

int cells_nearest(double length, double nominal_h) {
    const double ratio = length / nominal_h;
    const double nearest = std::round(ratio);
    // Keep exact divisions exact despite rounding noise in the quotient.
    if (std::abs(ratio - nearest) < 1e-9 * ratio) return static_cast<int>(nearest);
    const int below = static_cast<int>(std::floor(ratio));
    const int above = below + 1;
    const double err_below = std::abs(length / below - nominal_h);
    const double err_above = std::abs(length / above - nominal_h);
    return err_below <= err_above ? below : above;
}

}  // namespace

Grid grid_from_cells(int dim, double lo, double hi, int cells) {
    if (dim != 1 && dim != 2) throw InvalidArgument("grid dimension must be 1 or 2");
    if (!(hi > lo)) throw InvalidArgument("grid interval must satisfy lo < hi");
    if (cells - 1 < 3) {
        std::ostringstream msg;
        msg << "grid needs at least 3 interior points per axis, got " << cells - 1;
        throw InvalidArgument(msg.str());
    }
    Grid g;
    g.dim = dim;
    g.lo = {lo, dim == 2 ? lo : 0.0};
    g.hi = {hi, dim == 2 ? hi : 0.0};
    g.n = cells - 1;
    g.h = (hi - lo) / cells;
    return g;
}

Grid build_grid(const PotentialSpec& spec, double M, const GridPreset& preset) {
    if (!(M > 0.0) || !std::isfinite(M)) throw InvalidArgument("mass ratio M must be positive");
    const int dim = spec.dim();
    if (std::holds_alternative<Default1DGrid>(preset)) {
        if (dim != 1) throw InvalidArgument("default-1d grid preset requires a 1D potential");
        const double target = 10.0 * std::pow(M, 0.75);
        const double nearest = std::round(target);
        const double cells = std::abs(target - nearest) < 1e-9 * target ? nearest : std::ceil(target);
        return grid_from_cells(1, -2.0 * std::numbers::pi, 2.0 * std::numbers::pi,
                               static_cast<int>(cells));
    }
    if (std::holds_alternative<Default2DGrid>(preset) ||
        std::holds_alternative<Fine2DGrid>(preset)) {
        if (dim != 2) throw InvalidArgument("default-2d grid presets require a 2D potential");
        const double factor = std::holds_alternative<Default2DGrid>(preset) ? 2.0 : 4.0;
        const double nominal = 1.0 / (factor * std::sqrt(M));
        return grid_from_cells(2, -4.0, 4.0, cells_nearest(8.0, nominal));
    }
    const auto& ex = std::get<ExplicitGrid>(preset);
    if (!(ex.h > 0.0)) throw InvalidArgument("explicit grid spacing must be positive");
    return grid_from_cells(dim, ex.lo, ex.hi, cells_nearest(ex.hi - ex.lo, ex.h));
}

}  // namespace nmd
