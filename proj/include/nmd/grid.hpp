#pragma once

#include <array>
#include <cstddef>
#include <variant>

#include "nmd/model.hpp"

namespace nmd {

/// Uniform interior grid of an axis-aligned box with homogeneous Dirichlet walls.
/// Interior node j on an axis sits at lo + (j + 1) h; in 2D nodes are ordered
/// row-major with X1 the slow index.
struct Grid {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{0.0, 0.0};
    double h = 0.0;
    int n = 0;  ///< interior points per axis

    std::size_t num_nodes() const noexcept {
        return dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
    }
    double axis_coord(int axis, int j) const noexcept {
        return lo[static_cast<std::size_t>(axis)] + (j + 1) * h;
    }
    Vec node(std::size_t index) const noexcept {
        if (dim == 1) return Vec(axis_coord(0, static_cast<int>(index)));
        const int i1 = static_cast<int>(index / static_cast<std::size_t>(n));
        const int i2 = static_cast<int>(index % static_cast<std::size_t>(n));
        return Vec(axis_coord(0, i1), axis_coord(1, i2));
    }
    /// Quadrature weight h^dim.
    double cell_volume() const noexcept { return dim == 1 ? h : h * h; }
};

struct Default1DGrid {};          ///< (-2pi, 2pi), n = ceil(10 M^(3/4)) - 1
struct Default2DGrid {};          ///< [-4, 4]^2, h nearest 1/(2 sqrt M)
struct Fine2DGrid {};      ///< [-4, 4]^2, h nearest 1/(4 sqrt M)
struct ExplicitGrid {
    double h = 0.1;
    double lo = -1.0;  ///< same interval on every axis
    double hi = 1.0;
};
using GridPreset = std::variant<Default1DGrid, Default2DGrid, Fine2DGrid, ExplicitGrid>;

Grid build_grid(const PotentialSpec& spec, double M, const GridPreset& preset);

/// Grid with `cells` equal intervals per axis over [lo, hi]^dim.
Grid grid_from_cells(int dim, double lo, double hi, int cells);

}  // namespace nmd
