#pragma once

// Two-state matrix potentials and their adiabatic (eigen) decomposition.
//
// Three families are supported:
//   OneD      V(X) = [[X + r(X), delta], [delta, -X + r(X)]] with a quadratic
//             confinement r outside [a_l, a_r].
//   TwoDLine  V(X) = lambda_s(X) I + eta [[v1, v2], [v2, -v1]],
//             v1 = atan(X1/eta), v2 = delta/eta (avoided crossing along X1 = 0).
//   TwoDCone  same surface with v1 = atan((X1-a1)/eta), v2 = atan((X2-a2)/eta)
//             (conical intersection at a).
// with lambda_s(X) = (X1^2 + alpha X2^2)/2 + beta sin(X1 X2).
//
// eta = 0 is accepted for the 2D families and reduces the cone to the scalar
// surface lambda_s (every point degenerate) and the line to lambda_s I plus a
// constant coupling delta.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>

#include "nmd/errors.hpp"

namespace nmd {

/// Small fixed-capacity coordinate vector (1 or 2 components).
struct Vec {
    std::array<double, 2> c{0.0, 0.0};
    int n = 1;

    Vec() = default;
    explicit Vec(double x) : c{x, 0.0}, n(1) {}
    Vec(double x, double y) : c{x, y}, n(2) {}
    static Vec zeros(int dim) {
        Vec v;
        v.n = dim;
        return v;
    }

    int size() const noexcept { return n; }
    double& operator[](int i) noexcept { return c[static_cast<std::size_t>(i)]; }
    double operator[](int i) const noexcept { return c[static_cast<std::size_t>(i)]; }

    double dot(const Vec& o) const noexcept { return c[0] * o.c[0] + c[1] * o.c[1]; }
    double norm2() const noexcept { return dot(*this); }
    double norm() const noexcept { return std::sqrt(norm2()); }

    Vec& operator+=(const Vec& o) noexcept {
        c[0] += o.c[0];
        c[1] += o.c[1];
        return *this;
    }
    Vec& operator-=(const Vec& o) noexcept {
        c[0] -= o.c[0];
        c[1] -= o.c[1];
        return *this;
    }
    Vec& operator*=(double s) noexcept {
        c[0] *= s;
        c[1] *= s;
        return *this;
    }
    friend Vec operator+(Vec a, const Vec& b) noexcept { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) noexcept { return a -= b; }
    friend Vec operator*(double s, Vec a) noexcept { return a *= s; }
    friend Vec operator*(Vec a, double s) noexcept { return a *= s; }
    friend bool operator==(const Vec& a, const Vec& b) noexcept {
        return a.n == b.n && a.c == b.c;
    }
};

struct OneD {
    double delta = 0.1;
    double a_l = -2.0;
    double a_r = 3.0;
};

struct TwoDLine {
    double delta = 0.1;
    double alpha = std::sqrt(2.0);
    double beta = 2.0;
    double eta = 0.5;
};

struct TwoDCone {
    std::array<double, 2> a{0.0, 0.0};
    double alpha = std::sqrt(2.0);
    double beta = 2.0;
    double eta = 0.5;
};

struct PotentialSpec {
    std::variant<OneD, TwoDLine, TwoDCone> variant;

    PotentialSpec() : variant(OneD{}) {}
    PotentialSpec(OneD p) : variant(p) {}        // NOLINT(google-explicit-constructor)
    PotentialSpec(TwoDLine p) : variant(p) {}    // NOLINT(google-explicit-constructor)
    PotentialSpec(TwoDCone p) : variant(p) {}    // NOLINT(google-explicit-constructor)

    int dim() const noexcept { return std::holds_alternative<OneD>(variant) ? 1 : 2; }
    std::string kind() const;
    /// Throws InvalidArgument when the parameters violate the family's invariants.
    void validate() const;
};

/// Real symmetric 2x2 matrix stored as its three independent entries.
struct SymMat2 {
    double v11 = 0.0;
    double v12 = 0.0;
    double v22 = 0.0;

    /// <a, S b>
    double bilinear(const std::array<double, 2>& a, const std::array<double, 2>& b) const noexcept {
        return a[0] * (v11 * b[0] + v12 * b[1]) + a[1] * (v12 * b[0] + v22 * b[1]);
    }
    std::array<double, 2> apply(const std::array<double, 2>& x) const noexcept {
        return {v11 * x[0] + v12 * x[1], v12 * x[0] + v22 * x[1]};
    }
    double trace() const noexcept { return v11 + v22; }
    /// Eigenvalue half-gap sqrt(((v11 - v22)/2)^2 + v12^2).
    double half_gap() const noexcept { return std::hypot(0.5 * (v11 - v22), v12); }
};

struct AdiabaticFrame {
    double lambda_minus = 0.0;
    double lambda_plus = 0.0;
    std::array<double, 2> psi_minus{0.0, 0.0};
    std::array<double, 2> psi_plus{0.0, 0.0};
    /// +1 when psi_plus kept its default orientation, -1 when flipped for continuity.
    int gauge_sign = 1;
};

struct PotentialGradient {
    /// dV/dX_i, one matrix per coordinate.
    std::array<SymMat2, 2> dV{};
    Vec grad_lambda_minus;
};

/// Gap threshold below which eigenvectors are treated as undefined.
inline constexpr double kDegenerateGap = 1e-14;

SymMat2 eval_potential(const PotentialSpec& spec, const Vec& X);

/// Closed-form lower eigenvalue; valid at degenerate points too.
double lambda_minus(const PotentialSpec& spec, const Vec& X);
double lambda_plus(const PotentialSpec& spec, const Vec& X);

/// Eigen-decomposition of V. With `prev`, eigenvector signs maximize overlap
/// with the previous frame; otherwise the first nonzero component is positive.
AdiabaticFrame adiabatic_decompose(const SymMat2& V,
                                   const std::optional<AdiabaticFrame>& prev = std::nullopt);

PotentialGradient grad_potential(const PotentialSpec& spec, const Vec& X);

/// Gradient of lambda_minus only; throws DegeneratePointError at a conical point.
Vec grad_lambda_minus(const PotentialSpec& spec, const Vec& X);

/// Hessian of lambda_minus (v11 = d2/dX1^2, v12 = d2/dX1dX2, v22 = d2/dX2^2;
/// only v11 is meaningful in 1D). Throws DegeneratePointError at a conical point.
SymMat2 hessian_lambda_minus(const PotentialSpec& spec, const Vec& X);

bool classically_allowed(const PotentialSpec& spec, double E, const Vec& X);

/// lambda_minus at the crossing location: X = 0 (OneD), X = (0, 0) otherwise.
double lambda_minus_at_origin(const PotentialSpec& spec);

}  // namespace nmd
