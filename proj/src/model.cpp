#include "nmd/model.hpp"

#include <sstream>

namespace nmd {

namespace {

// V(X) = shift * I + [[c1, c2], [c2, -c1]] together with first derivatives.
struct Split {
    double shift = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    Vec d_shift;
    Vec d_c1;
    Vec d_c2;
};

void require_dim(const PotentialSpec& spec, const Vec& X) {
    if (X.size() != spec.dim()) {
        std::ostringstream msg;
        msg << "position has dimension " << X.size() << " but the " << spec.kind()
            << " potential is " << spec.dim() << "-dimensional";
        throw InvalidArgument(msg.str());
    }
}

double confinement(const OneD& p, double x, double* slope) {
    if (x < p.a_l) {
        *slope = -2.0 * (p.a_l - x);
        return (p.a_l - x) * (p.a_l - x);
    }
    if (x > p.a_r) {
        *slope = 2.0 * (x - p.a_r);
        return (x - p.a_r) * (x - p.a_r);
    }
    *slope = 0.0;
    return 0.0;
}

// lambda_s and its gradient, shared by both 2D families.
void surface(double alpha, double beta, const Vec& X, Split& s) {
    const double x1 = X[0];
    const double x2 = X[1];
    const double prod = x1 * x2;
    s.shift = 0.5 * (x1 * x1 + alpha * x2 * x2) + beta * std::sin(prod);
    const double bc = beta * std::cos(prod);
    s.d_shift = Vec(x1 + bc * x2, alpha * x2 + bc * x1);
}

// eta * atan(u / eta) and its derivative in u; the eta -> 0 limit is 0.
double scaled_atan(double u, double eta, double* slope) {
    if (eta == 0.0) {
        *slope = 0.0;
        return 0.0;
    }
    const double q = u / eta;
    *slope = 1.0 / (1.0 + q * q);
    return eta * std::atan(q);
}

Split split(const PotentialSpec& spec, const Vec& X) {
    require_dim(spec, X);
    Split s;
    if (const auto* p = std::get_if<OneD>(&spec.variant)) {
        double slope = 0.0;
        s.shift = confinement(*p, X[0], &slope);
        s.d_shift = Vec(slope);
        s.c1 = X[0];
        s.d_c1 = Vec(1.0);
        s.c2 = p->delta;
        s.d_c2 = Vec(0.0);
    } else if (const auto* p = std::get_if<TwoDLine>(&spec.variant)) {
        surface(p->alpha, p->beta, X, s);
        double slope = 0.0;
        s.c1 = scaled_atan(X[0], p->eta, &slope);
        s.d_c1 = Vec(slope, 0.0);
        s.c2 = p->delta;
        s.d_c2 = Vec(0.0, 0.0);
    } else {
        const auto& q = std::get<TwoDCone>(spec.variant);
        surface(q.alpha, q.beta, X, s);
        double slope1 = 0.0;
        double slope2 = 0.0;
        s.c1 = scaled_atan(X[0] - q.a[0], q.eta, &slope1);
        s.c2 = scaled_atan(X[1] - q.a[1], q.eta, &slope2);
        s.d_c1 = Vec(slope1, 0.0);
        s.d_c2 = Vec(0.0, slope2);
    }
    return s;
}

void orient_default(std::array<double, 2>& v) {
    const double lead = v[0] != 0.0 ? v[0] : v[1];
    if (lead < 0.0) {
        v[0] = -v[0];
        v[1] = -v[1];
    }
}

void orient_like(std::array<double, 2>& v, const std::array<double, 2>& ref) {
    if (v[0] * ref[0] + v[1] * ref[1] < 0.0) {
        v[0] = -v[0];
        v[1] = -v[1];
    }
}

}  // namespace

std::string PotentialSpec::kind() const {
    if (std::holds_alternative<OneD>(variant)) return "one_d";
    if (std::holds_alternative<TwoDLine>(variant)) return "two_d_line";
    return "two_d_cone";
}

void PotentialSpec::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (const auto* p = std::get_if<OneD>(&variant)) {
        if (!finite(p->delta) || p->delta < 0.0) throw InvalidArgument("delta must be >= 0");
        if (!finite(p->a_l) || !finite(p->a_r) || !(p->a_l < p->a_r))
            throw InvalidArgument("confinement interval requires a_l < a_r");
    } else if (const auto* p = std::get_if<TwoDLine>(&variant)) {
        if (!finite(p->delta) || p->delta < 0.0) throw InvalidArgument("delta must be >= 0");
        if (!finite(p->eta) || p->eta < 0.0) throw InvalidArgument("eta must be >= 0");
        if (!finite(p->alpha) || !finite(p->beta)) throw InvalidArgument("alpha/beta must be finite");
    } else {
        const auto& q = std::get<TwoDCone>(variant);
        if (!finite(q.eta) || q.eta < 0.0) throw InvalidArgument("eta must be >= 0");
        if (!finite(q.alpha) || !finite(q.beta) || !finite(q.a[0]) || !finite(q.a[1]))
            throw InvalidArgument("cone parameters must be finite");
    }
}

SymMat2 eval_potential(const PotentialSpec& spec, const Vec& X) {
    const Split s = split(spec, X);
    return SymMat2{s.shift + s.c1, s.c2, s.shift - s.c1};
}

double lambda_minus(const PotentialSpec& spec, const Vec& X) {
    const Split s = split(spec, X);
    return s.shift - std::hypot(s.c1, s.c2);
}

double lambda_plus(const PotentialSpec& spec, const Vec& X) {
    const Split s = split(spec, X);
    return s.shift + std::hypot(s.c1, s.c2);
}

AdiabaticFrame adiabatic_decompose(const SymMat2& V, const std::optional<AdiabaticFrame>& prev) {
    const double mean = 0.5 * (V.v11 + V.v22);
    const double d = 0.5 * (V.v11 - V.v22);
    const double b = V.v12;
    const double R = std::hypot(d, b);
    if (2.0 * R < kDegenerateGap) {
        throw DegeneratePointError("eigenvectors undefined: the two adiabatic surfaces intersect");
    }
    AdiabaticFrame f;
    f.lambda_minus = mean - R;
    f.lambda_plus = mean + R;

    // Pick the better-conditioned of the two equivalent null-vector formulas.
    std::array<double, 2> up = d >= 0.0 ? std::array<double, 2>{d + R, b}
                                        : std::array<double, 2>{b, R - d};
    const double len = std::hypot(up[0], up[1]);
    up[0] /= len;
    up[1] /= len;
    orient_default(up);
    std::array<double, 2> down{-up[1], up[0]};
    orient_default(down);

    if (prev) {
        const auto before = up;
        orient_like(up, prev->psi_plus);
        orient_like(down, prev->psi_minus);
        f.gauge_sign = (up == before) ? 1 : -1;
    }
    f.psi_plus = up;
    f.psi_minus = down;
    return f;
}

PotentialGradient grad_potential(const PotentialSpec& spec, const Vec& X) {
    const Split s = split(spec, X);
    PotentialGradient g;
    const int dim = X.size();
    for (int i = 0; i < dim; ++i) {
        g.dV[static_cast<std::size_t>(i)] =
            SymMat2{s.d_shift[i] + s.d_c1[i], s.d_c2[i], s.d_shift[i] - s.d_c1[i]};
    }
    const double radius = std::hypot(s.c1, s.c2);
    g.grad_lambda_minus = Vec::zeros(dim);
    for (int i = 0; i < dim; ++i) g.grad_lambda_minus[i] = s.d_shift[i];
    if (radius > 0.5 * kDegenerateGap) {
        for (int i = 0; i < dim; ++i) {
            g.grad_lambda_minus[i] -= (s.c1 * s.d_c1[i] + s.c2 * s.d_c2[i]) / radius;
        }
    } else if (s.d_c1.norm2() + s.d_c2.norm2() > 0.0) {
        throw DegeneratePointError("lambda_minus is not differentiable at a conical point");
    }
    return g;
}

Vec grad_lambda_minus(const PotentialSpec& spec, const Vec& X) {
    return grad_potential(spec, X).grad_lambda_minus;
}

SymMat2 hessian_lambda_minus(const PotentialSpec& spec, const Vec& X) {
    const Split s = split(spec, X);
    // Second derivatives of shift, c1, c2 (2x2, symmetric).
    SymMat2 hs;
    SymMat2 h1;
    SymMat2 h2;
    if (const auto* p = std::get_if<OneD>(&spec.variant)) {
        hs.v11 = (X[0] < p->a_l || X[0] > p->a_r) ? 2.0 : 0.0;
    } else {
        const double alpha =
            std::holds_alternative<TwoDLine>(spec.variant) ? std::get<TwoDLine>(spec.variant).alpha
                                                           : std::get<TwoDCone>(spec.variant).alpha;
        const double beta =
            std::holds_alternative<TwoDLine>(spec.variant) ? std::get<TwoDLine>(spec.variant).beta
                                                           : std::get<TwoDCone>(spec.variant).beta;
        const double x1 = X[0];
        const double x2 = X[1];
        const double sn = std::sin(x1 * x2);
        const double cs = std::cos(x1 * x2);
        hs = SymMat2{1.0 - beta * x2 * x2 * sn, beta * (cs - x1 * x2 * sn), alpha - beta * x1 * x1 * sn};
        // d/du [1 / (1 + (u/eta)^2)] = -2 (u/eta) / (eta (1 + (u/eta)^2)^2)
        auto curvature = [](double u, double eta) {
            if (eta == 0.0) return 0.0;
            const double q = u / eta;
            const double w = 1.0 + q * q;
            return -2.0 * q / (eta * w * w);
        };
        if (const auto* p = std::get_if<TwoDLine>(&spec.variant)) {
            h1.v11 = curvature(x1, p->eta);
        } else {
            const auto& q = std::get<TwoDCone>(spec.variant);
            h1.v11 = curvature(x1 - q.a[0], q.eta);
            h2.v22 = curvature(x2 - q.a[1], q.eta);
        }
    }
    const double radius = std::hypot(s.c1, s.c2);
    const bool coupled = s.d_c1.norm2() + s.d_c2.norm2() > 0.0;
    if (radius <= 0.5 * kDegenerateGap) {
        if (coupled) throw DegeneratePointError("lambda_minus is not twice differentiable at a conical point");
        return hs;
    }
    const int dim = X.size();
    Vec gr = Vec::zeros(dim);
    for (int i = 0; i < dim; ++i) gr[i] = (s.c1 * s.d_c1[i] + s.c2 * s.d_c2[i]) / radius;
    auto entry = [&](int i, int j, double hsij, double h1ij, double h2ij) {
        const double hr = (s.d_c1[i] * s.d_c1[j] + s.c1 * h1ij + s.d_c2[i] * s.d_c2[j] + s.c2 * h2ij -
                           gr[i] * gr[j]) / radius;
        return hsij - hr;
    };
    SymMat2 out;
    out.v11 = entry(0, 0, hs.v11, h1.v11, h2.v11);
    if (dim == 2) {
        out.v12 = entry(0, 1, hs.v12, h1.v12, h2.v12);
        out.v22 = entry(1, 1, hs.v22, h1.v22, h2.v22);
    }
    return out;
}

bool classically_allowed(const PotentialSpec& spec, double E, const Vec& X) {
    return lambda_minus(spec, X) <= E;
}

double lambda_minus_at_origin(const PotentialSpec& spec) {
    return spec.dim() == 1 ? lambda_minus(spec, Vec(0.0)) : lambda_minus(spec, Vec(0.0, 0.0));
}

}  // namespace nmd
