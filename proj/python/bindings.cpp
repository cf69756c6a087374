// Python bindings for the nmd core (module nmd._core).

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nmd/config.hpp"
#include "nmd/eigensolve.hpp"
#include "nmd/errors.hpp"
#include "nmd/estimators.hpp"
#include "nmd/runner.hpp"
#include "nmd/spectral.hpp"

namespace py = pybind11;
using namespace nmd;

namespace {

Vec to_vec(const std::vector<double>& v) {
    if (v.size() == 1) return Vec(v[0]);
    if (v.size() == 2) return Vec(v[0], v[1]);
    throw InvalidArgument("expected a point with 1 or 2 coordinates");
}

std::vector<double> from_vec(const Vec& v) {
    std::vector<double> out;
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

PhasePoint phase(const std::vector<double>& X, const std::vector<double>& P) { return {to_vec(X), to_vec(P), 0.0}; }

// Trajectory as a dict of numpy arrays: t (n,), X (n, dim), P (n, dim), H (n,), p_E (n,).
py::dict trajectory_dict(const Trajectory& traj) {
    const auto n = static_cast<py::ssize_t>(traj.samples.size());
    const py::ssize_t dim = traj.samples.empty() ? 0 : traj.samples.front().X.size();
    py::array_t<double> t(n), H(n), pE(n);
    py::array_t<double> X({n, dim}), P({n, dim});
    auto tv = t.mutable_unchecked<1>();
    auto Hv = H.mutable_unchecked<1>();
    auto pv = pE.mutable_unchecked<1>();
    auto Xv = X.mutable_unchecked<2>();
    auto Pv = P.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < n; ++i) {
        const auto& s = traj.samples[static_cast<std::size_t>(i)];
        tv(i) = s.t;
        Hv(i) = s.H;
        pv(i) = s.p_E;
        for (py::ssize_t a = 0; a < dim; ++a) {
            Xv(i, a) = s.X[static_cast<int>(a)];
            Pv(i, a) = s.P[static_cast<int>(a)];
        }
    }
    py::dict d;
    d["t"] = t;
    d["X"] = X;
    d["P"] = P;
    d["H"] = H;
    d["p_E"] = pE;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Nonadiabatic molecular dynamics: two-state potentials, eigensolver, Ehrenfest and BO dynamics.";

    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<DegeneratePointError>(m, "DegeneratePointError", PyExc_ValueError);
    py::register_exception<SolverFailure>(m, "SolverFailure", PyExc_RuntimeError);
    py::register_exception<EmptyEvents>(m, "EmptyEvents", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<RunError>(m, "RunError", PyExc_RuntimeError);

    py::class_<OneD>(m, "OneD")
        .def(py::init([](double delta, double a_l, double a_r) { return OneD{delta, a_l, a_r}; }),
             py::arg("delta") = 0.1, py::arg("a_l") = -2.0, py::arg("a_r") = 3.0)
        .def_readwrite("delta", &OneD::delta)
        .def_readwrite("a_l", &OneD::a_l)
        .def_readwrite("a_r", &OneD::a_r);
    py::class_<TwoDLine>(m, "TwoDLine")
        .def(py::init([](double delta, double alpha, double beta, double eta) { return TwoDLine{delta, alpha, beta, eta}; }),
             py::arg("delta") = 0.1, py::arg("alpha") = std::sqrt(2.0), py::arg("beta") = 2.0, py::arg("eta") = 0.5)
        .def_readwrite("delta", &TwoDLine::delta)
        .def_readwrite("eta", &TwoDLine::eta);
    py::class_<TwoDCone>(m, "TwoDCone")
        .def(py::init([](std::array<double, 2> a, double alpha, double beta, double eta) {
                 return TwoDCone{a, alpha, beta, eta};
             }),
             py::arg("a") = std::array<double, 2>{0.0, 0.0}, py::arg("alpha") = std::sqrt(2.0), py::arg("beta") = 2.0,
             py::arg("eta") = 0.5)
        .def_readwrite("a", &TwoDCone::a)
        .def_readwrite("eta", &TwoDCone::eta);

    py::class_<PotentialSpec>(m, "Potential")
        .def(py::init<OneD>())
        .def(py::init<TwoDLine>())
        .def(py::init<TwoDCone>())
        .def_property_readonly("dim", &PotentialSpec::dim)
        .def_property_readonly("kind", &PotentialSpec::kind)
        .def("matrix",
             [](const PotentialSpec& s, const std::vector<double>& X) {
                 const SymMat2 V = eval_potential(s, to_vec(X));
                 Eigen::Matrix2d out;
                 out << V.v11, V.v12, V.v12, V.v22;
                 return out;
             })
        .def("lambda_minus", [](const PotentialSpec& s, const std::vector<double>& X) { return lambda_minus(s, to_vec(X)); })
        .def("lambda_plus", [](const PotentialSpec& s, const std::vector<double>& X) { return lambda_plus(s, to_vec(X)); })
        .def("grad_lambda_minus",
             [](const PotentialSpec& s, const std::vector<double>& X) { return from_vec(grad_lambda_minus(s, to_vec(X))); });

    py::implicitly_convertible<OneD, PotentialSpec>();
    py::implicitly_convertible<TwoDLine, PotentialSpec>();
    py::implicitly_convertible<TwoDCone, PotentialSpec>();

    py::class_<Grid>(m, "Grid")
        .def_readonly("dim", &Grid::dim)
        .def_readonly("h", &Grid::h)
        .def_readonly("n", &Grid::n)
        .def_property_readonly("num_nodes", &Grid::num_nodes);

    m.def(
        "build_grid",
        [](const PotentialSpec& spec, double M, const std::string& preset, double h, double lo, double hi) {
            GridConfig g;
            g.preset = preset;
            g.h = h;
            g.lo = lo;
            g.hi = hi;
            return build_grid(spec, M, g.to_preset(spec.dim()));
        },
        py::arg("potential"), py::arg("M"), py::arg("preset") = "auto", py::arg("h") = 0.1, py::arg("lo") = -1.0,
        py::arg("hi") = 1.0);

    py::class_<EigenPair>(m, "EigenPair")
        .def_readonly("E", &EigenPair::E)
        .def_readonly("Phi", &EigenPair::Phi)
        .def_readonly("residual_norm", &EigenPair::residual_norm);

    m.def(
        "eigs_near",
        [](const PotentialSpec& spec, const Grid& grid, double M, double sigma, int k, double tol) {
            EigsOptions o;
            o.tol = tol;
            py::gil_scoped_release release;
            return eigs_near(assemble_hamiltonian(grid, spec, M), sigma, k, o);
        },
        py::arg("potential"), py::arg("grid"), py::arg("M"), py::arg("sigma"), py::arg("k"), py::arg("tol") = 1e-8,
        "The k eigenpairs of the two-state Hamiltonian closest to sigma.");
    m.def(
        "excited_probability",
        [](const EigenPair& p, const PotentialSpec& spec, const Grid& grid) { return excited_probability(p, spec, grid).p_e; },
        py::arg("pair"), py::arg("potential"), py::arg("grid"));

    m.def(
        "bo_trajectory",
        [](const PotentialSpec& spec, const std::vector<double>& X0, const std::vector<double>& P0, double dt, double T,
           int stride) { return trajectory_dict(bo_trajectory(spec, phase(X0, P0), dt, T, stride)); },
        py::arg("potential"), py::arg("X0"), py::arg("P0"), py::arg("dt"), py::arg("T"), py::arg("stride") = 1);
    m.def(
        "ehrenfest_trajectory",
        [](const PotentialSpec& spec, const std::vector<double>& X0, const std::vector<double>& P0, double dt, double T,
           double M, int stride, bool excited) {
            const PhasePoint p = phase(X0, P0);
            const auto init = excited ? excited_state_init(spec, p, M) : ground_state_init(spec, p, M);
            return trajectory_dict(ehrenfest_trajectory(spec, init, dt, T, M, stride));
        },
        py::arg("potential"), py::arg("X0"), py::arg("P0"), py::arg("dt"), py::arg("T"), py::arg("M"),
        py::arg("stride") = 1, py::arg("excited") = false);

    m.def("landau_zener_closed_form", &landau_zener_closed_form, py::arg("delta"), py::arg("M"), py::arg("P0"));
    m.def(
        "landau_zener_ode",
        [](double delta, double M, double P0, double T0, std::optional<double> dt) {
            const double step = dt ? *dt : landau_zener_max_dt(delta, M, P0, T0);
            return landau_zener_ode(delta, M, P0, T0, step).adiabatic_excited;
        },
        py::arg("delta"), py::arg("M"), py::arg("P0"), py::arg("T0"), py::arg("dt") = py::none(),
        "Adiabatic excited population at +T0.");

    m.def(
        "max_lyapunov",
        [](const PotentialSpec& spec, const std::vector<double>& X0, const std::vector<double>& P0, double dt, double T,
           int renorm_every) {
            py::gil_scoped_release release;
            return max_lyapunov(spec, phase(X0, P0), dt, T, renorm_every).exponent;
        },
        py::arg("potential"), py::arg("X0"), py::arg("P0"), py::arg("dt"), py::arg("T"), py::arg("renorm_every") = 10);

    m.def(
        "gmd_monte_carlo",
        [](const PotentialSpec& spec, const std::string& observable, double E, std::size_t n_samples,
           std::uint64_t seed) {
            const auto g = observable_by_name(observable);
            McEstimate r;
            {
                py::gil_scoped_release release;
                r = gmd_monte_carlo(spec, g, E, n_samples, seed, Box{});
            }
            return py::make_tuple(r.value, r.standard_error);
        },
        py::arg("potential"), py::arg("observable"), py::arg("E"), py::arg("n_samples"), py::arg("seed") = 0,
        "(value, standard_error) of a named observable over {lambda_- <= E}.");

    m.def(
        "pe_md",
        [](const PotentialSpec& spec, double E, const std::vector<double>& X0, const std::vector<double>& P0,
           const std::vector<double>& plane_point, const std::vector<double>& plane_normal, double M, double dt,
           double T) {
            py::gil_scoped_release release;
            const PlaneEvents plane{to_vec(plane_point), to_vec(plane_normal)};
            return pe_md(spec, E, phase(X0, P0), plane, M, dt, T).pe_hat;
        },
        py::arg("potential"), py::arg("E"), py::arg("X0"), py::arg("P0"), py::arg("plane_point"),
        py::arg("plane_normal"), py::arg("M"), py::arg("dt"), py::arg("T"));

    m.def(
        "validate_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
        py::arg("toml_text"), "Parses and validates a TOML config; returns its canonical form.");
    m.def(
        "run_config",
        [](const std::filesystem::path& path, const std::filesystem::path& out_dir) {
            const auto cfg = load_config(path);
            RunManifest man;
            {
                py::gil_scoped_release release;
                man = run_experiment(cfg, out_dir);
            }
            py::dict summary;
            for (const auto& [k, v] : man.summary) summary[py::str(k)] = v;
            return summary;
        },
        py::arg("config"), py::arg("out_dir"), "Runs a config file into out_dir and returns the summary.");
}
