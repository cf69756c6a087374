#include "nmd/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace nmd {

PotentialSpec PotentialConfig::to_spec() const {
    if (family == "one_d") return OneD{delta, a_l, a_r};
    if (family == "two_d_line") return TwoDLine{delta, alpha, beta, eta};
    if (family == "two_d_cone") return TwoDCone{{a1, a2}, alpha, beta, eta};
    throw ConfigError("potential.family", "unknown potential family '" + family + "'");
}

GridPreset GridConfig::to_preset(int dim) const {
    if (preset == "auto") return dim == 1 ? GridPreset{Default1DGrid{}} : GridPreset{Default2DGrid{}};
    if (preset == "default-1d") return Default1DGrid{};
    if (preset == "default-2d") return Default2DGrid{};
    if (preset == "fine-2d") return Fine2DGrid{};
    if (preset == "explicit") return ExplicitGrid{h, lo, hi};
    throw ConfigError("grid.preset", "unknown grid preset '" + preset + "'");
}

Observable observable_by_name(const std::string& name) {
    if (name == "sin_x1x2") return [](const Vec& X) { return std::sin(X[0] * X[1]); };
    if (name == "x1") return [](const Vec& X) { return X[0]; };
    if (name == "x1_sq") return [](const Vec& X) { return X[0] * X[0]; };
    if (name == "norm_sq") return [](const Vec& X) { return X.norm2(); };
    if (name == "one") return [](const Vec&) { return 1.0; };
    throw ConfigError("estimator.observable", "unknown observable '" + name + "'");
}

namespace {

// Reads keys from one table, remembering which were used so that leftovers
// (typos, stale fields) can be rejected.
class Section {
public:
    Section(const toml::table* table, std::string prefix) : table_(table), prefix_(std::move(prefix)) {}

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    const toml::node* find(const std::string& key) {
        if (!table_) return nullptr;
        used_.insert(key);
        return table_->get(key);
    }

    void read(const std::string& key, double& out) {
        if (const auto* n = find(key)) {
            const auto v = n->value<double>();
            if (!v || !(n->is_floating_point() || n->is_integer())) throw ConfigError(path(key), "expected a number");
            out = *v;
        }
    }
    void read(const std::string& key, int& out) {
        if (const auto* n = find(key)) {
            if (!n->is_integer()) throw ConfigError(path(key), "expected an integer");
            const auto v = *n->value<std::int64_t>();
            if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
                throw ConfigError(path(key), "integer out of range");
            out = static_cast<int>(v);
        }
    }
    void read(const std::string& key, std::int64_t& out) {
        if (const auto* n = find(key)) {
            if (!n->is_integer()) throw ConfigError(path(key), "expected an integer");
            out = *n->value<std::int64_t>();
        }
    }
    void read(const std::string& key, bool& out) {
        if (const auto* n = find(key)) {
            if (!n->is_boolean()) throw ConfigError(path(key), "expected true or false");
            out = *n->value<bool>();
        }
    }
    void read(const std::string& key, std::string& out) {
        if (const auto* n = find(key)) {
            if (!n->is_string()) throw ConfigError(path(key), "expected a string");
            out = *n->value<std::string>();
        }
    }
    void read(const std::string& key, std::optional<double>& out) {
        if (find(key)) {
            double v = 0.0;
            read(key, v);
            out = v;
        }
    }
    void read(const std::string& key, std::vector<double>& out) {
        if (const auto* n = find(key)) {
            const auto* arr = n->as_array();
            if (!arr) throw ConfigError(path(key), "expected an array of numbers");
            out.clear();
            for (const auto& el : *arr) {
                const auto v = el.value<double>();
                if (!v || !(el.is_floating_point() || el.is_integer()))
                    throw ConfigError(path(key), "expected an array of numbers");
                out.push_back(*v);
            }
        }
    }
    void read(const std::string& key, std::vector<std::int64_t>& out) {
        if (const auto* n = find(key)) {
            const auto* arr = n->as_array();
            if (!arr) throw ConfigError(path(key), "expected an array of integers");
            out.clear();
            for (const auto& el : *arr) {
                if (!el.is_integer()) throw ConfigError(path(key), "expected an array of integers");
                out.push_back(*el.value<std::int64_t>());
            }
        }
    }

    void reject_unknown() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_) {
            const std::string key(k.str());
            if (!used_.count(key)) throw ConfigError(path(key), "unknown configuration key");
        }
    }

private:
    const toml::table* table_;
    std::string prefix_;
    std::set<std::string> used_;
};

const toml::table* subtable(const toml::table& root, const std::string& name) {
    const auto* n = root.get(name);
    if (!n) return nullptr;
    if (!n->is_table()) throw ConfigError(name, "expected a table");
    return n->as_table();
}

std::uint64_t read_seed(Section& top) {
    const auto* n = top.find("seed");
    if (!n) return 0;
    if (n->is_integer()) {
        const auto v = *n->value<std::int64_t>();
        if (v < 0) throw ConfigError("seed", "seed must be non-negative");
        return static_cast<std::uint64_t>(v);
    }
    if (n->is_string()) {
        const std::string s = *n->value<std::string>();
        std::size_t pos = 0;
        std::uint64_t v = 0;
        try {
            v = std::stoull(s, &pos, 10);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size() || s.front() == '-')
            throw ConfigError("seed", "seed string must be a decimal unsigned integer");
        return v;
    }
    throw ConfigError("seed", "expected an integer seed");
}

template <class T>
toml::array to_array(const std::vector<T>& v) {
    toml::array a;
    for (const auto& x : v) a.push_back(x);
    return a;
}

void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) throw ConfigError(field, message);
}

bool finite_all(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

ExperimentConfig parse_config(const std::string& toml_text, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(toml_text, source);
    } catch (const toml::parse_error& err) {
        std::ostringstream msg;
        msg << "TOML syntax error at line " << err.source().begin.line << ": " << err.description();
        throw ConfigError("", msg.str());
    }
    ExperimentConfig cfg;
    Section top(&root, "");
    top.read("kind", cfg.kind);
    cfg.seed = read_seed(top);
    top.read("output", cfg.output);
    top.read("M", cfg.M);
    top.read("E", cfg.E);

    Section pot(subtable(root, "potential"), "potential");
    top.find("potential");
    auto& p = cfg.potential;
    pot.read("family", p.family);
    pot.read("delta", p.delta);
    pot.read("a_l", p.a_l);
    pot.read("a_r", p.a_r);
    pot.read("alpha", p.alpha);
    pot.read("beta", p.beta);
    pot.read("eta", p.eta);
    pot.read("a1", p.a1);
    pot.read("a2", p.a2);
    pot.reject_unknown();

    Section grid(subtable(root, "grid"), "grid");
    top.find("grid");
    grid.read("preset", cfg.grid.preset);
    grid.read("h", cfg.grid.h);
    grid.read("lo", cfg.grid.lo);
    grid.read("hi", cfg.grid.hi);
    grid.reject_unknown();

    Section spec(subtable(root, "spectrum"), "spectrum");
    top.find("spectrum");
    auto& s = cfg.spectrum;
    spec.read("k", s.k);
    spec.read("window", s.window);
    spec.read("tol", s.tol);
    spec.read("inner", s.inner);
    spec.read("dump_eigenvectors", s.dump_eigenvectors);
    spec.read("c_breakpoints", s.c_breakpoints);
    spec.reject_unknown();

    Section dyn(subtable(root, "dynamics"), "dynamics");
    top.find("dynamics");
    auto& d = cfg.dynamics;
    dyn.read("dt", d.dt);
    dyn.read("T", d.T);
    dyn.read("stride", d.stride);
    dyn.read("X0", d.X0);
    dyn.read("P0", d.P0);
    dyn.read("mode", d.mode);
    dyn.read("norm", d.norm);
    dyn.read("init", d.init);
    dyn.read("renorm_every", d.renorm_every);
    dyn.reject_unknown();

    Section est(subtable(root, "estimator"), "estimator");
    top.find("estimator");
    auto& e = cfg.estimator;
    est.read("events", e.events);
    est.read("plane_point", e.plane_point);
    est.read("plane_normal", e.plane_normal);
    est.read("poisson_rate", e.poisson_rate);
    est.read("n_samples", e.n_samples);
    est.read("box_lo", e.box_lo);
    est.read("box_hi", e.box_hi);
    est.read("observable", e.observable);
    est.read("window", e.window);
    est.read("T_list", e.T_list);
    est.read("N_list", e.N_list);
    est.read("delta_v", e.delta_v);
    est.read("base_angle", e.base_angle);
    est.read("paths", e.paths);
    est.read("g_md_ref", e.g_md_ref);
    est.read("n_bins", e.n_bins);
    est.read("schrodinger_k", e.schrodinger_k);
    est.reject_unknown();

    Section lz(subtable(root, "landau_zener"), "landau_zener");
    top.find("landau_zener");
    lz.read("P0", cfg.landau_zener.P0);
    lz.read("T0", cfg.landau_zener.T0);
    lz.read("dt", cfg.landau_zener.dt);
    lz.read("trace_points", cfg.landau_zener.trace_points);
    lz.reject_unknown();

    Section sw(subtable(root, "sweep"), "sweep");
    top.find("sweep");
    sw.read("axis", cfg.sweep.axis);
    sw.read("values", cfg.sweep.values);
    sw.read("experiment", cfg.sweep.experiment);
    sw.reject_unknown();

    top.reject_unknown();
    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot read config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    toml::table root;
    root.insert("kind", cfg.kind);
    if (cfg.seed <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        root.insert("seed", static_cast<std::int64_t>(cfg.seed));
    else
        root.insert("seed", std::to_string(cfg.seed));
    root.insert("output", cfg.output);
    root.insert("M", cfg.M);
    root.insert("E", cfg.E);

    const auto& p = cfg.potential;
    root.insert("potential", toml::table{{"family", p.family}, {"delta", p.delta}, {"a_l", p.a_l},
                                         {"a_r", p.a_r}, {"alpha", p.alpha}, {"beta", p.beta},
                                         {"eta", p.eta}, {"a1", p.a1}, {"a2", p.a2}});
    root.insert("grid", toml::table{{"preset", cfg.grid.preset}, {"h", cfg.grid.h},
                                    {"lo", cfg.grid.lo}, {"hi", cfg.grid.hi}});
    const auto& s = cfg.spectrum;
    root.insert("spectrum", toml::table{{"k", s.k}, {"window", to_array(s.window)}, {"tol", s.tol},
                                        {"inner", s.inner}, {"dump_eigenvectors", s.dump_eigenvectors},
                                        {"c_breakpoints", to_array(s.c_breakpoints)}});
    const auto& d = cfg.dynamics;
    root.insert("dynamics", toml::table{{"dt", d.dt}, {"T", d.T}, {"stride", d.stride},
                                        {"X0", to_array(d.X0)}, {"P0", to_array(d.P0)},
                                        {"mode", d.mode}, {"norm", d.norm}, {"init", d.init},
                                        {"renorm_every", d.renorm_every}});
    const auto& e = cfg.estimator;
    toml::table est{{"events", e.events},
                    {"plane_point", to_array(e.plane_point)},
                    {"plane_normal", to_array(e.plane_normal)},
                    {"poisson_rate", e.poisson_rate},
                    {"n_samples", e.n_samples},
                    {"box_lo", to_array(e.box_lo)},
                    {"box_hi", to_array(e.box_hi)},
                    {"observable", e.observable},
                    {"window", e.window},
                    {"T_list", to_array(e.T_list)},
                    {"N_list", to_array(e.N_list)},
                    {"delta_v", e.delta_v},
                    {"base_angle", e.base_angle},
                    {"paths", e.paths},
                    {"n_bins", e.n_bins},
                    {"schrodinger_k", e.schrodinger_k}};
    if (e.g_md_ref) est.insert("g_md_ref", *e.g_md_ref);
    root.insert("estimator", std::move(est));
    const auto& lz = cfg.landau_zener;
    root.insert("landau_zener", toml::table{{"P0", lz.P0}, {"T0", lz.T0}, {"dt", lz.dt},
                                            {"trace_points", lz.trace_points}});
    root.insert("sweep", toml::table{{"axis", cfg.sweep.axis}, {"values", to_array(cfg.sweep.values)},
                                     {"experiment", cfg.sweep.experiment}});
    std::ostringstream out;
    out.precision(17);
    out << root << '\n';
    return out.str();
}

void validate_config(const ExperimentConfig& cfg) {
    const auto& kinds = experiment_kinds();
    require(std::find(kinds.begin(), kinds.end(), cfg.kind) != kinds.end(), "kind",
            "unknown experiment kind '" + cfg.kind + "'");
    require(std::isfinite(cfg.M) && cfg.M > 0.0, "M", "M must be a positive number");
    require(std::isfinite(cfg.E), "E", "E must be finite");
    require(!cfg.output.empty(), "output", "output directory must not be empty");

    const auto& p = cfg.potential;
    PotentialSpec spec;
    try {
        spec = p.to_spec();
        spec.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ConfigError("potential", ex.what());
    }
    const int dim = spec.dim();

    const auto& g = cfg.grid;
    g.to_preset(dim);
    if (g.preset == "explicit") {
        require(std::isfinite(g.h) && g.h > 0.0, "grid.h", "grid spacing must be positive");
        require(std::isfinite(g.lo) && std::isfinite(g.hi) && g.lo < g.hi, "grid.lo",
                "grid interval requires lo < hi");
    }
    require(dim == 1 || g.preset != "default-1d", "grid.preset", "default-1d needs a 1D potential");
    require(dim == 2 || (g.preset != "default-2d" && g.preset != "fine-2d"), "grid.preset",
            "2D grid presets need a 2D potential");

    const auto& s = cfg.spectrum;
    require(s.k >= 1, "spectrum.k", "k must be >= 1");
    require(s.window.empty() || (s.window.size() == 2 && finite_all(s.window) && s.window[0] < s.window[1]),
            "spectrum.window", "window must be [lo, hi] with lo < hi");
    require(s.tol > 0.0 && s.tol < 1.0, "spectrum.tol", "tol must lie in (0, 1)");
    require(s.inner == "direct" || s.inner == "minres", "spectrum.inner", "inner must be direct or minres");
    require(finite_all(s.c_breakpoints) && std::is_sorted(s.c_breakpoints.begin(), s.c_breakpoints.end()) &&
                std::adjacent_find(s.c_breakpoints.begin(), s.c_breakpoints.end()) == s.c_breakpoints.end(),
            "spectrum.c_breakpoints", "breakpoints must be strictly increasing");

    const auto& d = cfg.dynamics;
    require(std::isfinite(d.dt) && d.dt > 0.0, "dynamics.dt", "dt must be positive");
    require(std::isfinite(d.T) && d.T > 0.0, "dynamics.T", "T must be positive");
    require(d.stride >= 1, "dynamics.stride", "stride must be >= 1");
    require(d.X0.empty() || static_cast<int>(d.X0.size()) == dim, "dynamics.X0",
            "X0 must have one entry per dimension");
    require(d.P0.empty() || static_cast<int>(d.P0.size()) == dim, "dynamics.P0",
            "P0 must have one entry per dimension");
    require(finite_all(d.X0) && finite_all(d.P0), "dynamics.X0", "initial state must be finite");
    require(d.mode == "canonical" || d.mode == "literal", "dynamics.mode", "mode must be canonical or literal");
    require(d.norm == "unit" || d.norm == "scaled", "dynamics.norm", "norm must be unit or scaled");
    require(d.init == "ground" || d.init == "excited", "dynamics.init", "init must be ground or excited");
    require(d.renorm_every >= 1, "dynamics.renorm_every", "renorm_every must be >= 1");

    const auto& e = cfg.estimator;
    require(e.events == "plane" || e.events == "poisson", "estimator.events", "events must be plane or poisson");
    require(e.plane_point.empty() || static_cast<int>(e.plane_point.size()) == dim, "estimator.plane_point",
            "plane_point must have one entry per dimension");
    require(e.plane_normal.empty() || static_cast<int>(e.plane_normal.size()) == dim,
            "estimator.plane_normal", "plane_normal must have one entry per dimension");
    require(std::any_of(e.plane_normal.begin(), e.plane_normal.end(), [](double x) { return x != 0.0; }) ||
                e.plane_normal.empty(),
            "estimator.plane_normal", "plane normal must be nonzero");
    require(std::isfinite(e.poisson_rate) && e.poisson_rate >= 0.0, "estimator.poisson_rate",
            "poisson_rate must be >= 0 (0 calibrates it)");
    require(e.n_samples > 0, "estimator.n_samples", "n_samples must be positive");
    require(static_cast<int>(e.box_lo.size()) >= dim && static_cast<int>(e.box_hi.size()) >= dim &&
                e.box_lo.size() <= 2 && e.box_hi.size() <= 2,
            "estimator.box_lo", "bounding box needs one bound per dimension");
    for (int a = 0; a < dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        require(e.box_lo[i] < e.box_hi[i], "estimator.box_hi", "bounding box requires lo < hi");
    }
    observable_by_name(e.observable);
    require(e.window == "full" || e.window == "tail_half", "estimator.window", "window must be full or tail_half");
    require(finite_all(e.T_list) && std::all_of(e.T_list.begin(), e.T_list.end(), [](double t) { return t > 0.0; }) &&
                std::is_sorted(e.T_list.begin(), e.T_list.end()),
            "estimator.T_list", "T_list must be positive and ascending");
    require(std::all_of(e.N_list.begin(), e.N_list.end(), [](std::int64_t n) { return n > 0; }),
            "estimator.N_list", "N_list entries must be positive");
    require(std::isfinite(e.delta_v) && e.delta_v >= 0.0, "estimator.delta_v", "delta_v must be >= 0");
    require(std::isfinite(e.base_angle), "estimator.base_angle", "base_angle must be finite");
    require(e.paths >= 1, "estimator.paths", "paths must be >= 1");
    require(!e.g_md_ref || std::isfinite(*e.g_md_ref), "estimator.g_md_ref", "g_md_ref must be finite");
    require(e.n_bins >= 1, "estimator.n_bins", "n_bins must be >= 1");
    require(e.schrodinger_k >= 0, "estimator.schrodinger_k", "schrodinger_k must be >= 0");

    const auto& lz = cfg.landau_zener;
    require(std::isfinite(lz.P0) && lz.P0 > 0.0, "landau_zener.P0", "P0 must be positive");
    require(std::isfinite(lz.T0) && lz.T0 > 0.0, "landau_zener.T0", "T0 must be positive");
    require(std::isfinite(lz.dt) && lz.dt >= 0.0, "landau_zener.dt", "dt must be >= 0 (0 selects the limit)");
    require(lz.trace_points >= 0, "landau_zener.trace_points", "trace_points must be >= 0");

    // Kind-specific requirements.
    const std::string& k = cfg.kind;
    if (k == "pe-md" || k == "hitting-times") {
        if (e.events == "plane" || k == "hitting-times")
            require(!e.plane_normal.empty(), "estimator.plane_normal", k + " needs a hitting plane");
    }
    if (k == "pe-eig") require(dim == 1 || s.c_breakpoints.empty(), "spectrum.c_breakpoints",
                               "the resonance estimate is one-dimensional");
    if (k == "ergodicity") require(!e.T_list.empty(), "estimator.T_list", "ergodicity needs T_list");
    if (k == "multipath") {
        require(!e.N_list.empty(), "estimator.N_list", "multipath needs N_list");
        require(dim == 2, "potential.family", "multipath needs a 2D potential");
    }
    if (k == "sweep") {
        require(!cfg.sweep.axis.empty(), "sweep.axis", "sweep needs an axis");
        require(!cfg.sweep.values.empty() && finite_all(cfg.sweep.values), "sweep.values",
                "sweep needs finite values");
        require(cfg.sweep.experiment != "sweep" &&
                    std::find(kinds.begin(), kinds.end(), cfg.sweep.experiment) != kinds.end(),
                "sweep.experiment", "sweep.experiment must name a non-sweep kind");
    }
}

ExperimentConfig with_axis_value(const ExperimentConfig& cfg, const std::string& axis, double value) {
    toml::table root = toml::parse(serialize_config(cfg));
    // "X0[1]" and "X0.1" both address element 1 of X0.
    std::string path = axis;
    std::replace(path.begin(), path.end(), '[', '.');
    path.erase(std::remove(path.begin(), path.end(), ']'), path.end());
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string item; std::getline(ss, item, '.');) parts.push_back(item);
    if (parts.empty()) throw ConfigError("sweep.axis", "empty axis name");

    toml::node* node = &root;
    for (const auto& part : parts) {
        if (auto* t = node->as_table()) {
            node = t->get(part);
        } else if (auto* a = node->as_array()) {
            const bool digits = !part.empty() && std::all_of(part.begin(), part.end(), ::isdigit);
            node = digits ? a->get(std::stoul(part)) : nullptr;
        } else {
            node = nullptr;
        }
        if (!node) throw ConfigError("sweep.axis", "'" + axis + "' is not a field of the configuration");
    }
    if (node->is_floating_point()) {
        *node->as_floating_point() = value;
    } else if (node->is_integer()) {
        if (value != std::floor(value) || std::abs(value) > 9.0e15)
            throw ConfigError("sweep.axis", "'" + axis + "' is an integer field; got " + std::to_string(value));
        *node->as_integer() = static_cast<std::int64_t>(value);
    } else {
        throw ConfigError("sweep.axis", "'" + axis + "' is not a numeric leaf");
    }
    std::ostringstream out;
    out.precision(17);
    out << root;
    return parse_config(out.str(), "sweep:" + axis);
}

}  // namespace nmd
