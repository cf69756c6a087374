#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "nmd/config.hpp"
#include "nmd/io.hpp"
#include "nmd/runner.hpp"

using namespace nmd;
namespace fs = std::filesystem;

namespace {

const char* kObservableToml = R"(
kind = "observable"
seed = 42
M = 100.0
E = 1.5

[potential]
family = "two_d_cone"
eta = 0.0

[dynamics]
dt = 0.01
T = 5.0

[estimator]
n_samples = 200000
observable = "sin_x1x2"
)";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("nmd_test_" + name);
    fs::remove_all(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NMD_BINARY) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config round-trips through its canonical rendering") {
    ExperimentConfig cfg = parse_config(kObservableToml);
    CHECK(cfg.kind == "observable");
    CHECK(cfg.potential.eta == 0.0);
    CHECK(parse_config(serialize_config(cfg)) == cfg);

    cfg.seed = 18446744073709551615ULL;  // above INT64_MAX
    CHECK(parse_config(serialize_config(cfg)).seed == cfg.seed);
}

TEST_CASE("config errors name the field") {
    auto field_of = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& ex) {
            return ex.field();
        }
        return std::string("<none>");
    };
    CHECK(field_of("kind = \"spectrum\"\nbogus = 1\n") == "bogus");
    CHECK(field_of("kind = \"spectrum\"\n[dynamics]\ndt = \"fast\"\n") == "dynamics.dt");
    CHECK(field_of("kind = \"spectrum\"\n[potential]\nfamily = \"three_d\"\n") == "potential.family");
    CHECK(field_of("kind = \"teleport\"\n") == "kind");
    CHECK(field_of("kind = \"spectrum\"\nM = -1.0\n") == "M");
}

TEST_CASE("sweep axes address numeric leaves") {
    ExperimentConfig cfg = parse_config(kObservableToml);
    CHECK_THROWS_AS(with_axis_value(cfg, "dynamics.X0[1]", 0.25), ConfigError);
    cfg.dynamics.X0 = {0.0, 0.0};
    CHECK(with_axis_value(cfg, "potential.a1", 2.5).potential.a1 == 2.5);
    CHECK(with_axis_value(cfg, "M", 400.0).M == 400.0);
    CHECK(with_axis_value(cfg, "dynamics.X0[1]", 0.25).dynamics.X0.at(1) == 0.25);
    CHECK_THROWS_AS(with_axis_value(cfg, "potential.family", 1.0), ConfigError);
    CHECK_THROWS_AS(with_axis_value(cfg, "nope.nothing", 1.0), ConfigError);
}

TEST_CASE("io helpers") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    for (double v : {0.1, -0.43869, 1e-300, 123456789.125, 2.0 / 3.0}) CHECK(std::stod(format_number(v)) == v);

    CsvTable t({"a", "b"});
    t.row({"1", "x,y"}).row({"2", "say \"hi\""});
    CHECK(t.str() == "a,b\n1,\"x,y\"\n2,\"say \"\"hi\"\"\"\n");

    const fs::path dir = scratch("atomic");
    fs::create_directories(dir);
    atomic_write(dir / "f.txt", "first");
    atomic_write(dir / "f.txt", "second");
    CHECK(slurp(dir / "f.txt") == "second");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
    CHECK(entries == 1);
    fs::remove_all(dir);
}

TEST_CASE("seed-identical runs are byte-identical") {
    const ExperimentConfig cfg = parse_config(kObservableToml);
    const fs::path a = scratch("run_a"), b = scratch("run_b");
    const auto ma = run_experiment(cfg, a, 1);
    const auto mb = run_experiment(cfg, b, 4);
    REQUIRE(ma.files.size() == mb.files.size());
    for (std::size_t i = 0; i < ma.files.size(); ++i) {
        CHECK(ma.files[i].name == mb.files[i].name);
        CHECK(ma.files[i].sha256 == mb.files[i].sha256);
        CHECK(slurp(a / ma.files[i].name) == slurp(b / mb.files[i].name));
        CHECK(ma.files[i].sha256 == sha256_hex(slurp(a / ma.files[i].name)));
    }
    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["config_hash"] == ma.config_hash);
    CHECK(manifest["seeds"]["master"] == 42);
    CHECK(manifest["seeds"].contains("monte_carlo"));

    ExperimentConfig other = cfg;
    other.seed = 43;
    const auto mc = run_experiment(other, scratch("run_c"), 1);
    CHECK(mc.config_hash != ma.config_hash);
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(scratch("run_c"));
}

TEST_CASE("sweep output does not depend on parallelism") {
    const ExperimentConfig cfg = parse_config(kObservableToml);
    const std::vector<double> values{1.2, 1.5, 1.8};
    const fs::path a = scratch("sweep_a"), b = scratch("sweep_b");
    const auto ra = run_sweep(cfg, "E", values, a, 1);
    const auto rb = run_sweep(cfg, "E", values, b, 3);
    CHECK(ra.ok());
    CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::string sub = "value_" + std::to_string(i);
        CHECK(slurp(a / sub / "observable.csv") == slurp(b / sub / "observable.csv"));
    }
    const auto j = nlohmann::json::parse(slurp(a / "sweep_manifest.json"));
    CHECK(j["runs"].size() == 3);
    CHECK(j["runs"][0]["seed"] != j["runs"][1]["seed"]);

    // A failing child is reported, the others still complete.
    const fs::path c = scratch("sweep_c");
    const auto rc = run_sweep(cfg, "E", {1.5, -1.0}, c, 2);
    CHECK_FALSE(rc.ok());
    CHECK(rc.runs.size() == 1);
    CHECK(slurp(c / "summary.csv").find("failed") != std::string::npos);
    for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    {
        std::ofstream(dir / "ok.toml") << kObservableToml;
        std::ofstream(dir / "bad.toml") << "kind = \"observable\"\nunknown_key = 3\n";
    }
    CHECK(run_cli("validate --config " + (dir / "ok.toml").string()) == 0);
    CHECK(run_cli("validate --config " + (dir / "bad.toml").string()) == 2);
    CHECK(run_cli("run --config " + (dir / "ok.toml").string() + " --out " + (dir / "out").string() + " --seed 9") == 0);
    CHECK(fs::exists(dir / "out" / "manifest.json"));
    CHECK(run_cli("sweep --config " + (dir / "ok.toml").string() + " --axis E --values 1.4,1.6 --out " +
                  (dir / "sw").string()) == 0);
    CHECK(fs::exists(dir / "sw" / "summary.csv"));
    CHECK(run_cli("sweep --config " + (dir / "ok.toml").string() + " --axis E --values 1.4,abc") == 2);
    fs::remove_all(dir);
}
