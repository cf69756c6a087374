// nmd: command-line runner for the configured experiments.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nmd/config.hpp"
#include "nmd/parallel.hpp"
#include "nmd/runner.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != item.size()) throw nmd::ConfigError("values", "cannot parse sweep value '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw nmd::ConfigError("values", "no sweep values given");
    return out;
}

int report_invalid(const nmd::ConfigError& ex) {
    std::cerr << nmd::error_json("validation", ex.field(), ex.what()) << '\n';
    return kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonadiabatic molecular dynamics experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "Run one configured experiment");
    run->add_option("--config", config_path, "Experiment TOML file")->required();
    run->add_option("--out", out_dir, "Output directory (overrides the config)");
    auto* seed_opt = run->add_option("--seed", seed, "Master seed (overrides the config)");

    std::string axis;
    std::string values;
    auto* sweep = app.add_subcommand("sweep", "Run a configured experiment over a list of values");
    sweep->add_option("--config", config_path, "Base experiment TOML file")->required();
    sweep->add_option("--axis", axis, "Dotted config field, e.g. potential.a1")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required();
    sweep->add_option("--out", out_dir, "Output directory (overrides the config)");
    auto* sweep_seed = sweep->add_option("--seed", seed, "Master seed (overrides the config)");

    auto* validate = app.add_subcommand("validate", "Check a configuration without running it");
    validate->add_option("--config", config_path, "Experiment TOML file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        nmd::ExperimentConfig cfg = nmd::load_config(config_path);
        if (validate->parsed()) {
            std::cout << nmd::serialize_config(cfg);
            return 0;
        }
        if ((run->parsed() && seed_opt->count()) || (sweep->parsed() && sweep_seed->count())) cfg.seed = seed;
        const std::string dir = out_dir.empty() ? cfg.output : out_dir;
        const int threads = nmd::thread_budget();
        if (run->parsed()) {
            const auto manifest = nmd::run_experiment(cfg, dir, threads);
            std::cout << "wrote " << dir << " (" << manifest.kind << ", config " << manifest.config_hash.substr(0, 12) << ")\n";
            return 0;
        }
        const auto result = nmd::run_sweep(cfg, axis, parse_values(values), dir, threads);
        std::cout << "wrote " << result.summary_path.string() << " (" << result.runs.size() << " ok, "
                  << result.failures.size() << " failed)\n";
        for (const auto& f : result.failures) std::cerr << nmd::error_json("computation", "", f) << '\n';
        return result.ok() ? 0 : kExitFailure;
    } catch (const nmd::ConfigError& ex) {
        return report_invalid(ex);
    } catch (const nmd::RunError& ex) {
        std::cerr << nmd::error_json("computation", "", ex.operation() + " [" + ex.parameters() + "]: " + ex.what())
                  << '\n';
        return kExitFailure;
    } catch (const std::exception& ex) {
        std::cerr << nmd::error_json("computation", "", ex.what()) << '\n';
        return kExitFailure;
    }
}
