#include "nmd/runner.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <sstream>

#include <json.hpp>
#include <toml.hpp>

#include "nmd/io.hpp"
#include "nmd/parallel.hpp"
#include "nmd/rng.hpp"

namespace nmd {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ojson config_json(const std::string& toml_text) {
    std::ostringstream s;
    s << toml::json_formatter{toml::parse(toml_text)};
    return ojson::parse(s.str());
}

ojson number_json(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);  // JSON has no NaN/Inf literals
}

std::string manifest_text(const RunManifest& m) {
    ojson j;
    j["artifact"] = "nmd";
    j["version"] = kArtifactVersion;
    j["kind"] = m.kind;
    j["config_hash"] = m.config_hash;
    j["config"] = config_json(m.config_toml);
    ojson seeds = ojson::object();
    seeds["master"] = m.master_seed;
    for (const auto& [name, value] : m.seeds) seeds[name] = value;
    j["seeds"] = seeds;
    j["started"] = m.started;
    j["finished"] = m.finished;
    ojson files = ojson::array();
    for (const auto& f : m.files) files.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    j["files"] = files;
    ojson summary = ojson::object();
    for (const auto& [k, v] : m.summary) summary[k] = number_json(v);
    j["summary"] = summary;
    return j.dump(2) + "\n";
}

RunManifest run_single(const ExperimentConfig& cfg, const fs::path& out_dir, int threads) {
    RunManifest m;
    m.kind = cfg.kind;
    m.config_toml = serialize_config(cfg);
    m.config_hash = sha256_hex(m.config_toml);
    m.master_seed = cfg.seed;
    m.started = utc_now();

    ExperimentOutput result = compute_experiment(cfg, threads);
    fs::create_directories(out_dir);
    for (const auto& [name, content] : result.files) {
        atomic_write(out_dir / name, content);
        m.files.push_back(EmittedFile{name, sha256_hex(content), content.size()});
    }
    atomic_write(out_dir / "config.toml", m.config_toml);
    m.files.push_back(EmittedFile{"config.toml", m.config_hash, m.config_toml.size()});
    m.seeds = std::move(result.seeds);
    m.summary = std::move(result.summary);
    m.finished = utc_now();
    atomic_write(out_dir / "manifest.json", manifest_text(m));
    return m;
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir, int threads) {
    if (cfg.kind != "sweep") return run_single(cfg, out_dir, threads);
    const auto res = run_sweep(cfg, cfg.sweep.axis, cfg.sweep.values, out_dir, threads);
    RunManifest m;
    m.kind = "sweep";
    m.config_toml = serialize_config(cfg);
    m.config_hash = sha256_hex(m.config_toml);
    m.master_seed = cfg.seed;
    m.summary.emplace_back("runs", static_cast<double>(res.runs.size()));
    m.summary.emplace_back("failures", static_cast<double>(res.failures.size()));
    if (!res.ok()) throw RunError("sweep", cfg.sweep.axis, res.failures.front());
    return m;
}

SweepResult run_sweep(const ExperimentConfig& base, const std::string& axis, const std::vector<double>& values,
                      const fs::path& out_dir, int threads) {
    if (values.empty()) throw ConfigError("sweep.values", "sweep needs at least one value");
    ExperimentConfig proto = base;
    if (proto.kind == "sweep") proto.kind = proto.sweep.experiment;
    if (proto.kind == "sweep" || proto.kind.empty())
        throw ConfigError("sweep.experiment", "sweep needs the experiment kind to run");
    proto.sweep = SweepConfig{};

    // Resolve every child config up front so that bad axes fail before any work.
    std::vector<ExperimentConfig> children;
    for (std::size_t i = 0; i < values.size(); ++i) {
        ExperimentConfig child = with_axis_value(proto, axis, values[i]);
        child.seed = derive_seed(base.seed, i);
        children.push_back(std::move(child));
    }

    struct Slot {
        bool ok = false;
        RunManifest manifest;
        std::string error;
    };
    std::vector<Slot> slots(children.size());
    fs::create_directories(out_dir);
    // Children run one per worker; inner parallelism is disabled so that the
    // worker count is the only knob. Results never depend on either.
    parallel_for(children.size(), threads, [&](std::size_t i) {
        try {
            slots[i].manifest = run_single(children[i], out_dir / ("value_" + std::to_string(i)), 1);
            slots[i].ok = true;
        } catch (const RunError& ex) {
            slots[i].error = ex.operation() + ": " + ex.what();
        } catch (const std::exception& ex) {
            slots[i].error = ex.what();
        }
    });

    std::vector<std::string> metrics;
    for (const auto& s : slots) {
        if (!s.ok) continue;
        for (const auto& [k, v] : s.manifest.summary)
            if (std::find(metrics.begin(), metrics.end(), k) == metrics.end()) metrics.push_back(k);
    }
    std::vector<std::string> header{"index", axis, "seed", "status"};
    header.insert(header.end(), metrics.begin(), metrics.end());
    header.push_back("error");
    CsvTable summary(header);

    SweepResult result;
    ojson runs = ojson::array();
    for (std::size_t i = 0; i < slots.size(); ++i) {
        std::vector<std::string> row{std::to_string(i), format_number(values[i]), std::to_string(children[i].seed),
                                     slots[i].ok ? "ok" : "failed"};
        for (const auto& name : metrics) {
            std::string cell;
            for (const auto& [k, v] : slots[i].manifest.summary)
                if (k == name) cell = format_number(v);
            row.push_back(cell);
        }
        row.push_back(slots[i].error);
        summary.row(std::move(row));
        if (slots[i].ok) {
            result.runs.push_back(slots[i].manifest);
        } else {
            result.failures.push_back("value " + format_number(values[i]) + ": " + slots[i].error);
        }
        runs.push_back({{"index", i},
                        {"value", values[i]},
                        {"seed", children[i].seed},
                        {"directory", "value_" + std::to_string(i)},
                        {"status", slots[i].ok ? "ok" : "failed"},
                        {"config_hash", slots[i].ok ? slots[i].manifest.config_hash : ""}});
    }
    const std::string summary_text = summary.str();
    result.summary_path = out_dir / "summary.csv";
    atomic_write(result.summary_path, summary_text);

    ojson j;
    j["artifact"] = "nmd";
    j["version"] = kArtifactVersion;
    j["kind"] = "sweep";
    j["experiment"] = proto.kind;
    j["axis"] = axis;
    j["master_seed"] = base.seed;
    const std::string base_toml = serialize_config(proto);
    j["config_hash"] = sha256_hex(base_toml);
    j["config"] = config_json(base_toml);
    j["runs"] = runs;
    j["files"] = ojson::array({{{"name", "summary.csv"}, {"sha256", sha256_hex(summary_text)}, {"bytes", summary_text.size()}}});
    atomic_write(out_dir / "sweep_manifest.json", j.dump(2) + "\n");
    return result;
}

std::string error_json(const std::string& kind, const std::string& field, const std::string& message) {
    ojson j;
    j["error"] = kind;
    if (!field.empty()) j["field"] = field;
    j["message"] = message;
    return j.dump();
}

}  // namespace nmd
