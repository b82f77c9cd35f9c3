// Batch experiment runner: verify the stage-by-stage state regression, run
// attack sessions, sweep the rotation angle, and launch the zero-disturbance
// feasibility search. All outputs are machine-readable and reproducible from
// the seed.
//
// Exit codes: 0 success, 1 verification failure, 2 usage/config error.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qkdlab/analysis.hpp"
#include "qkdlab/protocol.hpp"

using nlohmann::json;
using namespace qkdlab;

namespace {

constexpr int kSchemaVersion = 1;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("QKDLAB_SEED"))
        return std::strtoull(env, nullptr, 10);
    return 0;
}

void write_output(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output path '" + path + "'");
    out << content;
}

std::string format17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Shared angle flags; --theta-deg is a convenience that converts, the
// serialized output always carries radians.
struct AngleOption {
    double theta = M_PI / 4.0;
    double theta_deg = 0.0;
    bool deg_set = false;

    void attach(CLI::App& cmd, const char* help) {
        cmd.add_option("--theta", theta, help);
        cmd.add_option("--theta-deg", theta_deg, "Same angle in degrees (converted to radians)")
            ->each([this](const std::string&) { deg_set = true; });
    }
    double value() const { return deg_set ? theta_deg * M_PI / 180.0 : theta; }
};

// Applies a flat key=value file mirroring the subcommand's flags. Values
// given explicitly on the command line win over file values.
void apply_config_file(CLI::App& cmd, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    const auto trim = [](const std::string& s) {
        const char* ws = " \t\r";
        const auto b = s.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(ws) - b + 1);
    };
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " is not key=value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key == "config") continue;
        CLI::Option* opt = cmd.get_option_no_throw("--" + key);
        if (opt == nullptr)
            throw ConfigError("unknown config key '" + key + "' (line " +
                              std::to_string(lineno) + ")");
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

json inference_json(const KeyInference& inference) {
    json j;
    j["candidates"] = {inference.candidate_keys[0], inference.candidate_keys[1]};
    j["resolved"] = inference.resolved ? json(*inference.resolved) : json(nullptr);
    j["accuracy"] = inference.accuracy;
    return j;
}

json detection_json(const DetectionReport& d) {
    json j;
    j["check_indices"] = d.check_indices;
    j["mismatches"] = d.mismatches;
    json leaks = json::array();
    for (const auto& [r, v] : d.leaked_bits) leaks.push_back({r, v});
    j["leaked_bits"] = std::move(leaks);
    return j;
}

int cmd_verify(const std::string& mutate, const std::string& out) {
    const auto mutation = analysis::mutation_from_string(mutate);
    if (!mutation) throw ConfigError("unknown mutation '" + mutate + "'");
    const auto report = analysis::regression_states(*mutation);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["stages_checked"] = report.stages_checked;
    j["worst_fidelity"] = report.worst_fidelity;
    if (report.first_mismatch) {
        const auto& mm = *report.first_mismatch;
        j["first_mismatch"] = {{"round", mm.round},
                               {"stage", mm.stage},
                               {"key_bits", mm.psi_bits},
                               {"fidelity", mm.fidelity}};
    } else {
        j["first_mismatch"] = nullptr;
    }
    write_output(out, j.dump(2) + "\n");
    return report.first_mismatch ? 1 : 0;
}

int cmd_run(const std::string& strategy_name, double theta, int rounds, std::uint64_t seed,
            double check_fraction, const std::string& key_spec, const std::string& out) {
    Strategy strategy;
    if (strategy_name == "none") strategy = Strategy::none();
    else if (strategy_name == "s1") strategy = Strategy::s1();
    else if (strategy_name == "s2") strategy = Strategy::s2();
    else throw ConfigError("unknown strategy '" + strategy_name + "'");

    std::vector<int> key;
    if (key_spec == "random") {
        Rng key_rng(seed, 2);
        for (int i = 0; i < rounds; ++i) key.push_back(static_cast<int>(key_rng.below(2)));
    } else {
        for (const char c : key_spec) {
            if (c != '0' && c != '1') throw ConfigError("key must be 'random' or a 0/1 string");
            key.push_back(c - '0');
        }
        if (static_cast<int>(key.size()) != rounds)
            throw ConfigError("key length must equal --rounds");
    }

    ProtocolConfig config;
    config.theta = theta;
    config.rounds = rounds;
    config.check_fraction = check_fraction;
    config.seed = seed;
    config.strategy = strategy;
    const SessionResult result = run_session(config, key);

    std::string key_str;
    for (const int b : key) key_str.push_back(static_cast<char>('0' + b));

    json j;
    j["schema_version"] = kSchemaVersion;
    j["config"] = {{"strategy", strategy_name}, {"theta", theta},     {"rounds", rounds},
                   {"seed", seed},              {"check_fraction", check_fraction},
                   {"key", key_str}};
    json transcripts = json::array();
    for (const auto& t : result.transcripts) {
        json tj = {{"round", t.index}, {"sent", t.sent}, {"received", t.received},
                   {"error", t.error}};
        tj["eve_record"] =
            t.eve_record ? json({{"round", t.eve_record->first}, {"bit", t.eve_record->second}})
                         : json(nullptr);
        transcripts.push_back(std::move(tj));
    }
    j["transcripts"] = std::move(transcripts);
    j["qber"] = result.qber;
    json records = json::array();
    for (const auto& [r, b] : result.eve_records) records.push_back({r, b});
    j["eve_records"] = std::move(records);
    const DetectionReport& detection = *result.detection;
    j["detection"] = detection_json(detection);
    j["inference"] = inference_json(infer_key(result.eve_records, detection.leaked_bits, key));
    write_output(out, j.dump(2) + "\n");
    return 0;
}

int cmd_sweep(double theta_start, double theta_end, int steps, const std::string& format,
              const std::string& out) {
    if (steps < 1) throw ConfigError("--steps must be >= 1");
    if (theta_start > theta_end) throw ConfigError("--theta-start must be <= --theta-end");
    std::vector<double> grid;
    for (int i = 0; i < steps; ++i)
        grid.push_back(steps == 1 ? theta_start
                                  : theta_start + (theta_end - theta_start) * i / (steps - 1));
    const auto rows = analysis::sweep(grid);

    if (format == "csv") {
        std::ostringstream csv;
        csv << "# schema_version: " << kSchemaVersion << "\n";
        csv << "theta,d1_formula,d2_formula,s1_exact_round2,s2_exact_first_extraction,sum_check\n";
        for (const auto& r : rows)
            csv << format17(r.theta) << ',' << format17(r.d1_formula) << ','
                << format17(r.d2_formula) << ',' << format17(r.s1_exact_round2) << ','
                << format17(r.s2_exact_first_extraction) << ',' << format17(r.sum_check) << "\n";
        write_output(out, csv.str());
    } else {
        json j;
        j["schema_version"] = kSchemaVersion;
        json jrows = json::array();
        for (const auto& r : rows)
            jrows.push_back({{"theta", r.theta},
                             {"d1_formula", r.d1_formula},
                             {"d2_formula", r.d2_formula},
                             {"s1_exact_round2", r.s1_exact_round2},
                             {"s2_exact_first_extraction", r.s2_exact_first_extraction},
                             {"sum_check", r.sum_check}});
        j["rows"] = std::move(jrows);
        write_output(out, j.dump(2) + "\n");
    }
    return 0;
}

int cmd_appendix_search(double theta, int restarts, int max_iters, std::uint64_t seed, int threads,
                        const std::string& out) {
    const auto report = analysis::zero_disturbance_search(theta, restarts, max_iters, seed, threads);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["theta"] = report.theta;
    j["best_disturbance"] = report.best_disturbance;
    j["best_params"] = report.best_params.values;
    j["restarts"] = report.restarts;
    j["iterations_used"] = report.iterations_used;
    j["eve_entropy_after"] = report.eve_entropy_after;
    write_output(out, j.dump(2) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-qubit laboratory for the quantum-encryption QKD reuse attack"};
    app.require_subcommand(1);

    std::string out = "-";
    std::string format = "json";
    std::uint64_t seed = default_seed();
    int threads = 1;
    std::string config_path;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out, "Output path, or '-' for stdout");
        cmd->add_option("--seed", seed, "Master RNG seed (default: QKDLAB_SEED env or 0)");
        cmd->add_option("--threads", threads, "Worker threads (results are thread-count invariant)")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--config", config_path,
                        "Flat key=value file mirroring the flags; flags override");
        return cmd;
    };

    auto* verify = add_common(app.add_subcommand("verify", "Check the simulator against the closed-form stage states"));
    std::string mutate = "none";
    verify->add_option("--mutate", mutate, "Deliberate pipeline mutation (none|skip-eve-rotation)");
    verify->add_option("--format", format)->check(CLI::IsMember({"json"}));

    auto* run = add_common(app.add_subcommand("run", "Run one attack session over a reused pair"));
    AngleOption run_angle;
    run_angle.attach(*run, "Rotation angle in radians (default pi/4)");
    std::string strategy_name = "none";
    int rounds = 1;
    double check_fraction = 0.0;
    std::string key_spec = "random";
    run->add_option("--strategy", strategy_name, "none|s1|s2");
    run->add_option("--rounds", rounds, "Number of rounds")->check(CLI::PositiveNumber);
    run->add_option("--check-fraction", check_fraction, "Fraction of rounds compared publicly");
    run->add_option("--key", key_spec, "'random' or an explicit 0/1 string");

    auto* sweep = add_common(app.add_subcommand("sweep", "Tabulate error rates over a theta grid"));
    double theta_start = 0.0, theta_end = M_PI / 2.0;
    int steps = 33;
    sweep->add_option("--theta-start", theta_start);
    sweep->add_option("--theta-end", theta_end);
    sweep->add_option("--steps", steps)->check(CLI::PositiveNumber);
    sweep->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

    auto* search = add_common(app.add_subcommand(
        "appendix-search", "Search for a zero-disturbance attack unitary at a given angle"));
    AngleOption search_angle;
    search_angle.attach(*search, "Rotation angle in radians");
    int restarts = 20, max_iters = 2000;
    search->add_option("--restarts", restarts)->check(CLI::PositiveNumber);
    search->add_option("--max-iters", max_iters)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
        for (CLI::App* cmd : {verify, run, sweep, search})
            if (cmd->parsed() && !config_path.empty()) apply_config_file(*cmd, config_path);
        if (verify->parsed()) return cmd_verify(mutate, out);
        if (run->parsed())
            return cmd_run(strategy_name, run_angle.value(), rounds, seed, check_fraction,
                           key_spec, out);
        if (sweep->parsed()) {
            if (format == "json" && !sweep->count("--format")) format = "csv";
            return cmd_sweep(theta_start, theta_end, steps, format, out);
        }
        if (search->parsed())
            return cmd_appendix_search(search_angle.value(), restarts, max_iters, seed, threads,
                                       out);
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
