#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fragstop/harness.hpp"

namespace {

using namespace fragstop;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<std::size_t> runs;
    std::optional<unsigned> workers;
    std::string out_path;
    bool literal = false;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "key = value config file");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--samples", f.samples, "I_inf draws in the shared sample");
    cmd->add_option("--runs", f.runs, "fragmentation runs");
    cmd->add_option("--workers", f.workers, "worker threads (0 = all cores)");
    cmd->add_option("--out", f.out_path, "output file (default stdout)");
    cmd->add_flag("--literal-theorem-statistic", f.literal,
                  "freeze blocks on (accrued + c)|B|^gamma instead of the Z statistic");
    cmd->add_option("--set", f.overrides, "extra key=value setting (repeatable)");
}

RunConfig load(const CommonFlags& f) {
    RunConfig cfg;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw ConfigError("cannot open config file '" + f.config_path + "'");
        cfg = parse_config(in);
    }
    std::vector<std::string> problems;
    for (const auto& kv : f.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            problems.push_back("--set expects key=value, got '" + kv + "'");
            continue;
        }
        try {
            apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        } catch (const ConfigError& e) {
            problems.insert(problems.end(), e.problems().begin(), e.problems().end());
        }
    }
    if (!problems.empty()) throw ConfigError(problems);
    if (f.seed) cfg.seed = *f.seed;
    if (f.samples) cfg.samples = *f.samples;
    if (f.runs) cfg.runs = *f.runs;
    if (f.workers) cfg.workers = *f.workers;
    if (f.literal) cfg.literal_theorem_statistic = true;
    return cfg;
}

template <class Fn>
void with_output(const std::string& path, Fn&& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");
    fn(out);
}

void print_list(const char* head, const std::vector<std::string>& items) {
    std::cerr << head << "\n";
    for (const auto& s : items) std::cerr << "  - " << s << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal stopping of fragmentation premiums: solver and simulator"};
    app.require_subcommand(1);

    CommonFlags solve_f, verify_f, sweep_f, sim_f;
    auto* solve_cmd = app.add_subcommand("solve", "compute b*, V*(c) and diagnostics as JSON");
    add_common(solve_cmd, solve_f);

    auto* verify_cmd = app.add_subcommand("verify", "run every identity check and report pass/fail");
    add_common(verify_cmd, verify_f);
    std::optional<std::size_t> verify_paths;
    verify_cmd->add_option("--paths", verify_paths, "paths per path-based check");

    auto* sweep_cmd = app.add_subcommand("sweep", "solve along a parameter grid, CSV output");
    add_common(sweep_cmd, sweep_f);
    std::string axis;
    std::string grid;
    sweep_cmd->add_option("--axis", axis, "q | c | gamma | theta | rate");
    sweep_cmd->add_option("--grid", grid, "comma-separated grid values");

    auto* sim_cmd = app.add_subcommand("simulate", "fragmentation ensemble under a stopping line");
    add_common(sim_cmd, sim_f);
    std::string line;
    std::string summary_path;
    std::string z_path_out;
    double z_horizon = 5.0;
    sim_cmd->add_option("--line", line, "optimal | fixed:<t> | mass:<a>");
    sim_cmd->add_option("--summary", summary_path, "summary JSON file (default stderr)");
    sim_cmd->add_option("--z-path-out", z_path_out, "also write one Z path (t,Y,Z,accrued) to this CSV");
    sim_cmd->add_option("--z-horizon", z_horizon, "horizon of the exported Z path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve_cmd) {
            const RunConfig cfg = load(solve_f);
            const auto j = cmd_solve(cfg);
            with_output(solve_f.out_path, [&](std::ostream& o) { o << j.dump(2) << "\n"; });
            return kExitOk;
        }
        if (*verify_cmd) {
            RunConfig cfg = load(verify_f);
            if (verify_paths) cfg.paths = *verify_paths;
            const VerifyReport rep = cmd_verify(cfg);
            with_output(verify_f.out_path, [&](std::ostream& o) { o << verify_json(rep, cfg).dump(2) << "\n"; });
            for (const auto& c : rep.checks)
                std::cerr << (c.skipped ? "SKIP " : c.pass ? "PASS " : "FAIL ") << c.name << "\n";
            return rep.all_pass() ? kExitOk : kExitVerification;
        }
        if (*sweep_cmd) {
            RunConfig cfg = load(sweep_f);
            if (!axis.empty()) cfg.sweep_axis = axis;
            if (sweep_cmd->count("--grid") > 0) apply_setting(cfg, "sweep_grid", grid);
            const auto rows = run_sweep(cfg);
            with_output(sweep_f.out_path, [&](std::ostream& o) { write_sweep_csv(o, cfg, rows); });
            return kExitOk;
        }
        if (*sim_cmd) {
            RunConfig cfg = load(sim_f);
            if (!line.empty()) cfg.line = line;
            const auto res = cmd_simulate(cfg);
            const auto params = validate(cfg).params;
            with_output(sim_f.out_path, [&](std::ostream& o) { write_ensemble_csv(o, params, res.runs); });
            if (summary_path.empty()) {
                std::cerr << res.summary.dump(2) << "\n";
            } else {
                std::ofstream s(summary_path);
                s << res.summary.dump(2) << "\n";
            }
            if (!z_path_out.empty()) {
                std::ofstream z(z_path_out);
                write_z_path_csv(z, cfg, z_horizon);
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        print_list("config error:", e.problems());
        return kExitConfig;
    } catch (const InvalidModel& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const AssumptionViolation& e) {
        print_list("assumption violated:", e.violations());
        return kExitAssumption;
    } catch (const ResourceCapExceeded& e) {
        std::cerr << "resource cap: " << e.what() << "\n";
        return kExitResourceCap;
    } catch (const HorizonExceeded& e) {
        std::cerr << "resource cap: " << e.what() << "\n";
        return kExitResourceCap;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
