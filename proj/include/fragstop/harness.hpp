#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fragstop/errors.hpp"
#include "fragstop/expfun.hpp"
#include "fragstop/fragsim.hpp"
#include "fragstop/levy.hpp"
#include "fragstop/stopsolve.hpp"

namespace fragstop {

inline constexpr const char* kSchemaVersion = "fragstop-output/1";

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitAssumption = 3,
    kExitVerification = 4,
    kExitResourceCap = 5,
};

/// Everything a command needs. Keys of the flat config file map 1:1 onto
/// these fields (see `config_keys`).
struct RunConfig {
    std::string family = "uniform";  ///< none | uniform | point | beta
    double rate = 1.0;
    double split = 0.5;  ///< point family
    double shape = 1.0;  ///< beta family
    double gamma = 1.0;
    double theta = 1.0;
    double q = 1.0;
    double c = 0.5;
    bool allow_q_zero = false;

    std::size_t samples = kDefaultSampleSize;
    double rel_tol = kDefaultRelTol;
    std::uint64_t seed = 20240601;
    unsigned workers = 0;
    std::size_t paths = 100'000;
    std::size_t runs = 10'000;

    std::string line = "optimal";  ///< optimal | fixed:<t> | mass:<a>
    bool literal_theorem_statistic = false;
    double horizon = 1e3;
    double dust_floor = 1e-12;
    std::size_t block_cap = 1'000'000;

    double b_star_corruption = 1.0;  ///< test hook: multiplies the solved b*

    std::string sweep_axis = "q";
    std::vector<double> sweep_grid;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto ws = [](unsigned char ch) { return std::isspace(ch) != 0; };
    while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && ws(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": not a number: '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(key + ": trailing characters in '" + v + "'");
    return x;
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& v) {
    T x{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError(key + ": not a nonnegative integer: '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(key, item));
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"family", [](RunConfig& c, const std::string& v) { c.family = v; }},
        {"rate", [](RunConfig& c, const std::string& v) { c.rate = parse_double("rate", v); }},
        {"split", [](RunConfig& c, const std::string& v) { c.split = parse_double("split", v); }},
        {"shape", [](RunConfig& c, const std::string& v) { c.shape = parse_double("shape", v); }},
        {"gamma", [](RunConfig& c, const std::string& v) { c.gamma = parse_double("gamma", v); }},
        {"theta", [](RunConfig& c, const std::string& v) { c.theta = parse_double("theta", v); }},
        {"q", [](RunConfig& c, const std::string& v) { c.q = parse_double("q", v); }},
        {"c", [](RunConfig& c, const std::string& v) { c.c = parse_double("c", v); }},
        {"allow_q_zero", [](RunConfig& c, const std::string& v) { c.allow_q_zero = parse_bool("allow_q_zero", v); }},
        {"samples", [](RunConfig& c, const std::string& v) { c.samples = parse_unsigned<std::size_t>("samples", v); }},
        {"rel_tol", [](RunConfig& c, const std::string& v) { c.rel_tol = parse_double("rel_tol", v); }},
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_unsigned<std::uint64_t>("seed", v); }},
        {"workers", [](RunConfig& c, const std::string& v) { c.workers = parse_unsigned<unsigned>("workers", v); }},
        {"paths", [](RunConfig& c, const std::string& v) { c.paths = parse_unsigned<std::size_t>("paths", v); }},
        {"runs", [](RunConfig& c, const std::string& v) { c.runs = parse_unsigned<std::size_t>("runs", v); }},
        {"line", [](RunConfig& c, const std::string& v) { c.line = v; }},
        {"literal_theorem_statistic",
         [](RunConfig& c, const std::string& v) {
             c.literal_theorem_statistic = parse_bool("literal_theorem_statistic", v);
         }},
        {"horizon", [](RunConfig& c, const std::string& v) { c.horizon = parse_double("horizon", v); }},
        {"dust_floor", [](RunConfig& c, const std::string& v) { c.dust_floor = parse_double("dust_floor", v); }},
        {"block_cap",
         [](RunConfig& c, const std::string& v) { c.block_cap = parse_unsigned<std::size_t>("block_cap", v); }},
        {"b_star_corruption",
         [](RunConfig& c, const std::string& v) { c.b_star_corruption = parse_double("b_star_corruption", v); }},
        {"sweep_axis", [](RunConfig& c, const std::string& v) { c.sweep_axis = v; }},
        {"sweep_grid", [](RunConfig& c, const std::string& v) { c.sweep_grid = parse_list("sweep_grid", v); }},
    };
    return table;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : detail::setters()) out.push_back(k);
    return out;
}

/// Set one key; unknown keys and malformed values throw ConfigError.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = detail::setters();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown key '" + key + "'");
    it->second(cfg, value);
}

/// Flat `key = value` file; `#` starts a comment. Every problem in the file
/// is collected before throwing.
inline RunConfig parse_config(std::istream& in, RunConfig cfg = {}) {
    std::vector<std::string> problems;
    std::map<std::string, int> seen;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        const std::string key = detail::trim(text.substr(0, eq));
        const std::string value = detail::trim(text.substr(eq + 1));
        if (const auto s = seen.find(key); s != seen.end()) {
            problems.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "' (first on line " +
                               std::to_string(s->second) + ")");
            continue;
        }
        seen[key] = lineno;
        try {
            apply_setting(cfg, key, value);
        } catch (const ConfigError& e) {
            for (const auto& p : e.problems()) problems.push_back("line " + std::to_string(lineno) + ": " + p);
        }
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cfg;
}

inline RunConfig parse_config_string(const std::string& text, RunConfig cfg = {}) {
    std::istringstream in(text);
    return parse_config(in, std::move(cfg));
}

/// Stopping line named by `cfg.line`, with `b_star` filled in for "optimal".
inline StoppingLineSpec parse_line(const RunConfig& cfg, double b_star = 0.0) {
    const std::string& s = cfg.line;
    if (s == "optimal") return StoppingLineSpec::optimal(b_star, cfg.literal_theorem_statistic);
    const auto colon = s.find(':');
    if (colon != std::string::npos) {
        const std::string kind = s.substr(0, colon);
        const double v = detail::parse_double("line", s.substr(colon + 1));
        if (kind == "fixed") {
            if (!(v >= 0.0)) throw ConfigError("line fixed:<t> needs t >= 0");
            return StoppingLineSpec::fixed_time(v);
        }
        if (kind == "mass") {
            if (!(v > 0.0 && v <= 1.0)) throw ConfigError("line mass:<a> needs a in (0, 1]");
            return StoppingLineSpec::mass_below(v);
        }
    }
    throw ConfigError("line must be optimal, fixed:<t> or mass:<a>, got '" + s + "'");
}

struct Problem {
    DislocationModel model = DislocationModel::none();
    ModelParams params;
};

/// Build the model and parameters. Malformed values raise ConfigError,
/// failed modelling assumptions raise AssumptionViolation; each lists
/// every problem found.
inline Problem validate(const RunConfig& cfg) {
    std::vector<std::string> problems;
    std::optional<DislocationModel> model;
    try {
        if (cfg.family == "none") model = DislocationModel::none();
        else if (cfg.family == "uniform") model = DislocationModel::uniform(cfg.rate);
        else if (cfg.family == "point") model = DislocationModel::point(cfg.rate, cfg.split);
        else if (cfg.family == "beta") model = DislocationModel::beta(cfg.rate, cfg.shape);
        else problems.push_back("family must be none, uniform, point or beta, got '" + cfg.family + "'");
    } catch (const InvalidModel& e) {
        problems.push_back(e.what());
    }
    if (cfg.samples < 2) problems.push_back("samples must be at least 2");
    if (!(cfg.rel_tol > 0.0 && cfg.rel_tol < 1.0)) problems.push_back("rel_tol must lie in (0, 1)");
    if (!(cfg.horizon > 0.0)) problems.push_back("horizon must be positive");
    if (!(cfg.dust_floor > 0.0 && cfg.dust_floor < 1.0)) problems.push_back("dust_floor must lie in (0, 1)");
    if (cfg.block_cap == 0) problems.push_back("block_cap must be positive");
    if (!(cfg.b_star_corruption > 0.0)) problems.push_back("b_star_corruption must be positive");
    try {
        (void)parse_line(cfg, 1.0);
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) problems.push_back(p);
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
    Problem p;
    p.model = *model;
    p.params = make_params(p.model, cfg.gamma, cfg.theta, cfg.q, cfg.c, cfg.allow_q_zero);
    return p;
}

// ---------------------------------------------------------------------------
// JSON helpers

inline nlohmann::json model_json(const DislocationModel& m, const RunConfig& cfg) {
    nlohmann::json j;
    j["family"] = m.family_name();
    if (!m.degenerate()) j["rate"] = m.rate();
    if (cfg.family == "point") j["split"] = cfg.split;
    if (cfg.family == "beta") j["shape"] = cfg.shape;
    j["phi_prime0"] = phi_prime0(m);
    return j;
}

inline nlohmann::json params_json(const ModelParams& p) {
    nlohmann::json j;
    j["gamma"] = p.gamma;
    j["theta"] = p.theta;
    j["q"] = p.q;
    j["c"] = p.c;
    j["lambda"] = p.lambda;
    j["kappa"] = p.kappa;
    if (std::isfinite(p.p_lower)) j["p_lower"] = p.p_lower;
    else j["p_lower"] = "-inf";
    return j;
}

inline nlohmann::json estimate_json(const MomentEstimate& e) {
    return {{"value", e.value}, {"std_error", e.std_error}, {"n", e.n_samples}};
}

// ---------------------------------------------------------------------------
// solve

inline const std::vector<double>& generator_grid() {
    static const std::vector<double> g = {0.2, 0.5, 0.9, 2.0};
    return g;
}

struct Solved {
    Problem problem;
    SharedSample sample;
    SolverResult result;
};

inline Solved solve(const RunConfig& cfg) {
    Solved s;
    s.problem = validate(cfg);
    s.sample = build_shared_sample(s.problem.params, s.problem.model, cfg.samples, cfg.seed, cfg.rel_tol, cfg.workers);
    SolveOptions opt;
    opt.b_star_factor = cfg.b_star_corruption;
    opt.generator_multiples = generator_grid();
    s.result = solve_b_star(s.problem.params, s.problem.model, s.sample, opt);
    return s;
}

inline nlohmann::json solver_json(const Solved& s, const RunConfig& cfg) {
    const auto& r = s.result;
    nlohmann::json j;
    j["schema"] = kSchemaVersion;
    j["command"] = "solve";
    j["model"] = model_json(s.problem.model, cfg);
    j["params"] = params_json(s.problem.params);
    j["b_star"] = r.b_star;
    j["kappa"] = r.kappa;
    j["order"] = r.order;
    j["value_at_c"] = r.value_at_c;
    j["f_at_b_star"] = r.f_at_b_star;
    j["sample"] = {{"seed", r.sample_meta.seed}, {"n", r.sample_meta.n}, {"rel_tol", r.sample_meta.rel_tol}};
    if (cfg.b_star_corruption != 1.0) j["b_star_corruption"] = cfg.b_star_corruption;
    nlohmann::json d;
    d["value_gap"] = r.diagnostics.value_gap;
    d["slope_gap"] = r.diagnostics.slope_gap;
    d["slope_std_error"] = r.diagnostics.slope_std_error;
    d["top_order_unstable"] = r.diagnostics.top_order_unstable;
    d["generator"] = nlohmann::json::array();
    for (const auto& g : r.diagnostics.generator)
        d["generator"].push_back({{"x", g.x},
                                  {"residual", g.residual.value},
                                  {"std_error", g.residual.std_error},
                                  {"tolerance", g.tolerance},
                                  {"stopping_region", g.stopping_region},
                                  {"pass", g.pass}});
    d["warnings"] = r.diagnostics.warnings;
    j["diagnostics"] = d;
    return j;
}

inline nlohmann::json cmd_solve(const RunConfig& cfg) { return solver_json(solve(cfg), cfg); }

// ---------------------------------------------------------------------------
// verify

struct CheckLine {
    std::string name;
    double estimate = 0.0;
    double target = 0.0;
    double std_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    bool skipped = false;
    std::string note;
};

struct VerifyReport {
    double b_star = 0.0;
    double value_at_c = 0.0;
    std::vector<CheckLine> checks;

    bool all_pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckLine& c) { return c.pass || c.skipped; });
    }

    const CheckLine* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

inline constexpr double kSlopeGapTolerance = 0.02;
inline constexpr double kValueGapRelTolerance = 1e-6;
inline constexpr std::size_t kSweepPoints = 25;

/// 25 evenly spaced thresholds on [0.5·b, 1.5·b].
inline std::vector<double> sweep_grid_around(double b) {
    std::vector<double> g(kSweepPoints);
    for (std::size_t i = 0; i < kSweepPoints; ++i)
        g[i] = b * (0.5 + static_cast<double>(i) / static_cast<double>(kSweepPoints - 1));
    return g;
}

/// Threshold sweep check: the best grid threshold lies within one grid step
/// of b.
inline CheckLine sweep_check(const ModelParams& params, const DislocationModel& model, double b, std::size_t n_paths,
                             std::uint64_t seed, unsigned workers) {
    CheckLine line;
    line.name = "threshold_sweep";
    const auto grid = sweep_grid_around(b);
    const double step = grid[1] - grid[0];
    const SweepResult sw = threshold_sweep(params, model, grid, n_paths, seed, workers);
    line.estimate = sw.thresholds[sw.argmax];
    line.target = b;
    line.std_error = sw.payoff[sw.argmax].std_error;
    line.tolerance = step * (1.0 + 1e-9);
    line.pass = std::abs(line.estimate - line.target) <= line.tolerance;
    line.note = "argmax of E[exp(-lambda tau_b) b] over 25 thresholds in [0.5 b*, 1.5 b*]";
    return line;
}

struct FragChecks {
    CheckLine value;
    CheckLine dominance_low;
    CheckLine dominance_high;
    MomentEstimate payoff;
};

/// Ensemble payoff of the optimal line against V*(c), and dominance over
/// 0.8·b and 1.25·b with paired runs.
inline FragChecks optimal_line_checks(const ModelParams& params, const DislocationModel& model, double b,
                                 double value_at_c, double value_std_error, std::size_t n_runs, std::uint64_t seed, unsigned workers,
                                 const FragOptions& fo, bool literal) {
    FragChecks out;
    const auto at = payoff_ensemble(model, params, StoppingLineSpec::optimal(b, literal), n_runs, seed, workers, fo);
    const auto lo = payoff_ensemble(model, params, StoppingLineSpec::optimal(0.8 * b, literal), n_runs, seed, workers, fo);
    const auto hi =
        payoff_ensemble(model, params, StoppingLineSpec::optimal(1.25 * b, literal), n_runs, seed, workers, fo);
    out.payoff = mean_estimate(at);
    out.value.name = "optimal_line_value";
    out.value.estimate = out.payoff.value;
    out.value.target = value_at_c;
    out.value.std_error = combine_se(out.payoff.std_error, value_std_error);
    out.value.tolerance = kSigmaLevel * out.value.std_error + 1e-9 * std::abs(value_at_c);
    out.value.pass = std::abs(out.value.estimate - out.value.target) <= out.value.tolerance;
    out.value.note = "mean fragmentation payoff under the optimal line vs V*(c)";
    auto dominance = [&](const std::vector<double>& other, const char* name, const char* note) {
        CheckLine c;
        c.name = name;
        const MomentEstimate d = paired_difference(at, other);
        c.estimate = d.value;
        c.std_error = d.std_error;
        c.tolerance = kSigmaLevel * d.std_error;
        c.pass = d.value > c.tolerance;
        c.note = note;
        return c;
    };
    out.dominance_low = dominance(lo, "dominance_0.8", "paired payoff(b*) - payoff(0.8 b*) > 3 sigma");
    out.dominance_high = dominance(hi, "dominance_1.25", "paired payoff(b*) - payoff(1.25 b*) > 3 sigma");
    return out;
}

inline VerifyReport cmd_verify(const RunConfig& cfg) {
    const Solved s = solve(cfg);
    const auto& model = s.problem.model;
    const auto& params = s.problem.params;
    const double b = s.result.b_star;
    VerifyReport rep;
    rep.b_star = b;
    rep.value_at_c = s.result.value_at_c;
    const StreamPlan plan(cfg.seed);
    auto sub = [&](const char* label) { return plan.key(label, 0); };

    {
        CheckLine c;
        c.name = "value_pasting";
        c.estimate = s.result.diagnostics.value_gap;
        c.tolerance = kValueGapRelTolerance * b;
        c.pass = std::abs(c.estimate) <= c.tolerance;
        c.note = "V~(b*) - b*";
        rep.checks.push_back(c);
    }
    {
        CheckLine c;
        c.name = "smooth_pasting";
        c.estimate = s.result.diagnostics.slope_gap;
        c.std_error = s.result.diagnostics.slope_std_error;
        c.tolerance = kSlopeGapTolerance;
        c.pass = std::abs(c.estimate) <= c.tolerance;
        c.note = "V~'(b*) - 1";
        rep.checks.push_back(c);
    }
    for (const auto& g : s.result.diagnostics.generator) {
        CheckLine c;
        std::ostringstream nm;
        nm << "generator_x=" << g.x / b << "b*";
        c.name = nm.str();
        c.estimate = g.residual.value;
        c.std_error = g.residual.std_error;
        c.tolerance = g.tolerance;
        c.pass = g.pass;
        c.note = g.stopping_region ? "(L - lambda)V*(x) <= tol" : "|(L - lambda)V~(x)| <= tol";
        rep.checks.push_back(c);
    }
    for (double mult : {1.5, 2.0}) {
        const LaplaceCheck lc =
            first_passage_laplace_check(params, model, s.sample, mult * params.c, cfg.paths, sub("verify-laplace"), cfg.workers);
        CheckLine c;
        c.name = mult == 1.5 ? "laplace_b=1.5c" : "laplace_b=2c";
        c.estimate = lc.mc.value;
        c.target = lc.analytic.value;
        c.std_error = lc.combined_std_error;
        c.tolerance = kSigmaLevel * lc.combined_std_error + 1e-9 * std::abs(lc.analytic.value);
        c.pass = lc.pass;
        if (lc.missed > 0) c.note = std::to_string(lc.missed) + " paths hit the safety horizon";
        rep.checks.push_back(c);
    }
    {
        const std::vector<double> times = {0.5, 1.0, 2.0};
        const auto mc = martingale_check(params, model, s.sample, b, times, cfg.paths, sub("verify-mart"), cfg.workers);
        for (const auto& t : mc) {
            CheckLine c;
            std::ostringstream nm;
            nm << "martingale_t=" << t.t;
            c.name = nm.str();
            c.estimate = t.estimate.value;
            c.target = t.target;
            c.std_error = t.estimate.std_error;
            c.tolerance = t.tolerance;
            c.pass = t.pass;
            rep.checks.push_back(c);
        }
    }
    {
        const std::vector<double> times = {0.0, 0.5, 1.0, 2.0};
        const auto sm = supermartingale_check(params, model, s.sample, b, times, cfg.paths, sub("verify-super"), cfg.workers);
        for (std::size_t w = 0; w < sm.increments.size(); ++w) {
            CheckLine c;
            std::ostringstream nm;
            nm << "supermartingale_" << times[w] << "->" << times[w + 1];
            c.name = nm.str();
            c.estimate = sm.increments[w].value;
            c.std_error = sm.increments[w].std_error;
            c.tolerance = kSigmaLevel * sm.increments[w].std_error + kTableRelSlack * std::abs(sm.points.front().target);
            c.pass = sm.increment_pass[w];
            c.note = "paired increment of exp(-lambda t)V*(Z_t) <= tol";
            rep.checks.push_back(c);
        }
    }
    if (params.c >= b) {
        CheckLine c;
        c.name = "threshold_sweep";
        c.skipped = true;
        c.note = "c >= b*: every threshold up to c stops at once, so the sweep has no interior maximum";
        rep.checks.push_back(c);
    } else {
        rep.checks.push_back(sweep_check(params, model, b, cfg.paths, sub("verify-sweep"), cfg.workers));
    }

    if (model.degenerate()) {
        for (const char* name : {"many_to_one_identity", "many_to_one_square", "many_to_one_line", "optimal_line_value",
                                 "dominance_0.8", "dominance_1.25"}) {
            CheckLine c;
            c.name = name;
            c.skipped = true;
            c.note = "no fragmentation";
            rep.checks.push_back(c);
        }
        return rep;
    }
    for (TestFunction f : {TestFunction::identity, TestFunction::square}) {
        const auto r = many_to_one_fixed_time(model, params, f, 1.0, cfg.runs, sub("verify-fixed"), cfg.workers);
        CheckLine c;
        c.name = f == TestFunction::identity ? "many_to_one_identity" : "many_to_one_square";
        c.estimate = r.lhs.value;
        c.target = *r.exact;
        c.std_error = r.lhs.std_error;
        c.tolerance = kSigmaLevel * r.lhs.std_error + 1e-12;
        c.pass = r.pass;
        c.note = "t = 1, target exp(-Phi(p))";
        rep.checks.push_back(c);
    }
    {
        const auto r = many_to_one_stopping_line(model, params, 0.1, cfg.runs, sub("verify-line"), cfg.workers);
        CheckLine c;
        c.name = "many_to_one_line";
        c.estimate = r.lhs.value;
        c.target = r.rhs.value;
        c.std_error = r.combined_std_error;
        c.tolerance = kSigmaLevel * r.combined_std_error + 1e-12;
        c.pass = r.pass;
        c.note = "mass below 0.1, f = exp(-q l) min(A, 10)";
        rep.checks.push_back(c);
    }
    if (params.c >= b) {
        for (const char* name : {"optimal_line_value", "dominance_0.8", "dominance_1.25"}) {
            CheckLine c;
            c.name = name;
            c.skipped = true;
            c.note = "c >= b*: the optimal line freezes at time 0";
            rep.checks.push_back(c);
        }
        return rep;
    }
    FragOptions fo;
    fo.dust_floor = cfg.dust_floor;
    fo.horizon = cfg.horizon;
    fo.block_cap = cfg.block_cap;
    const FragChecks fc = optimal_line_checks(params, model, b, s.result.value_at_c,
                                         value_tilde_std_error(s.sample, b, params.c), cfg.runs, sub("verify-frag"),
                                         cfg.workers, fo, cfg.literal_theorem_statistic);
    rep.checks.push_back(fc.value);
    rep.checks.push_back(fc.dominance_low);
    rep.checks.push_back(fc.dominance_high);
    return rep;
}

inline nlohmann::json verify_json(const VerifyReport& rep, const RunConfig& cfg) {
    nlohmann::json j;
    j["schema"] = kSchemaVersion;
    j["command"] = "verify";
    j["seed"] = cfg.seed;
    j["b_star"] = rep.b_star;
    j["value_at_c"] = rep.value_at_c;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : rep.checks) {
        nlohmann::json e = {{"name", c.name}, {"status", c.skipped ? "skipped" : (c.pass ? "pass" : "fail")}};
        if (!c.skipped) {
            e["estimate"] = c.estimate;
            e["target"] = c.target;
            e["std_error"] = c.std_error;
            e["tolerance"] = c.tolerance;
        }
        if (!c.note.empty()) e["note"] = c.note;
        j["checks"].push_back(e);
    }
    j["all_pass"] = rep.all_pass();
    return j;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
    double grid_point = 0.0;
    double b_star = 0.0;
    double value_at_c = 0.0;
};

inline void set_axis(RunConfig& cfg, const std::string& axis, double v) {
    if (axis == "q") cfg.q = v;
    else if (axis == "c") cfg.c = v;
    else if (axis == "gamma") cfg.gamma = v;
    else if (axis == "theta") cfg.theta = v;
    else if (axis == "rate") cfg.rate = v;
    else throw ConfigError("sweep_axis must be q, c, gamma, theta or rate, got '" + axis + "'");
}

/// One solve per grid point, each on its own shared sample drawn with the
/// configured seed.
inline std::vector<SweepRow> run_sweep(const RunConfig& cfg) {
    RunConfig probe = cfg;
    set_axis(probe, cfg.sweep_axis, 1.0);  // rejects an unknown axis even for an empty grid
    std::vector<SweepRow> rows;
    for (double v : cfg.sweep_grid) {
        RunConfig point = cfg;
        set_axis(point, cfg.sweep_axis, v);
        const Problem p = validate(point);
        const SharedSample sample = build_shared_sample(p.params, p.model, point.samples, point.seed, point.rel_tol,
                                                        point.workers);
        SolveOptions opt;
        opt.b_star_factor = point.b_star_corruption;
        const SolverResult r = solve_b_star(p.params, p.model, sample, opt);
        rows.push_back({v, r.b_star, r.value_at_c});
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& out, const RunConfig& cfg, const std::vector<SweepRow>& rows) {
    out << "# schema=" << kSchemaVersion << " command=sweep axis=" << cfg.sweep_axis << " seed=" << cfg.seed << "\n";
    out << "grid_point,b_star,value_at_c\n";
    out.precision(17);
    for (const auto& r : rows) out << r.grid_point << ',' << r.b_star << ',' << r.value_at_c << '\n';
    if (rows.size() >= 2) {
        bool up = true;
        bool down = true;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            up = up && rows[i].b_star >= rows[i - 1].b_star;
            down = down && rows[i].b_star <= rows[i - 1].b_star;
        }
        out << "# b_star " << (up && down ? "constant" : up ? "nondecreasing" : down ? "nonincreasing" : "non-monotone")
            << " along " << cfg.sweep_axis << "\n";
    }
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOutput {
    nlohmann::json summary;
    std::vector<std::vector<Block>> runs;
};

inline SimulateOutput cmd_simulate(const RunConfig& cfg) {
    const Problem p = validate(cfg);
    if (p.model.degenerate()) throw ConfigError("simulate needs a fragmenting family (family = none has no splits)");
    std::optional<Solved> solved;
    double b = 0.0;
    if (cfg.line == "optimal") {
        solved = solve(cfg);
        b = solved->result.b_star;
    }
    const StoppingLineSpec spec = parse_line(cfg, b);
    FragOptions fo;
    fo.dust_floor = cfg.dust_floor;
    fo.horizon = cfg.horizon;
    fo.block_cap = cfg.block_cap;
    const StreamPlan plan(cfg.seed);
    const auto results = parallel_map(cfg.runs, cfg.workers, [&](std::size_t r) {
        return run_stopping_line(FragmentationState::initial(p.params, plan.key("frag", r)), p.model, p.params, spec,
                                 fo);
    });
    SimulateOutput out;
    std::vector<double> pay(cfg.runs);
    std::size_t dust = 0;
    std::size_t at_horizon = 0;
    for (std::size_t r = 0; r < cfg.runs; ++r) {
        pay[r] = payoff(results[r].state, p.params);
        dust += results[r].dust_frozen;
        at_horizon += results[r].horizon_frozen;
        out.runs.push_back(results[r].state.frozen);
    }
    const MomentEstimate est = mean_estimate(pay);
    nlohmann::json& j = out.summary;
    j["schema"] = kSchemaVersion;
    j["command"] = "simulate";
    j["model"] = model_json(p.model, cfg);
    j["params"] = params_json(p.params);
    j["line"] = cfg.line;
    j["literal_theorem_statistic"] = cfg.literal_theorem_statistic;
    if (solved) {
        j["b_star"] = b;
        j["value_at_c"] = solved->result.value_at_c;
    }
    j["seed"] = cfg.seed;
    j["runs"] = cfg.runs;
    j["mean_payoff"] = est.value;
    j["std_error"] = est.std_error;
    j["dust_frozen"] = dust;
    j["horizon_frozen"] = at_horizon;
    if (dust > 0) j["warnings"].push_back("dust floor force-froze " + std::to_string(dust) + " blocks; payoff biased");
    if (at_horizon > 0)
        j["warnings"].push_back("horizon reached by " + std::to_string(at_horizon) + " blocks; partial result");
    return out;
}

inline void write_ensemble_csv(std::ostream& out, const ModelParams& params, const std::vector<std::vector<Block>>& runs) {
    out << "# schema=" << kSchemaVersion << " command=simulate\n";
    out << "run,mass,accrued,freeze_time,payoff_contribution\n";
    out.precision(17);
    for (std::size_t r = 0; r < runs.size(); ++r)
        for (const auto& b : runs[r])
            out << r << ',' << b.mass << ',' << b.accrued << ',' << *b.frozen_at << ','
                << payoff_contribution(b, params) << '\n';
}

/// Event-boundary states of one Z^c path on [0, horizon].
inline void write_z_path_csv(std::ostream& out, const RunConfig& cfg, double horizon) {
    const Problem p = validate(cfg);
    const StreamPlan plan(cfg.seed);
    Rng g = plan.stream("zpath", 0);
    const auto path = simulate_Z_path(p.params, p.model, horizon, g);
    out << "# schema=" << kSchemaVersion << " command=simulate z-path\n";
    out << "t,Y,Z,accrued\n";
    out.precision(17);
    for (const auto& s : path) out << s.t << ',' << s.y << ',' << s.z << ',' << s.accrued << '\n';
}

}  // namespace fragstop
