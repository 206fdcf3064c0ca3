// End-to-end acceptance run: one PASS/FAIL line per criterion, exit 1 if
// any fails. Statistical checks use the reference configuration.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fragstop/fragstop.hpp"

using namespace fragstop;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

RunConfig reference_config() {
    std::ifstream in(std::string(FRAGSTOP_CONFIG_DIR) + "/reference.conf");
    if (!in) throw std::runtime_error("cannot open reference.conf");
    return parse_config(in);
}

std::uint64_t sub(const RunConfig& cfg, const char* label) { return StreamPlan(cfg.seed).key(label, 0); }

// 1: ν ≡ 0 with γ = θ = q = 1, c = 0.5
Outcome deterministic_suite() {
    const auto m = DislocationModel::none();
    const auto p = make_params(m, 1, 1, 1, 0.5);
    const auto s = build_shared_sample(p, m, 64, 1);
    double worst = std::abs(p.kappa - 2.0);
    for (double i : s.draws) worst = std::max(worst, std::abs(i - 1.0));
    for (double b : {0.1, 0.5, 1.0, 2.0, 10.0}) worst = std::max(worst, std::abs(f_of_b(s, b) - (1 + 1 / b)) / (1 + 1 / b));
    const auto r = solve_b_star(p, m, s);
    worst = std::max(worst, std::abs(r.b_star - 1.0));
    const double b = r.b_star;
    for (double x : {0.05, 0.5, 0.9, 1.5, 3.0}) {
        const double closed = x >= 1.0 ? x : std::pow((x + 1) / 2, 2.0);
        worst = std::max(worst, std::abs(value_star(p, s, b, x) - closed));
        if (x < 1.0) worst = std::max(worst, std::abs(value_tilde(p, s, b, x) - closed));
    }
    for (double bb : {0.75, 1.0, 2.0}) {
        const auto lc = first_passage_laplace_check(p, m, s, bb, 16, 2);
        const double closed = std::pow(1.5 / (bb + 1), 2.0);
        worst = std::max({worst, std::abs(lc.mc.value - closed), std::abs(lc.analytic.value - closed)});
    }
    return {worst <= 1e-8, fmt("max abs error %.2e", worst)};
}

// 2: closed-form exponents and the reference κ
Outcome exponent_suite(const ModelParams& ref) {
    double worst = 0.0;
    for (double rho : {0.5, 1.0, 2.0}) {
        const auto u = DislocationModel::uniform(rho);
        const auto h = DislocationModel::point(rho, 0.5);
        for (int i = 1; i <= 50; ++i) {
            const double p = 0.1 * i;
            worst = std::max(worst, std::abs(phi(u, p) - rho * p / (p + 2)));
            worst = std::max(worst, std::abs(phi(h, p) - rho * (1 - std::pow(2.0, -p))));
        }
    }
    const double dk = std::abs(ref.kappa - (1 + std::sqrt(17.0)) / 2);
    return {worst <= 1e-12 && dk <= 1e-10, fmt("max Phi error %.2e, kappa error %.2e", worst, dk)};
}

// 3: Monte Carlo moments of I∞ against the recursion
Outcome moment_suite(const Solved& s) {
    const auto& p = s.problem.params;
    std::string d;
    bool ok = true;
    const int top = static_cast<int>(std::floor(p.kappa / p.gamma));
    for (int n = 1; n <= std::min(top, 2); ++n) {
        const auto e = estimate_moment(s.sample, 0.0, n);
        const double exact = moment_recursion(p, s.problem.model, n);
        ok = ok && std::abs(e.value - exact) <= kSigmaLevel * e.std_error;
        d += fmt("n=%d: %.5f vs %.5f (%.2f se) ", n, e.value, exact, (e.value - exact) / e.std_error);
    }
    return {ok, d + fmt("at %zu draws", s.sample.draws.size())};
}

// 4: first-passage Laplace transform
Outcome laplace_suite(const RunConfig& cfg, const Solved& s) {
    const auto& p = s.problem.params;
    bool ok = true;
    std::string d;
    for (double mult : {1.5, 2.0}) {
        const auto lc = first_passage_laplace_check(p, s.problem.model, s.sample, mult * p.c, cfg.paths,
                                                    sub(cfg, "verify-laplace"), cfg.workers);
        ok = ok && lc.pass && lc.missed == 0;
        d += fmt("b=%.1fc: %.5f vs %.5f (%.2f se) ", mult, lc.mc.value, lc.analytic.value,
                 (lc.mc.value - lc.analytic.value) / lc.combined_std_error);
    }
    return {ok, d};
}

// 5: brute-force threshold sweep
Outcome sweep_suite(const RunConfig& cfg, const Solved& s) {
    const auto line = sweep_check(s.problem.params, s.problem.model, s.result.b_star, cfg.paths,
                                  sub(cfg, "verify-sweep"), cfg.workers);
    return {line.pass, fmt("argmax %.4f vs b* %.4f, step %.4f", line.estimate, line.target, line.tolerance)};
}

// 6: martingale and supermartingale
Outcome martingale_suite(const RunConfig& cfg, const Solved& s) {
    const auto& p = s.problem.params;
    const double b = s.result.b_star;
    bool ok = true;
    std::string d = "z-scores";
    const std::vector<double> mt = {0.5, 1.0, 2.0};
    for (const auto& t : martingale_check(p, s.problem.model, s.sample, b, mt, cfg.paths, sub(cfg, "verify-mart"), cfg.workers)) {
        ok = ok && t.pass;
        d += fmt(" t=%g:%.2f", t.t, (t.estimate.value - t.target) / t.estimate.std_error);
    }
    const std::vector<double> st = {0.0, 0.5, 1.0, 2.0};
    const auto sm = supermartingale_check(p, s.problem.model, s.sample, b, st, cfg.paths, sub(cfg, "verify-super"), cfg.workers);
    ok = ok && sm.pass;
    d += "; increments";
    for (const auto& inc : sm.increments) d += fmt(" %.4f", inc.value);
    return {ok, d};
}

// 7: pasting at n and 4n draws, generator signs
Outcome pasting_suite(const Solved& s, const Solved& s4) {
    const auto& d1 = s.result.diagnostics;
    const auto& d4 = s4.result.diagnostics;
    const double b = s.result.b_star;
    bool ok = std::abs(d1.value_gap) <= kValueGapRelTolerance * b &&
              std::abs(d4.value_gap) <= kValueGapRelTolerance * s4.result.b_star;
    ok = ok && std::abs(d1.slope_gap) <= kSlopeGapTolerance && std::abs(d4.slope_gap) <= kSlopeGapTolerance;
    ok = ok && d4.slope_std_error < d1.slope_std_error;
    bool gen = !d1.generator.empty();
    for (const auto& g : d1.generator) gen = gen && g.pass;
    ok = ok && gen;
    return {ok, fmt("value gap %.1e, slope gap %.4f (se %.4f) -> %.4f (se %.4f) at 4x, generator %s", d1.value_gap,
                    d1.slope_gap, d1.slope_std_error, d4.slope_gap, d4.slope_std_error, gen ? "ok" : "fail")};
}

// 8: many-to-one at fixed time and on a stopping line
Outcome many_to_one_suite(const RunConfig& cfg, const Solved& s) {
    const auto& p = s.problem.params;
    const auto& m = s.problem.model;
    const auto id = many_to_one_fixed_time(m, p, TestFunction::identity, 1.0, cfg.runs, sub(cfg, "verify-fixed"), cfg.workers);
    const auto sq = many_to_one_fixed_time(m, p, TestFunction::square, 1.0, cfg.runs, sub(cfg, "verify-fixed"), cfg.workers);
    const auto ln = many_to_one_stopping_line(m, p, 0.1, cfg.runs, sub(cfg, "verify-line"), cfg.workers);
    return {id.pass && sq.pass && ln.pass,
            fmt("p=1: %.4f vs %.4f, p=2: %.4f vs %.4f, line: %.4f vs %.4f", id.lhs.value, *id.exact, sq.lhs.value,
                *sq.exact, ln.lhs.value, ln.rhs.value)};
}

// 9: optimal line against V*(c) and perturbed thresholds
Outcome optimal_line_suite(const RunConfig& cfg, const Solved& s) {
    const auto& p = s.problem.params;
    FragOptions fo;
    fo.dust_floor = cfg.dust_floor;
    fo.horizon = cfg.horizon;
    fo.block_cap = cfg.block_cap;
    const double b = s.result.b_star;
    const auto fc = optimal_line_checks(p, s.problem.model, b, s.result.value_at_c, value_tilde_std_error(s.sample, b, p.c),
                                   cfg.runs, sub(cfg, "verify-frag"), cfg.workers, fo, cfg.literal_theorem_statistic);
    return {fc.value.pass && fc.dominance_low.pass && fc.dominance_high.pass,
            fmt("payoff %.4f vs V*(c) %.4f (%.2f se); margins over 0.8b/1.25b %.2f se, %.2f se", fc.value.estimate,
                fc.value.target, (fc.value.estimate - fc.value.target) / fc.value.std_error,
                fc.dominance_low.estimate / fc.dominance_low.std_error,
                fc.dominance_high.estimate / fc.dominance_high.std_error)};
}

std::string sweep_csv(const RunConfig& cfg) {
    RunConfig c = cfg;
    c.sweep_axis = "q";
    c.sweep_grid = {0.8, 1.2};
    c.samples = 20000;
    std::ostringstream out;
    write_sweep_csv(out, c, run_sweep(c));
    return out.str();
}

struct Timed {
    Outcome outcome;
    double seconds = 0.0;
};

Timed timed(const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = f();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    return {o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
}

}  // namespace

int main() {
    const RunConfig cfg = reference_config();
    bool all = true;
    auto report = [&](int n, const Timed& t, double limit) {
        const bool pass = t.outcome.pass && t.seconds < limit;
        all = all && pass;
        std::printf("criterion %2d: %s  %s [%.1fs / %.0fs]\n", n, pass ? "PASS" : "FAIL", t.outcome.detail.c_str(),
                    t.seconds, limit);
        std::fflush(stdout);
    };

    report(1, timed(deterministic_suite), 1);
    Solved s;
    {
        const auto t0 = std::chrono::steady_clock::now();
        s = solve(cfg);
        const double build = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report(2, timed([&] { return exponent_suite(s.problem.params); }), 1);
        Timed t3 = timed([&] { return moment_suite(s); });
        t3.seconds += build;  // the shared sample is the Monte Carlo part
        report(3, t3, 30);
    }
    report(4, timed([&] { return laplace_suite(cfg, s); }), 60);
    report(5, timed([&] { return sweep_suite(cfg, s); }), 120);
    report(6, timed([&] { return martingale_suite(cfg, s); }), 120);
    report(7, timed([&] {
               RunConfig c4 = cfg;
               c4.samples = 4 * cfg.samples;
               return pasting_suite(solve(cfg), solve(c4));
           }),
           60);
    report(8, timed([&] { return many_to_one_suite(cfg, s); }), 120);
    report(9, timed([&] { return optimal_line_suite(cfg, s); }), 300);

    report(10, timed([&] {
               RunConfig bad = cfg;
               bad.b_star_corruption = 1.5;
               RunConfig bad4 = bad;
               bad4.samples = 4 * cfg.samples;
               const Solved sb = solve(bad);
               const Outcome c5 = sweep_suite(bad, sb);
               const Outcome c7 = pasting_suite(sb, solve(bad4));
               const Outcome c9 = optimal_line_suite(bad, sb);
               const bool control = !c5.pass && !c7.pass && !c9.pass;

               RunConfig other_workers = cfg;
               other_workers.workers = 3;
               const bool same_solve = cmd_solve(cfg).dump() == cmd_solve(cfg).dump() &&
                                       cmd_solve(cfg).dump() == cmd_solve(other_workers).dump();
               const bool same_verify = verify_json(cmd_verify(cfg), cfg).dump() == verify_json(cmd_verify(cfg), cfg).dump();
               const bool same_sweep = sweep_csv(cfg) == sweep_csv(cfg);
               RunConfig sim = cfg;
               sim.runs = 1000;
               const bool same_sim = cmd_simulate(sim).summary.dump() == cmd_simulate(sim).summary.dump();
               const bool determinism = same_solve && same_verify && same_sweep && same_sim;
               return Outcome{control && determinism,
                              fmt("x1.5 fails 5/7/9: %s/%s/%s; reruns identical: solve %s verify %s sweep %s simulate %s",
                                  c5.pass ? "no" : "yes", c7.pass ? "no" : "yes", c9.pass ? "no" : "yes",
                                  same_solve ? "yes" : "no", same_verify ? "yes" : "no", same_sweep ? "yes" : "no",
                                  same_sim ? "yes" : "no")};
           }),
           1800);
    return all ? 0 : 1;
}
