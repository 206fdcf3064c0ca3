#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fragstop/errors.hpp"
#include "fragstop/levy.hpp"
#include "fragstop/parallel.hpp"
#include "fragstop/pathsim.hpp"
#include "fragstop/rng.hpp"
#include "fragstop/stats.hpp"

namespace fragstop {

/// A fragment of the mass fragmentation.
struct Block {
    double mass = 1.0;
    /// ∫₀^t e^{−γθs}|B(s)|^{−γ} ds along the block's ancestry.
    double accrued = 0.0;
    /// ζ(t) = e^{γθt}|B(t)|^γ(accrued + c); equals Z^c along the tagged path.
    double zeta = 0.0;
    double born_at = 0.0;
    std::optional<double> frozen_at;
    bool tagged = false;  ///< contains index 1 (size-biased lineage)
    bool dust = false;    ///< force-frozen by the dust floor
    bool at_horizon = false;
    std::uint64_t key = 0;  ///< genealogical RNG stream of this block
};

struct FragmentationState {
    std::vector<Block> live;
    std::vector<Block> frozen;
    double t = 0.0;

    /// One unit-mass block at time 0 with ζ = c.
    static FragmentationState initial(const ModelParams& params, std::uint64_t key = 0) {
        FragmentationState s;
        Block b;
        b.zeta = params.c;
        b.tagged = true;
        b.key = key;
        s.live.push_back(b);
        return s;
    }

    double total_mass() const {
        double m = 0.0;
        for (const auto& b : live) m += b.mass;
        for (const auto& b : frozen) m += b.mass;
        return m;
    }
};

/// Per-block freezing rule. Each rule is a stopping time for the block's own
/// history, and children inherit the parent's state, so the family is a
/// stopping line.
struct StoppingLineSpec {
    enum class Kind { FixedTime, MassBelow, OptimalStatistic };
    Kind kind = Kind::FixedTime;
    double value = 0.0;
    /// OptimalStatistic only: use (accrued + c)|B|^γ, without e^{γθt}.
    bool literal_statistic = false;

    static StoppingLineSpec fixed_time(double t) { return {Kind::FixedTime, t, false}; }
    static StoppingLineSpec mass_below(double a) { return {Kind::MassBelow, a, false}; }
    static StoppingLineSpec optimal(double b_star, bool literal = false) {
        return {Kind::OptimalStatistic, b_star, literal};
    }
};

struct FragOptions {
    double dust_floor = 1e-12;
    double horizon = 1e3;
    std::size_t block_cap = 1'000'000;
    bool record_tagged = false;
};

namespace detail {

inline void require_fragmentation(const DislocationModel& model) {
    if (model.degenerate()) throw InvalidModel("fragsim requires a nontrivial dislocation measure");
}

/// Carry a block from time t0 to t0 + dt without splitting.
inline void advance_block(Block& b, double t0, double dt, const ModelParams& p) {
    const double gt = p.gamma * p.theta;
    b.accrued += std::pow(b.mass, -p.gamma) * std::exp(-gt * t0) * (-std::expm1(-gt * dt)) / gt;
    b.zeta = z_flow(b.zeta, dt, gt);
}

inline std::pair<Block, Block> split_block(const Block& parent, double s, double pick_u, const ModelParams& p) {
    Block a = parent;
    Block b = parent;
    a.mass = parent.mass * s;
    b.mass = parent.mass * (1.0 - s);
    a.zeta = parent.zeta * std::pow(s, p.gamma);
    b.zeta = parent.zeta * std::pow(1.0 - s, p.gamma);
    a.key = derive_key(parent.key, 1);
    b.key = derive_key(parent.key, 2);
    a.tagged = parent.tagged && pick_u < s;
    b.tagged = parent.tagged && !(pick_u < s);
    return {a, b};
}

}  // namespace detail

/// Global event step: after an Exp(ρ·|live|) holding time a uniformly chosen
/// live block splits. Children inherit accrued; ζ scales by s^γ, (1−s)^γ.
template <class G>
FragmentationState step(FragmentationState state, const DislocationModel& model, const ModelParams& params, G& g) {
    detail::require_fragmentation(model);
    if (state.live.empty()) throw DomainError("step: no live blocks");
    const double dt = exponential(g, model.rate() * static_cast<double>(state.live.size()));
    for (auto& b : state.live) detail::advance_block(b, state.t, dt, params);
    state.t += dt;
    const std::size_t idx = std::min(state.live.size() - 1,
                                     static_cast<std::size_t>(uniform01(g) * static_cast<double>(state.live.size())));
    const double s = model.sample_split(g);
    const double u = uniform01(g);
    auto [a, b] = detail::split_block(state.live[idx], s, u, params);
    a.born_at = b.born_at = state.t;
    state.live[idx] = a;
    state.live.push_back(b);
    return state;
}

/// Apply `step` until the next event would fall after t_end, then carry all
/// live blocks to t_end.
template <class G>
FragmentationState evolve_to(FragmentationState state, const DislocationModel& model, const ModelParams& params,
                             double t_end, G& g) {
    detail::require_fragmentation(model);
    for (;;) {
        const double dt = exponential(g, model.rate() * static_cast<double>(state.live.size()));
        if (state.t + dt > t_end) break;
        for (auto& b : state.live) detail::advance_block(b, state.t, dt, params);
        state.t += dt;
        const std::size_t idx = std::min(state.live.size() - 1,
                                         static_cast<std::size_t>(uniform01(g) * static_cast<double>(state.live.size())));
        const double s = model.sample_split(g);
        const double u = uniform01(g);
        auto [a, b] = detail::split_block(state.live[idx], s, u, params);
        a.born_at = b.born_at = state.t;
        state.live[idx] = a;
        state.live.push_back(b);
    }
    for (auto& b : state.live) detail::advance_block(b, state.t, t_end - state.t, params);
    state.t = t_end;
    return state;
}

struct LineRun {
    FragmentationState state;
    std::size_t dust_frozen = 0;
    std::size_t horizon_frozen = 0;
    bool partial = false;
    /// Waits and jumps of −log(mass) along the tagged lineage.
    std::vector<JumpEvent> tagged_events;
};

/// Freeze every live block at its stopping-line time. Each block's lifetime,
/// split and tag pick come from its own stream (block.key), so runs with
/// different lines over the same root key share one fragmentation tree.
inline LineRun run_stopping_line(FragmentationState state, const DislocationModel& model, const ModelParams& params,
                                 const StoppingLineSpec& spec, const FragOptions& opt = {}) {
    detail::require_fragmentation(model);
    const double rho = model.rate();
    const double gt = params.gamma * params.theta;
    const double k0 = 1.0 / gt;
    LineRun run;
    struct Pending {
        Block block;
        double now;
    };
    std::vector<Pending> stack;
    for (const auto& b : state.live) stack.push_back({b, state.t});
    state.live.clear();

    auto freeze = [&](Block b, double now, double at) {
        detail::advance_block(b, now, at - now, params);
        b.frozen_at = at;
        state.frozen.push_back(b);
        state.t = std::max(state.t, at);
    };

    while (!stack.empty()) {
        Pending cur = stack.back();
        stack.pop_back();
        Block& b = cur.block;
        const double now = cur.now;
        Rng g(b.key);
        const double life = exponential(g, rho);
        const double split_at = now + life;

        // freeze time within [now, split_at), if any
        std::optional<double> fire;
        std::optional<double> zeta_at_fire;
        switch (spec.kind) {
            case StoppingLineSpec::Kind::FixedTime:
                if (spec.value <= now) fire = now;
                else if (spec.value < split_at) fire = spec.value;
                break;
            case StoppingLineSpec::Kind::MassBelow:
                if (b.mass <= spec.value) fire = now;
                break;
            case StoppingLineSpec::Kind::OptimalStatistic: {
                const double level = spec.value;
                if (!spec.literal_statistic) {
                    if (b.zeta >= level) {
                        fire = now;
                    } else {
                        const double ts = z_crossing_time(b.zeta, level, gt);
                        if (now + ts <= split_at) {
                            fire = now + ts;
                            zeta_at_fire = level;
                        }
                    }
                } else {
                    // e^{−γθt}ζ(t) = (ζ₀ + k₀)e^{−γθt₀} − k₀e^{−γθt}, increasing in t
                    const double lit = std::exp(-gt * now) * b.zeta;
                    if (lit >= level) {
                        fire = now;
                    } else {
                        const double rhs = ((b.zeta + k0) * std::exp(-gt * now) - level) / k0;
                        if (rhs > 0.0) {
                            const double tc = -std::log(rhs) / gt;
                            if (tc <= split_at) fire = std::max(tc, now);
                        }
                    }
                }
                break;
            }
        }

        if (fire && *fire <= opt.horizon) {
            freeze(b, now, *fire);
            if (zeta_at_fire) state.frozen.back().zeta = *zeta_at_fire;
            continue;
        }
        if (split_at > opt.horizon || (fire && *fire > opt.horizon)) {
            b.at_horizon = true;
            freeze(b, now, std::max(now, opt.horizon));
            ++run.horizon_frozen;
            run.partial = true;
            continue;
        }

        detail::advance_block(b, now, life, params);
        const double s = model.sample_split(g);
        const double u = uniform01(g);
        auto [c1, c2] = detail::split_block(b, s, u, params);
        c1.born_at = c2.born_at = split_at;
        if (opt.record_tagged && b.tagged)
            run.tagged_events.push_back({life, -std::log(c1.tagged ? s : 1.0 - s)});
        for (Block* child : {&c2, &c1}) {
            if (child->mass < opt.dust_floor) {
                child->dust = true;
                child->frozen_at = split_at;
                state.frozen.push_back(*child);
                ++run.dust_frozen;
            } else {
                stack.push_back({*child, split_at});
            }
        }
        if (stack.size() + state.frozen.size() > opt.block_cap)
            throw ResourceCapExceeded("fragsim: block cap of " + std::to_string(opt.block_cap) + " exceeded");
    }
    run.state = std::move(state);
    return run;
}

/// Σ over frozen blocks of (accrued + c)·mass^{1+γ}·e^{−q·frozen_at}.
inline double payoff(const FragmentationState& state, const ModelParams& params) {
    if (!state.live.empty()) throw DomainError("payoff: all blocks must be frozen");
    double total = 0.0;
    for (const auto& b : state.frozen)
        total += (b.accrued + params.c) * std::pow(b.mass, 1.0 + params.gamma) * std::exp(-params.q * *b.frozen_at);
    return total;
}

inline double payoff_contribution(const Block& b, const ModelParams& params) {
    return (b.accrued + params.c) * std::pow(b.mass, 1.0 + params.gamma) * std::exp(-params.q * *b.frozen_at);
}

/// Payoff of `n_runs` independent runs; run r uses root key ("frag", r), so
/// two calls with different lines are paired run by run.
inline std::vector<double> payoff_ensemble(const DislocationModel& model, const ModelParams& params,
                                           const StoppingLineSpec& spec, std::size_t n_runs, std::uint64_t seed,
                                           unsigned workers = 0, const FragOptions& opt = {}) {
    const StreamPlan plan(seed);
    return parallel_map(n_runs, workers, [&](std::size_t r) {
        const auto run = run_stopping_line(FragmentationState::initial(params, plan.key("frag", r)), model, params,
                                           spec, opt);
        return payoff(run.state, params);
    });
}

// ---------------------------------------------------------------------------
// Many-to-one checks

enum class TestFunction { const1, identity, square };

inline double test_function_power(TestFunction f) {
    switch (f) {
        case TestFunction::const1: return 0.0;
        case TestFunction::identity: return 1.0;
        case TestFunction::square: return 2.0;
    }
    return 0.0;
}

struct ManyToOneResult {
    MomentEstimate lhs;              ///< fragmentation side
    MomentEstimate rhs;              ///< tagged-fragment Monte Carlo
    std::optional<double> exact;     ///< closed form of the right-hand side
    double combined_std_error = 0.0; ///< for lhs vs rhs (or vs exact when present)
    bool pass = false;
};

/// E[Σ f(|Π_n(t)|)|Π_n(t)|] against E[f(e^{−ξ_t})] = e^{−tΦ(p)} for f(x) = x^p.
inline ManyToOneResult many_to_one_fixed_time(const DislocationModel& model, const ModelParams& params,
                                              TestFunction f, double t, std::size_t n_runs, std::uint64_t seed,
                                              unsigned workers = 0) {
    detail::require_fragmentation(model);
    const double p = test_function_power(f);
    const StreamPlan plan(seed);
    const auto lhs = parallel_map(n_runs, workers, [&](std::size_t r) {
        const auto run = run_stopping_line(FragmentationState::initial(params, plan.key("fixed-frag", r)), model,
                                           params, StoppingLineSpec::fixed_time(t));
        double s = 0.0;
        for (const auto& b : run.state.frozen) s += std::pow(b.mass, 1.0 + p);
        return s;
    });
    const TiltedDynamics dyn = untilted(model, params.theta);
    const auto rhs = parallel_map(n_runs, workers, [&](std::size_t r) {
        Rng g = plan.stream("fixed-tagged", r);
        const PathSkeleton sk = simulate_skeleton(dyn, t, g);
        return std::exp(-p * sk.xi_at(t));
    });
    ManyToOneResult out;
    out.lhs = mean_estimate(lhs);
    out.rhs = mean_estimate(rhs);
    out.exact = std::exp(-t * phi(model, p));
    out.combined_std_error = out.lhs.std_error;
    out.pass = within_sigma(out.lhs.value, *out.exact, out.lhs.std_error, 3.0, 1e-12) &&
               within_sigma(out.lhs.value, out.rhs.value, combine_se(out.lhs.std_error, out.rhs.std_error), 3.0,
                            1e-12);
    return out;
}

/// Test function for the stopping-line identity: f(A, ℓ) = e^{−qℓ}·min(A, cap)
/// with A = accrued premium + c.
inline double line_test_function(double accrued_plus_c, double ell, double q, double cap) {
    return std::exp(-q * ell) * std::min(accrued_plus_c, cap);
}

inline constexpr double kLineTestCap = 10.0;

/// E[Σ |Π_i(ℓ)| f(A_i, ℓ_i)] against E[f(A_1, ℓ_1)] for ℓ(i) = inf{t : |B_i(t)| ≤ a}.
inline ManyToOneResult many_to_one_stopping_line(const DislocationModel& model, const ModelParams& params, double a,
                                                 std::size_t n_runs, std::uint64_t seed, unsigned workers = 0,
                                                 double cap = kLineTestCap) {
    detail::require_fragmentation(model);
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("many_to_one_stopping_line: a must lie in (0, 1]");
    const StreamPlan plan(seed);
    const auto lhs = parallel_map(n_runs, workers, [&](std::size_t r) {
        const auto run = run_stopping_line(FragmentationState::initial(params, plan.key("line-frag", r)), model,
                                           params, StoppingLineSpec::mass_below(a));
        double s = 0.0;
        for (const auto& b : run.state.frozen)
            s += b.mass * line_test_function(b.accrued + params.c, *b.frozen_at, params.q, cap);
        return s;
    });
    const double gt = params.gamma * params.theta;
    const auto rhs = parallel_map(n_runs, workers, [&](std::size_t r) {
        Rng g = plan.stream("line-tagged", r);
        double t = 0.0;
        double xi = 0.0;
        double acc = 0.0;
        while (std::exp(-xi) > a) {
            const double e = exponential(g, model.rate());
            acc += std::exp(params.gamma * xi - gt * t) * (-std::expm1(-gt * e)) / gt;
            t += e;
            xi += sample_tagged_jump(model, 0.0, g);
        }
        return line_test_function(acc + params.c, t, params.q, cap);
    });
    ManyToOneResult out;
    out.lhs = mean_estimate(lhs);
    out.rhs = mean_estimate(rhs);
    out.combined_std_error = combine_se(out.lhs.std_error, out.rhs.std_error);
    out.pass = within_sigma(out.lhs.value, out.rhs.value, out.combined_std_error, 3.0, 1e-12);
    return out;
}

}  // namespace fragstop
