#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "fragstop/errors.hpp"
#include "fragstop/levy.hpp"
#include "fragstop/rng.hpp"

namespace fragstop {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One step of a compound-Poisson driver: wait, then jump up by `jump`.
/// wait = +inf means no further jumps.
struct JumpEvent {
    double wait = kInf;
    double jump = 0.0;
};

/// Jump of ξ (equivalently of Y) at a dislocation: −log of the size-biased
/// fragment. With tilt_kappa > 0 the law is reweighted by e^{−κx}.
template <class G>
double sample_tagged_jump(const DislocationModel& model, double tilt_kappa, G& g) {
    if (model.degenerate()) throw InvalidModel("sample_tagged_jump: ν ≡ 0 has no jumps");
    if (const auto* pt = std::get_if<BinaryPoint>(&model.family())) {
        const double s = pt->split;
        if (tilt_kappa == 0.0) {
            const double pick = uniform01(g) < s ? s : 1.0 - s;
            return -std::log(pick);
        }
        // inverse CDF over the two atoms with weights s_i^{1+κ}
        const double w1 = std::pow(s, 1.0 + tilt_kappa);
        const double w2 = std::pow(1.0 - s, 1.0 + tilt_kappa);
        return uniform01(g) * (w1 + w2) < w1 ? -std::log(s) : -std::log1p(-s);
    }
    for (std::size_t trial = 0; trial < 100000000; ++trial) {
        const double s = model.sample_split(g);
        const double pick = uniform01(g) < s ? s : 1.0 - s;
        if (tilt_kappa == 0.0 || uniform01(g) < std::pow(pick, tilt_kappa)) return -std::log(pick);
    }
    throw HorizonExceeded("sample_tagged_jump: rejection sampler did not accept");
}

template <class G>
double sample_jump(const TiltedDynamics& dyn, G& g) {
    return sample_tagged_jump(dyn.model, dyn.kappa, g);
}

/// Event source drawing exponential waits and tagged jumps from a dynamics.
template <class G>
class LevyEvents {
public:
    LevyEvents(const TiltedDynamics& dyn, G& g) : dyn_(&dyn), g_(&g) {}

    JumpEvent operator()() {
        JumpEvent e;
        e.wait = exponential(*g_, dyn_->jump_rate);
        if (std::isfinite(e.wait)) e.jump = sample_jump(*dyn_, *g_);
        return e;
    }

private:
    const TiltedDynamics* dyn_;
    G* g_;
};

/// Replays a recorded event list, then no further jumps.
class ReplayEvents {
public:
    explicit ReplayEvents(std::span<const JumpEvent> events) : events_(events) {}

    JumpEvent operator()() {
        if (next_ < events_.size()) return events_[next_++];
        return JumpEvent{};
    }

private:
    std::span<const JumpEvent> events_;
    std::size_t next_ = 0;
};

// Between jumps Z solves dZ/dt = 1 + γθZ.

/// Z after an interval dt without jumps.
inline double z_flow(double z, double dt, double gt) { return z + (z + 1.0 / gt) * std::expm1(gt * dt); }

/// Time for the flow to carry z up to level b ≥ z.
inline double z_crossing_time(double z, double b, double gt) {
    const double k0 = 1.0 / gt;
    return k0 * std::log1p((b - z) / (z + k0));
}

/// Exact realization of Y: jump times and sizes over [0, horizon].
struct PathSkeleton {
    std::vector<double> jump_times;
    std::vector<double> jump_sizes;
    double theta = 0.0;
    double horizon = 0.0;

    double xi_at(double t) const {
        double x = 0.0;
        for (std::size_t i = 0; i < jump_times.size() && jump_times[i] <= t; ++i) x += jump_sizes[i];
        return x;
    }

    double y_at(double t) const { return xi_at(t) - theta * t; }
};

template <class G>
PathSkeleton simulate_skeleton(const TiltedDynamics& dyn, double horizon, G& g) {
    PathSkeleton sk;
    sk.theta = -dyn.drift;
    sk.horizon = horizon;
    LevyEvents<G> events(dyn, g);
    double t = 0.0;
    for (;;) {
        const JumpEvent e = events();
        if (!(t + e.wait <= horizon)) break;
        t += e.wait;
        sk.jump_times.push_back(t);
        sk.jump_sizes.push_back(e.jump);
    }
    return sk;
}

struct FirstPassage {
    double tau = 0.0;
    bool hit = true;  ///< false only when the safety horizon was reached first
};

inline constexpr double kDefaultPassageHorizon = 1e4;

/// First passage of Z^c strictly above b. Skip-free upwards, so Z_τ = b.
template <class Events>
FirstPassage first_passage(const ModelParams& params, double c, double b, Events& events,
                           double horizon = kDefaultPassageHorizon) {
    if (c >= b) return {0.0, true};
    const double gt = params.gamma * params.theta;
    double z = c;
    double t = 0.0;
    for (;;) {
        const JumpEvent e = events();
        const double tstar = z_crossing_time(z, b, gt);
        if (!std::isfinite(tstar)) throw std::runtime_error("first_passage: non-finite crossing time");
        if (tstar <= e.wait) {
            if (t + tstar > horizon) return {horizon, false};
            return {t + tstar, true};
        }
        t += e.wait;
        if (t > horizon) return {horizon, false};
        z = z_flow(z, e.wait, gt) * std::exp(-params.gamma * e.jump);
    }
}

/// First passages over an ascending list of thresholds along one path
/// (common random numbers across thresholds). Thresholds ≤ c give 0.
template <class Events>
std::vector<FirstPassage> first_passages(const ModelParams& params, double c, std::span<const double> thresholds,
                                         Events& events, double horizon = kDefaultPassageHorizon) {
    std::vector<FirstPassage> out(thresholds.size(), FirstPassage{horizon, false});
    const double gt = params.gamma * params.theta;
    double z = c;
    double t = 0.0;
    std::size_t j = 0;
    while (j < thresholds.size() && thresholds[j] <= c) out[j++] = {0.0, true};
    while (j < thresholds.size()) {
        const JumpEvent e = events();
        while (j < thresholds.size()) {
            const double b = thresholds[j];
            const double tstar = z_crossing_time(z, b, gt);
            if (tstar > e.wait) break;
            if (t + tstar > horizon) return out;
            out[j++] = {t + tstar, true};
        }
        if (j == thresholds.size()) break;
        t += e.wait;
        if (t > horizon) return out;
        z = z_flow(z, e.wait, gt) * std::exp(-params.gamma * e.jump);
    }
    return out;
}

template <class G>
FirstPassage simulate_Z_first_passage(const ModelParams& params, const DislocationModel& model, double b, G& g,
                                      double horizon = kDefaultPassageHorizon) {
    const TiltedDynamics dyn = untilted(model, params.theta);
    LevyEvents<G> events(dyn, g);
    return first_passage(params, params.c, b, events, horizon);
}

/// State of (Y, Z^c, ∫e^{γY}) at an event boundary.
struct ZState {
    double t = 0.0;
    double y = 0.0;
    double z = 0.0;
    double accrued = 0.0;
};

/// Z^c path at event boundaries: the start, the pre- and post-jump state of
/// every jump in (0, horizon], and the state at the horizon.
template <class Events>
std::vector<ZState> z_path(const ModelParams& params, double c, double horizon, Events& events) {
    if (!(horizon >= 0.0)) throw DomainError("z_path: horizon must be nonnegative");
    const double g = params.gamma;
    const double gt = g * params.theta;
    std::vector<ZState> out;
    ZState s{0.0, 0.0, c, 0.0};
    out.push_back(s);
    if (horizon == 0.0) return out;
    auto advance = [&](double dt) {
        s.accrued += std::exp(g * s.y) * (-std::expm1(-gt * dt)) / gt;
        s.y -= params.theta * dt;
        s.t += dt;
        s.z = std::exp(-g * s.y) * (s.accrued + c);
    };
    for (;;) {
        const JumpEvent e = events();
        if (!(s.t + e.wait <= horizon)) {
            advance(horizon - s.t);
            s.t = horizon;
            out.push_back(s);
            return out;
        }
        advance(e.wait);
        out.push_back(s);
        s.y += e.jump;
        s.z = std::exp(-g * s.y) * (s.accrued + c);
        out.push_back(s);
    }
}

template <class G>
std::vector<ZState> simulate_Z_path(const ModelParams& params, const DislocationModel& model, double horizon, G& g) {
    const TiltedDynamics dyn = untilted(model, params.theta);
    LevyEvents<G> events(dyn, g);
    return z_path(params, params.c, horizon, events);
}

/// Z^c at each of the ascending `times` along one path.
template <class Events>
std::vector<double> z_at_times(const ModelParams& params, double c, std::span<const double> times, Events& events) {
    const double gt = params.gamma * params.theta;
    std::vector<double> out(times.size());
    double z = c;
    double t = 0.0;
    std::size_t j = 0;
    while (j < times.size()) {
        const JumpEvent e = events();
        while (j < times.size() && times[j] <= t + e.wait) {
            out[j] = z_flow(z, times[j] - t, gt);
            ++j;
        }
        if (j == times.size()) break;
        z = z_flow(z, e.wait, gt) * std::exp(-params.gamma * e.jump);
        t += e.wait;
    }
    return out;
}

/// One draw of I∞ = ∫₀^∞ e^{γY_s} ds.
struct IInftyDraw {
    double value = 0.0;            ///< truncated integral plus tail correction
    double tail_correction = 0.0;  ///< e^{γY_T}·E[I∞] added at truncation
    std::size_t jumps = 0;
};

inline constexpr std::size_t kIInftyStepCap = 10'000'000;

/// Simulate until e^{γY_T} < rel_tol·(accrued so far) at a renewal point T,
/// then add e^{γY_T}·tail_mean, the conditional mean of the remaining
/// integral. Requires the driver to drift to −∞.
template <class Events>
IInftyDraw exponential_functional(double gamma, double theta, Events& events, double rel_tol, double tail_mean,
                                  std::size_t step_cap = kIInftyStepCap) {
    const double gt = gamma * theta;
    IInftyDraw d;
    double y = 0.0;
    double acc = 0.0;
    for (std::size_t step = 0; step < step_cap; ++step) {
        const double ey = std::exp(gamma * y);
        if (acc > 0.0 && ey < rel_tol * acc) {
            d.tail_correction = ey * tail_mean;
            d.value = acc + d.tail_correction;
            return d;
        }
        const JumpEvent e = events();
        if (!std::isfinite(e.wait)) {
            d.value = acc + ey / gt;
            return d;
        }
        acc += ey * (-std::expm1(-gt * e.wait)) / gt;
        y += -theta * e.wait + e.jump;
        ++d.jumps;
    }
    throw HorizonExceeded("exponential functional did not converge within the step cap; does Y drift to -inf?");
}

template <class G>
IInftyDraw simulate_I_infty(const TiltedDynamics& tilted, const ModelParams& params, G& g, double rel_tol,
                            double tail_mean) {
    LevyEvents<G> events(tilted, g);
    return exponential_functional(params.gamma, -tilted.drift, events, rel_tol, tail_mean);
}

}  // namespace fragstop
