#include "dichotomy/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace dichotomy {

SampleSet collect_samples(const EvolutionFamily& family, const ProjectionFamily& projection,
                          const std::vector<TimePair>& pairs, const std::vector<Vector>& directions,
                          Scalar threshold) {
    SampleSet set;
    bool any_p = false;
    bool any_q = false;
    for (const auto& pr : pairs) {
        const Matrix u = family(pr.t, pr.s);
        const Matrix p_s = projection.P(pr.s);
        const Matrix q_t = projection.Q(pr.t);
        Matrix uq;
        bool have_uq = false;
        for (std::size_t k = 0; k < directions.size(); ++k) {
            const Vector& x = directions[k];
            const Scalar x_norm = x.norm();
            const Vector y = p_s * x;
            if (y.norm() > threshold * x_norm) {
                any_p = true;
                set.p.push_back({pr.t, pr.s, (u * y).norm() / y.norm(), Side::P, static_cast<int>(k)});
            }
            const Vector z = q_t * x;
            if (z.norm() > threshold * x_norm) {
                any_q = true;
                if (!have_uq) {
                    uq = evaluate_UQ_inverse(family, projection, pr.s, pr.t);
                    have_uq = true;
                }
                set.q.push_back({pr.t, pr.s, (uq * z).norm() / z.norm(), Side::Q, static_cast<int>(k)});
            }
        }
    }
    set.p_empty = !any_p;
    set.q_empty = !any_q;
    return set;
}

SampleSet collect_samples(const EvolutionFamily& family, const ProjectionFamily& projection, const GridSpec& grid,
                          const std::vector<Vector>& directions) {
    return collect_samples(family, projection, time_pairs(grid), directions);
}

namespace {

// In log form every bound reads log v <= c + alpha s - r (t - s): on the Q side
// e^{alpha t} = e^{alpha s} e^{alpha (t - s)} so r = nu - alpha.
struct LogSample {
    Scalar s;
    Scalar delta;
    Scalar ell;
};

std::vector<LogSample> to_log(const std::vector<EnvelopeSample>& samples) {
    std::vector<LogSample> out;
    out.reserve(samples.size());
    for (const auto& x : samples) {
        if (!(x.value > 0) || !std::isfinite(x.value)) {
            throw Error(ErrorCode::InvalidParam, "envelope samples must be positive and finite");
        }
        if (x.t < x.s || x.s < 0) throw Error(ErrorCode::NonOrderedTimes, "envelope samples need t >= s >= 0");
        out.push_back({x.s, x.t - x.s, std::log(x.value)});
    }
    return out;
}

}  // namespace

EnvelopeFit fit_envelope(const std::vector<EnvelopeSample>& samples, Side side, const FitBounds& bounds) {
    if (samples.empty()) throw Error(ErrorCode::NoSamples, "no samples to fit");
    for (const auto& x : samples) {
        if (x.side != side) throw Error(ErrorCode::InvalidParam, "sample from the other side");
    }
    if (!(bounds.nu_min > 0) || bounds.alpha_max < 0 || !(bounds.rate_max >= bounds.nu_min) ||
        !(bounds.divergence_ratio > 0)) {
        throw Error(ErrorCode::InvalidParam, "fit bounds need nu_min > 0, rate_max >= nu_min, divergence_ratio > 0");
    }
    const auto logs = to_log(samples);

    // Smallest log N admitting rate r, and largest rate admitted by log N = c,
    // both with alpha at its most permissive bound.
    Scalar horizon = 0;
    for (const auto& x : logs) horizon = std::max(horizon, x.s + x.delta);
    auto level_for = [&](Scalar r, Scalar t_limit) {
        Scalar c = 0;
        for (const auto& x : logs) {
            if (x.s + x.delta <= t_limit) c = std::max(c, x.ell - bounds.alpha_max * x.s + r * x.delta);
        }
        return c;
    };
    auto rate_for = [&](Scalar c) {
        Scalar r = bounds.rate_max;
        for (const auto& x : logs) {
            if (x.delta > 0) r = std::min(r, (c + bounds.alpha_max * x.s - x.ell) / x.delta);
        }
        return r;
    };

    EnvelopeFit fit;
    fit.side = side;
    fit.sample_count = samples.size();
    const Scalar c_floor = level_for(bounds.nu_min, horizon);
    if (c_floor > bounds.log_n_max) {
        fit.N = std::exp(c_floor);
        fit.alpha = bounds.alpha_max;
        fit.rate = fit.target_rate = bounds.nu_min;
        fit.nu = side == Side::P ? fit.rate : fit.rate + fit.alpha;
        fit.alpha_below_nu = fit.alpha < fit.nu;
        fit.rate_at_floor = true;
        fit.slack = c_floor - bounds.log_n_max;
        return fit;
    }
    const Scalar best_rate = std::min(rate_for(bounds.log_n_max), bounds.rate_max);
    fit.rate_at_floor = best_rate <= bounds.nu_min * (1 + 1e-9);

    // Halve the trial rate until the required N stops growing with the horizon.
    Scalar target = bounds.nu_min;
    Scalar worst_growth = 0;
    bool settled = false;
    for (Scalar trial = best_rate / 2;; trial /= 2) {
        const Scalar rate = std::max(trial, bounds.nu_min);
        const Scalar growth = level_for(rate, horizon) - level_for(rate, horizon / 2);
        const Scalar ratio = growth / (rate * horizon / 2);
        worst_growth = std::max(worst_growth, ratio);
        if (ratio < bounds.divergence_ratio) {
            target = rate;
            settled = true;
            break;
        }
        if (rate <= bounds.nu_min) break;
    }
    fit.divergent = !settled;
    fit.target_rate = target;

    const Scalar c = std::min(level_for(target, horizon), bounds.log_n_max);
    const Scalar r = std::clamp(rate_for(c), bounds.nu_min, bounds.rate_max);
    Scalar alpha = 0;
    for (const auto& x : logs) {
        if (x.s > 0) alpha = std::max(alpha, (x.ell + r * x.delta - c) / x.s);
    }
    alpha = std::min(alpha, bounds.alpha_max);

    fit.N = std::exp(c);
    fit.alpha = alpha;
    fit.rate = r;
    fit.nu = side == Side::P ? r : r + alpha;
    fit.alpha_below_nu = fit.alpha < fit.nu;

    Scalar margin = -std::numeric_limits<Scalar>::infinity();
    for (const auto& x : logs) margin = std::max(margin, x.ell - (c + alpha * x.s - r * x.delta));
    if (fit.rate_at_floor) {
        // Violation if the rate had any margin above the floor.
        Scalar v = -std::numeric_limits<Scalar>::infinity();
        for (const auto& x : logs) v = std::max(v, x.ell - (c + alpha * x.s - 2 * bounds.nu_min * x.delta));
        fit.slack = v;
    } else if (fit.divergent) {
        fit.slack = worst_growth;
    } else {
        fit.slack = margin;
    }
    fit.feasible = !fit.rate_at_floor && !fit.divergent;
    return fit;
}

Scalar envelope_violation(const std::vector<EnvelopeSample>& samples, Scalar N, Scalar alpha, Scalar nu, Side side) {
    if (!(N > 0)) throw Error(ErrorCode::InvalidParam, "N must be positive");
    const Scalar log_n = std::log(N);
    Scalar worst = -std::numeric_limits<Scalar>::infinity();
    for (const auto& x : samples) {
        const Scalar w = side == Side::P ? x.s : x.t;
        worst = std::max(worst, std::log(x.value) - (log_n + alpha * w - nu * (x.t - x.s)));
    }
    return worst;
}

const char* to_string(Witness::Kind kind) noexcept {
    return kind == Witness::Kind::FixedGap ? "fixed-gap" : "fixed-start";
}

std::optional<Witness> find_witness(const std::vector<EnvelopeSample>& samples, Side, Scalar alpha, Scalar rate) {
    // Keyed on a rounded gap or start time; values keep the best bound per pair.
    using Group = std::map<long long, std::map<long long, WitnessPoint>>;
    Group by_gap;
    Group by_start;
    auto key = [](Scalar v) { return std::llround(v * 1e8); };
    auto keep = [](std::map<long long, WitnessPoint>& group, long long k, const WitnessPoint& p) {
        auto [it, inserted] = group.try_emplace(k, p);
        if (!inserted && p.log_lower_bound > it->second.log_lower_bound) it->second = p;
    };
    for (const auto& x : samples) {
        const Scalar delta = x.t - x.s;
        const WitnessPoint p{x.t, x.s, std::log(x.value) - alpha * x.s + rate * delta};
        keep(by_gap[key(delta)], key(x.s), p);
        keep(by_start[key(x.s)], key(x.t), p);
    }

    std::optional<Witness> best;
    auto scan = [&](const Group& groups, Witness::Kind kind) {
        for (const auto& [gk, group] : groups) {
            if (kind == Witness::Kind::FixedGap && gk == 0) continue;
            std::vector<WitnessPoint> chain;
            const long long middle = (group.begin()->first + group.rbegin()->first) / 2;
            Scalar early = -std::numeric_limits<Scalar>::infinity();
            Scalar late = -std::numeric_limits<Scalar>::infinity();
            for (const auto& [k, p] : group) {
                if (chain.empty() || p.log_lower_bound > chain.back().log_lower_bound + 1e-12) chain.push_back(p);
                if (k <= middle) {
                    early = std::max(early, p.log_lower_bound);
                } else {
                    late = std::max(late, p.log_lower_bound);
                }
            }
            if (chain.size() < 3) continue;
            const Scalar rise = chain.back().log_lower_bound - chain.front().log_lower_bound;
            const Scalar late_rise = std::max<Scalar>(0, late - early);
            const bool better = !best || late_rise > best->late_rise ||
                                (late_rise == best->late_rise && rise > best->mean_log_step * (best->points.size() - 1));
            if (better) best = Witness{kind, chain, rise / static_cast<Scalar>(chain.size() - 1), late_rise};
        }
    };
    scan(by_gap, Witness::Kind::FixedGap);
    scan(by_start, Witness::Kind::FixedStart);
    return best;
}

UniformTest certify_uniform(const std::vector<EnvelopeSample>& samples, Side side, Scalar nu_min) {
    UniformTest test;
    FitBounds bounds;
    bounds.nu_min = nu_min;
    bounds.alpha_max = 0;
    test.fit = fit_envelope(samples, side, bounds);
    test.feasible = test.fit.feasible;
    if (!test.feasible) test.witness = find_witness(samples, side, 0, nu_min);
    return test;
}

std::vector<TimePair> witness_catalogue(Scalar t_max, int geometric_levels) {
    constexpr Scalar pi = std::numbers::pi;
    const Scalar limit = t_max * (1 + 1e-12);
    std::vector<TimePair> pairs;
    auto add = [&](Scalar t, Scalar s) {
        if (t <= limit && s >= 0 && t >= s) pairs.push_back({std::min(t, t_max), s});
    };
    for (int n = 0; n * pi <= t_max; ++n) {
        add(n * pi + pi / 2, n * pi);
        add(2 * n * pi + pi / 2, 0);
        if (n > 0) add(n * pi, 0);
        add((n + 1) * pi, n * pi + pi / 2);
    }
    const Scalar t0 = std::ldexp(t_max, -geometric_levels);
    for (int k = 0; k <= geometric_levels; ++k) {
        const Scalar t = std::ldexp(t0, k);
        add(t, 0);
        add(t, t / 2);
    }
    return pairs;
}

namespace {

EnvelopeFit vacuous_fit(Side side, const FitBounds& bounds) {
    EnvelopeFit fit;
    fit.side = side;
    fit.N = 1;
    fit.alpha = 0;
    fit.rate = bounds.rate_max;
    fit.nu = bounds.rate_max;
    fit.alpha_below_nu = true;
    fit.feasible = true;
    return fit;
}

}  // namespace

DichotomyConstants certify_dichotomy(const EvolutionFamily& family, const ProjectionFamily& projection,
                                     const GridSpec& grid, const std::vector<Vector>& directions,
                                     const FitBounds& bounds) {
    auto pairs = time_pairs(grid);
    const auto extra = witness_catalogue(grid.t_max);
    pairs.insert(pairs.end(), extra.begin(), extra.end());
    const auto samples = collect_samples(family, projection, pairs, directions);

    DichotomyConstants out;
    out.t_max = grid.t_max;
    out.p_empty = samples.p_empty;
    out.q_empty = samples.q_empty;

    auto side_fit = [&](Side side, std::optional<Witness>& witness, bool& uniform_ok) {
        const auto& list = samples.side(side);
        if (list.empty()) {
            uniform_ok = true;
            return vacuous_fit(side, bounds);
        }
        auto fit = fit_envelope(list, side, bounds);
        if (!fit.feasible) {
            const bool in_box = fit.N <= std::exp(bounds.log_n_max);
            witness = find_witness(list, side, in_box ? fit.alpha : 0, in_box ? fit.rate : bounds.nu_min);
        }
        uniform_ok = certify_uniform(list, side, bounds.nu_min).feasible;
        return fit;
    };
    bool p_uniform = false;
    bool q_uniform = false;
    out.p_fit = side_fit(Side::P, out.p_witness, p_uniform);
    out.q_fit = side_fit(Side::Q, out.q_witness, q_uniform);
    out.uniform = p_uniform && q_uniform;
    out.dichotomy = out.p_fit.feasible && out.q_fit.feasible && out.q_fit.alpha_below_nu;
    if (out.dichotomy) {
        out.merged = MergedConstants{std::max(out.p_fit.N, out.q_fit.N), std::max(out.p_fit.alpha, out.q_fit.alpha),
                                     std::min(out.p_fit.rate, out.q_fit.rate)};
    }
    return out;
}

std::vector<NormPoint> projection_norm_curve(const ProjectionFamily& projection, const GridSpec& grid) {
    std::vector<NormPoint> out;
    for (Scalar t : time_points(grid)) out.push_back({t, spectral_norm(projection.P(t))});
    return out;
}

}  // namespace dichotomy
