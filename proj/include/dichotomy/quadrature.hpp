#pragma once

#include "dichotomy/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <vector>

namespace dichotomy {

struct QuadraturePolicy {
    Scalar abs_tol = 1e-12;
    Scalar rel_tol = 1e-10;
    int max_intervals = 4000;
    /// The adaptive loop starts from equal pieces no wider than this, so a
    /// single rule never has to resolve several oscillations of the integrand.
    Scalar max_initial_width = 1;
};

struct QuadratureResult {
    Scalar value = 0;
    /// Sum over the final partition of |K15 - G7|; conservative.
    Scalar error = 0;
    /// Final partition, sorted, first = a and last = b.
    std::vector<Scalar> breakpoints;
};

namespace detail {

struct Gk15 {
    Scalar kronrod;
    Scalar gauss;
    Scalar abs_kronrod;
};

inline constexpr std::array<Scalar, 8> gk15_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<Scalar, 8> gk15_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
inline constexpr std::array<Scalar, 4> g7_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
Gk15 gk15(const F& f, Scalar a, Scalar b) {
    const Scalar center = 0.5 * (a + b);
    const Scalar half = 0.5 * (b - a);
    const Scalar fc = f(center);
    Scalar k = gk15_weights[7] * fc;
    Scalar g = g7_weights[3] * fc;
    Scalar ak = gk15_weights[7] * std::abs(fc);
    for (int i = 0; i < 7; ++i) {
        const Scalar dx = half * gk15_nodes[i];
        const Scalar f1 = f(center - dx);
        const Scalar f2 = f(center + dx);
        k += gk15_weights[i] * (f1 + f2);
        ak += gk15_weights[i] * (std::abs(f1) + std::abs(f2));
        if (i % 2 == 1) g += g7_weights[i / 2] * (f1 + f2);
    }
    return {k * half, g * half, ak * std::abs(half)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on [a, b].
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate drops below max(abs_tol, rel_tol * |I|) or reaches the rounding
/// floor of the integrand. Throws QuadratureFailure when the interval budget
/// runs out or the integrand is not finite.
template <typename F>
QuadratureResult integrate(const F& f, Scalar a, Scalar b, const QuadraturePolicy& policy = {}) {
    QuadratureResult result;
    if (b == a) {
        result.breakpoints = {a, b};
        return result;
    }
    struct Piece {
        Scalar a, b;
        detail::Gk15 q;
        Scalar err() const { return std::abs(q.kronrod - q.gauss); }
        bool operator<(const Piece& o) const { return err() < o.err(); }
    };
    std::priority_queue<Piece> heap;
    Scalar value = 0;
    Scalar error = 0;
    Scalar abs_value = 0;
    auto push = [&](Scalar lo, Scalar hi) {
        const auto q = detail::gk15(f, lo, hi);
        if (!std::isfinite(q.kronrod) || !std::isfinite(q.gauss)) {
            throw Error(ErrorCode::QuadratureFailure, "integrand is not finite on the interval");
        }
        heap.push({lo, hi, q});
        value += q.kronrod;
        error += std::abs(q.kronrod - q.gauss);
        abs_value += q.abs_kronrod;
    };
    int initial = 1;
    if (policy.max_initial_width > 0) {
        const Scalar needed = std::ceil(std::abs(b - a) / policy.max_initial_width);
        initial = static_cast<int>(std::clamp<Scalar>(needed, 1, std::max(1, policy.max_intervals / 2)));
    }
    for (int i = 0; i < initial; ++i) {
        const Scalar lo = i == 0 ? a : a + (b - a) * i / initial;
        const Scalar hi = i + 1 == initial ? b : a + (b - a) * (i + 1) / initial;
        push(lo, hi);
    }

    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    while (true) {
        const Scalar target = std::max(policy.abs_tol, policy.rel_tol * std::abs(value));
        if (error <= target || error <= 50 * eps * abs_value) break;
        if (static_cast<int>(heap.size()) >= policy.max_intervals) {
            throw Error(ErrorCode::QuadratureFailure,
                        "interval budget exhausted with error estimate " + std::to_string(error));
        }
        const Piece worst = heap.top();
        heap.pop();
        const Scalar mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            throw Error(ErrorCode::QuadratureFailure, "interval cannot be bisected further");
        }
        const auto left = detail::gk15(f, worst.a, mid);
        const auto right = detail::gk15(f, mid, worst.b);
        for (const auto& q : {left, right}) {
            if (!std::isfinite(q.kronrod) || !std::isfinite(q.gauss)) {
                throw Error(ErrorCode::QuadratureFailure, "integrand is not finite on the interval");
            }
        }
        heap.push({worst.a, mid, left});
        heap.push({mid, worst.b, right});
        // Running totals; the final partition is summed again in order below.
        value += left.kronrod + right.kronrod - worst.q.kronrod;
        error += std::abs(left.kronrod - left.gauss) + std::abs(right.kronrod - right.gauss) - worst.err();
        abs_value += left.abs_kronrod + right.abs_kronrod - worst.q.abs_kronrod;
        error = std::max<Scalar>(error, 0);
    }

    std::vector<Piece> pieces;
    while (!heap.empty()) {
        pieces.push_back(heap.top());
        heap.pop();
    }
    std::sort(pieces.begin(), pieces.end(), [](const Piece& l, const Piece& r) { return l.a < r.a; });
    value = error = 0;
    for (const auto& piece : pieces) {
        value += piece.q.kronrod;
        error += piece.err();
        result.breakpoints.push_back(piece.a);
    }
    result.breakpoints.push_back(b);
    result.value = value;
    result.error = error;
    return result;
}

/// Non-adaptive Gauss-Kronrod sum over a fixed partition.
template <typename F>
QuadratureResult integrate_on(const F& f, std::span<const Scalar> breakpoints) {
    QuadratureResult result;
    result.breakpoints.assign(breakpoints.begin(), breakpoints.end());
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const auto q = detail::gk15(f, breakpoints[i], breakpoints[i + 1]);
        result.value += q.kronrod;
        result.error += std::abs(q.kronrod - q.gauss);
    }
    return result;
}

/// The partition with every subinterval bisected.
[[nodiscard]] inline std::vector<Scalar> halved(std::span<const Scalar> breakpoints) {
    std::vector<Scalar> out;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        out.push_back(breakpoints[i]);
        out.push_back(0.5 * (breakpoints[i] + breakpoints[i + 1]));
    }
    if (!breakpoints.empty()) out.push_back(breakpoints.back());
    return out;
}

}  // namespace dichotomy
