#include "dichotomy/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dichotomy {

HFunction canonical_H(const ProjectionFamily& projection, Scalar gamma) {
    if (!(gamma > 0)) throw Error(ErrorCode::InvalidParam, "gamma must be positive");
    return {gamma, HFunction::Kind::Canonical, [projection, gamma](Scalar t) -> Matrix {
                return std::exp(gamma * t) * projection.P(t) + std::exp(-gamma * t) * projection.Q(t);
            }};
}

HFunction user_H(Scalar gamma, MatrixFunction map) {
    if (!(gamma > 0)) throw Error(ErrorCode::InvalidParam, "gamma must be positive");
    if (!map) throw Error(ErrorCode::InvalidParam, "H needs a map");
    return {gamma, HFunction::Kind::UserSupplied, std::move(map)};
}

Scalar membership_violation(const HFunction& h, const ProjectionFamily& projection, const GridSpec& grid,
                            const std::vector<Vector>& directions) {
    Scalar worst = -std::numeric_limits<Scalar>::infinity();
    for (Scalar t : time_points(grid)) {
        const Matrix ht = h.map(t);
        const Matrix p = projection.P(t);
        const Matrix q = projection.Q(t);
        for (const auto& x : directions) {
            const Scalar rhs = std::exp(h.gamma * t) * (p * x).norm() + std::exp(-h.gamma * t) * (q * x).norm();
            const Scalar lhs = (ht * x).norm();
            worst = std::max(worst, (lhs - rhs) / std::max<Scalar>(rhs, std::numeric_limits<Scalar>::min()));
        }
    }
    return worst;
}

namespace {

// The weights e^{+-2 gamma t} push integrals far from unit scale, so the
// absolute tolerance is taken relative to the integrand at the anchor time.
QuadraturePolicy anchored(QuadraturePolicy policy, Scalar anchor_value) {
    if (anchor_value > 0 && std::isfinite(anchor_value)) policy.abs_tol *= anchor_value;
    return policy;
}

}  // namespace

LyapunovEvaluator::LyapunovEvaluator(EvolutionFamily family, ProjectionFamily projection, HFunction h,
                                     std::optional<TailEnvelope> envelope, const GridSpec& membership_grid,
                                     LyapunovPolicy policy)
    : family_(std::move(family)),
      projection_(std::move(projection)),
      h_(std::move(h)),
      envelope_(envelope),
      policy_(policy) {
    if (family_.dim() != projection_.dim()) throw Error(ErrorCode::InvalidParam, "dimension mismatch");
    if (!h_.map || !(h_.gamma > 0)) throw Error(ErrorCode::InvalidParam, "H needs gamma > 0 and a map");
    const Scalar v = membership_violation(h_, projection_, membership_grid, directions(membership_grid, family_.dim()));
    if (v > policy_.membership_tol) {
        throw Error(ErrorCode::MembershipViolation, "H exceeds its admissible bound by a relative " + std::to_string(v));
    }
}

LyapunovValue LyapunovEvaluator::evaluate(Scalar t, const Vector& x) const {
    if (t < 0) throw Error(ErrorCode::InvalidParam, "t must be nonnegative");
    LyapunovValue out;
    const Matrix p_t = projection_.P(t);
    const Matrix q_t = projection_.Q(t);
    const Vector px = p_t * x;
    const Vector qx = q_t * x;
    // Rounding noise of an oblique projector is not a component.
    const Scalar noise = 1e-14 * x.norm() * std::max<Scalar>(1, spectral_norm(p_t));

    if (px.norm() > noise) {
        if (!envelope_) throw Error(ErrorCode::DivergentTail, "no P-side envelope available for the tail");
        const Scalar gamma = h_.gamma;
        const Scalar T = policy_.tail_T.value_or(
            automatic_tail_T(*envelope_, t, 2, gamma, policy_.tail_fraction, policy_.max_tail_T));
        if (!(envelope_->nu > gamma)) throw Error(ErrorCode::DivergentTail, "envelope decay rate does not exceed gamma");
        auto f = [&](Scalar tau) { return (h_.map(tau) * (family_(tau, t) * px)).squaredNorm(); };
        const auto r = integrate(f, t, t + T, anchored(policy_.quadrature, f(t)));
        out.tail_T = T;
        // ||H y|| = e^{gamma tau} ||y|| on the range of P(tau).
        out.tail_bound = 2 * std::exp(2 * gamma * t) * tail_bound(*envelope_, t, px.norm(), 2, gamma, T);
        out.forward = 2 * r.value;
        out.error += 2 * r.error + out.tail_bound;
    }
    if (t > 0 && qx.norm() > noise) {
        auto g = [&](Scalar tau) {
            return (h_.map(tau) * (evaluate_UQ_inverse(family_, projection_, tau, t) * qx)).squaredNorm();
        };
        const auto r = integrate(g, Scalar(0), t, anchored(policy_.quadrature, g(t)));
        out.backward = 2 * r.value;
        out.error += 2 * r.error;
    }
    out.L = out.forward - out.backward;
    return out;
}

QuadratureResult LyapunovEvaluator::trajectory_integral(Scalar t, Scalar s, const Vector& x) const {
    if (t < s) throw Error(ErrorCode::NonOrderedTimes, "trajectory integral needs t >= s");
    auto f = [&](Scalar tau) { return (h_.map(tau) * (family_(tau, s) * x)).squaredNorm(); };
    return integrate(f, s, t, anchored(policy_.quadrature, std::max(f(s), f(t))));
}

namespace {

InequalityReport finish(InequalityReport report) {
    report.max_residual = -std::numeric_limits<Scalar>::infinity();
    report.max_excess = -std::numeric_limits<Scalar>::infinity();
    for (const auto& e : report.entries) {
        report.max_residual = std::max(report.max_residual, e.residual);
        report.max_excess = std::max(report.max_excess, e.residual - e.tolerance);
    }
    if (report.entries.empty()) report.max_residual = report.max_excess = 0;
    report.pass = report.max_excess <= 0;
    return report;
}

}  // namespace

InequalityReport check_lyapunov_inequality(const LyapunovEvaluator& evaluator,
                                           const std::vector<LyapunovTriple>& triples) {
    InequalityReport report;
    for (const auto& tr : triples) {
        if (tr.t < tr.s) throw Error(ErrorCode::NonOrderedTimes, "triples need t >= s");
        const Vector y = evaluator.family()(tr.t, tr.s) * tr.x;
        const auto later = evaluator.evaluate(tr.t, y);
        const auto earlier = evaluator.evaluate(tr.s, tr.x);
        const auto path = evaluator.trajectory_integral(tr.t, tr.s, tr.x);
        const Scalar residual = later.L + path.value - earlier.L;
        const Scalar rounding = 1e-12 * (std::abs(later.forward) + std::abs(later.backward) + std::abs(path.value) +
                                         std::abs(earlier.forward) + std::abs(earlier.backward));
        report.entries.push_back(
            {tr.t, tr.s, tr.x, residual, later.error + earlier.error + path.error + rounding});
    }
    return finish(std::move(report));
}

InequalityReport check_lyapunov_inequality(const LyapunovEvaluator& evaluator,
                                           const std::function<Scalar(Scalar, const Vector&)>& candidate,
                                           const std::vector<LyapunovTriple>& triples) {
    InequalityReport report;
    for (const auto& tr : triples) {
        if (tr.t < tr.s) throw Error(ErrorCode::NonOrderedTimes, "triples need t >= s");
        const Vector y = evaluator.family()(tr.t, tr.s) * tr.x;
        const Scalar later = candidate(tr.t, y);
        const Scalar earlier = candidate(tr.s, tr.x);
        const auto path = evaluator.trajectory_integral(tr.t, tr.s, tr.x);
        const Scalar residual = later + path.value - earlier;
        const Scalar tol = path.error + 1e-10 * (std::abs(later) + std::abs(earlier) + std::abs(path.value));
        report.entries.push_back({tr.t, tr.s, tr.x, residual, tol});
    }
    return finish(std::move(report));
}

std::vector<LyapunovTriple> random_triples(int count, Scalar t_max, int dim, std::uint64_t seed) {
    PortableRng rng(seed);
    std::vector<LyapunovTriple> out;
    for (int i = 0; i < count; ++i) {
        Scalar a = rng.uniform(0, t_max);
        Scalar b = rng.uniform(0, t_max);
        if (a < b) std::swap(a, b);
        out.push_back({a, b, rng.unit_vector(dim)});
    }
    return out;
}

L1L2Report check_L1_L2(const LyapunovEvaluator& evaluator, Scalar K, Scalar gamma, Scalar beta,
                       const std::vector<Scalar>& times, const std::vector<Vector>& directions) {
    L1L2Report report;
    report.K = K;
    report.min_L_on_P = std::numeric_limits<Scalar>::infinity();
    report.max_L_on_Q = -std::numeric_limits<Scalar>::infinity();
    bool signs = true;
    for (Scalar t : times) {
        const Matrix p = evaluator.projection().P(t);
        const Matrix q = evaluator.projection().Q(t);
        for (const auto& x : directions) {
            const Vector px = p * x;
            const Vector qx = q * x;
            const Scalar bound = std::exp(2 * (gamma + beta) * t) * px.squaredNorm() +
                                 std::exp(-2 * (gamma - beta) * t) * qx.squaredNorm();
            const Scalar l = evaluator(t, x);
            if (bound > 0) report.tightest_K = std::max(report.tightest_K, std::abs(l) / bound);
            const Scalar lp = evaluator(t, px);
            const Scalar lq = evaluator(t, qx);
            report.min_L_on_P = std::min(report.min_L_on_P, lp);
            report.max_L_on_Q = std::max(report.max_L_on_Q, lq);
            signs = signs && lp >= 0 && lq <= 0;
        }
    }
    report.l1_holds = report.tightest_K <= K;
    report.l2_holds = signs;
    return report;
}

L1L2Report check_L1_L2(const LyapunovEvaluator& evaluator, Scalar K, Scalar gamma, Scalar beta, const GridSpec& grid,
                       const std::vector<Vector>& directions) {
    return check_L1_L2(evaluator, K, gamma, beta, time_points(grid), directions);
}

PipelineReport theorem_3_4_pipeline(const EvolutionFamily& family, const ProjectionFamily& projection,
                                    const CompatibilityEstimate& compatibility,
                                    const std::optional<TailEnvelope>& envelope, Scalar K, Scalar gamma, Scalar beta,
                                    const GridSpec& grid, const std::vector<Vector>& directions,
                                    const PipelineOptions& options) {
    const Scalar eps = compatibility.epsilon;
    if (!(gamma > eps)) {
        throw Error(ErrorCode::HypothesisViolated,
                    "need gamma > eps, got gamma = " + std::to_string(gamma) + ", eps = " + std::to_string(eps));
    }
    if (!(beta >= 0 && beta < gamma)) throw Error(ErrorCode::HypothesisViolated, "need 0 <= beta < gamma");
    if (!(K >= 1)) throw Error(ErrorCode::InvalidParam, "K must be at least 1");

    PipelineReport report;
    const LyapunovEvaluator lyapunov(family, projection, canonical_H(projection, gamma), envelope, grid);
    DatkoConfig config;
    config.p = 2;
    config.gamma = gamma;
    config.beta = beta;
    config.K = K;

    // Links: D_P = e^{-2 gamma t} L(t,Px)/2, L(t,Px) <= K e^{2(gamma+beta)t}||Px||^2,
    // D_Q = -e^{2 gamma t} L(t,Qx)/2, -L(t,Qx) <= K e^{-2(gamma-beta)t}||Qx||^2.
    Scalar link[4] = {0, 0, 0, 0};
    auto relative = [](Scalar lhs, Scalar rhs, Scalar err) {
        return (lhs - rhs - err) / std::max<Scalar>(std::abs(rhs), std::numeric_limits<Scalar>::min());
    };
    for (Scalar t : time_points(grid)) {
        const Matrix p = projection.P(t);
        const Matrix q = projection.Q(t);
        for (const auto& x : directions) {
            const Vector px = p * x;
            const Vector qx = q * x;
            const auto d = datko_functional(family, projection, t, x, config, envelope);
            const auto lp = lyapunov.evaluate(t, px);
            const auto lq = lyapunov.evaluate(t, qx);
            if (px.squaredNorm() > 0) {
                const Scalar scale = std::exp(-2 * gamma * t);
                link[0] = std::max(link[0], relative(d.d_p, scale * lp.L / 2, d.error() + scale * lp.error / 2));
                link[1] = std::max(link[1], relative(lp.L, K * std::exp(2 * (gamma + beta) * t) * px.squaredNorm(),
                                                     lp.error));
            }
            if (qx.squaredNorm() > 0 && t > 0) {
                const Scalar scale = std::exp(2 * gamma * t);
                link[2] = std::max(link[2], relative(d.d_q, -scale * lq.L / 2, d.error() + scale * lq.error / 2));
                link[3] = std::max(link[3], relative(-lq.L, K * std::exp(-2 * (gamma - beta) * t) * qx.squaredNorm(),
                                                     lq.error));
            }
        }
    }
    const char* names[4] = {"forward-datko-equals-lyapunov", "forward-growth-bound", "backward-datko-equals-lyapunov",
                            "backward-growth-bound"};
    report.chain_holds = true;
    for (int i = 0; i < 4; ++i) {
        const bool holds = link[i] <= options.link_tol;
        report.links.push_back({names[i], link[i], holds});
        report.chain_holds = report.chain_holds && holds;
    }

    report.datko = datko_certify(family, projection, grid, directions, config, envelope, eps);
    report.derived = derived_constants(compatibility.M, eps, compatibility.omega, report.datko.K_est, gamma, beta, 2);

    const auto& c = report.derived;
    auto pairs = time_pairs(grid);
    const auto extra = witness_catalogue(grid.t_max);
    pairs.insert(pairs.end(), extra.begin(), extra.end());
    const auto samples = collect_samples(family, projection, pairs, directions);
    report.p_violation = samples.p.empty() ? -1 : envelope_violation(samples.p, c.N1, c.weight1, c.rate1, Side::P);
    report.q_violation = samples.q.empty() ? -1 : envelope_violation(samples.q, c.N2, c.weight2, c.rate2, Side::Q);

    auto& out = report.constants;
    out.t_max = grid.t_max;
    out.p_empty = samples.p_empty;
    out.q_empty = samples.q_empty;
    out.p_fit = {c.N1, c.weight1, c.rate1, c.rate1, Side::P, report.p_violation <= options.feasibility_tol, false,
                 report.p_violation, c.weight1 < c.rate1, samples.p.size()};
    out.q_fit = {c.N2, c.weight2, c.rate2, c.rate2 - c.weight2, Side::Q, report.q_violation <= options.feasibility_tol,
                 false, report.q_violation, c.weight2 < c.rate2, samples.q.size()};
    out.dichotomy = report.chain_holds && report.datko.verdict == DatkoVerdict::CertifiedDichotomy &&
                    out.p_fit.feasible && out.q_fit.feasible && out.q_fit.alpha_below_nu;
    if (out.dichotomy) {
        out.merged = MergedConstants{std::max(c.N1, c.N2), c.weight1, std::min(out.p_fit.rate, out.q_fit.rate)};
    }
    return report;
}

QuadraticFormW polarize_W(const LyapunovEvaluator& evaluator, Scalar t, const Matrix& basis,
                          const PolarizationOptions& options) {
    const int n = evaluator.family().dim();
    const Matrix b = basis.size() == 0 ? Matrix::Identity(n, n) : basis;
    if (b.rows() != n || b.cols() != n) throw Error(ErrorCode::InvalidParam, "basis must be n x n");
    if (smallest_singular_value(b) < 1e-12) throw Error(ErrorCode::InvalidParam, "basis must be invertible");

    std::vector<Scalar> diag(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) diag[static_cast<std::size_t>(i)] = evaluator(t, b.col(i));
    Matrix coords(n, n);
    for (int i = 0; i < n; ++i) {
        coords(i, i) = diag[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < n; ++j) {
            const Vector sum = b.col(i) + b.col(j);
            coords(i, j) = coords(j, i) =
                (evaluator(t, sum) - diag[static_cast<std::size_t>(i)] - diag[static_cast<std::size_t>(j)]) / 2;
        }
    }
    // x = B c gives <W x, x> = c^T coords c, so W = B^{-T} coords B^{-1}.
    const Matrix b_inv = b.inverse();
    const Matrix w = b_inv.transpose() * coords * b_inv;

    QuadraticFormW out;
    out.t = t;
    out.asymmetry = spectral_norm((w - w.transpose()).eval());
    out.matrix = (w + w.transpose()) / 2;

    PortableRng rng(options.seed);
    const Matrix p = evaluator.projection().P(t);
    const Matrix q = evaluator.projection().Q(t);
    out.p_range_nonnegative = true;
    out.q_range_nonpositive = true;
    for (int k = 0; k < options.held_out; ++k) {
        const Vector x = rng.unit_vector(n);
        const Scalar l = evaluator(t, x);
        const Scalar form = x.dot(out.matrix * x);
        out.consistency = std::max(out.consistency, std::abs(form - l) / (1 + std::abs(l)));
        const Vector px = p * x;
        const Vector qx = q * x;
        const Scalar fp = px.dot(out.matrix * px);
        const Scalar fq = qx.dot(out.matrix * qx);
        const Scalar scale = options.tolerance * (1 + std::abs(l));
        out.p_range_nonnegative = out.p_range_nonnegative && fp >= -scale;
        out.q_range_nonpositive = out.q_range_nonpositive && fq <= scale;
    }
    if (out.consistency > options.tolerance) {
        throw Error(ErrorCode::NotQuadratic,
                    "polarized form misses L by a relative " + std::to_string(out.consistency));
    }
    return out;
}

}  // namespace dichotomy
