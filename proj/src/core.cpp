#include "dichotomy/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dichotomy {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_ordered(Scalar t, Scalar s) {
    if (t < s) {
        throw Error(ErrorCode::NonOrderedTimes,
                    "U(t, s) requires t >= s, got t = " + std::to_string(t) + ", s = " + std::to_string(s));
    }
}

/// Orthonormal basis of the range of a projector, of dimension round(trace).
Matrix range_basis(const Matrix& projector) {
    const auto rank = static_cast<Eigen::Index>(std::lround(projector.trace()));
    if (rank <= 0) return Matrix(projector.rows(), 0);
    Eigen::JacobiSVD<Matrix> svd(projector, Eigen::ComputeFullU);
    return svd.matrixU().leftCols(rank);
}

}  // namespace

EvolutionFamily EvolutionFamily::closed_form_diagonal(std::vector<DiagonalComponent> components) {
    if (components.empty()) throw Error(ErrorCode::InvalidParam, "diagonal family needs at least one component");
    for (const auto& c : components) {
        if (!c.exponent) throw Error(ErrorCode::InvalidParam, "diagonal component without exponent");
    }
    const int n = static_cast<int>(components.size());
    return EvolutionFamily(n, Diagonal{std::move(components)});
}

EvolutionFamily EvolutionFamily::similarity_transformed(const EvolutionFamily& base, MatrixFunction s,
                                                        MatrixFunction s_inverse) {
    if (!s || !s_inverse) throw Error(ErrorCode::InvalidParam, "similarity needs S(t) and its inverse");
    return EvolutionFamily(base.dim(),
                           Similarity{std::make_shared<const EvolutionFamily>(base), std::move(s), std::move(s_inverse)});
}

EvolutionFamily EvolutionFamily::ode_propagated(int dim, MatrixFunction coefficient, OdePolicy policy) {
    if (dim <= 0) throw Error(ErrorCode::InvalidParam, "dimension must be positive");
    if (!coefficient) throw Error(ErrorCode::InvalidParam, "ODE family needs a coefficient matrix");
    return EvolutionFamily(dim, Ode{std::move(coefficient), policy});
}

EvolutionFamily::Kind EvolutionFamily::kind() const noexcept {
    return std::visit(overloaded{[](const Diagonal&) { return Kind::ClosedFormDiagonal; },
                                 [](const Similarity&) { return Kind::SimilarityTransformed; },
                                 [](const Ode&) { return Kind::OdePropagated; }},
                      impl_);
}

Matrix EvolutionFamily::operator()(Scalar t, Scalar s) const {
    require_ordered(t, s);
    return std::visit(
        overloaded{[&](const Diagonal& d) -> Matrix {
                       Vector diag(dim_);
                       for (int i = 0; i < dim_; ++i) {
                           const auto& c = d.components[static_cast<std::size_t>(i)];
                           const Scalar change = c.exponent(t) - c.exponent(s);
                           diag(i) = std::exp(c.decaying ? -change : change);
                       }
                       return diag.asDiagonal();
                   },
                   [&](const Similarity& sim) -> Matrix { return sim.s(t) * (*sim.base)(t, s) * sim.s_inverse(s); },
                   [&](const Ode& ode) -> Matrix { return propagate(ode.coefficient, dim_, s, t, ode.policy); }},
        impl_);
}

Matrix EvolutionFamily::similarity(Scalar t) const {
    if (const auto* sim = std::get_if<Similarity>(&impl_)) return sim->s(t);
    return Matrix::Identity(dim_, dim_);
}

Matrix EvolutionFamily::similarity_inverse(Scalar t) const {
    if (const auto* sim = std::get_if<Similarity>(&impl_)) return sim->s_inverse(t);
    return Matrix::Identity(dim_, dim_);
}

const char* to_string(EvolutionFamily::Kind kind) noexcept {
    switch (kind) {
        case EvolutionFamily::Kind::ClosedFormDiagonal: return "ClosedFormDiagonal";
        case EvolutionFamily::Kind::SimilarityTransformed: return "SimilarityTransformed";
        case EvolutionFamily::Kind::OdePropagated: return "OdePropagated";
    }
    return "Unknown";
}

ProjectionFamily::ProjectionFamily(int dim, MatrixFunction projector) : dim_(dim), projector_(std::move(projector)) {
    if (dim <= 0) throw Error(ErrorCode::InvalidParam, "dimension must be positive");
    if (!projector_) throw Error(ErrorCode::InvalidParam, "projection family needs P(t)");
}

ProjectionFamily ProjectionFamily::constant(const Matrix& p) {
    if (p.rows() != p.cols()) throw Error(ErrorCode::InvalidParam, "projector must be square");
    return ProjectionFamily(static_cast<int>(p.rows()), [p](Scalar) { return p; });
}

Matrix ProjectionFamily::P(Scalar t) const {
    Matrix p = projector_(t);
    if (p.rows() != dim_ || p.cols() != dim_) throw Error(ErrorCode::InvalidParam, "P(t) has the wrong shape");
    return p;
}

ProjectionReport check_projection(const ProjectionFamily& projection, const GridSpec& grid, Scalar tol) {
    ProjectionReport report;
    for (Scalar t : time_points(grid)) {
        const Matrix p = projection.P(t);
        const Matrix q = projection.Q(t);
        const Scalar scale = std::max<Scalar>(1, spectral_norm(p));
        report.idempotency_residual = std::max(report.idempotency_residual, idempotency_residual(p) / scale);
        report.complement_residual =
            std::max({report.complement_residual, spectral_norm((p * q).eval()) / (scale * scale),
                      spectral_norm((q * p).eval()) / (scale * scale)});
    }
    report.pass = report.idempotency_residual <= tol && report.complement_residual <= tol;
    return report;
}

Matrix evaluate_UQ_inverse(const EvolutionFamily& family, const ProjectionFamily& projection, Scalar s, Scalar t,
                           Scalar threshold) {
    require_ordered(t, s);
    const Matrix q_s = projection.Q(s);
    const Matrix q_t = projection.Q(t);
    const Matrix basis_s = range_basis(q_s);
    const Matrix basis_t = range_basis(q_t);
    const int n = family.dim();
    if (basis_s.cols() == 0 && basis_t.cols() == 0) return Matrix::Zero(n, n);
    if (basis_s.cols() != basis_t.cols()) {
        throw Error(ErrorCode::SingularRestriction, "Q(s) and Q(t) have different ranks");
    }
    const Matrix image = family(t, s) * basis_s;
    const Scalar sigma_min = smallest_singular_value(image);
    const Scalar sigma_max = spectral_norm(image);
    if (!(sigma_min > 0) || !(sigma_min >= threshold * sigma_max)) {
        throw Error(ErrorCode::SingularRestriction,
                    "restricted operator has reciprocal condition " + std::to_string(sigma_min / sigma_max));
    }
    // Coordinates of U(t,s)|Q(s) between the two orthonormal range bases.
    const Matrix restricted = basis_t.transpose() * image;
    return basis_s * restricted.partialPivLu().solve(basis_t.transpose() * q_t);
}

namespace {

template <typename Evaluate>
AxiomReport check_axioms_impl(const Evaluate& u, int dim, const GridSpec& grid, Scalar tol,
                              const AxiomOptions& options) {
    AxiomReport report;
    report.tol = tol;
    report.continuity_bound = options.continuity_bound;
    const Matrix id = Matrix::Identity(dim, dim);

    for (Scalar t : time_points(grid)) {
        report.identity_residual = std::max(report.identity_residual, spectral_norm((u(t, t) - id).eval()));
    }

    for (const auto& tr : time_triples(grid, options.max_triple_points)) {
        const Matrix direct = u(tr.t, tr.t0);
        const Matrix composed = u(tr.t, tr.s) * u(tr.s, tr.t0);
        const Scalar r = spectral_norm((composed - direct).eval()) / std::max<Scalar>(1, spectral_norm(direct));
        if (!(r <= report.cocycle_residual)) {
            report.cocycle_residual = std::isfinite(r) ? r : std::numeric_limits<Scalar>::infinity();
            report.worst_triple = tr;
        }
    }

    const Scalar h = options.difference_step;
    for (const auto& pr : time_pairs(GridSpec{grid.t_max, std::min(grid.time_points, 11), 0, false})) {
        const Matrix base = u(pr.t, pr.s);
        const Scalar scale = std::max<Scalar>(1, spectral_norm(base));
        const Scalar dt = spectral_norm((u(pr.t + h, pr.s) - base).eval()) / (h * scale);
        Scalar ds = 0;
        if (pr.s + h <= pr.t) ds = spectral_norm((u(pr.t, pr.s + h) - base).eval()) / (h * scale);
        report.continuity_quotient = std::max({report.continuity_quotient, dt, ds});
    }

    report.pass = report.identity_residual <= tol && report.cocycle_residual <= tol &&
                  report.continuity_quotient <= options.continuity_bound;
    return report;
}

}  // namespace

AxiomReport check_axioms(const EvolutionFamily& family, const GridSpec& grid, Scalar tol,
                         const AxiomOptions& options) {
    return check_axioms_impl([&](Scalar t, Scalar s) { return family(t, s); }, family.dim(), grid, tol, options);
}

AxiomReport check_axioms(const Propagator& family, int dim, const GridSpec& grid, Scalar tol,
                         const AxiomOptions& options) {
    return check_axioms_impl(family, dim, grid, tol, options);
}

const char* to_string(CompatibilityEstimate::Source source) noexcept {
    return source == CompatibilityEstimate::Source::Fitted ? "fitted" : "asserted";
}

namespace {

struct GrowthSample {
    Scalar s;
    Scalar delta;
    Scalar log_value;
};

/// Smallest m >= 0, then omega, then eps with log v <= m + eps s + omega delta.
CompatibilityConstants fit_growth(const std::vector<GrowthSample>& samples, const CompatibilityThresholds& th,
                                  Scalar& log_m) {
    Scalar m = 0;
    for (const auto& x : samples) {
        m = std::max(m, x.log_value - th.epsilon_max * x.s - th.omega_max * x.delta);
    }
    Scalar omega = th.omega_min;
    for (const auto& x : samples) {
        if (x.delta > 0) omega = std::max(omega, (x.log_value - m - th.epsilon_max * x.s) / x.delta);
    }
    Scalar eps = 0;
    for (const auto& x : samples) {
        if (x.s > 0) eps = std::max(eps, (x.log_value - m - omega * x.delta) / x.s);
    }
    log_m = m;
    return {std::exp(m), eps, omega};
}

Scalar growth_violation(const std::vector<GrowthSample>& samples, const CompatibilityConstants& c) {
    Scalar worst = -std::numeric_limits<Scalar>::infinity();
    const Scalar log_m = std::log(c.M);
    for (const auto& x : samples) {
        worst = std::max(worst, x.log_value - (log_m + c.epsilon * x.s + c.omega * x.delta));
    }
    return worst;
}

}  // namespace

CompatibilityEstimate check_compatibility(const EvolutionFamily& family, const ProjectionFamily& projection,
                                          const GridSpec& grid, const CompatibilityThresholds& thresholds) {
    if (family.dim() != projection.dim()) throw Error(ErrorCode::InvalidParam, "family and projection dimensions differ");
    CompatibilityEstimate est;
    const auto dirs = directions(grid, family.dim());
    std::vector<GrowthSample> samples;

    for (const auto& pr : time_pairs(grid)) {
        const Matrix u = family(pr.t, pr.s);
        const Matrix p_t = projection.P(pr.t);
        const Matrix p_s = projection.P(pr.s);
        const Scalar scale = std::max({Scalar(1), spectral_norm(p_t) * spectral_norm(u), spectral_norm(u) * spectral_norm(p_s)});
        est.commutation_residual =
            std::max(est.commutation_residual, spectral_norm((p_t * u - u * p_s).eval()) / scale);

        Matrix uq;
        try {
            uq = evaluate_UQ_inverse(family, projection, pr.s, pr.t, thresholds.invertibility_threshold);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SingularRestriction) throw;
            throw Error(ErrorCode::RestrictionNotInvertible, e.what());
        }
        const Matrix q_s = projection.Q(pr.s);
        const Matrix q_t = projection.Q(pr.t);
        // Scaled by the factor norms: a matrix representation of U loses the
        // small restricted part to cancellation when ||U|| is large.
        const Scalar factors = spectral_norm(uq) * spectral_norm(u) * spectral_norm(q_s);
        est.invertibility_residual =
            std::max(est.invertibility_residual,
                     spectral_norm((uq * (u * q_s) - q_s).eval()) / std::max<Scalar>({1, spectral_norm(q_s), factors}));

        const Scalar delta = pr.t - pr.s;
        for (const auto& x : dirs) {
            const Vector y = p_s * x;
            if (y.norm() > 1e-12) {
                samples.push_back({pr.s, delta, std::log((u * y).norm() / y.norm())});
            }
            const Vector z = q_t * x;
            if (z.norm() > 1e-12) {
                samples.push_back({pr.s, delta, std::log((uq * z).norm() / z.norm())});
            }
        }
    }

    if (est.commutation_residual > thresholds.structural_tol) {
        throw Error(ErrorCode::CommutationViolation,
                    "||P(t)U(t,s) - U(t,s)P(s)|| reaches " + std::to_string(est.commutation_residual));
    }
    if (est.invertibility_residual > thresholds.structural_tol) {
        throw Error(ErrorCode::RestrictionNotInvertible,
                    "||U_Q(s,t)U(t,s)Q(s) - Q(s)|| reaches " + std::to_string(est.invertibility_residual));
    }

    est.sample_count = samples.size();
    Scalar log_m = 0;
    est.fitted = fit_growth(samples, thresholds, log_m);
    const bool fit_ok = log_m <= thresholds.log_m_max;

    if (thresholds.asserted) {
        const auto& a = *thresholds.asserted;
        if (!(a.M >= 1) || !(a.epsilon >= 0) || !(a.omega > 0)) {
            throw Error(ErrorCode::InvalidParam, "asserted constants need M >= 1, eps >= 0, omega > 0");
        }
        est.source = CompatibilityEstimate::Source::Asserted;
        est.M = a.M;
        est.epsilon = a.epsilon;
        est.omega = a.omega;
        est.slack = samples.empty() ? 0 : growth_violation(samples, a);
        est.feasible = est.slack <= thresholds.assertion_log_tol;
    } else {
        est.M = est.fitted.M;
        est.epsilon = est.fitted.epsilon;
        est.omega = est.fitted.omega;
        est.slack = fit_ok ? (samples.empty() ? 0 : growth_violation(samples, est.fitted)) : log_m - thresholds.log_m_max;
        est.feasible = fit_ok;
    }
    est.pass = est.feasible;
    return est;
}

TrendReport check_asymptotics(const EvolutionFamily& family, const ProjectionFamily& projection, Scalar t0,
                              const Vector& x0, Scalar horizon, const TrendOptions& options) {
    if (!(horizon > t0)) throw Error(ErrorCode::InvalidParam, "horizon must exceed t0");
    TrendReport report;
    report.t0 = t0;
    report.horizon = horizon;
    const Vector px = projection.P(t0) * x0;
    const Vector qx = projection.Q(t0) * x0;
    const int n = std::max(2, options.samples);
    for (int i = 0; i < n; ++i) {
        const Scalar t = t0 + (horizon - t0) * static_cast<Scalar>(i) / static_cast<Scalar>(n - 1);
        const Matrix u = family(t, t0);
        report.curve.push_back({t, (u * px).norm(), (u * qx).norm()});
    }
    const auto& first = report.curve.front();
    const auto& last = report.curve.back();
    report.p_decays = last.p_norm <= first.p_norm * options.decay_factor;
    report.q_exempt = qx.norm() == 0;
    report.q_grows = !report.q_exempt && last.q_norm >= first.q_norm * options.growth_factor;
    const Scalar total_first = x0.norm();
    const Scalar total_last = (family(horizon, t0) * x0).norm();
    report.total_decays = total_last <= total_first * options.decay_factor;
    report.pass = report.p_decays && (report.q_grows || report.q_exempt);
    return report;
}

}  // namespace dichotomy
