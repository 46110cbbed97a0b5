#include "dichotomy/datko.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dichotomy {

TailEnvelope tail_envelope(const EnvelopeFit& p_fit) {
    if (p_fit.side != Side::P) throw Error(ErrorCode::InvalidParam, "tail envelope needs the P-side fit");
    return {p_fit.N, p_fit.alpha, p_fit.nu};
}

const char* to_string(DatkoVerdict verdict) noexcept {
    switch (verdict) {
        case DatkoVerdict::CertifiedDichotomy: return "certified-dichotomy";
        case DatkoVerdict::BoundHoldsButHypothesesFail: return "bound-holds-but-hypotheses-fail";
        case DatkoVerdict::BoundFails: return "bound-fails";
    }
    return "unknown";
}

namespace {

void validate(const DatkoConfig& config) {
    if (!(config.p > 0)) throw Error(ErrorCode::InvalidParam, "p must be positive");
    if (!(config.gamma > 0)) throw Error(ErrorCode::InvalidParam, "gamma must be positive");
    if (!(config.beta >= 0)) throw Error(ErrorCode::InvalidParam, "beta must be nonnegative");
    if (config.tail_T && !(*config.tail_T > 0)) throw Error(ErrorCode::InvalidParam, "tail_T must be positive");
    if (config.K && !(*config.K >= 1)) throw Error(ErrorCode::InvalidParam, "K must be at least 1");
}

}  // namespace

DatkoIntegrands datko_integrands(const EvolutionFamily& family, const ProjectionFamily& projection, Scalar t,
                                 const Vector& x, const DatkoConfig& config) {
    const Vector px = projection.P(t) * x;
    const Scalar p = config.p;
    const Scalar gamma = config.gamma;
    DatkoIntegrands out;
    out.forward = [&family, px, p, gamma, t](Scalar tau) {
        const Scalar norm = (family(tau, t) * px).norm();
        // Log domain: the weight alone overflows on long horizons where the product is tiny.
        return norm > 0 ? std::exp(p * (gamma * (tau - t) + std::log(norm))) : Scalar(0);
    };
    out.backward = [&family, &projection, x, p, gamma, t](Scalar tau) {
        const Scalar norm = (evaluate_UQ_inverse(family, projection, tau, t) * x).norm();
        return std::exp(p * gamma * (t - tau)) * std::pow(norm, p);
    };
    return out;
}

Scalar automatic_tail_T(const TailEnvelope& envelope, Scalar t, Scalar p, Scalar gamma, Scalar fraction,
                        Scalar max_T) {
    const Scalar gap = envelope.nu - gamma;
    if (!(gap > 0)) {
        throw Error(ErrorCode::DivergentTail, "envelope decay rate " + std::to_string(envelope.nu) +
                                                  " does not exceed gamma = " + std::to_string(gamma));
    }
    const Scalar rate = p * gap;
    const Scalar log_scale = p * std::log(envelope.N) + p * envelope.alpha * t - std::log(rate);
    const Scalar T = (log_scale - std::log(fraction)) / rate;
    return std::clamp<Scalar>(T, 1, max_T);
}

Scalar tail_bound(const TailEnvelope& envelope, Scalar t, Scalar px_norm, Scalar p, Scalar gamma, Scalar T) {
    const Scalar gap = envelope.nu - gamma;
    if (!(gap > 0)) return std::numeric_limits<Scalar>::infinity();
    const Scalar rate = p * gap;
    return std::exp(p * std::log(envelope.N) + p * envelope.alpha * t - rate * T) * std::pow(px_norm, p) / rate;
}

DatkoValue datko_functional(const EvolutionFamily& family, const ProjectionFamily& projection, Scalar t,
                            const Vector& x, const DatkoConfig& config, const std::optional<TailEnvelope>& envelope) {
    validate(config);
    if (t < 0) throw Error(ErrorCode::InvalidParam, "t must be nonnegative");
    DatkoValue value;
    const auto integrands = datko_integrands(family, projection, t, x, config);
    const Scalar px_norm = (projection.P(t) * x).norm();

    if (px_norm > 0) {
        if (!envelope) throw Error(ErrorCode::DivergentTail, "no P-side envelope available for the tail");
        const Scalar T = config.tail_T.value_or(automatic_tail_T(*envelope, t, config.p, config.gamma,
                                                                 config.tail_fraction, config.max_tail_T));
        if (!(envelope->nu > config.gamma)) {
            throw Error(ErrorCode::DivergentTail, "envelope decay rate does not exceed gamma");
        }
        value.tail_T = T;
        value.tail_bound = tail_bound(*envelope, t, px_norm, config.p, config.gamma, T);
        value.forward = integrate(integrands.forward, t, t + T, config.quadrature);
        value.d_p = value.forward.value;
    } else {
        value.forward.breakpoints = {t, t};
    }

    if (t > 0) {
        value.backward = integrate(integrands.backward, Scalar(0), t, config.quadrature);
        value.d_q = value.backward.value;
    } else {
        value.backward.breakpoints = {0, 0};
    }
    return value;
}

DatkoReport datko_certify(const EvolutionFamily& family, const ProjectionFamily& projection,
                          const std::vector<Scalar>& times, const std::vector<Vector>& directions,
                          const DatkoConfig& config, const std::optional<TailEnvelope>& envelope, Scalar epsilon) {
    validate(config);
    DatkoReport report;
    report.config = config;
    report.epsilon = epsilon;
    for (Scalar t : times) {
        const Matrix p_t = projection.P(t);
        const Matrix q_t = projection.Q(t);
        for (std::size_t k = 0; k < directions.size(); ++k) {
            const Vector& x = directions[k];
            const Scalar rhs = std::exp(config.p * config.beta * t) *
                               (std::pow((p_t * x).norm(), config.p) + std::pow((q_t * x).norm(), config.p));
            if (!(rhs > 0)) {
                ++report.skipped_points;
                continue;
            }
            const auto v = datko_functional(family, projection, t, x, config, envelope);
            report.per_point.push_back({t, static_cast<int>(k), x, v.d_p, v.d_q, rhs, v.error()});
            report.K_raw = std::max(report.K_raw, (v.d_p + v.d_q) / rhs);
            report.K_error = std::max(report.K_error, v.error() / rhs);
        }
    }
    report.K_est = std::max<Scalar>(1, report.K_raw);
    report.gamma_exceeds_epsilon = config.gamma > epsilon;
    report.beta_in_range = config.beta >= 0 && config.beta < config.gamma;

    bool bound_holds = std::isfinite(report.K_raw);
    if (bound_holds && config.K) bound_holds = report.K_raw - report.K_error <= *config.K;
    if (!bound_holds) {
        report.verdict = DatkoVerdict::BoundFails;
    } else if (!report.gamma_exceeds_epsilon || !report.beta_in_range) {
        report.verdict = DatkoVerdict::BoundHoldsButHypothesesFail;
    } else {
        report.verdict = DatkoVerdict::CertifiedDichotomy;
    }
    return report;
}

DatkoReport datko_certify(const EvolutionFamily& family, const ProjectionFamily& projection, const GridSpec& grid,
                          const std::vector<Vector>& directions, const DatkoConfig& config,
                          const std::optional<TailEnvelope>& envelope, Scalar epsilon) {
    return datko_certify(family, projection, time_points(grid), directions, config, envelope, epsilon);
}

DerivedConstants derived_constants(Scalar M, Scalar epsilon, Scalar omega, Scalar K, Scalar gamma, Scalar beta,
                                   Scalar p) {
    if (!(gamma > epsilon)) {
        throw Error(ErrorCode::HypothesisViolated, "need gamma > eps, got gamma = " + std::to_string(gamma) +
                                                       ", eps = " + std::to_string(epsilon));
    }
    if (!(beta >= 0 && beta < gamma)) {
        throw Error(ErrorCode::HypothesisViolated, "need 0 <= beta < gamma, got beta = " + std::to_string(beta));
    }
    if (!(p > 0) || !(K >= 1) || !(M >= 1) || !(epsilon >= 0)) {
        throw Error(ErrorCode::InvalidParam, "need p > 0, K >= 1, M >= 1, eps >= 0");
    }
    const Scalar long_range = std::pow(K, 1 / p) * M * std::exp(gamma + omega);
    DerivedConstants c;
    // t >= s + 1 gives the first term; t in [s, s + 1) the second.
    c.N1 = std::max(long_range, M * std::exp(omega + gamma - epsilon));
    c.N2 = std::max(long_range, M * std::exp(omega + gamma));
    c.rate1 = gamma - epsilon;
    c.weight1 = beta + epsilon;
    c.rate2 = gamma + epsilon;
    c.weight2 = beta + epsilon;
    return c;
}

DatkoConfig necessary_direction_constants(Scalar N1, Scalar alpha1, Scalar nu1, Scalar N2, Scalar alpha2, Scalar nu2,
                                          Scalar p, const NecessaryOptions& options) {
    if (!(p > 0)) throw Error(ErrorCode::InvalidParam, "p must be positive");
    const Scalar nu = std::min(nu1, nu2);
    if (!(nu > 0)) throw Error(ErrorCode::InvalidParam, "decay rates must be positive");
    Scalar gamma = options.gamma.value_or(nu / 2);
    gamma = std::min(gamma, nu - std::min(options.gamma_margin, nu / 2));
    if (!(gamma > 0)) throw Error(ErrorCode::InvalidParam, "gamma must be positive");
    DatkoConfig config;
    config.p = p;
    config.gamma = gamma;
    config.beta = std::max(alpha1, alpha2);
    config.K = std::max<Scalar>((std::pow(N1, p) + std::pow(N2, p)) / (p * (nu - gamma)), 1);
    return config;
}

DatkoConfig necessary_direction_constants(const DichotomyConstants& dichotomy, Scalar p,
                                          const NecessaryOptions& options) {
    if (!dichotomy.dichotomy) throw Error(ErrorCode::HypothesisViolated, "no feasible dichotomy constants");
    const auto& a = dichotomy.p_fit;
    const auto& b = dichotomy.q_fit;
    return necessary_direction_constants(a.N, a.alpha, a.nu, b.N, b.alpha, b.nu, p, options);
}

}  // namespace dichotomy
