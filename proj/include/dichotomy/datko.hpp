#pragma once

#include "dichotomy/core.hpp"
#include "dichotomy/envelope.hpp"
#include "dichotomy/quadrature.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dichotomy {

struct DatkoConfig {
    Scalar p = 2;
    Scalar gamma = 1;
    Scalar beta = 0;
    /// Forward truncation horizon; chosen from the tail envelope when absent.
    std::optional<Scalar> tail_T;
    QuadraturePolicy quadrature;
    /// Automatic horizons make the tail at most tail_fraction * ||P(t)x||^p.
    Scalar tail_fraction = 1e-12;
    Scalar max_tail_T = 400;
    /// Claimed constant in the bound; when present a larger measured ratio fails the bound.
    std::optional<Scalar> K;
};

/// P-side bound ||U(tau,t)P(t)x|| <= N e^{alpha t} e^{-nu (tau-t)} ||P(t)x|| used for tails.
struct TailEnvelope {
    Scalar N = 1;
    Scalar alpha = 0;
    Scalar nu = 0;
};

[[nodiscard]] TailEnvelope tail_envelope(const EnvelopeFit& p_fit);

struct DatkoValue {
    Scalar d_p = 0;
    Scalar d_q = 0;
    /// Bound on the forward integral beyond t + tail_T.
    Scalar tail_bound = 0;
    Scalar tail_T = 0;
    QuadratureResult forward;
    QuadratureResult backward;

    [[nodiscard]] Scalar error() const { return forward.error + backward.error + tail_bound; }
};

/// The two integrands tau -> e^{p gamma (tau-t)} ||U(tau,t)P(t)x||^p on [t, oo)
/// and tau -> e^{p gamma (t-tau)} ||U_Q(tau,t)x||^p on [0, t].
struct DatkoIntegrands {
    std::function<Scalar(Scalar)> forward;
    std::function<Scalar(Scalar)> backward;
};

[[nodiscard]] DatkoIntegrands datko_integrands(const EvolutionFamily& family, const ProjectionFamily& projection,
                                               Scalar t, const Vector& x, const DatkoConfig& config);

/// Truncation horizon for a forward integral at time t; throws DivergentTail
/// unless nu > gamma.
[[nodiscard]] Scalar automatic_tail_T(const TailEnvelope& envelope, Scalar t, Scalar p, Scalar gamma,
                                      Scalar fraction, Scalar max_T);

/// N^p e^{p alpha t} ||Px||^p e^{-p (nu-gamma) T} / (p (nu-gamma)).
[[nodiscard]] Scalar tail_bound(const TailEnvelope& envelope, Scalar t, Scalar px_norm, Scalar p, Scalar gamma,
                                Scalar T);

/// D_P and D_Q at (t, x). Throws DivergentTail when P(t)x != 0 and no envelope
/// with nu > gamma is available, and QuadratureFailure from the integrator.
[[nodiscard]] DatkoValue datko_functional(const EvolutionFamily& family, const ProjectionFamily& projection, Scalar t,
                                          const Vector& x, const DatkoConfig& config,
                                          const std::optional<TailEnvelope>& envelope);

struct DatkoPoint {
    Scalar t;
    int direction;
    Vector x;
    Scalar d_p;
    Scalar d_q;
    /// e^{p beta t} (||P(t)x||^p + ||Q(t)x||^p).
    Scalar bound_rhs;
    Scalar error;
};

enum class DatkoVerdict { CertifiedDichotomy, BoundHoldsButHypothesesFail, BoundFails };

[[nodiscard]] const char* to_string(DatkoVerdict verdict) noexcept;

struct DatkoReport {
    DatkoConfig config;
    std::vector<DatkoPoint> per_point;
    /// Largest (D_P + D_Q) / bound_rhs over the grid, before flooring at 1.
    Scalar K_raw = 0;
    Scalar K_est = 1;
    /// Largest error estimate relative to bound_rhs.
    Scalar K_error = 0;
    Scalar epsilon = 0;
    bool gamma_exceeds_epsilon = false;
    bool beta_in_range = false;
    DatkoVerdict verdict = DatkoVerdict::BoundFails;
    std::size_t skipped_points = 0;
};

/// Evaluates the functional over grid times and directions.
[[nodiscard]] DatkoReport datko_certify(const EvolutionFamily& family, const ProjectionFamily& projection,
                                        const GridSpec& grid, const std::vector<Vector>& directions,
                                        const DatkoConfig& config, const std::optional<TailEnvelope>& envelope,
                                        Scalar epsilon);

/// Same, on explicit sample times.
[[nodiscard]] DatkoReport datko_certify(const EvolutionFamily& family, const ProjectionFamily& projection,
                                        const std::vector<Scalar>& times, const std::vector<Vector>& directions,
                                        const DatkoConfig& config, const std::optional<TailEnvelope>& envelope,
                                        Scalar epsilon);

/// Bounds N1 e^{weight1 s} e^{-rate1 (t-s)} on the P side and
/// N2 e^{weight2 t} e^{-rate2 (t-s)} on the Q side.
struct DerivedConstants {
    Scalar N1;
    Scalar rate1;
    Scalar weight1;
    Scalar N2;
    Scalar rate2;
    Scalar weight2;
};

/// Throws HypothesisViolated unless gamma > epsilon and 0 <= beta < gamma.
[[nodiscard]] DerivedConstants derived_constants(Scalar M, Scalar epsilon, Scalar omega, Scalar K, Scalar gamma,
                                                 Scalar beta, Scalar p);

struct NecessaryOptions {
    /// Defaults to the midpoint of (0, min nu).
    std::optional<Scalar> gamma;
    Scalar gamma_margin = 1e-3;
};

/// beta = max alpha, gamma in (0, min nu), K = max((N1^p + N2^p) / (p (nu - gamma)), 1)
/// with nu = min(nu1, nu2) taken from the two fits as written.
[[nodiscard]] DatkoConfig necessary_direction_constants(const DichotomyConstants& dichotomy, Scalar p,
                                                        const NecessaryOptions& options = {});

/// Same from explicit per-side constants.
[[nodiscard]] DatkoConfig necessary_direction_constants(Scalar N1, Scalar alpha1, Scalar nu1, Scalar N2,
                                                        Scalar alpha2, Scalar nu2, Scalar p,
                                                        const NecessaryOptions& options = {});

}  // namespace dichotomy
