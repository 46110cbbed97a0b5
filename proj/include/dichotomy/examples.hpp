#pragma once

#include "dichotomy/core.hpp"
#include "dichotomy/grid.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dichotomy {

enum class ExampleId { Ex2_5, Ex2_6, Ex2_8, Ex3_2 };

[[nodiscard]] const char* to_string(ExampleId id) noexcept;
[[nodiscard]] std::optional<ExampleId> parse_example_id(std::string_view name);

struct ExampleParams {
    /// Shift of the similarity family; must be positive.
    Scalar a = 1;
};

/// A machine-checkable claim about an example, stored as data.
///
/// `values` depends on the kind:
///   EnvelopeConstants:      {N, alpha, nu} for `side`
///   NoDichotomy:            {} (the `side` fit is infeasible)
///   UniformWitness:         {per-step log growth, steps} along the side's resonant sequence
///   CompatibilityConstants: {M, eps, omega}
///   SimilarityBound:        {bound on ||S(t)||}
///   ProjectionNormGrowth:   {a}: ||P(t)|| = sqrt(1 + (t+a)^2) >= t + a
///   DecayTrend:             {x1, x2}: every solution from x decays
///   DatkoBound:             {p, gamma, beta, K}
struct KnownFact {
    enum class Kind {
        EnvelopeConstants,
        NoDichotomy,
        UniformWitness,
        CompatibilityConstants,
        SimilarityBound,
        ProjectionNormGrowth,
        DecayTrend,
        DatkoBound,
    };

    Kind kind;
    Side side = Side::P;
    std::vector<Scalar> values;
    Scalar tolerance = 0;
    std::string claim;
};

[[nodiscard]] const char* to_string(KnownFact::Kind kind) noexcept;

struct PaperExample {
    ExampleId id;
    ExampleParams params;
    EvolutionFamily family;
    ProjectionFamily projection;
    /// Closed forms of ||U(t,s)y||/||y|| on the range of P(s) and of
    /// ||U_Q(s,t)z||/||z|| on the range of Q(t).
    std::function<Scalar(Scalar, Scalar)> p_norm;
    std::function<Scalar(Scalar, Scalar)> q_norm;
    std::optional<CompatibilityConstants> compatibility;
    std::vector<KnownFact> known_facts;
};

/// Throws InvalidParam for a <= 0 on the similarity example.
[[nodiscard]] PaperExample build(ExampleId id, const ExampleParams& params = {});

struct CosineComponent {
    Scalar c = 0;
    Scalar d = 0;
    bool decaying = true;
};

/// Diagonal family with exponents f(t) = t (c + d cos^2 t) per component.
[[nodiscard]] EvolutionFamily generalized_cosine_family(const std::vector<CosineComponent>& components);

/// One-dimensional instance; sign +1 decays forward, -1 grows.
[[nodiscard]] EvolutionFamily generalized_cosine_family(Scalar c, Scalar d, int sign);

struct FactCheck {
    bool reproduced = false;
    /// Measured quantity compared against the claim (meaning depends on the kind).
    Scalar measured = 0;
    std::string detail;
};

/// Re-derives one known fact with the toolkit on `grid`.
[[nodiscard]] FactCheck verify_known_fact(const PaperExample& example, const KnownFact& fact, const GridSpec& grid);

}  // namespace dichotomy
