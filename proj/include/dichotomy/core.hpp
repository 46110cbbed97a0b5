#pragma once

#include "dichotomy/grid.hpp"
#include "dichotomy/ode.hpp"
#include "dichotomy/types.hpp"

#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace dichotomy {

/// One diagonal entry of a closed-form family with exponent f.
///
/// A decaying component evolves as e^{f(s) - f(t)}, a growing one as
/// e^{f(t) - f(s)}.
struct DiagonalComponent {
    ScalarFunction exponent;
    bool decaying = true;
};

/// A two-parameter evolution family U(t, s) on R^n, t >= s >= 0.
class EvolutionFamily {
public:
    enum class Kind { ClosedFormDiagonal, SimilarityTransformed, OdePropagated };

    static EvolutionFamily closed_form_diagonal(std::vector<DiagonalComponent> components);

    /// V(t, s) = S(t) U(t, s) S(s)^{-1}.
    static EvolutionFamily similarity_transformed(const EvolutionFamily& base, MatrixFunction s,
                                                  MatrixFunction s_inverse);

    /// Solution operator of x' = A(t) x.
    static EvolutionFamily ode_propagated(int dim, MatrixFunction coefficient, OdePolicy policy = {});

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] Kind kind() const noexcept;

    /// U(t, s); throws NonOrderedTimes for t < s.
    [[nodiscard]] Matrix operator()(Scalar t, Scalar s) const;

    /// The similarity S(t) and its inverse, for SimilarityTransformed families.
    [[nodiscard]] Matrix similarity(Scalar t) const;
    [[nodiscard]] Matrix similarity_inverse(Scalar t) const;

private:
    struct Diagonal {
        std::vector<DiagonalComponent> components;
    };
    struct Similarity {
        std::shared_ptr<const EvolutionFamily> base;
        MatrixFunction s;
        MatrixFunction s_inverse;
    };
    struct Ode {
        MatrixFunction coefficient;
        OdePolicy policy;
    };

    EvolutionFamily(int dim, std::variant<Diagonal, Similarity, Ode> impl) : dim_(dim), impl_(std::move(impl)) {}

    int dim_;
    std::variant<Diagonal, Similarity, Ode> impl_;
};

[[nodiscard]] const char* to_string(EvolutionFamily::Kind kind) noexcept;

[[nodiscard]] inline Matrix evaluate(const EvolutionFamily& family, Scalar t, Scalar s) { return family(t, s); }

/// A projection valued function t -> P(t) with complement Q(t) = Id - P(t).
class ProjectionFamily {
public:
    ProjectionFamily(int dim, MatrixFunction projector);

    static ProjectionFamily constant(const Matrix& p);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] Matrix P(Scalar t) const;
    [[nodiscard]] Matrix Q(Scalar t) const { return Matrix::Identity(dim_, dim_) - P(t); }

private:
    int dim_;
    MatrixFunction projector_;
};

struct ProjectionReport {
    Scalar idempotency_residual = 0;
    /// max of ||P Q|| and ||Q P||.
    Scalar complement_residual = 0;
    bool pass = false;
};

[[nodiscard]] ProjectionReport check_projection(const ProjectionFamily& projection, const GridSpec& grid,
                                                Scalar tol = 1e-10);

/// U_Q(s, t) Q(t): the inverse of U(t, s) restricted to Q(s)X -> Q(t)X,
/// precomposed with Q(t) so it acts on all of X.
///
/// Throws SingularRestriction when the restricted operator has a reciprocal
/// condition number below `threshold` (its size alone is not a defect).
[[nodiscard]] Matrix evaluate_UQ_inverse(const EvolutionFamily& family, const ProjectionFamily& projection, Scalar s,
                                         Scalar t, Scalar threshold = 1e-12);

struct AxiomReport {
    Scalar identity_residual = 0;
    /// Relative: ||U(t,s)U(s,t0) - U(t,t0)|| / max(1, ||U(t,t0)||).
    Scalar cocycle_residual = 0;
    TimeTriple worst_triple{0, 0, 0};
    /// Largest relative difference quotient ||U(t+h,s) - U(t,s)|| / (h max(1, ||U(t,s)||)),
    /// also taken in s.
    Scalar continuity_quotient = 0;
    Scalar tol = 0;
    Scalar continuity_bound = 0;
    bool pass = false;
};

struct AxiomOptions {
    int max_triple_points = 10;
    Scalar difference_step = 1e-6;
    Scalar continuity_bound = 1e4;
};

[[nodiscard]] AxiomReport check_axioms(const EvolutionFamily& family, const GridSpec& grid, Scalar tol,
                                       const AxiomOptions& options = {});

/// Same checks for an arbitrary two-time operator, e.g. a perturbed family.
[[nodiscard]] AxiomReport check_axioms(const Propagator& family, int dim, const GridSpec& grid, Scalar tol,
                                       const AxiomOptions& options = {});

/// Growth constants: ||U_P(t,s)x|| and ||U_Q(s,t)x|| bounded by M e^{eps s} e^{omega (t-s)} ||x||.
struct CompatibilityConstants {
    Scalar M = 1;
    Scalar epsilon = 0;
    Scalar omega = 0;
};

struct CompatibilityThresholds {
    Scalar structural_tol = 1e-8;
    Scalar invertibility_threshold = 1e-12;
    Scalar log_m_max = 6.907755278982137;  // log(1000)
    Scalar epsilon_max = 50;
    Scalar omega_min = 1e-6;
    Scalar omega_max = 1e3;
    /// Constants known independently; verified on the grid and reported instead of the fit.
    std::optional<CompatibilityConstants> asserted;
    Scalar assertion_log_tol = 1e-9;
};

struct CompatibilityEstimate {
    enum class Source { Fitted, Asserted };

    Scalar M = 1;
    Scalar epsilon = 0;
    Scalar omega = 0;
    Scalar commutation_residual = 0;
    Scalar invertibility_residual = 0;
    bool feasible = false;
    /// Largest log-violation of the reported constants on the grid (<= 0 when they hold).
    Scalar slack = 0;
    Source source = Source::Fitted;
    CompatibilityConstants fitted;
    std::size_t sample_count = 0;
    bool pass = false;

    [[nodiscard]] CompatibilityConstants constants() const { return {M, epsilon, omega}; }
};

[[nodiscard]] const char* to_string(CompatibilityEstimate::Source source) noexcept;

/// Checks commutation and Q-invertibility, then fits (M, eps, omega).
///
/// The fit takes the smallest M, then the smallest omega >= omega_min, then the
/// smallest eps. Throws CommutationViolation or RestrictionNotInvertible when
/// the structural residuals exceed `structural_tol`.
[[nodiscard]] CompatibilityEstimate check_compatibility(const EvolutionFamily& family,
                                                        const ProjectionFamily& projection, const GridSpec& grid,
                                                        const CompatibilityThresholds& thresholds = {});

struct TrendPoint {
    Scalar t;
    Scalar p_norm;
    Scalar q_norm;
};

struct TrendReport {
    Scalar t0 = 0;
    Scalar horizon = 0;
    bool p_decays = false;
    bool q_grows = false;
    /// Q(t0) x0 = 0, so no growth is required.
    bool q_exempt = false;
    /// ||U(t,t0) x0|| itself decays.
    bool total_decays = false;
    std::vector<TrendPoint> curve;
    /// P-part decays and the Q-part grows unless exempt.
    bool pass = false;
};

struct TrendOptions {
    int samples = 101;
    Scalar decay_factor = 1e-2;
    Scalar growth_factor = 1e2;
};

[[nodiscard]] TrendReport check_asymptotics(const EvolutionFamily& family, const ProjectionFamily& projection,
                                            Scalar t0, const Vector& x0, Scalar horizon,
                                            const TrendOptions& options = {});

}  // namespace dichotomy
