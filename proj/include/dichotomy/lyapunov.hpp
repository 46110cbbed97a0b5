#pragma once

#include "dichotomy/core.hpp"
#include "dichotomy/datko.hpp"
#include "dichotomy/envelope.hpp"
#include "dichotomy/quadrature.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace dichotomy {

/// A weight H(t) with ||H(t)x|| <= e^{gamma t} ||P(t)x|| + e^{-gamma t} ||Q(t)x||.
struct HFunction {
    enum class Kind { Canonical, UserSupplied };

    Scalar gamma = 1;
    Kind kind = Kind::Canonical;
    MatrixFunction map;
};

/// H(t) = e^{gamma t} P(t) + e^{-gamma t} Q(t).
[[nodiscard]] HFunction canonical_H(const ProjectionFamily& projection, Scalar gamma);

[[nodiscard]] HFunction user_H(Scalar gamma, MatrixFunction map);

/// Largest ||H(t)x|| - (e^{gamma t}||P(t)x|| + e^{-gamma t}||Q(t)x||), relative to the right side,
/// over grid times and directions; <= 0 for members.
[[nodiscard]] Scalar membership_violation(const HFunction& h, const ProjectionFamily& projection,
                                          const GridSpec& grid, const std::vector<Vector>& directions);

struct LyapunovPolicy {
    QuadraturePolicy quadrature;
    std::optional<Scalar> tail_T;
    Scalar tail_fraction = 1e-12;
    Scalar max_tail_T = 400;
    Scalar membership_tol = 1e-10;
};

struct LyapunovValue {
    Scalar L = 0;
    /// 2 * integral over [t, t + tail_T] of ||H U_P x||^2.
    Scalar forward = 0;
    /// 2 * integral over [0, t] of ||H U_Q x||^2.
    Scalar backward = 0;
    Scalar tail_bound = 0;
    Scalar tail_T = 0;
    Scalar error = 0;
};

/// L(t, x) = 2 int_t^oo ||H(tau) U_P(tau,t) x||^2 - 2 int_0^t ||H(tau) U_Q(tau,t) x||^2.
///
/// The forward part sees only P(t)x and the backward part only Q(t)x.
class LyapunovEvaluator {
public:
    /// Throws MembershipViolation when H leaves the admissible class on the grid.
    LyapunovEvaluator(EvolutionFamily family, ProjectionFamily projection, HFunction h,
                      std::optional<TailEnvelope> envelope, const GridSpec& membership_grid,
                      LyapunovPolicy policy = {});

    [[nodiscard]] LyapunovValue evaluate(Scalar t, const Vector& x) const;
    [[nodiscard]] Scalar operator()(Scalar t, const Vector& x) const { return evaluate(t, x).L; }

    /// int_s^t ||H(tau) U(tau,s) x||^2 dtau.
    [[nodiscard]] QuadratureResult trajectory_integral(Scalar t, Scalar s, const Vector& x) const;

    [[nodiscard]] const EvolutionFamily& family() const noexcept { return family_; }
    [[nodiscard]] const ProjectionFamily& projection() const noexcept { return projection_; }
    [[nodiscard]] const HFunction& h() const noexcept { return h_; }
    [[nodiscard]] const LyapunovPolicy& policy() const noexcept { return policy_; }
    [[nodiscard]] const std::optional<TailEnvelope>& envelope() const noexcept { return envelope_; }

private:
    EvolutionFamily family_;
    ProjectionFamily projection_;
    HFunction h_;
    std::optional<TailEnvelope> envelope_;
    LyapunovPolicy policy_;
};

struct LyapunovTriple {
    Scalar t;
    Scalar s;
    Vector x;
};

struct InequalityEntry {
    Scalar t;
    Scalar s;
    Vector x;
    Scalar residual;
    Scalar tolerance;
};

struct InequalityReport {
    std::vector<InequalityEntry> entries;
    Scalar max_residual = 0;
    /// Largest residual minus its tolerance; pass iff <= 0.
    Scalar max_excess = 0;
    bool pass = false;
};

/// r = L(t, U(t,s)x) + int_s^t ||H U(tau,s) x||^2 - L(s, x) per triple.
[[nodiscard]] InequalityReport check_lyapunov_inequality(const LyapunovEvaluator& evaluator,
                                                         const std::vector<LyapunovTriple>& triples);

/// Same residual for an arbitrary candidate function in place of the constructed L.
[[nodiscard]] InequalityReport check_lyapunov_inequality(
    const LyapunovEvaluator& evaluator, const std::function<Scalar(Scalar, const Vector&)>& candidate,
    const std::vector<LyapunovTriple>& triples);

/// Random triples t >= s in [0, t_max] with unit directions.
[[nodiscard]] std::vector<LyapunovTriple> random_triples(int count, Scalar t_max, int dim, std::uint64_t seed);

struct L1L2Report {
    Scalar K = 1;
    /// Smallest constant for which the growth bound holds on the grid.
    Scalar tightest_K = 0;
    bool l1_holds = false;
    /// L(t, P(t)x) >= 0 >= L(t, Q(t)x) with no tolerance.
    bool l2_holds = false;
    Scalar min_L_on_P = 0;
    Scalar max_L_on_Q = 0;
};

/// |L(t,x)| <= K (e^{2(gamma+beta)t} ||P(t)x||^2 + e^{-2(gamma-beta)t} ||Q(t)x||^2) and the sign conditions.
[[nodiscard]] L1L2Report check_L1_L2(const LyapunovEvaluator& evaluator, Scalar K, Scalar gamma, Scalar beta,
                                     const GridSpec& grid, const std::vector<Vector>& directions);

[[nodiscard]] L1L2Report check_L1_L2(const LyapunovEvaluator& evaluator, Scalar K, Scalar gamma, Scalar beta,
                                     const std::vector<Scalar>& times, const std::vector<Vector>& directions);

struct ChainLink {
    const char* name;
    /// Largest (lhs - rhs) / rhs over the grid; <= tolerance when the link holds.
    Scalar residual;
    bool holds;
};

struct PipelineReport {
    std::vector<ChainLink> links;
    bool chain_holds = false;
    DatkoReport datko;
    DerivedConstants derived{};
    DichotomyConstants constants;
    Scalar p_violation = 0;
    Scalar q_violation = 0;
};

struct PipelineOptions {
    Scalar link_tol = 1e-6;
    Scalar feasibility_tol = 1e-9;
};

/// Runs the Lyapunov-to-Datko chain at p = 2 and returns dichotomy constants
/// derived from it, checked against samples. Throws HypothesisViolated unless
/// gamma > eps and 0 <= beta < gamma.
[[nodiscard]] PipelineReport theorem_3_4_pipeline(const EvolutionFamily& family, const ProjectionFamily& projection,
                                                  const CompatibilityEstimate& compatibility,
                                                  const std::optional<TailEnvelope>& envelope, Scalar K, Scalar gamma,
                                                  Scalar beta, const GridSpec& grid,
                                                  const std::vector<Vector>& directions,
                                                  const PipelineOptions& options = {});

struct QuadraticFormW {
    Scalar t = 0;
    Matrix matrix;
    /// ||W - W^T|| before symmetrization.
    Scalar asymmetry = 0;
    /// Largest |<W x, x> - L(t, x)| / (1 + |L(t, x)|) over held-out directions.
    Scalar consistency = 0;
    bool p_range_nonnegative = false;
    bool q_range_nonpositive = false;
};

struct PolarizationOptions {
    int held_out = 16;
    std::uint64_t seed = 7;
    Scalar tolerance = 1e-6;
};

/// W_ij = (L(b_i + b_j) - L(b_i) - L(b_j)) / 2 in the coordinates of `basis`
/// (identity when empty), mapped back to the standard basis and symmetrized.
/// Throws NotQuadratic when a held-out direction disagrees beyond tolerance.
[[nodiscard]] QuadraticFormW polarize_W(const LyapunovEvaluator& evaluator, Scalar t, const Matrix& basis = {},
                                        const PolarizationOptions& options = {});

}  // namespace dichotomy
