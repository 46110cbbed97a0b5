#pragma once

#include "dichotomy/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dichotomy {

/// One sampled trajectory norm for a unit vector of the relevant range.
///
/// P side: ||U(t,s) y|| / ||y|| with y = P(s)x. Q side: ||U_Q(s,t) z|| / ||z||
/// with z = Q(t)x.
struct EnvelopeSample {
    Scalar t;
    Scalar s;
    Scalar value;
    Side side;
    int direction = 0;
};

struct SampleSet {
    std::vector<EnvelopeSample> p;
    std::vector<EnvelopeSample> q;
    /// A side whose projection vanished for every pair and direction; vacuously dichotomous.
    bool p_empty = false;
    bool q_empty = false;

    [[nodiscard]] const std::vector<EnvelopeSample>& side(Side s) const { return s == Side::P ? p : q; }
};

[[nodiscard]] SampleSet collect_samples(const EvolutionFamily& family, const ProjectionFamily& projection,
                                        const std::vector<TimePair>& pairs, const std::vector<Vector>& directions,
                                        Scalar threshold = 1e-12);

[[nodiscard]] SampleSet collect_samples(const EvolutionFamily& family, const ProjectionFamily& projection,
                                        const GridSpec& grid, const std::vector<Vector>& directions);

/// Box for the log-linear fit: log N in [0, log_n_max], alpha in [0, alpha_max],
/// decay rate in [nu_min, rate_max].
struct FitBounds {
    Scalar nu_min = 1e-3;
    Scalar log_n_max = 6.907755278982137;  // log(1000)
    Scalar alpha_max = 50;
    Scalar rate_max = 1e3;
    /// A trial rate r is rejected when the log N it needs grows by at least
    /// this fraction of r (T - T/2) between horizons T/2 and T.
    Scalar divergence_ratio = 0.1;
};

/// Constants (N, alpha, nu) of a bound N e^{alpha w} e^{-nu (t-s)}, w = s on
/// the P side and w = t on the Q side.
struct EnvelopeFit {
    Scalar N = 1;
    Scalar alpha = 0;
    Scalar nu = 0;
    /// Decay rate in the s-weighted form: nu on the P side, nu - alpha on the Q side.
    Scalar rate = 0;
    Side side = Side::P;
    bool feasible = false;
    /// Even N = e^{log_n_max} admits no decay rate above nu_min.
    bool rate_at_floor = false;
    /// Infeasible part when infeasible (excess log N over the box, or the
    /// divergent late rise), otherwise the largest log-margin of any sample (<= 0).
    Scalar slack = 0;
    bool alpha_below_nu = false;
    std::size_t sample_count = 0;
    /// Every trial rate needs a log N that keeps growing with the horizon.
    bool divergent = false;
    /// The rate the selection had to keep; `rate` is at least this.
    Scalar target_rate = 0;
};

/// Chooses a target rate, the largest of r_best/2, r_best/4, ... (r_best is
/// the best rate at the largest admissible N) whose required N does not keep
/// growing with the horizon. Then the smallest N keeping that rate, the
/// largest rate at that N, and the smallest alpha. Infeasible when no rate
/// above nu_min fits in the box or every trial rate diverges.
///
/// Throws NoSamples for an empty sample list and InvalidParam for samples
/// from the other side.
[[nodiscard]] EnvelopeFit fit_envelope(const std::vector<EnvelopeSample>& samples, Side side,
                                       const FitBounds& bounds = {});

/// Largest log(value) - log(N e^{alpha w} e^{-nu (t-s)}) over the samples; <= 0 iff the bound holds.
[[nodiscard]] Scalar envelope_violation(const std::vector<EnvelopeSample>& samples, Scalar N, Scalar alpha,
                                        Scalar nu, Side side);

struct WitnessPoint {
    Scalar t;
    Scalar s;
    /// Lower bound on log N forced by this sample.
    Scalar log_lower_bound;
};

/// A sequence of samples whose forced lower bounds on N increase without a visible ceiling.
struct Witness {
    enum class Kind { FixedGap, FixedStart };
    Kind kind = Kind::FixedGap;
    std::vector<WitnessPoint> points;
    /// Mean increase of log_lower_bound per step.
    Scalar mean_log_step = 0;
    /// Best bound in the later half of the subsequence minus the best in the earlier half.
    Scalar late_rise = 0;
};

[[nodiscard]] const char* to_string(Witness::Kind kind) noexcept;

/// Record chain over fixed-gap and fixed-start subsequences with the largest
/// late rise, using the lower bound log(value) - alpha s + rate (t-s) in the
/// s-weighted form. Requires at least three records.
[[nodiscard]] std::optional<Witness> find_witness(const std::vector<EnvelopeSample>& samples, Side side,
                                                  Scalar alpha, Scalar rate);

struct UniformTest {
    bool feasible = false;
    /// The alpha = 0 fit (N and nu) regardless of verdict.
    EnvelopeFit fit;
    std::optional<Witness> witness;
};

/// Feasibility of the alpha = 0 envelope; a witness accompanies an infeasible verdict when one is found.
[[nodiscard]] UniformTest certify_uniform(const std::vector<EnvelopeSample>& samples, Side side,
                                          Scalar nu_min = 1e-3);

/// The resonant and geometric pair sequences searched for witnesses, inside [0, t_max].
[[nodiscard]] std::vector<TimePair> witness_catalogue(Scalar t_max, int geometric_levels = 8);

struct MergedConstants {
    Scalar N;
    Scalar alpha;
    Scalar nu;
};

struct DichotomyConstants {
    EnvelopeFit p_fit;
    EnvelopeFit q_fit;
    bool uniform = false;
    std::optional<MergedConstants> merged;
    bool dichotomy = false;
    std::optional<Witness> p_witness;
    std::optional<Witness> q_witness;
    /// Certification holds on [0, t_max] only.
    Scalar t_max = 0;
    bool p_empty = false;
    bool q_empty = false;
};

/// Fits both sides on grid pairs plus the witness catalogue.
///
/// Verdict: both sides feasible with decay rates above the floor. The merged
/// constants take N = max, alpha = max and nu = min of the s-weighted rates.
[[nodiscard]] DichotomyConstants certify_dichotomy(const EvolutionFamily& family, const ProjectionFamily& projection,
                                                   const GridSpec& grid, const std::vector<Vector>& directions,
                                                   const FitBounds& bounds = {});

struct NormPoint {
    Scalar t;
    Scalar norm;
};

[[nodiscard]] std::vector<NormPoint> projection_norm_curve(const ProjectionFamily& projection, const GridSpec& grid);

}  // namespace dichotomy
