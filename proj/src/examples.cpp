#include "dichotomy/examples.hpp"

#include "dichotomy/datko.hpp"
#include "dichotomy/envelope.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dichotomy {

const char* to_string(ExampleId id) noexcept {
    switch (id) {
        case ExampleId::Ex2_5: return "Ex2_5";
        case ExampleId::Ex2_6: return "Ex2_6";
        case ExampleId::Ex2_8: return "Ex2_8";
        case ExampleId::Ex3_2: return "Ex3_2";
    }
    return "unknown";
}

std::optional<ExampleId> parse_example_id(std::string_view name) {
    for (auto id : {ExampleId::Ex2_5, ExampleId::Ex2_6, ExampleId::Ex2_8, ExampleId::Ex3_2}) {
        if (name == to_string(id)) return id;
    }
    return std::nullopt;
}

const char* to_string(KnownFact::Kind kind) noexcept {
    switch (kind) {
        case KnownFact::Kind::EnvelopeConstants: return "envelope-constants";
        case KnownFact::Kind::NoDichotomy: return "no-dichotomy";
        case KnownFact::Kind::UniformWitness: return "uniform-witness";
        case KnownFact::Kind::CompatibilityConstants: return "compatibility-constants";
        case KnownFact::Kind::SimilarityBound: return "similarity-bound";
        case KnownFact::Kind::ProjectionNormGrowth: return "projection-norm-growth";
        case KnownFact::Kind::DecayTrend: return "decay-trend";
        case KnownFact::Kind::DatkoBound: return "datko-bound";
    }
    return "unknown";
}

EvolutionFamily generalized_cosine_family(const std::vector<CosineComponent>& components) {
    std::vector<DiagonalComponent> diag;
    for (const auto& c : components) {
        diag.push_back({[c = c.c, d = c.d](Scalar t) {
                            const Scalar cs = std::cos(t);
                            return t * (c + d * cs * cs);
                        },
                        c.decaying});
    }
    return EvolutionFamily::closed_form_diagonal(std::move(diag));
}

EvolutionFamily generalized_cosine_family(Scalar c, Scalar d, int sign) {
    if (sign != 1 && sign != -1) throw Error(ErrorCode::InvalidParam, "sign must be +1 or -1");
    return generalized_cosine_family({{c, d, sign == 1}});
}

namespace {

constexpr Scalar omega_floor = 1e-6;

Scalar cos2(Scalar t) {
    const Scalar c = std::cos(t);
    return c * c;
}

Scalar sin2(Scalar t) {
    const Scalar s = std::sin(t);
    return s * s;
}

Matrix first_axis_projector() {
    Matrix p = Matrix::Zero(2, 2);
    p(0, 0) = 1;
    return p;
}

PaperExample cosine_example(ExampleId id) {
    const Matrix p = first_axis_projector();
    if (id == ExampleId::Ex2_5) {
        return PaperExample{
            id,
            {},
            generalized_cosine_family({{3, 1, true}, {3, 1, false}}),
            ProjectionFamily::constant(p),
            [](Scalar t, Scalar s) { return std::exp(-3 * (t - s) - t * cos2(t) + s * cos2(s)); },
            [](Scalar t, Scalar s) { return std::exp(-4 * (t - s) + t * sin2(t) - s * sin2(s)); },
            CompatibilityConstants{1, 1, omega_floor},
            {}};
    }
    if (id == ExampleId::Ex3_2) {
        return PaperExample{
            id,
            {},
            generalized_cosine_family({{1, 1, true}, {0, 1, false}}),
            ProjectionFamily::constant(p),
            [](Scalar t, Scalar s) { return std::exp(s * (1 + cos2(s)) - t * (1 + cos2(t))); },
            [](Scalar t, Scalar s) { return std::exp(s * cos2(s) - t * cos2(t)); },
            CompatibilityConstants{1, 1, 1},
            {}};
    }
    // Isotropic contraction; the Q side grows backward instead of decaying.
    return PaperExample{id,
                        {},
                        generalized_cosine_family({{1, 0, true}, {1, 0, true}}),
                        ProjectionFamily::constant(p),
                        [](Scalar t, Scalar s) { return std::exp(-(t - s)); },
                        [](Scalar t, Scalar s) { return std::exp(t - s); },
                        std::nullopt,
                        {}};
}

}  // namespace

PaperExample build(ExampleId id, const ExampleParams& params) {
    constexpr Scalar sqrt2 = std::numbers::sqrt2;
    using Kind = KnownFact::Kind;
    switch (id) {
        case ExampleId::Ex2_5: {
            auto ex = cosine_example(id);
            ex.known_facts = {
                {Kind::EnvelopeConstants, Side::P, {1, 1, 3}, 1e-9, "P side bounded by e^{s} e^{-3(t-s)}"},
                {Kind::EnvelopeConstants, Side::Q, {1, 1, 4}, 1e-9, "Q side bounded by e^{t} e^{-4(t-s)}"},
                {Kind::UniformWitness, Side::P, {std::numbers::pi, 6}, 1e-6,
                 "no uniform bound: t = n pi + pi/2, s = n pi forces N >= e^{n pi} const"},
                {Kind::CompatibilityConstants, Side::P, {1, 1, omega_floor}, 1e-9, "compatible with M = 1, eps = 1"},
            };
            return ex;
        }
        case ExampleId::Ex3_2: {
            auto ex = cosine_example(id);
            ex.known_facts = {
                {Kind::CompatibilityConstants, Side::P, {1, 1, 1}, 1e-9, "compatible with (M, eps, omega) = (1, 1, 1)"},
                {Kind::NoDichotomy, Side::Q, {}, 0, "Q side admits no bound with alpha2 < nu2"},
                {Kind::DatkoBound, Side::P, {1, 0.5, 1, 2}, 1e-9, "integral bound with K = 2/p at p = 1"},
                {Kind::DatkoBound, Side::P, {2, 0.5, 1, 1}, 1e-9, "integral bound with K = 2/p at p = 2"},
            };
            return ex;
        }
        case ExampleId::Ex2_8: {
            auto ex = cosine_example(id);
            ex.known_facts = {
                {Kind::NoDichotomy, Side::Q, {}, 0, "no dichotomy with P = diag(1, 0)"},
                {Kind::DecayTrend, Side::P, {1, 1}, 1e-2, "every solution decays"},
            };
            return ex;
        }
        case ExampleId::Ex2_6: {
            const Scalar a = params.a;
            if (!(a > 0)) throw Error(ErrorCode::InvalidParam, "the similarity shift a must be positive");
            auto base = cosine_example(ExampleId::Ex2_5);
            auto s = [a](Scalar t) -> Matrix {
                const Scalar r = std::sqrt(1 + (t + a) * (t + a));
                Matrix m(2, 2);
                m << 1, (t + a) / r, 0, 1 / r;
                return m;
            };
            auto s_inv = [a](Scalar t) -> Matrix {
                const Scalar r = std::sqrt(1 + (t + a) * (t + a));
                Matrix m(2, 2);
                m << 1, -(t + a), 0, r;
                return m;
            };
            auto p = [a](Scalar t) -> Matrix {
                Matrix m(2, 2);
                m << 1, -(t + a), 0, 0;
                return m;
            };
            PaperExample ex{id,
                            params,
                            EvolutionFamily::similarity_transformed(base.family, s, s_inv),
                            ProjectionFamily(2, p),
                            base.p_norm,
                            base.q_norm,
                            base.compatibility,
                            {}};
            ex.known_facts = {
                {Kind::SimilarityBound, Side::P, {sqrt2}, 1e-12, "||S(t)|| <= sqrt 2"},
                {Kind::EnvelopeConstants, Side::P, {sqrt2, 1, 3}, 1e-9, "P side bounded by sqrt2 e^{s} e^{-3(t-s)}"},
                {Kind::EnvelopeConstants, Side::Q, {sqrt2, 1, 4}, 1e-9, "Q side bounded by sqrt2 e^{t} e^{-4(t-s)}"},
                {Kind::ProjectionNormGrowth, Side::P, {a}, 1e-10, "||P(t)|| = sqrt(1 + (t+a)^2) >= t + a"},
            };
            return ex;
        }
    }
    throw Error(ErrorCode::InvalidParam, "unknown example id");
}

namespace {

std::string describe(const char* what, Scalar v) {
    std::ostringstream os;
    os.precision(17);
    os << what << " = " << v;
    return os.str();
}

SampleSet grid_samples(const PaperExample& ex, const GridSpec& grid) {
    auto pairs = time_pairs(grid);
    const auto extra = witness_catalogue(grid.t_max);
    pairs.insert(pairs.end(), extra.begin(), extra.end());
    return collect_samples(ex.family, ex.projection, pairs, directions(grid, ex.family.dim()));
}

}  // namespace

FactCheck verify_known_fact(const PaperExample& ex, const KnownFact& fact, const GridSpec& grid) {
    using Kind = KnownFact::Kind;
    auto need = [&](std::size_t n) {
        if (fact.values.size() < n) throw Error(ErrorCode::InvalidParam, "known fact is missing values");
    };
    FactCheck check;
    switch (fact.kind) {
        case Kind::EnvelopeConstants: {
            need(3);
            const auto samples = grid_samples(ex, grid);
            check.measured =
                envelope_violation(samples.side(fact.side), fact.values[0], fact.values[1], fact.values[2], fact.side);
            check.reproduced = check.measured <= fact.tolerance;
            check.detail = describe("largest log-violation", check.measured);
            break;
        }
        case Kind::NoDichotomy: {
            const auto d = certify_dichotomy(ex.family, ex.projection, grid, directions(grid, ex.family.dim()));
            const auto& fit = fact.side == Side::P ? d.p_fit : d.q_fit;
            check.measured = fit.slack;
            check.reproduced = !fit.feasible && !d.dichotomy;
            check.detail = describe("slack of the failing side", fit.slack);
            break;
        }
        case Kind::UniformWitness: {
            need(2);
            const Scalar pi = std::numbers::pi;
            std::vector<TimePair> pairs;
            for (int n = 0; n < static_cast<int>(fact.values[1]); ++n) pairs.push_back({n * pi + pi / 2, n * pi});
            const auto samples = collect_samples(ex.family, ex.projection, pairs, directions(grid, ex.family.dim()));
            const auto test = certify_uniform(samples.side(fact.side), fact.side);
            Scalar min_step = 0;
            if (test.witness) {
                const auto& pts = test.witness->points;
                min_step = std::numeric_limits<Scalar>::infinity();
                for (std::size_t i = 1; i < pts.size(); ++i) {
                    min_step = std::min(min_step, pts[i].log_lower_bound - pts[i - 1].log_lower_bound);
                }
            }
            check.measured = min_step;
            check.reproduced = !test.feasible && test.witness &&
                               test.witness->points.size() == pairs.size() &&
                               min_step >= fact.values[0] - fact.tolerance;
            check.detail = describe("smallest log step of the witness", min_step);
            break;
        }
        case Kind::CompatibilityConstants: {
            need(3);
            CompatibilityThresholds th;
            th.asserted = CompatibilityConstants{fact.values[0], fact.values[1], fact.values[2]};
            th.assertion_log_tol = fact.tolerance;
            const auto c = check_compatibility(ex.family, ex.projection, grid, th);
            check.measured = c.slack;
            check.reproduced = c.feasible;
            check.detail = describe("largest log-violation", c.slack);
            break;
        }
        case Kind::SimilarityBound: {
            need(1);
            Scalar worst = 0;
            for (Scalar t : time_points(grid)) worst = std::max(worst, spectral_norm(ex.family.similarity(t)));
            check.measured = worst;
            check.reproduced = worst <= fact.values[0] + fact.tolerance;
            check.detail = describe("max ||S(t)||", worst);
            break;
        }
        case Kind::ProjectionNormGrowth: {
            need(1);
            const Scalar a = fact.values[0];
            Scalar worst = 0;
            bool above = true;
            for (const auto& pt : projection_norm_curve(ex.projection, grid)) {
                worst = std::max(worst, std::abs(pt.norm - std::sqrt(1 + (pt.t + a) * (pt.t + a))));
                above = above && pt.norm > pt.t + a;
            }
            check.measured = worst;
            check.reproduced = worst <= fact.tolerance && above;
            check.detail = describe("largest deviation from the closed form", worst);
            break;
        }
        case Kind::DecayTrend: {
            need(2);
            Vector x0(2);
            x0 << fact.values[0], fact.values[1];
            TrendOptions options;
            options.decay_factor = fact.tolerance;
            const auto trend = check_asymptotics(ex.family, ex.projection, 0, x0, std::min<Scalar>(grid.t_max, 10), options);
            check.measured = trend.curve.back().p_norm + trend.curve.back().q_norm;
            check.reproduced = trend.total_decays && !trend.pass;
            check.detail = trend.q_grows ? "Q component grows" : "all components decay; Q component does not grow";
            break;
        }
        case Kind::DatkoBound: {
            need(4);
            const auto dirs = directions(grid, ex.family.dim());
            const auto samples = grid_samples(ex, grid);
            const auto fit = fit_envelope(samples.p, Side::P);
            DatkoConfig config;
            config.p = fact.values[0];
            config.gamma = fact.values[1];
            config.beta = fact.values[2];
            config.K = fact.values[3];
            const Scalar eps = ex.compatibility ? ex.compatibility->epsilon : 0;
            const auto report = datko_certify(ex.family, ex.projection, std::vector<Scalar>{0.5, 1, 3}, dirs, config,
                                              tail_envelope(fit), eps);
            check.measured = report.K_raw;
            check.reproduced = report.K_raw <= fact.values[3] + report.K_error + fact.tolerance;
            check.detail = describe("largest ratio to the bound", report.K_raw);
            break;
        }
    }
    return check;
}

}  // namespace dichotomy
