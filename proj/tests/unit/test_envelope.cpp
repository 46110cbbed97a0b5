#include "dichotomy/envelope.hpp"
#include "dichotomy/examples.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace dichotomy;
using Catch::Approx;

namespace {

GridSpec grid(Scalar t_max, int points) {
    GridSpec g;
    g.t_max = t_max;
    g.time_points = points;
    g.extra_directions = 2;
    return g;
}

SampleSet samples_of(const PaperExample& ex, const GridSpec& g) {
    return collect_samples(ex.family, ex.projection, g, directions(g, ex.family.dim()));
}

/// Scalar samples value(t - s) on the given side over a uniform grid of pairs.
std::vector<EnvelopeSample> scalar_samples(const std::function<Scalar(Scalar)>& value, Side side, Scalar t_max,
                                           int points) {
    std::vector<EnvelopeSample> out;
    for (int i = 0; i < points; ++i) {
        for (int j = 0; j <= i; ++j) {
            const Scalar t = t_max * i / (points - 1);
            const Scalar s = t_max * j / (points - 1);
            out.push_back({t, s, value(t - s), side, 0});
        }
    }
    return out;
}

}  // namespace

TEST_CASE("cosine example envelopes reproduce the known constants", "[envelope]") {
    const auto ex = build(ExampleId::Ex2_5);
    const auto set = samples_of(ex, grid(20, 41));
    const auto p = fit_envelope(set.p, Side::P);
    const auto q = fit_envelope(set.q, Side::Q);
    REQUIRE(p.feasible);
    REQUIRE(q.feasible);
    CHECK(p.N == Approx(1).margin(0.05));
    CHECK(p.alpha == Approx(1).margin(0.05));
    CHECK(p.nu == Approx(3).margin(0.05));
    CHECK(q.nu == Approx(4).margin(0.05));
    REQUIRE(p.slack <= 1e-9);
    REQUIRE(envelope_violation(set.p, p.N, p.alpha, p.nu, Side::P) <= 1e-9);
    REQUIRE(envelope_violation(set.q, q.N, q.alpha, q.nu, Side::Q) <= 1e-9);
}

TEST_CASE("scaling all values by k multiplies N by k and keeps the rates", "[envelope][invariant]") {
    const auto ex = build(ExampleId::Ex2_5);
    const auto set = samples_of(ex, grid(10, 21));
    for (Side side : {Side::P, Side::Q}) {
        const auto base = fit_envelope(set.side(side), side);
        for (Scalar k : {2.0, 10.0}) {
            auto scaled = set.side(side);
            for (auto& s : scaled) s.value *= k;
            const auto fit = fit_envelope(scaled, side);
            REQUIRE(fit.feasible == base.feasible);
            CHECK(fit.N == Approx(k * base.N).epsilon(1e-9));
            CHECK(fit.alpha == Approx(base.alpha).margin(1e-9));
            CHECK(fit.nu == Approx(base.nu).margin(1e-9));
        }
    }
}

TEST_CASE("adding samples never turns an infeasible fit feasible", "[envelope][invariant]") {
    for (auto id : {ExampleId::Ex2_8, ExampleId::Ex3_2}) {
        const auto ex = build(id);
        const auto coarse = samples_of(ex, grid(20, 21));
        REQUIRE_FALSE(fit_envelope(coarse.q, Side::Q).feasible);

        auto more = coarse.q;
        const auto fine = samples_of(ex, grid(20, 41));
        more.insert(more.end(), fine.q.begin(), fine.q.end());
        REQUIRE_FALSE(fit_envelope(more, Side::Q).feasible);

        const auto other = samples_of(build(ExampleId::Ex2_5), grid(20, 21));
        auto mixed = coarse.q;
        mixed.insert(mixed.end(), other.q.begin(), other.q.end());
        REQUIRE_FALSE(fit_envelope(mixed, Side::Q).feasible);
    }
}

TEST_CASE("P weights alpha by s and Q weights alpha by t", "[envelope][invariant]") {
    const auto ex = build(ExampleId::Ex2_5);
    const auto set = samples_of(ex, grid(20, 41));
    REQUIRE(envelope_violation(set.q, 1, 1, 4, Side::Q) <= 1e-9);
    auto swapped = set.q;
    for (auto& s : swapped) s.side = Side::P;
    REQUIRE(envelope_violation(swapped, 1, 1, 4, Side::P) > 0.1);
}

TEST_CASE("a uniformly decaying sample set fits with alpha = 0", "[envelope][invariant]") {
    const auto samples = scalar_samples([](Scalar d) { return std::exp(-2 * d); }, Side::P, 10, 21);
    const auto uniform = certify_uniform(samples, Side::P);
    REQUIRE(uniform.feasible);
    const auto fit = fit_envelope(samples, Side::P);
    REQUIRE(fit.feasible);
    REQUIRE(fit.alpha == 0);
    CHECK(fit.nu == Approx(2).epsilon(1e-9));
    CHECK(fit.N == Approx(1).epsilon(1e-9));
}

TEST_CASE("transient growth before decay is feasible", "[envelope]") {
    const auto samples = scalar_samples([](Scalar d) { return (1 + d) * std::exp(-d); }, Side::P, 20, 41);
    const auto fit = fit_envelope(samples, Side::P);
    REQUIRE(fit.feasible);
    REQUIRE(fit.nu > 0.1);
    REQUIRE(fit.nu < 1);
    REQUIRE(fit.N > 1);
    REQUIRE(envelope_violation(samples, fit.N, fit.alpha, fit.nu, Side::P) <= 1e-9);
}

TEST_CASE("slow decay is feasible with a small rate", "[envelope]") {
    const auto samples = scalar_samples([](Scalar d) { return std::exp(-0.1 * d); }, Side::Q, 20, 41);
    const auto fit = fit_envelope(samples, Side::Q);
    REQUIRE(fit.feasible);
    CHECK(fit.nu == Approx(0.1).epsilon(1e-6));
}

TEST_CASE("a non-decaying side is divergent", "[envelope]") {
    const auto samples = scalar_samples([](Scalar) { return 1.0; }, Side::P, 10, 21);
    const auto fit = fit_envelope(samples, Side::P);
    REQUIRE_FALSE(fit.feasible);
    REQUIRE_FALSE(fit.rate_at_floor);
    REQUIRE(fit.divergent);
}

TEST_CASE("a growing side is infeasible at the rate floor", "[envelope]") {
    const auto samples = scalar_samples([](Scalar d) { return std::exp(d); }, Side::P, 10, 21);
    const auto fit = fit_envelope(samples, Side::P);
    REQUIRE_FALSE(fit.feasible);
    REQUIRE(fit.rate_at_floor);
    REQUIRE(fit.slack > 0);
}

TEST_CASE("the divergent Q side of the exponential example is rejected", "[envelope]") {
    const auto ex = build(ExampleId::Ex3_2);
    const auto g = grid(20, 41);
    const auto c = certify_dichotomy(ex.family, ex.projection, g, directions(g, 2));
    REQUIRE(c.p_fit.feasible);
    REQUIRE_FALSE(c.q_fit.feasible);
    REQUIRE_FALSE(c.dichotomy);
    REQUIRE(c.q_witness.has_value());
    REQUIRE(c.q_witness->points.size() >= 3);
}

TEST_CASE("fit input errors", "[envelope]") {
    try {
        (void)fit_envelope({}, Side::P);
        FAIL("expected NoSamples");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::NoSamples);
    }
    const auto samples = scalar_samples([](Scalar d) { return std::exp(-d); }, Side::Q, 2, 3);
    try {
        (void)fit_envelope(samples, Side::P);
        FAIL("expected InvalidParam");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::InvalidParam);
    }
}

TEST_CASE("the uniform test on the cosine example fails with a growing witness", "[envelope][witness]") {
    const auto ex = build(ExampleId::Ex2_5);
    const auto set = samples_of(ex, grid(20, 41));
    const auto test = certify_uniform(set.p, Side::P);
    REQUIRE_FALSE(test.feasible);
    REQUIRE(test.witness.has_value());
    const auto& pts = test.witness->points;
    REQUIRE(pts.size() >= 3);
    for (std::size_t i = 1; i < pts.size(); ++i) REQUIRE(pts[i].log_lower_bound > pts[i - 1].log_lower_bound);
    REQUIRE(test.witness->mean_log_step > 0);
}

TEST_CASE("a decaying scalar family has no witness", "[envelope][witness]") {
    const auto samples = scalar_samples([](Scalar d) { return std::exp(-2 * d); }, Side::P, 10, 21);
    REQUIRE_FALSE(find_witness(samples, Side::P, 0, 2).has_value());
}

TEST_CASE("witness catalogue stays inside the horizon", "[envelope][witness]") {
    const auto pairs = witness_catalogue(20);
    REQUIRE_FALSE(pairs.empty());
    bool resonant = false;
    for (const auto& [t, s] : pairs) {
        REQUIRE(s >= 0);
        REQUIRE(t >= s);
        REQUIRE(t <= 20);
        resonant |= std::abs(std::fmod(t, M_PI) - M_PI / 2) < 1e-12 && std::abs(std::fmod(s, M_PI)) < 1e-12;
    }
    REQUIRE(resonant);
}

TEST_CASE("projection norm curve of the similarity example", "[envelope]") {
    const auto ex = build(ExampleId::Ex2_6, {.a = 0.5});
    const auto curve = projection_norm_curve(ex.projection, grid(10, 11));
    for (const auto& [t, norm] : curve) {
        CHECK(norm == Approx(std::sqrt(1 + (t + 0.5) * (t + 0.5))).epsilon(1e-10));
        REQUIRE(norm > t + 0.5);
    }
}
