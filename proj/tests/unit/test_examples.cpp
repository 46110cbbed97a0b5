#include "dichotomy/examples.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace dichotomy;
using Catch::Approx;

namespace {

GridSpec grid() {
    GridSpec g;
    g.t_max = 20;
    g.time_points = 41;
    return g;
}

}  // namespace

TEST_CASE("example ids round-trip through their names", "[examples]") {
    for (auto id : {ExampleId::Ex2_5, ExampleId::Ex2_6, ExampleId::Ex2_8, ExampleId::Ex3_2}) {
        REQUIRE(parse_example_id(to_string(id)) == id);
    }
    REQUIRE_FALSE(parse_example_id("Ex9_9").has_value());
}

TEST_CASE("the similarity example needs a positive shift", "[examples]") {
    for (Scalar a : {0.0, -1.0}) {
        try {
            (void)build(ExampleId::Ex2_6, {.a = a});
            FAIL("expected InvalidParam");
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::InvalidParam);
        }
    }
}

TEST_CASE("closed-form norms match the generic evaluation path", "[examples]") {
    for (auto id : {ExampleId::Ex2_5, ExampleId::Ex3_2}) {
        const auto ex = build(id);
        for (auto [t, s] : {std::pair{3.0, 1.0}, {7.0, 0.0}, {5.5, 5.5}, {12.0, 4.7}}) {
            const Scalar p = spectral_norm(ex.family(t, s) * ex.projection.P(s));
            const Scalar q = spectral_norm(evaluate_UQ_inverse(ex.family, ex.projection, s, t));
            CHECK(ex.p_norm(t, s) == Approx(p).epsilon(1e-12));
            CHECK(ex.q_norm(t, s) == Approx(q).epsilon(1e-12));
        }
    }
}

TEST_CASE("generalized cosine family", "[examples]") {
    const auto family = generalized_cosine_family(1, 2, 1);
    const Scalar t = 2.5;
    const Scalar s = 0.7;
    const auto f = [](Scalar x) { return x * (1 + 2 * std::cos(x) * std::cos(x)); };
    CHECK(family(t, s)(0, 0) == Approx(std::exp(f(s) - f(t))).epsilon(1e-13));
    const auto growing = generalized_cosine_family(1, 2, -1);
    CHECK(growing(t, s)(0, 0) == Approx(std::exp(f(t) - f(s))).epsilon(1e-13));
}

TEST_CASE("every known fact is reproduced", "[examples]") {
    for (auto id : {ExampleId::Ex2_5, ExampleId::Ex2_6, ExampleId::Ex2_8, ExampleId::Ex3_2}) {
        const auto ex = build(id);
        REQUIRE_FALSE(ex.known_facts.empty());
        for (const auto& fact : ex.known_facts) {
            const auto check = verify_known_fact(ex, fact, grid());
            INFO(to_string(id) << " " << to_string(fact.kind) << ": " << fact.claim << " -> " << check.detail);
            CHECK(check.reproduced);
        }
    }
}

TEST_CASE("a wrong claim is not reproduced", "[examples]") {
    const auto ex = build(ExampleId::Ex2_5);
    const KnownFact wrong{KnownFact::Kind::EnvelopeConstants, Side::P, {1, 1, 3.5}, 1e-9, "too fast"};
    REQUIRE_FALSE(verify_known_fact(ex, wrong, grid()).reproduced);
}
