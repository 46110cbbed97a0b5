#include "dichotomy/examples.hpp"
#include "dichotomy/lyapunov.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace dichotomy;
using Catch::Approx;

namespace {

GridSpec membership_grid() {
    GridSpec g;
    g.t_max = 10;
    g.time_points = 11;
    g.extra_directions = 2;
    return g;
}

LyapunovEvaluator evaluator(Scalar gamma) {
    const auto ex = build(ExampleId::Ex2_5);
    return LyapunovEvaluator(ex.family, ex.projection, canonical_H(ex.projection, gamma), TailEnvelope{1, 1, 3},
                             membership_grid());
}

}  // namespace

TEST_CASE("L is quadratically homogeneous", "[lyapunov][invariant]") {
    const auto L = evaluator(2);
    Vector x(2);
    x << 0.3, -1.2;
    for (Scalar t : {0.0, 1.0, 4.0}) {
        const Scalar base = L(t, x);
        for (Scalar c : {-1.0, 0.0, 2.0}) {
            CHECK(L(t, c * x) == Approx(c * c * base).epsilon(1e-9).margin(1e-300));
        }
    }
}

TEST_CASE("L splits additively over P and Q", "[lyapunov][invariant]") {
    const auto L = evaluator(2);
    const auto& proj = L.projection();
    Vector x(2);
    x << 0.8, 0.6;
    for (Scalar t : {0.5, 2.0, 6.0}) {
        const Scalar whole = L(t, x);
        const Scalar split = L(t, proj.P(t) * x) + L(t, proj.Q(t) * x);
        CHECK(whole == Approx(split).epsilon(1e-9));
    }
}

TEST_CASE("L is nonnegative on P and nonpositive on Q", "[lyapunov]") {
    const auto L = evaluator(2);
    for (Scalar t : {0.0, 1.0, 3.0}) {
        REQUIRE(L(t, Vector::Unit(2, 0)) > 0);
        REQUIRE(L(t, Vector::Unit(2, 1)) <= 0);
    }
    REQUIRE(L(0, Vector::Unit(2, 1)) == 0);
}

TEST_CASE("L is nondecreasing in gamma", "[lyapunov][invariant]") {
    const Vector x = Vector::Ones(2);
    for (Scalar t : {0.5, 2.0}) {
        Scalar last = -std::numeric_limits<Scalar>::infinity();
        for (Scalar gamma : {0.5, 1.0, 2.0, 2.5}) {
            const auto v = evaluator(gamma).evaluate(t, x);
            REQUIRE(v.L >= last - v.error);
            last = v.L;
        }
    }
}

TEST_CASE("an H outside the admissible class is rejected", "[lyapunov]") {
    const auto ex = build(ExampleId::Ex2_5);
    const auto canonical = canonical_H(ex.projection, 1);
    const auto doubled = user_H(1, [canonical](Scalar t) { return Matrix(2 * canonical.map(t)); });
    REQUIRE(membership_violation(doubled, ex.projection, membership_grid(), directions(membership_grid(), 2)) > 0.5);
    try {
        LyapunovEvaluator bad(ex.family, ex.projection, doubled, TailEnvelope{1, 1, 3}, membership_grid());
        FAIL("expected MembershipViolation");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::MembershipViolation);
    }

    const auto half = user_H(1, [canonical](Scalar t) { return Matrix(0.5 * canonical.map(t)); });
    REQUIRE_NOTHROW(LyapunovEvaluator(ex.family, ex.projection, half, TailEnvelope{1, 1, 3}, membership_grid()));
}

TEST_CASE("the constructed L satisfies the Lyapunov inequality and -L does not", "[lyapunov]") {
    const auto L = evaluator(2);
    const auto triples = random_triples(12, 6, 2, 99);
    const auto good = check_lyapunov_inequality(L, triples);
    REQUIRE(good.pass);
    REQUIRE(good.entries.size() == triples.size());

    const auto broken = check_lyapunov_inequality(
        L, [&L](Scalar t, const Vector& x) { return -L(t, x); }, triples);
    REQUIRE_FALSE(broken.pass);
    REQUIRE(broken.max_excess > 0);
}

TEST_CASE("random triples are ordered, unit and reproducible", "[lyapunov]") {
    const auto a = random_triples(20, 5, 3, 1);
    const auto b = random_triples(20, 5, 3, 1);
    REQUIRE(a.size() == 20);
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].t >= a[i].s);
        REQUIRE(a[i].t <= 5);
        REQUIRE(a[i].x.norm() == Approx(1).epsilon(1e-14));
        REQUIRE(a[i].t == b[i].t);
        REQUIRE(a[i].x == b[i].x);
    }
}

TEST_CASE("growth bound and sign conditions", "[lyapunov]") {
    const auto L = evaluator(2);
    const auto g = membership_grid();
    const auto ok = check_L1_L2(L, 2, 2, 1, std::vector<Scalar>{0.0, 1.0, 3.0}, directions(g, 2));
    REQUIRE(ok.l2_holds);
    REQUIRE(ok.l1_holds);
    REQUIRE(ok.tightest_K <= 2);
    const auto tight = check_L1_L2(L, ok.tightest_K / 2, 2, 1, std::vector<Scalar>{0.0, 1.0, 3.0}, directions(g, 2));
    REQUIRE_FALSE(tight.l1_holds);
}

TEST_CASE("polarized W reproduces L", "[lyapunov][polarization]") {
    const auto L = evaluator(2);
    for (Scalar t : {0.0, 1.0, 5.0}) {
        const auto w = polarize_W(L, t);
        REQUIRE(w.matrix.rows() == 2);
        REQUIRE((w.matrix - w.matrix.transpose()).norm() == 0);
        REQUIRE(w.consistency <= 1e-6);
        REQUIRE(w.p_range_nonnegative);
        REQUIRE(w.q_range_nonpositive);
        Vector x(2);
        x << -0.4, 1.7;
        CHECK(x.dot(w.matrix * x) == Approx(L(t, x)).epsilon(1e-8));
    }
}

TEST_CASE("polarization in a non-standard basis", "[lyapunov][polarization]") {
    const auto L = evaluator(2);
    Matrix basis(2, 2);
    basis << 1, 1, 0, 2;
    const auto w = polarize_W(L, 1, basis);
    const auto plain = polarize_W(L, 1);
    REQUIRE((w.matrix - plain.matrix).norm() <= 1e-8 * plain.matrix.norm());
}
