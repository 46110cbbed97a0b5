#pragma once

#include "dichotomy/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace dichotomy {

/// Sampling region for all grid-relative certifications.
///
/// Times are the union of a uniform grid on [0, t_max], a geometric cluster
/// t_max * 2^-k near zero, and (optionally) the resonant points k*pi/2 where
/// cos^2 and sin^2 switch between 0 and 1. Directions are the coordinate axes
/// followed by `extra_directions` pseudo-random unit vectors drawn from
/// `direction_seed`.
struct GridSpec {
    Scalar t_max = 20.0;
    int time_points = 41;
    int geometric_points = 6;
    bool resonant = true;
    std::uint64_t direction_seed = 20240611;
    int extra_directions = 4;
};

struct TimePair {
    Scalar t;
    Scalar s;
};

struct TimeTriple {
    Scalar t;
    Scalar s;
    Scalar t0;
};

/// Sorted, de-duplicated sample times in [0, t_max].
[[nodiscard]] std::vector<Scalar> time_points(const GridSpec& grid);

/// All ordered pairs t >= s drawn from the sample times.
[[nodiscard]] std::vector<TimePair> time_pairs(const GridSpec& grid);

/// Ordered triples t >= s >= t0 over an evenly thinned subset of at most
/// `max_points` sample times.
[[nodiscard]] std::vector<TimeTriple> time_triples(const GridSpec& grid, int max_points = 10);

/// Axis vectors followed by the seeded random unit vectors.
[[nodiscard]] std::vector<Vector> directions(const GridSpec& grid, int dim);

/// Seeded generator whose output does not depend on the standard library's
/// distribution implementations, so reports stay byte-stable across toolchains.
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    Scalar uniform() { return static_cast<Scalar>(engine_() >> 11) * 0x1.0p-53; }

    Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

    Scalar normal();

    /// Uniformly distributed point on the unit sphere of R^dim.
    Vector unit_vector(int dim);

private:
    std::mt19937_64 engine_;
};

}  // namespace dichotomy
