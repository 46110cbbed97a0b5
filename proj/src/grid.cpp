#include "dichotomy/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dichotomy {

std::vector<Scalar> time_points(const GridSpec& grid) {
    if (!(grid.t_max > 0) || grid.time_points < 2) {
        throw Error(ErrorCode::InvalidParam, "grid needs t_max > 0 and at least two time points");
    }
    std::vector<Scalar> ts;
    const int n = grid.time_points;
    for (int i = 0; i < n; ++i) {
        ts.push_back(grid.t_max * static_cast<Scalar>(i) / static_cast<Scalar>(n - 1));
    }
    for (int k = 1; k <= grid.geometric_points; ++k) {
        ts.push_back(grid.t_max * std::ldexp(1.0, -k - 4));
    }
    if (grid.resonant) {
        const Scalar quarter = std::numbers::pi / 2;
        for (int k = 1; k * quarter <= grid.t_max; ++k) ts.push_back(k * quarter);
    }
    std::sort(ts.begin(), ts.end());
    // Merge points closer than a relative 1e-9: they add nothing but duplicate constraints.
    std::vector<Scalar> out;
    for (Scalar t : ts) {
        if (out.empty() || t - out.back() > 1e-9 * std::max<Scalar>(1, t)) out.push_back(t);
    }
    return out;
}

std::vector<TimePair> time_pairs(const GridSpec& grid) {
    const auto ts = time_points(grid);
    std::vector<TimePair> pairs;
    pairs.reserve(ts.size() * (ts.size() + 1) / 2);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) pairs.push_back({ts[i], ts[j]});
    }
    return pairs;
}

std::vector<TimeTriple> time_triples(const GridSpec& grid, int max_points) {
    const auto all = time_points(grid);
    std::vector<Scalar> ts;
    const auto m = static_cast<std::size_t>(std::max(2, max_points));
    if (all.size() <= m) {
        ts = all;
    } else {
        for (std::size_t k = 0; k < m; ++k) ts.push_back(all[k * (all.size() - 1) / (m - 1)]);
    }
    std::vector<TimeTriple> triples;
    for (std::size_t i = 0; i < ts.size(); ++i)
        for (std::size_t j = 0; j <= i; ++j)
            for (std::size_t k = 0; k <= j; ++k) triples.push_back({ts[i], ts[j], ts[k]});
    return triples;
}

std::vector<Vector> directions(const GridSpec& grid, int dim) {
    std::vector<Vector> out;
    for (int i = 0; i < dim; ++i) out.push_back(Vector::Unit(dim, i));
    PortableRng rng(grid.direction_seed);
    for (int k = 0; k < grid.extra_directions; ++k) out.push_back(rng.unit_vector(dim));
    return out;
}

Scalar PortableRng::normal() {
    // Box-Muller; u1 is kept away from zero.
    const Scalar u1 = 1.0 - uniform();
    const Scalar u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector PortableRng::unit_vector(int dim) {
    Vector v(dim);
    do {
        for (int i = 0; i < dim; ++i) v(i) = normal();
    } while (v.norm() < 1e-8);
    return v / v.norm();
}

}  // namespace dichotomy
