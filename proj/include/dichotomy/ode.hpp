#pragma once

#include "dichotomy/types.hpp"

namespace dichotomy {

struct OdePolicy {
    Scalar rel_tol = 1e-10;
    Scalar abs_tol = 1e-12;
    int max_steps = 200000;
};

struct PropagationStats {
    int accepted = 0;
    int rejected = 0;
};

/// Solution operator of X' = A(tau) X, X(s) = Id, evaluated at tau = t >= s.
///
/// Dormand-Prince 5(4) with embedded error control on every matrix entry.
/// Throws PropagationFailure when the step size collapses or the step budget
/// is exhausted.
[[nodiscard]] Matrix propagate(const MatrixFunction& coefficient, int dim, Scalar s, Scalar t,
                               const OdePolicy& policy = {}, PropagationStats* stats = nullptr);

}  // namespace dichotomy
