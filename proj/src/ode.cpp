#include "dichotomy/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dichotomy {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr Scalar c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr Scalar a21 = 1.0 / 5;
constexpr Scalar a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr Scalar a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr Scalar a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr Scalar a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr Scalar b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Difference between the 5th and embedded 4th order weights.
constexpr Scalar e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

Matrix propagate(const MatrixFunction& coefficient, int dim, Scalar s, Scalar t, const OdePolicy& policy,
                 PropagationStats* stats) {
    if (t < s) throw Error(ErrorCode::NonOrderedTimes, "propagate requires t >= s");
    Matrix y = Matrix::Identity(dim, dim);
    if (t == s) return y;

    auto rhs = [&](Scalar tau, const Matrix& state) -> Matrix {
        Matrix a = coefficient(tau);
        if (a.rows() != dim || a.cols() != dim) {
            throw Error(ErrorCode::InvalidParam, "coefficient matrix has the wrong shape");
        }
        return a * state;
    };

    const Scalar span = t - s;
    Scalar h = std::min<Scalar>(span, 0.01 * std::max<Scalar>(1.0, span));
    {
        // Scale the first step to the size of A so stiff-ish starts are not overshot.
        const Scalar a_norm = rhs(s, y).norm();
        if (a_norm > 0) h = std::min(h, 0.1 * std::pow(policy.rel_tol, 0.2) / a_norm * 10);
    }
    Scalar tau = s;
    Matrix k1 = rhs(tau, y);
    int accepted = 0, rejected = 0;

    while (tau < t) {
        if (accepted + rejected >= policy.max_steps) {
            throw Error(ErrorCode::PropagationFailure, "step budget exhausted at tau = " + std::to_string(tau));
        }
        if (tau + h > t) h = t - tau;
        if (h <= 1e-14 * std::max<Scalar>(1.0, std::abs(tau))) {
            throw Error(ErrorCode::PropagationFailure, "step size underflow at tau = " + std::to_string(tau));
        }

        const Matrix k2 = rhs(tau + c2 * h, y + h * (a21 * k1));
        const Matrix k3 = rhs(tau + c3 * h, y + h * (a31 * k1 + a32 * k2));
        const Matrix k4 = rhs(tau + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Matrix k5 = rhs(tau + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Matrix k6 = rhs(tau + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Matrix y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Matrix k7 = rhs(tau + h, y_new);
        const Matrix err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const Matrix scale =
            (policy.abs_tol + policy.rel_tol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array()).matrix();
        const Scalar err_norm = std::sqrt((err.array() / scale.array()).square().mean());
        if (!std::isfinite(err_norm)) {
            throw Error(ErrorCode::PropagationFailure, "non-finite state at tau = " + std::to_string(tau));
        }

        if (err_norm <= 1.0) {
            tau = (t - (tau + h) < 1e-15 * std::max<Scalar>(1.0, std::abs(t))) ? t : tau + h;
            y = y_new;
            k1 = k7;
            ++accepted;
        } else {
            ++rejected;
        }
        const Scalar factor = err_norm == 0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
        h *= factor;
    }
    if (stats) *stats = {accepted, rejected};
    return y;
}

}  // namespace dichotomy
