#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <functional>
#include <stdexcept>
#include <string>

namespace dichotomy {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Matrix-valued function of time, e.g. P(t), S(t) or A(t).
using MatrixFunction = std::function<Matrix(Scalar)>;
/// Scalar function of time, e.g. a diagonal exponent f(t).
using ScalarFunction = std::function<Scalar(Scalar)>;
/// Two-time operator (t, s) -> U(t, s).
using Propagator = std::function<Matrix(Scalar, Scalar)>;

enum class ErrorCode {
    NonOrderedTimes,
    PropagationFailure,
    SingularRestriction,
    CommutationViolation,
    RestrictionNotInvertible,
    EmptyRange,
    NoSamples,
    DivergentTail,
    QuadratureFailure,
    HypothesisViolated,
    InvalidParam,
    NotQuadratic,
    MembershipViolation,
};

[[nodiscard]] constexpr const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NonOrderedTimes: return "NonOrderedTimes";
        case ErrorCode::PropagationFailure: return "PropagationFailure";
        case ErrorCode::SingularRestriction: return "SingularRestriction";
        case ErrorCode::CommutationViolation: return "CommutationViolation";
        case ErrorCode::RestrictionNotInvertible: return "RestrictionNotInvertible";
        case ErrorCode::EmptyRange: return "EmptyRange";
        case ErrorCode::NoSamples: return "NoSamples";
        case ErrorCode::DivergentTail: return "DivergentTail";
        case ErrorCode::QuadratureFailure: return "QuadratureFailure";
        case ErrorCode::HypothesisViolated: return "HypothesisViolated";
        case ErrorCode::InvalidParam: return "InvalidParam";
        case ErrorCode::NotQuadratic: return "NotQuadratic";
        case ErrorCode::MembershipViolation: return "MembershipViolation";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

    /// True for failures of the numerics (as opposed to bad input or a failed hypothesis).
    [[nodiscard]] bool numerical() const noexcept {
        return code_ == ErrorCode::DivergentTail || code_ == ErrorCode::QuadratureFailure ||
               code_ == ErrorCode::PropagationFailure || code_ == ErrorCode::NotQuadratic;
    }

private:
    ErrorCode code_;
};

/// Which half of the splitting a quantity refers to: the forward-decaying
/// range of P or the backward-decaying range of Q = Id - P.
enum class Side { P, Q };

[[nodiscard]] constexpr const char* to_string(Side side) noexcept {
    return side == Side::P ? "P" : "Q";
}

/// Operator norm induced by the Euclidean vector norm.
template <typename Derived>
[[nodiscard]] typename Derived::RealScalar spectral_norm(const Eigen::MatrixBase<Derived>& m) {
    using Plain = typename Derived::PlainObject;
    if (m.size() == 0) return 0;
    if (m.cols() == 1 || m.rows() == 1) return m.norm();
    Eigen::JacobiSVD<Plain> svd(m.eval());
    return svd.singularValues()(0);
}

/// Smallest singular value; zero for an empty or rank-deficient operator.
template <typename Derived>
[[nodiscard]] typename Derived::RealScalar smallest_singular_value(const Eigen::MatrixBase<Derived>& m) {
    using Plain = typename Derived::PlainObject;
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Plain> svd(m.eval());
    const auto& sv = svd.singularValues();
    return sv(sv.size() - 1);
}

/// ||P^2 - P|| for a candidate projector.
template <typename Derived>
[[nodiscard]] typename Derived::RealScalar idempotency_residual(const Eigen::MatrixBase<Derived>& p) {
    return spectral_norm((p * p - p).eval());
}

}  // namespace dichotomy
