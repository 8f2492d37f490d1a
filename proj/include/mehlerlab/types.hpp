#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mehlerlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Cplx = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Precondition violations on caller-supplied arguments (time ordering,
/// grid alignment, parameter ranges).
struct DomainError : std::invalid_argument {
  explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Non-finite values, blowup during integration, failed transfer checks.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad scenario files, unresolved catalog names, inconsistent dimensions.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Running sums exceed what the user-supplied stability hint allows.
struct StabilityError : std::runtime_error {
  explicit StabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool is_finite(const Mat& m) { return m.allFinite(); }
inline bool is_finite(const Vec& v) { return v.allFinite(); }

}  // namespace mehlerlab
