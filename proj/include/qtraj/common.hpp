#ifndef QTRAJ_COMMON_HPP
#define QTRAJ_COMMON_HPP

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qtraj {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

inline constexpr cplx I{0.0, 1.0};

// Invalid argument (bad dimension, nonpositive rate, ...).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A configuration that cannot produce a valid run (lambda*dt too large,
// truncation too small, missing dataset, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A numerical guard tripped during a run (trace drift, step-size violation,
// truncation leakage, singular denominator, ill conditioning).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace qtraj

#endif
