#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace glocad {

/// Malformed arguments: dimension mismatches, empty sample sets, invariant violations.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operation not defined for the given kernel family or configuration.
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A numerical procedure produced non-finite values or failed to converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Integration left the finite region. Carries the last state that was still valid.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, Eigen::VectorXd last_valid, double last_time)
        : NumericalError(what), last_valid_(std::move(last_valid)), last_time_(last_time) {}

    const Eigen::VectorXd& last_valid_state() const noexcept { return last_valid_; }
    double last_valid_time() const noexcept { return last_time_; }

private:
    Eigen::VectorXd last_valid_;
    double last_time_;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InputError(msg);
}

}  // namespace detail
}  // namespace glocad
