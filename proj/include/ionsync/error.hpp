#pragma once

#include <stdexcept>
#include <string>

namespace ionsync {

/// Base class of every error thrown by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class invalid_parameter : public error {
public:
    using error::error;
};

/// Iterative solve or residual check did not reach its tolerance.
class convergence_error : public error {
public:
    using error::error;
};

/// The Liouvillian null space is not one-dimensional.
class multiple_steady_states : public error {
public:
    using error::error;
};

/// Eigenmodes are too close to an exceptional point for an eigen-expansion.
class defective_modes : public error {
public:
    using error::error;
};

class eigensolver_error : public error {
public:
    using error::error;
};

class not_found : public error {
public:
    using error::error;
};

class integration_failure : public error {
public:
    using error::error;
};

/// Adaptive step size collapsed.
class stiffness_error : public integration_failure {
public:
    using integration_failure::integration_failure;
};

class fit_failure : public error {
public:
    fit_failure(const std::string& what, double residual)
        : error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class undefined_measure : public error {
public:
    using error::error;
};

/// Mean-field trajectory left every physically reasonable bound.
class blow_up : public error {
public:
    using error::error;
};

} // namespace ionsync
