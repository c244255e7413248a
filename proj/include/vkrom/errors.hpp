#pragma once

#include <stdexcept>
#include <string>

namespace vkrom {

/// Precondition violated by a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The requested operation is not defined for this configuration
/// (e.g. second derivatives of P1 elements).
class UnsupportedOperation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class OutOfDomain : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Factorization failed or the solve did not reach the residual tolerance.
class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input carries no information to work with (all-zero snapshots, ...).
class DegenerateInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace vkrom
