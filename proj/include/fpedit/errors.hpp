#ifndef FPEDIT_ERRORS_HPP
#define FPEDIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fpedit {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (missing file, N > M, out-of-range knob).
struct ConfigError : Error {
    using Error::Error;
};

// Malformed call-site input (empty text, zero vector, dimension mismatch).
struct InputError : Error {
    using Error::Error;
};

// Numerical failure that must not pass silently (zero-probability token,
// non-converged eigensolve, singular system).
struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Remote scoring: the request never completed (network, timeout).
struct TransportError : Error {
    using Error::Error;
};

// Remote scoring: the request completed but the payload violates the contract.
struct SchemaError : Error {
    using Error::Error;
};

} // namespace fpedit

#endif
