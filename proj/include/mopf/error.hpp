#pragma once

#include <stdexcept>
#include <string>

namespace mopf {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed case text or schema violation. The message carries a JSON path.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Relaxation order below half the degree of some polynomial in the program.
class OrderTooLowError : public Error {
public:
    using Error::Error;
};

} // namespace mopf
