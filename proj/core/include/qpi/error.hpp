#pragma once

#include <stdexcept>

namespace qpi {

// Argument or invariant violation (bad ranges, mismatched shapes, ROI out of bounds).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or missing input data (files, metadata, degenerate measurements).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace qpi
