#pragma once

#include <stdexcept>
#include <string>

namespace lowlight {

// shape/geometry mismatch between operands
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// API precondition violated (non-scalar backward seed, t out of range, ...)
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// unreadable or malformed external data
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf surfaced where finite values are required
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lowlight
