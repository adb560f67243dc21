#pragma once

#include <stdexcept>
#include <string>

namespace dsnet {

// Shape or size disagreement between tensors / layers.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller broke an API precondition (bad argument combination, missing grad, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or failed numeric verification.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed on-disk data (checkpoint, PGM, config file).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem problems (missing files, unwritable paths).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid user-supplied specification values (zoom <= 0, threshold out of range, ...).
struct SpecError : std::runtime_error {
    explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dsnet
