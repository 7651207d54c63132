#pragma once

#include <stdexcept>
#include <string>

namespace fairkit {

// Dimension or layout mismatch between tensors/layers.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid argument values (alpha out of range, empty batch, bad fractions...).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// API misuse: stale forward cache, apply on unfitted thresholds, etc.
class ContractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// NaN/inf encountered where training must abort.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dataset/file content problems (missing group, malformed CSV, empty mask...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid experiment/trainer configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fairkit
