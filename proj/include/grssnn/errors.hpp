#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grssnn {

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Data that cannot be read, parsed or used (bad CSV, NaNs, zero variance...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A recursion produced a non-finite or out-of-range state.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t sample, const std::string& what)
        : std::runtime_error(what + " (sample " + std::to_string(sample) + ")"), sample_(sample) {}

    std::size_t sample() const noexcept { return sample_; }

private:
    std::size_t sample_;
};

}  // namespace grssnn
