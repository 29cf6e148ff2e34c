#pragma once

#include <stdexcept>
#include <string>

namespace wavebeat {

// Unreadable or malformed inputs: audio files, annotations, manifests,
// checkpoints. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric breakdown during computation (non-finite loss and the like).
// The CLI maps these to exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace wavebeat
