#pragma once

#include <stdexcept>
#include <string>

namespace radar {

// Error taxonomy shared by the library and the CLI. The CLI maps each
// class to a distinct exit code (see tools/radar_perceive.cpp).
struct RadarError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad argument values or malformed domain data.
struct InvalidInputError : RadarError {
    using RadarError::RadarError;
};

// Tensor/image dimension disagreements; message names both shapes.
struct ShapeError : RadarError {
    using RadarError::RadarError;
};

// Layer stack and weight set do not describe the same network.
struct ArchitectureError : RadarError {
    using RadarError::RadarError;
};

// Corrupt or foreign file contents (bad magic, truncation, version).
struct FormatError : RadarError {
    using RadarError::RadarError;
};

// Operation invoked with stale or mismatched cached state.
struct InvalidStateError : RadarError {
    using RadarError::RadarError;
};

// Filesystem failures (missing file, short write).
struct IoError : RadarError {
    using RadarError::RadarError;
};

}  // namespace radar
