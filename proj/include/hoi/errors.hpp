#pragma once

#include <stdexcept>
#include <string>

namespace hoi {

// Shape disagreement between tensors (messages name both shapes).
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid run configuration or invalid combination of call options.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Out-of-range numeric argument (step sizes, probabilities, thresholds).
struct ParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed text input (config files, dataset files, manifests).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Stored binary data does not match its manifest.
struct CorruptionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint structure does not match the active configuration.
struct CompatibilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Geometrically invalid box input (zero or negative area).
struct DegenerateBoxError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A function expected to be deterministic returned differing values.
struct DeterminismError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// More ground-truth rows than available prediction slots.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss or a comparable unrecoverable failure inside training.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hoi
