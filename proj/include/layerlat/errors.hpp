#pragma once

#include <stdexcept>
#include <string>

namespace layerlat {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/axis disagreements between tensors or grids.
struct DimensionError : Error {
    using Error::Error;
};

// Out-of-range scalar arguments (ratios, step counts, scales).
struct ParameterError : Error {
    using Error::Error;
};

// Malformed on-disk payloads (NetPBM, LLAT, LPAR).
struct FormatError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Non-finite values escaping a numeric loop.
struct NumericError : Error {
    using Error::Error;
};

// Plan schema violations and unknown tasks.
struct ValidationError : Error {
    using Error::Error;
};

struct TrainingError : Error {
    using Error::Error;
};

// Step-hook contract breaches (e.g. a hook changing a latent's shape).
struct ContractError : Error {
    using Error::Error;
};

}  // namespace layerlat
