// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <stdexcept>
#include <string>

namespace flank {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Configuration document failed validation (skeleton map, annotation schema, ...).
struct ConfigError : Error {
    using Error::Error;
};

/// Bounding box does not intersect the image.
struct EmptyCropError : Error {
    using Error::Error;
};

/// Keypoint coordinate outside the declared image bounds.
struct OutOfBoundsError : Error {
    using Error::Error;
};

/// Rotation request beyond the configured (or hard 90 degree) cap.
struct RotationCapError : Error {
    using Error::Error;
};

/// Non-finite activation or gradient; carries the offending layer index.
struct NumericalError : Error {
    int layer_index;
    NumericalError(int layer, const std::string& what)
        : Error(what), layer_index(layer) {}
};

/// Checkpoint file is malformed (bad magic, version, shape table, truncation).
struct CheckpointError : Error {
    using Error::Error;
};

}  // namespace flank
