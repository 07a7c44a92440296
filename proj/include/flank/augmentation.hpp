// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "flank/image.hpp"
#include "flank/label_derivation.hpp"

namespace flank {

/// Label-safe geometric augmentation: random zoom and bounded random
/// rotation. Plain horizontal flipping inverts the flank label, so it is
/// only available paired with a label swap, and off by default.
struct AugmentationConfig {
    double zoom_low = 0.8;    // 0 < low <= 1
    double zoom_high = 1.25;  // >= 1
    double max_rotation_degrees = 30.0;  // hard cap 90
    bool flip_with_label_swap_enabled = false;
    std::uint64_t rng_seed = 0;
    FillPolicy fill = FillPolicy::EdgeReplicate;

    void validate() const;  // throws ConfigError on range violations
};

/// Scales about the image center; output size equals input size. factor > 1
/// magnifies the central 1/factor fraction; factor < 1 shrinks the content to
/// the central factor fraction with borders per `fill`. factor == 1 is a
/// bit-identical copy. Crop must be square.
Image zoom(const Image& crop, double factor, const AugmentationConfig& config);

/// Rotates about the image center (positive = counter-clockwise), bilinear
/// resampling, revealed corners per `fill`; 0 degrees is bit-identical.
/// Requests beyond min(config cap, 90) throw RotationCapError.
Image rotate(const Image& crop, double degrees, const AugmentationConfig& config);

Image horizontal_flip(const Image& crop);

/// Per-entry (factor, angle[, flip]) draws from a generator seeded by
/// (rng_seed, entry index); same seed and inputs reproduce bit-identical
/// output. Labels pass through unchanged unless flipping is enabled, in
/// which case the label is swapped exactly when the flip is applied.
std::vector<std::pair<Image, Flank>> augment_batch(
    const std::vector<std::pair<Image, Flank>>& entries,
    const AugmentationConfig& config);

}  // namespace flank
