// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "flank/augmentation.hpp"

#include <cmath>

#include "flank/errors.hpp"
#include "flank/rng.hpp"

namespace flank {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kHardRotationCap = 90.0;
}  // namespace

void AugmentationConfig::validate() const {
    if (!(zoom_low > 0.0 && zoom_low <= 1.0 && zoom_high >= 1.0))
        throw ConfigError("zoom_range must satisfy 0 < low <= 1 <= high");
    if (!(max_rotation_degrees >= 0.0 && max_rotation_degrees <= kHardRotationCap))
        throw ConfigError("max_rotation_degrees must lie in [0, 90]");
}

Image zoom(const Image& crop, double factor, const AugmentationConfig& config) {
    config.validate();
    if (crop.width != crop.height)
        throw Error("zoom expects a square crop");
    if (factor < config.zoom_low || factor > config.zoom_high)
        throw Error("zoom factor " + std::to_string(factor) +
                    " outside configured range");
    if (factor == 1.0) return crop;

    // single-pass affine resampling about the center; geometrically the
    // crop-then-resize (zoom in) and pad-then-resize (zoom out) definitions
    const double cx = (crop.width - 1) / 2.0;
    const double cy = (crop.height - 1) / 2.0;
    Image out(crop.width, crop.height);
    std::uint8_t px[3];
    for (int y = 0; y < crop.height; ++y) {
        const double fy = cy + (y - cy) / factor;
        for (int x = 0; x < crop.width; ++x) {
            const double fx = cx + (x - cx) / factor;
            sample_bilinear(crop, fx, fy, config.fill, px);
            out.at(x, y, 0) = px[0];
            out.at(x, y, 1) = px[1];
            out.at(x, y, 2) = px[2];
        }
    }
    return out;
}

Image rotate(const Image& crop, double degrees, const AugmentationConfig& config) {
    config.validate();
    if (crop.width != crop.height)
        throw Error("rotate expects a square crop");
    if (std::abs(degrees) > kHardRotationCap ||
        std::abs(degrees) > config.max_rotation_degrees)
        throw RotationCapError("rotation of " + std::to_string(degrees) +
                               " degrees exceeds the cap");
    if (degrees == 0.0) return crop;

    const double rad = degrees * kPi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cx = (crop.width - 1) / 2.0;
    const double cy = (crop.height - 1) / 2.0;
    Image out(crop.width, crop.height);
    std::uint8_t px[3];
    for (int y = 0; y < crop.height; ++y) {
        for (int x = 0; x < crop.width; ++x) {
            // inverse map: rotate destination coords by -degrees
            const double dx = x - cx, dy = y - cy;
            const double fx = cx + c * dx + s * dy;
            const double fy = cy - s * dx + c * dy;
            sample_bilinear(crop, fx, fy, config.fill, px);
            out.at(x, y, 0) = px[0];
            out.at(x, y, 1) = px[1];
            out.at(x, y, 2) = px[2];
        }
    }
    return out;
}

Image horizontal_flip(const Image& crop) {
    Image out(crop.width, crop.height);
    for (int y = 0; y < crop.height; ++y)
        for (int x = 0; x < crop.width; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) = crop.at(crop.width - 1 - x, y, c);
    return out;
}

std::vector<std::pair<Image, Flank>> augment_batch(
    const std::vector<std::pair<Image, Flank>>& entries,
    const AugmentationConfig& config) {
    config.validate();
    std::vector<std::pair<Image, Flank>> out;
    out.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Rng rng(mix_seed(config.rng_seed, i));
        const double factor = rng.uniform(config.zoom_low, config.zoom_high);
        const double angle =
            rng.uniform(-config.max_rotation_degrees, config.max_rotation_degrees);
        Image img = rotate(zoom(entries[i].first, factor, config), angle, config);
        Flank label = entries[i].second;
        if (config.flip_with_label_swap_enabled && rng.uniform() < 0.5) {
            img = horizontal_flip(img);
            label = swap_flank(label);
        }
        out.emplace_back(std::move(img), label);
    }
    return out;
}

}  // namespace flank
