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
#include <filesystem>
#include <vector>

namespace flank {

/// How samples outside the source raster are produced.
enum class FillPolicy {
    EdgeReplicate,  // clamp to the nearest border pixel
    ConstantBlack,
};

/// 8-bit RGB raster, row-major, interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // size == width * height * 3

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h),
          data(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::uint8_t& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    bool empty() const { return width <= 0 || height <= 0; }

    bool operator==(const Image&) const = default;
};

/// Binary PPM (P6, maxval 255). The toolkit's only raster format; crops are
/// written losslessly with it.
Image load_ppm(const std::filesystem::path& path);
void save_ppm(const Image& img, const std::filesystem::path& path);

/// Bilinear sample at fractional source coordinates (pixel-center convention).
/// Coordinates outside [0, w-1] x [0, h-1] resolve per `fill`.
void sample_bilinear(const Image& img, double fx, double fy, FillPolicy fill,
                     std::uint8_t out[3]);

/// Bilinear resize. Source coordinate of destination pixel d is
/// (d + 0.5) * src/dst - 0.5, clamped to the source extent. Deterministic:
/// pure double arithmetic, rounded half away from zero at the end.
Image resize_bilinear(const Image& img, int out_w, int out_h);

/// Copies the given rectangle; caller guarantees it lies inside the image.
Image crop(const Image& img, int x0, int y0, int w, int h);

}  // namespace flank
