// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "flank/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "flank/errors.hpp"

namespace flank {

namespace {

int read_ppm_token(std::istream& in) {
    // skips whitespace and '#' comments between header fields
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            in.unget();
            break;
        }
    }
    int value = -1;
    in >> value;
    return value;
}

std::uint8_t round_px(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
}

}  // namespace

Image load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image: " + path.string());
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '6')
        throw Error("not a binary PPM (P6): " + path.string());
    const int w = read_ppm_token(in);
    const int h = read_ppm_token(in);
    const int maxval = read_ppm_token(in);
    if (w <= 0 || h <= 0 || maxval != 255)
        throw Error("unsupported PPM header in " + path.string());
    in.get();  // single whitespace after maxval
    Image img(w, h);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw Error("truncated PPM payload in " + path.string());
    return img;
}

void save_ppm(const Image& img, const std::filesystem::path& path) {
    if (img.empty()) throw Error("refusing to write empty image: " + path.string());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image: " + path.string());
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw Error("write failure: " + path.string());
}

void sample_bilinear(const Image& img, double fx, double fy, FillPolicy fill,
                     std::uint8_t out[3]) {
    if (fill == FillPolicy::ConstantBlack &&
        (fx < 0.0 || fy < 0.0 || fx > img.width - 1.0 || fy > img.height - 1.0)) {
        out[0] = out[1] = out[2] = 0;
        return;
    }
    const double cx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
    const double cy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    const int x0 = static_cast<int>(std::floor(cx));
    const int y0 = static_cast<int>(std::floor(cy));
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double tx = cx - x0;
    const double ty = cy - y0;
    for (int c = 0; c < 3; ++c) {
        const double top = img.at(x0, y0, c) * (1.0 - tx) + img.at(x1, y0, c) * tx;
        const double bot = img.at(x0, y1, c) * (1.0 - tx) + img.at(x1, y1, c) * tx;
        out[c] = round_px(top * (1.0 - ty) + bot * ty);
    }
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
    if (img.empty()) throw Error("resize of empty image");
    if (out_w <= 0 || out_h <= 0) throw Error("resize to non-positive size");
    if (out_w == img.width && out_h == img.height) return img;
    Image out(out_w, out_h);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    std::uint8_t px[3];
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            sample_bilinear(img, fx, fy, FillPolicy::EdgeReplicate, px);
            out.at(x, y, 0) = px[0];
            out.at(x, y, 1) = px[1];
            out.at(x, y, 2) = px[2];
        }
    }
    return out;
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > img.width ||
        y0 + h > img.height)
        throw Error("crop rectangle outside image");
    Image out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
    return out;
}

}  // namespace flank
