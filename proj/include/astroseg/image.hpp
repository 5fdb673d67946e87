#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "astroseg/errors.hpp"

namespace astroseg {

// Owned 2-D grid of grayscale intensities, row-major, each value in [0, 1].
// This is the currency every pipeline stage consumes and produces.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
        if (w < 1 || h < 1)
            throw InvalidArgument("image dimensions must be at least 1x1");
    }

    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }
};

// Binary image, true = foreground.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(int w, int h, bool fill = false)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {
        if (w < 1 || h < 1)
            throw InvalidArgument("mask dimensions must be at least 1x1");
    }

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t size() const { return bits.size(); }
    std::size_t foreground_count() const {
        return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
    }
};

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Single quantization rule used everywhere an intensity becomes an integer code.
inline long long round_half_up(double v) { return static_cast<long long>(std::floor(v + 0.5)); }

inline std::pair<double, double> min_max(const Image& img) {
    double lo = img.data[0], hi = img.data[0];
    for (double v : img.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

// Snaps every intensity to the grid {k/maxval}. Stage artifacts are written from
// the snapped image, so a written-then-reread PGM reproduces the in-memory pixels
// bit for bit.
inline Image quantize(const Image& img, int maxval) {
    Image out(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        long long code = round_half_up(clamp01(img.data[i]) * maxval);
        out.data[i] = static_cast<double>(code) / maxval;
    }
    return out;
}

} // namespace astroseg
