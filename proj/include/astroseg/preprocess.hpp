#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "astroseg/errors.hpp"
#include "astroseg/image.hpp"

namespace astroseg {

// Enhancement chain applied before segmentation: log transform to lift faint
// structure, grayscale erosion to knock out bright point sources, Gaussian
// smoothing to suppress noise. All borders are handled by replicating the edge
// pixel so no artificial dark rim is introduced.

struct NonPositiveC : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};
struct NonPositiveSigma : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};

// With this c the transform maps [0,1] onto [0,1] exactly: c * ln(2) = 1.
inline constexpr double default_log_c = 1.0 / std::numbers::ln2;

// Binary footprint of a morphological operator, anchored at its center cell.
struct StructuringElement {
    int width = 3;
    int height = 3;
    std::vector<std::uint8_t> mask; // row-major, true = member

    static StructuringElement square(int size) {
        if (size < 1 || size % 2 == 0)
            throw InvalidArgument("structuring element size must be odd and positive");
        StructuringElement se;
        se.width = se.height = size;
        se.mask.assign(static_cast<std::size_t>(size) * size, 1);
        return se;
    }

    static StructuringElement cross(int size) {
        if (size < 1 || size % 2 == 0)
            throw InvalidArgument("structuring element size must be odd and positive");
        StructuringElement se;
        se.width = se.height = size;
        se.mask.assign(static_cast<std::size_t>(size) * size, 0);
        int c = size / 2;
        for (int i = 0; i < size; ++i) {
            se.mask[static_cast<std::size_t>(c) * size + i] = 1;
            se.mask[static_cast<std::size_t>(i) * size + c] = 1;
        }
        return se;
    }
};

struct GaussianKernel {
    double sigma = 1.0;
    int radius = 1;
    std::vector<double> taps; // 2*radius+1 entries, symmetric, sum 1
};

// s = c * ln(r + 1), clamped back into [0,1] for c above the default.
inline Image log_transform(const Image& img, double c = default_log_c) {
    if (c <= 0.0)
        throw NonPositiveC("log transform constant must be positive");
    Image out(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.data[i] = clamp01(c * std::log1p(img.data[i]));
    return out;
}

// Grayscale erosion: each output pixel is the minimum of the input under the
// footprint. A bright pixel smaller than the element disappears into its
// surroundings, which is exactly the point-source removal this stage is for.
inline Image erode(const Image& img, const StructuringElement& se) {
    if (se.width < 1 || se.height < 1 || se.width % 2 == 0 || se.height % 2 == 0 ||
        se.mask.size() != static_cast<std::size_t>(se.width) * se.height)
        throw InvalidArgument("structuring element dimensions must be odd and match its mask");
    const int rx = se.width / 2;
    const int ry = se.height / 2;
    if (!se.mask[static_cast<std::size_t>(ry) * se.width + rx])
        throw InvalidArgument("structuring element center must be a member");
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double m = 1.0;
            for (int dy = -ry; dy <= ry; ++dy) {
                const int sy = std::clamp(y + dy, 0, img.height - 1);
                const std::uint8_t* row = se.mask.data() + static_cast<std::size_t>(dy + ry) * se.width;
                for (int dx = -rx; dx <= rx; ++dx) {
                    if (!row[dx + rx])
                        continue;
                    const int sx = std::clamp(x + dx, 0, img.width - 1);
                    m = std::min(m, img.at(sx, sy));
                }
            }
            out.at(x, y) = m;
        }
    }
    return out;
}

// Samples G(x) = exp(-x^2 / (2 sigma^2)) / sqrt(2 pi sigma^2) at integer offsets
// out to radius ceil(3 sigma), then renormalizes so the truncated taps sum to 1.
inline GaussianKernel gaussian_kernel(double sigma) {
    if (sigma <= 0.0)
        throw NonPositiveSigma("gaussian sigma must be positive");
    GaussianKernel k;
    k.sigma = sigma;
    k.radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    k.taps.resize(static_cast<std::size_t>(2 * k.radius + 1));
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
    double sum = 0.0;
    for (int x = -k.radius; x <= k.radius; ++x) {
        double g = norm * std::exp(-(static_cast<double>(x) * x) / (2.0 * sigma * sigma));
        k.taps[static_cast<std::size_t>(x + k.radius)] = g;
        sum += g;
    }
    for (double& t : k.taps)
        t /= sum;
    return k;
}

// Separable convolution: horizontal pass then vertical pass with the same 1-D
// kernel, replicate padding. A unit-sum kernel keeps constants constant and the
// output inside [min, max] of the input.
inline Image gaussian_smooth(const Image& img, double sigma) {
    const GaussianKernel k = gaussian_kernel(sigma);
    const int r = k.radius;

    Image horiz(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int d = -r; d <= r; ++d)
                acc += k.taps[static_cast<std::size_t>(d + r)] *
                       img.at(std::clamp(x + d, 0, img.width - 1), y);
            horiz.at(x, y) = acc;
        }
    }
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int d = -r; d <= r; ++d)
                acc += k.taps[static_cast<std::size_t>(d + r)] *
                       horiz.at(x, std::clamp(y + d, 0, img.height - 1));
            out.at(x, y) = clamp01(acc);
        }
    }
    return out;
}

} // namespace astroseg
