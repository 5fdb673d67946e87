#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "astroseg/errors.hpp"
#include "astroseg/image.hpp"
#include "astroseg/segmentation.hpp"

namespace astroseg {

// The 7 region descriptors fed to the classifier, every one scaled into [0,1].
// The order is part of the model-file contract:
//   0 relative area        pixel_count / image area
//   1 mean intensity
//   2 max intensity
//   3 intensity stddev     (population, clamped at 1)
//   4 bbox fill ratio      pixel_count / bbox area
//   5 elongation           1 - min(bbox w, h) / max(bbox w, h)
//   6 compactness          4 pi pixel_count / perimeter^2, clamped to [0,1];
//                          perimeter counts region pixels with a 4-neighbor in
//                          the background (image border counts as background)
inline std::array<double, 7> featurize(const Region& region, const Image& img) {
    for (const auto& [x, y] : region.pixels)
        if (x < 0 || x >= img.width || y < 0 || y >= img.height)
            throw OutOfBounds("region pixel (" + std::to_string(x) + "," + std::to_string(y) +
                              ") outside a " + std::to_string(img.width) + "x" +
                              std::to_string(img.height) + " image");
    if (region.pixels.empty())
        throw InvalidArgument("cannot featurize an empty region");

    const auto n = static_cast<double>(region.pixel_count);
    const double area = static_cast<double>(img.width) * img.height;

    double sum = 0.0, sum_sq = 0.0, peak = 0.0;
    for (const auto& [x, y] : region.pixels) {
        double v = img.at(x, y);
        sum += v;
        sum_sq += v * v;
        peak = std::max(peak, v);
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);

    const int bw = region.x_max - region.x_min + 1;
    const int bh = region.y_max - region.y_min + 1;
    const double bbox_area = static_cast<double>(bw) * bh;

    // membership bitmap local to the bbox, for the perimeter scan
    std::vector<std::uint8_t> inside(static_cast<std::size_t>(bw) * bh, 0);
    for (const auto& [x, y] : region.pixels)
        inside[static_cast<std::size_t>(y - region.y_min) * bw + (x - region.x_min)] = 1;
    auto is_member = [&](int x, int y) {
        int lx = x - region.x_min, ly = y - region.y_min;
        if (lx < 0 || lx >= bw || ly < 0 || ly >= bh)
            return false;
        return inside[static_cast<std::size_t>(ly) * bw + lx] != 0;
    };
    std::size_t perimeter = 0;
    for (const auto& [x, y] : region.pixels) {
        bool edge = x == 0 || x == img.width - 1 || y == 0 || y == img.height - 1 ||
                    !is_member(x - 1, y) || !is_member(x + 1, y) || !is_member(x, y - 1) ||
                    !is_member(x, y + 1);
        perimeter += edge;
    }

    std::array<double, 7> f{};
    f[0] = n / area;
    f[1] = mean;
    f[2] = peak;
    f[3] = std::min(1.0, std::sqrt(var));
    f[4] = n / bbox_area;
    f[5] = 1.0 - static_cast<double>(std::min(bw, bh)) / static_cast<double>(std::max(bw, bh));
    f[6] = std::clamp(4.0 * std::numbers::pi * n /
                          (static_cast<double>(perimeter) * static_cast<double>(perimeter)),
                      0.0, 1.0);
    return f;
}

} // namespace astroseg
