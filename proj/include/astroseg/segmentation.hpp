#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "astroseg/errors.hpp"
#include "astroseg/image.hpp"

namespace astroseg {

struct ConstantImage : NumericError {
    using NumericError::NumericError;
};

struct ThresholdStep {
    int iteration = 0; // 1-based
    double threshold = 0.0;
    double error = 0.0; // |threshold - previous threshold|
};

// Convergence record of the iterative threshold search, one row per update.
struct ThresholdTrace {
    double t0 = 0.0;
    std::vector<ThresholdStep> steps;
    bool converged = false;
};

// Connected foreground component plus the shape/intensity statistics the
// classifier consumes. Features are filled by featurize(), not here.
struct Region {
    int label = 0;
    std::size_t pixel_count = 0;
    int x_min = 0, y_min = 0, x_max = 0, y_max = 0;
    double centroid_x = 0.0, centroid_y = 0.0;
    std::array<double, 7> features{};
    std::vector<std::pair<int, int>> pixels; // (x, y) in scan order
};

// Midrange of the image intensities, the starting threshold of the iteration.
inline double initial_threshold(const Image& img) {
    auto [lo, hi] = min_max(img);
    if (hi <= lo)
        throw ConstantImage("image has no dynamic range; no threshold exists");
    return (lo + hi) / 2.0;
}

// One update of the class-means rule: T' = (mean(v <= T) + mean(v > T)) / 2.
// Empty side -> nullopt.
inline std::optional<double> isodata_update(const Image& img, double t) {
    double sum_low = 0.0, sum_high = 0.0;
    std::size_t n_low = 0, n_high = 0;
    for (double v : img.data) {
        if (v <= t) {
            sum_low += v;
            ++n_low;
        } else {
            sum_high += v;
            ++n_high;
        }
    }
    if (n_low == 0 || n_high == 0)
        return std::nullopt;
    return (sum_low / n_low + sum_high / n_high) / 2.0;
}

// Iterates the class-means update from t0, recording every step with its error
// |T_k - T_{k-1}|. Stops as converged once the error drops below epsilon; stops
// unconverged at max_iter or when one class empties out.
inline ThresholdTrace iterate_threshold(const Image& img, double t0, double epsilon, int max_iter) {
    if (!(t0 > 0.0 && t0 < 1.0))
        throw InvalidArgument("t0 must lie strictly inside (0, 1)");
    if (!(epsilon > 0.0))
        throw InvalidArgument("epsilon must be positive");
    if (max_iter < 1)
        throw InvalidArgument("max_iter must be at least 1");

    ThresholdTrace trace;
    trace.t0 = t0;
    double prev = t0;
    for (int k = 1; k <= max_iter; ++k) {
        std::optional<double> next = isodata_update(img, prev);
        if (!next)
            return trace; // one side of the split is empty; report what we have
        double err = std::abs(*next - prev);
        trace.steps.push_back({k, *next, err});
        if (err < epsilon) {
            trace.converged = true;
            return trace;
        }
        prev = *next;
    }
    return trace;
}

inline double final_threshold(const ThresholdTrace& trace) {
    return trace.steps.empty() ? trace.t0 : trace.steps.back().threshold;
}

// Foreground iff strictly above the threshold, so a constant image segments to
// all-background.
inline Mask apply_global_threshold(const Image& img, double t) {
    Mask m(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i)
        m.bits[i] = img.data[i] > t ? 1 : 0;
    return m;
}

namespace detail {

// Windowed min and max per pixel, computed separably with clamp-to-edge
// indexing (identical to replicate padding for order statistics).
inline void window_min_max(const Image& img, int radius, std::vector<double>& mn,
                           std::vector<double>& mx) {
    const int w = img.width, h = img.height;
    std::vector<double> row_mn(img.size()), row_mx(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double lo = img.at(std::clamp(x - radius, 0, w - 1), y);
            double hi = lo;
            for (int d = -radius + 1; d <= radius; ++d) {
                double v = img.at(std::clamp(x + d, 0, w - 1), y);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            row_mn[static_cast<std::size_t>(y) * w + x] = lo;
            row_mx[static_cast<std::size_t>(y) * w + x] = hi;
        }
    }
    mn.resize(img.size());
    mx.resize(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double lo = row_mn[static_cast<std::size_t>(std::clamp(y - radius, 0, h - 1)) * w + x];
            double hi = row_mx[static_cast<std::size_t>(std::clamp(y - radius, 0, h - 1)) * w + x];
            for (int d = -radius + 1; d <= radius; ++d) {
                int sy = std::clamp(y + d, 0, h - 1);
                lo = std::min(lo, row_mn[static_cast<std::size_t>(sy) * w + x]);
                hi = std::max(hi, row_mx[static_cast<std::size_t>(sy) * w + x]);
            }
            mn[static_cast<std::size_t>(y) * w + x] = lo;
            mx[static_cast<std::size_t>(y) * w + x] = hi;
        }
    }
}

} // namespace detail

// Per-pixel threshold from the neighborhood midrange: a pixel is foreground iff
// it exceeds (window min + window max)/2 - bias over the window x window patch
// centered on it.
inline Mask local_adaptive_threshold(const Image& img, int window, double bias) {
    if (window < 3 || window % 2 == 0)
        throw InvalidArgument("window must be odd and at least 3");
    if (bias < -1.0 || bias > 1.0)
        throw InvalidArgument("bias must lie in [-1, 1]");
    std::vector<double> mn, mx;
    detail::window_min_max(img, window / 2, mn, mx);
    Mask m(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        double t_local = (mn[i] + mx[i]) / 2.0 - bias;
        m.bits[i] = img.data[i] > t_local ? 1 : 0;
    }
    return m;
}

// 8-connectivity labeling by two-pass union-find. Output is ordered by
// descending pixel count (ties broken by scan order) and relabeled densely
// from 1.
inline std::vector<Region> connected_components(const Mask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<std::int32_t> labels(mask.size(), 0);
    std::vector<std::int32_t> parent(1, 0); // parent[0] unused

    auto find = [&](std::int32_t a) {
        while (parent[static_cast<std::size_t>(a)] != a)
            a = parent[static_cast<std::size_t>(a)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
        return a;
    };
    auto unite = [&](std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b)
            parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    };

    std::int32_t next = 1;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y))
                continue;
            // previously scanned neighbors under 8-connectivity
            std::int32_t best = 0;
            const int nx[4] = {x - 1, x - 1, x, x + 1};
            const int ny[4] = {y, y - 1, y - 1, y - 1};
            for (int i = 0; i < 4; ++i) {
                if (nx[i] < 0 || nx[i] >= w || ny[i] < 0)
                    continue;
                std::int32_t l = labels[static_cast<std::size_t>(ny[i]) * w + nx[i]];
                if (l != 0 && (best == 0 || find(l) < find(best)))
                    best = l;
            }
            if (best == 0) {
                labels[static_cast<std::size_t>(y) * w + x] = next;
                parent.push_back(next);
                ++next;
            } else {
                std::int32_t root = find(best);
                labels[static_cast<std::size_t>(y) * w + x] = root;
                for (int i = 0; i < 4; ++i) {
                    if (nx[i] < 0 || nx[i] >= w || ny[i] < 0)
                        continue;
                    std::int32_t l = labels[static_cast<std::size_t>(ny[i]) * w + nx[i]];
                    if (l != 0)
                        unite(root, l);
                }
            }
        }
    }

    // second pass: gather pixels per root, in scan order
    std::vector<std::int32_t> root_index(parent.size(), -1);
    std::vector<Region> regions;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::int32_t l = labels[static_cast<std::size_t>(y) * w + x];
            if (l == 0)
                continue;
            std::int32_t root = find(l);
            if (root_index[static_cast<std::size_t>(root)] < 0) {
                root_index[static_cast<std::size_t>(root)] = static_cast<std::int32_t>(regions.size());
                Region r;
                r.x_min = r.x_max = x;
                r.y_min = r.y_max = y;
                regions.push_back(std::move(r));
            }
            Region& r = regions[static_cast<std::size_t>(root_index[static_cast<std::size_t>(root)])];
            r.pixels.emplace_back(x, y);
            ++r.pixel_count;
            r.x_min = std::min(r.x_min, x);
            r.x_max = std::max(r.x_max, x);
            r.y_min = std::min(r.y_min, y);
            r.y_max = std::max(r.y_max, y);
            r.centroid_x += x;
            r.centroid_y += y;
        }
    }
    for (Region& r : regions) {
        r.centroid_x /= static_cast<double>(r.pixel_count);
        r.centroid_y /= static_cast<double>(r.pixel_count);
    }
    std::sort(regions.begin(), regions.end(), [w](const Region& a, const Region& b) {
        if (a.pixel_count != b.pixel_count)
            return a.pixel_count > b.pixel_count;
        const auto& pa = a.pixels.front();
        const auto& pb = b.pixels.front();
        return static_cast<long>(pa.second) * w + pa.first < static_cast<long>(pb.second) * w + pb.first;
    });
    for (std::size_t i = 0; i < regions.size(); ++i)
        regions[i].label = static_cast<int>(i + 1);
    return regions;
}

// Rebuilds a trace from a published threshold column; every step error is
// recomputed from the recurrence |T_k - T_{k-1}|.
inline ThresholdTrace trace_from_thresholds(double t0, std::span<const double> thresholds) {
    ThresholdTrace trace;
    trace.t0 = t0;
    double prev = t0;
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        double err = std::abs(thresholds[k] - prev);
        trace.steps.push_back({static_cast<int>(k + 1), thresholds[k], err});
        prev = thresholds[k];
    }
    trace.converged = !trace.steps.empty() && trace.steps.back().error == 0.0;
    return trace;
}

// Largest disagreement between the trace's recomputed errors and a published
// error column. Validates tabulated traces against the recurrence.
inline double max_error_deviation(const ThresholdTrace& trace, std::span<const double> published) {
    if (trace.steps.size() != published.size())
        throw DimensionMismatch("trace has " + std::to_string(trace.steps.size()) +
                                " steps but " + std::to_string(published.size()) +
                                " published errors were given");
    double worst = 0.0;
    for (std::size_t i = 0; i < published.size(); ++i)
        worst = std::max(worst, std::abs(trace.steps[i].error - published[i]));
    return worst;
}

// "iteration,threshold,error" rows, 4-decimal fixed format.
inline std::string trace_to_csv(const ThresholdTrace& trace) {
    std::string out = "iteration,threshold,error\n";
    char buf[64];
    for (const ThresholdStep& s : trace.steps) {
        std::snprintf(buf, sizeof(buf), "%d,%.4f,%.4f\n", s.iteration, s.threshold, s.error);
        out += buf;
    }
    return out;
}

} // namespace astroseg
