#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "astroseg/image.hpp"
#include "astroseg/mlp.hpp"
#include "astroseg/rng.hpp"

namespace astroseg {

// Seeded synthetic star fields: Gaussian blobs on a diagonal background
// gradient with additive noise, plus optional 1-4 pixel "hot" clusters that
// stand in for the noise artifacts a detector must learn to reject. The
// generator keeps the planted signal layers, so every desk-scale test knows its
// ground truth exactly.

// The default background spread is kept well below the blob amplitudes; a
// broad ramp (say 0.08 to 0.30) drags the global class-means iteration into
// the background itself, which is exactly the failure mode the local mode is
// for. Widen the gradient to exercise that.
struct SynthConfig {
    int width = 256;
    int height = 256;
    int blobs = 12;
    int artifacts = 0;
    double noise_sigma = 0.01;
    double gradient_lo = 0.10;
    double gradient_hi = 0.16;
    double amp_lo = 0.50;
    double amp_hi = 0.85;
    double blob_sigma_lo = 1.6;
    double blob_sigma_hi = 3.2;
    std::uint64_t seed = 1;
};

struct SynthField {
    Image image;
    Mask blob_truth;     // planted blob signal > 0.1
    Mask artifact_truth; // planted artifact signal > 0.1
    std::size_t blob_area = 0;
};

namespace detail {

inline constexpr double kTruthLevel = 0.1;

struct PlantedPoint {
    double x, y;
};

// rejection-sampled placement, bounded attempts so the draw count stays finite
inline PlantedPoint place_separated(std::mt19937_64& rng, int w, int h, double margin,
                                    double min_sep, const std::vector<PlantedPoint>& taken) {
    PlantedPoint p{margin, margin};
    for (int attempt = 0; attempt < 200; ++attempt) {
        p.x = uniform_range(rng, margin, w - 1 - margin);
        p.y = uniform_range(rng, margin, h - 1 - margin);
        bool clear = true;
        for (const PlantedPoint& q : taken) {
            double dx = p.x - q.x, dy = p.y - q.y;
            if (dx * dx + dy * dy < min_sep * min_sep) {
                clear = false;
                break;
            }
        }
        if (clear)
            break;
    }
    return p;
}

} // namespace detail

inline SynthField make_star_field(const SynthConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    const int w = cfg.width, h = cfg.height;

    Image blob_layer(w, h), artifact_layer(w, h);
    std::vector<detail::PlantedPoint> centers;

    for (int b = 0; b < cfg.blobs; ++b) {
        detail::PlantedPoint c = detail::place_separated(rng, w, h, 10.0, 18.0, centers);
        centers.push_back(c);
        double sigma = uniform_range(rng, cfg.blob_sigma_lo, cfg.blob_sigma_hi);
        double amp = uniform_range(rng, cfg.amp_lo, cfg.amp_hi);
        int reach = static_cast<int>(std::ceil(4.0 * sigma));
        for (int y = std::max(0, static_cast<int>(c.y) - reach);
             y <= std::min(h - 1, static_cast<int>(c.y) + reach); ++y) {
            for (int x = std::max(0, static_cast<int>(c.x) - reach);
                 x <= std::min(w - 1, static_cast<int>(c.x) + reach); ++x) {
                double dx = x - c.x, dy = y - c.y;
                blob_layer.at(x, y) += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            }
        }
    }

    for (int a = 0; a < cfg.artifacts; ++a) {
        detail::PlantedPoint c = detail::place_separated(rng, w, h, 4.0, 12.0, centers);
        centers.push_back(c);
        double amp = uniform_range(rng, cfg.amp_lo, cfg.amp_hi);
        int px = static_cast<int>(c.x), py = static_cast<int>(c.y);
        int cluster = 1 + static_cast<int>(uniform_index(rng, 4)); // 1..4 hot pixels
        static constexpr int offs[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
        for (int i = 0; i < cluster; ++i) {
            int x = std::min(w - 1, px + offs[i][0]);
            int y = std::min(h - 1, py + offs[i][1]);
            artifact_layer.at(x, y) = std::max(artifact_layer.at(x, y), amp);
        }
    }

    SynthField field;
    field.image = Image(w, h);
    field.blob_truth = Mask(w, h);
    field.artifact_truth = Mask(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double base = cfg.gradient_lo +
                          (cfg.gradient_hi - cfg.gradient_lo) * (x + y) /
                              static_cast<double>(w + h - 2);
            double v = base + blob_layer.at(x, y) + artifact_layer.at(x, y) +
                       gaussian(rng, 0.0, cfg.noise_sigma);
            field.image.at(x, y) = clamp01(v);
            if (blob_layer.at(x, y) > detail::kTruthLevel) {
                field.blob_truth.set(x, y, true);
                ++field.blob_area;
            }
            if (artifact_layer.at(x, y) > detail::kTruthLevel)
                field.artifact_truth.set(x, y, true);
        }
    }
    return field;
}

} // namespace astroseg
