#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "astroseg/errors.hpp"
#include "astroseg/image.hpp"

namespace astroseg {

struct ZeroMse : NumericError {
    using NumericError::NumericError;
};

struct MetricsReport {
    double mse = 0.0;
    double psnr_db = 0.0;
    double error_rate = 0.0;
    double accuracy = 0.0;
};

// Fraction of positions where the two masks disagree (foreground=1, background=0).
// For binary masks this is simultaneously the MSE and the error rate.
inline double mask_mse(const Mask& a, const Mask& b) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("mask dimensions differ: " + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                std::to_string(b.height));
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        diff += (a.bits[i] != 0) != (b.bits[i] != 0);
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

// Peak fixed at 255 even though masks live in {0,1}: the dB scale follows the
// 8-bit convention.
inline constexpr double kPsnrPeak = 255.0;

inline double psnr(double mse) {
    if (mse <= 0.0)
        throw ZeroMse("PSNR is infinite for MSE = 0");
    return 10.0 * std::log10(kPsnrPeak * kPsnrPeak / mse);
}

inline double accuracy_from_error(double error_rate) {
    return 1.0 - error_rate;
}

// Bin b covers [b/bins, (b+1)/bins); the last bin is closed at 1.
inline std::vector<std::size_t> histogram(const Image& img, int bins) {
    if (bins < 2)
        throw InvalidArgument("histogram needs at least 2 bins");
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double v : img.data) {
        auto b = static_cast<long long>(std::floor(v * bins));
        if (b >= bins)
            b = bins - 1;
        if (b < 0)
            b = 0;
        ++counts[static_cast<std::size_t>(b)];
    }
    return counts;
}

inline MetricsReport compare_masks(const Mask& result, const Mask& truth) {
    MetricsReport r;
    r.mse = mask_mse(result, truth);
    r.error_rate = r.mse;
    r.accuracy = accuracy_from_error(r.error_rate);
    r.psnr_db = r.mse > 0.0 ? psnr(r.mse) : std::numeric_limits<double>::infinity();
    return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["mse"] = r.mse;
    if (std::isinf(r.psnr_db))
        j["psnr_db"] = "inf";
    else
        j["psnr_db"] = r.psnr_db;
    j["error_rate"] = r.error_rate;
    j["accuracy"] = r.accuracy;
    return j;
}

} // namespace astroseg
