#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "astroseg/errors.hpp"
#include "astroseg/image.hpp"

namespace astroseg {

// Binary PGM (P5) export for human inspection plus the matching reader used for
// ground-truth masks. Samples wider than 8 bits are big-endian per the format.

inline std::vector<std::uint8_t> write_pgm(const Image& img, int maxval) {
    if (maxval != 255 && maxval != 65535)
        throw InvalidArgument("PGM maxval must be 255 or 65535");
    std::string head = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                       "\n" + std::to_string(maxval) + "\n";
    std::vector<std::uint8_t> out(head.begin(), head.end());
    out.reserve(out.size() + img.size() * (maxval > 255 ? 2 : 1));
    for (double v : img.data) {
        long long code = round_half_up(clamp01(v) * maxval);
        if (maxval > 255) {
            out.push_back(static_cast<std::uint8_t>(code >> 8));
            out.push_back(static_cast<std::uint8_t>(code & 0xff));
        } else {
            out.push_back(static_cast<std::uint8_t>(code));
        }
    }
    return out;
}

inline std::vector<std::uint8_t> write_mask_pgm(const Mask& mask) {
    Image img(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.size(); ++i)
        img.data[i] = mask.bits[i] ? 1.0 : 0.0;
    return write_pgm(img, 255);
}

namespace detail {

inline long pgm_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    // skip whitespace and '#' comment lines
    while (pos < bytes.size()) {
        std::uint8_t c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n')
                ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9')
        throw FormatError("malformed PGM header");
    long v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
        v = v * 10 + (bytes[pos] - '0');
        ++pos;
    }
    return v;
}

} // namespace detail

inline Image read_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw FormatError("not a binary PGM (P5) file");
    std::size_t pos = 2;
    long w = detail::pgm_token(bytes, pos);
    long h = detail::pgm_token(bytes, pos);
    long maxval = detail::pgm_token(bytes, pos);
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
        throw FormatError("bad PGM dimensions or maxval");
    ++pos; // single whitespace byte after maxval
    const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
    const std::size_t pixel_count = static_cast<std::size_t>(w) * h;
    if (bytes.size() < pos + pixel_count * sample_bytes)
        throw FormatError("truncated PGM data");
    Image img(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < pixel_count; ++i) {
        long code = sample_bytes == 2
                        ? (static_cast<long>(bytes[pos + 2 * i]) << 8) | bytes[pos + 2 * i + 1]
                        : bytes[pos + i];
        img.data[i] = static_cast<double>(code) / maxval;
    }
    return img;
}

inline Mask mask_from_image(const Image& img, double cut = 0.5) {
    Mask m(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i)
        m.bits[i] = img.data[i] > cut ? 1 : 0;
    return m;
}

inline Mask read_mask_pgm(std::span<const std::uint8_t> bytes) {
    return mask_from_image(read_pgm(bytes));
}

} // namespace astroseg
