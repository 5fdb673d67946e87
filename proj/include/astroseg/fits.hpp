#pragma once

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "astroseg/errors.hpp"
#include "astroseg/image.hpp"

namespace astroseg {

// Reader/writer for the image subset of FITS: one primary HDU, 2880-byte logical
// records, 80-character keyword cards, big-endian pixel data. Keywords honored:
// SIMPLE, BITPIX, NAXIS, NAXIS1, NAXIS2, BSCALE, BZERO, BLANK, END. Everything
// else is carried through verbatim so a parse/write round trip is byte-exact.
//
// Axis 1 varies fastest, so NAXIS1 is the width and the stored order matches the
// row-major Image layout directly.

inline constexpr std::size_t kFitsBlock = 2880;
inline constexpr std::size_t kFitsCard = 80;

struct MissingSimple : FormatError {
    using FormatError::FormatError;
};
struct UnsupportedBitpix : FormatError {
    using FormatError::FormatError;
};
struct TruncatedData : FormatError {
    using FormatError::FormatError;
};
struct NonImageHdu : FormatError {
    using FormatError::FormatError;
};

// monostate marks commentary cards that carry no value (COMMENT, HISTORY, blank).
using CardValue = std::variant<std::monostate, bool, long long, double, std::string>;

struct FitsRecord {
    std::string keyword; // trimmed, at most 8 chars
    CardValue value;
    std::string comment;
    std::string raw; // exact 80-byte card, re-emitted verbatim on write
};

struct FitsHeader {
    std::vector<FitsRecord> records; // in file order, END excluded
    int bitpix = 8;
    int naxis = 0;
    std::vector<long> axis_lengths;
    double bscale = 1.0;
    double bzero = 0.0;
    std::optional<long long> blank; // undefined-pixel sentinel for integer bitpix
};

struct FitsImage {
    FitsHeader header;
    Image image;
    std::size_t blank_pixels = 0; // BLANK matches / non-finite floats, zeroed before normalization
    bool has_extensions = false;  // bytes past the primary HDU were present and ignored
};

namespace detail {

inline std::string rtrim(std::string s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\0'))
        s.pop_back();
    return s;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(' ');
    if (b == std::string::npos)
        return {};
    std::size_t e = s.find_last_not_of(' ');
    return s.substr(b, e - b + 1);
}

inline bool is_integer_literal(const std::string& s) {
    if (s.empty())
        return false;
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i == s.size())
        return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            return false;
    return true;
}

inline CardValue parse_value_text(const std::string& text) {
    if (text.empty())
        return std::monostate{};
    if (text == "T")
        return true;
    if (text == "F")
        return false;
    if (text.front() == '\'') {
        // quoted string; '' is an escaped quote
        std::string out;
        for (std::size_t i = 1; i < text.size(); ++i) {
            if (text[i] == '\'') {
                if (i + 1 < text.size() && text[i + 1] == '\'') {
                    out.push_back('\'');
                    ++i;
                } else {
                    break;
                }
            } else {
                out.push_back(text[i]);
            }
        }
        return rtrim(out);
    }
    if (is_integer_literal(text))
        return static_cast<long long>(std::strtoll(text.c_str(), nullptr, 10));
    std::string num = text;
    for (char& c : num)
        if (c == 'D' || c == 'd')
            c = 'E'; // FORTRAN double exponent
    char* end = nullptr;
    double d = std::strtod(num.c_str(), &end);
    if (end && *end == '\0')
        return d;
    return text; // unquoted junk, keep as string
}

inline FitsRecord parse_card(std::string raw) {
    FitsRecord rec;
    rec.raw = raw;
    rec.keyword = rtrim(raw.substr(0, 8));
    if (raw.size() >= 10 && raw[8] == '=' && raw[9] == ' ') {
        std::string field = raw.substr(10);
        // a '/' outside quotes starts the comment
        bool in_quote = false;
        std::size_t slash = std::string::npos;
        for (std::size_t i = 0; i < field.size(); ++i) {
            if (field[i] == '\'')
                in_quote = !in_quote;
            else if (field[i] == '/' && !in_quote) {
                slash = i;
                break;
            }
        }
        std::string value_text = trim(slash == std::string::npos ? field : field.substr(0, slash));
        if (slash != std::string::npos)
            rec.comment = trim(field.substr(slash + 1));
        rec.value = parse_value_text(value_text);
    } else {
        rec.comment = rtrim(raw.substr(std::min<std::size_t>(8, raw.size())));
    }
    return rec;
}

inline std::string format_card(const std::string& keyword, const CardValue& value,
                               const std::string& comment = "") {
    char buf[96];
    std::string card;
    if (std::holds_alternative<std::monostate>(value)) {
        std::snprintf(buf, sizeof(buf), "%-8.8s%s", keyword.c_str(), comment.c_str());
        card = buf;
    } else if (std::holds_alternative<bool>(value)) {
        std::snprintf(buf, sizeof(buf), "%-8.8s= %20c", keyword.c_str(), std::get<bool>(value) ? 'T' : 'F');
        card = buf;
    } else if (std::holds_alternative<long long>(value)) {
        std::snprintf(buf, sizeof(buf), "%-8.8s= %20lld", keyword.c_str(), std::get<long long>(value));
        card = buf;
    } else if (std::holds_alternative<double>(value)) {
        std::snprintf(buf, sizeof(buf), "%-8.8s= %20.12G", keyword.c_str(), std::get<double>(value));
        card = buf;
    } else {
        std::string quoted;
        for (char c : std::get<std::string>(value)) {
            quoted.push_back(c);
            if (c == '\'')
                quoted.push_back('\'');
        }
        std::snprintf(buf, sizeof(buf), "%-8.8s= '%-8s'", keyword.c_str(), quoted.c_str());
        card = buf;
    }
    if (!comment.empty() && !std::holds_alternative<std::monostate>(value)) {
        card += " / ";
        card += comment;
    }
    card.resize(kFitsCard, ' ');
    return card;
}

inline FitsRecord make_record(const std::string& keyword, const CardValue& value,
                              const std::string& comment = "") {
    FitsRecord rec;
    rec.keyword = keyword;
    rec.value = value;
    rec.comment = comment;
    rec.raw = format_card(keyword, value, comment);
    return rec;
}

inline double value_as_real(const CardValue& v, double fallback) {
    if (std::holds_alternative<long long>(v))
        return static_cast<double>(std::get<long long>(v));
    if (std::holds_alternative<double>(v))
        return std::get<double>(v);
    return fallback;
}

inline std::optional<long long> value_as_int(const CardValue& v) {
    if (std::holds_alternative<long long>(v))
        return std::get<long long>(v);
    return std::nullopt;
}

inline bool legal_bitpix(long long b) {
    return b == 8 || b == 16 || b == 32 || b == -32 || b == -64;
}

// big-endian fetches
inline std::uint16_t load_be16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}
inline std::uint32_t load_be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}
inline std::uint64_t load_be64(const std::uint8_t* p) {
    return (static_cast<std::uint64_t>(load_be32(p)) << 32) | load_be32(p + 4);
}
inline void store_be16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}
inline void store_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    store_be16(out, static_cast<std::uint16_t>(v >> 16));
    store_be16(out, static_cast<std::uint16_t>(v & 0xffff));
}
inline void store_be64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    store_be32(out, static_cast<std::uint32_t>(v >> 32));
    store_be32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
}

} // namespace detail

inline FitsHeader make_image_header(int bitpix, int width, int height) {
    if (!detail::legal_bitpix(bitpix))
        throw UnsupportedBitpix("BITPIX " + std::to_string(bitpix) + " is not one of 8/16/32/-32/-64");
    FitsHeader h;
    h.bitpix = bitpix;
    h.naxis = 2;
    h.axis_lengths = {width, height};
    h.records.push_back(detail::make_record("SIMPLE", true, "conforms to FITS standard"));
    h.records.push_back(detail::make_record("BITPIX", static_cast<long long>(bitpix), "bits per pixel"));
    h.records.push_back(detail::make_record("NAXIS", 2LL, "number of axes"));
    h.records.push_back(detail::make_record("NAXIS1", static_cast<long long>(width)));
    h.records.push_back(detail::make_record("NAXIS2", static_cast<long long>(height)));
    return h;
}

inline FitsImage parse_fits(std::span<const std::uint8_t> bytes) {
    if (bytes.empty() || bytes.size() % kFitsBlock != 0)
        throw TruncatedData("file length " + std::to_string(bytes.size()) +
                            " is not a positive multiple of 2880");

    FitsImage out;
    FitsHeader& hdr = out.header;

    // header cards up to END
    std::size_t pos = 0;
    bool saw_end = false;
    bool first = true;
    while (pos + kFitsCard <= bytes.size()) {
        std::string raw(reinterpret_cast<const char*>(bytes.data() + pos), kFitsCard);
        pos += kFitsCard;
        FitsRecord rec = detail::parse_card(raw);
        if (first) {
            if (rec.keyword != "SIMPLE" || !std::holds_alternative<bool>(rec.value) ||
                !std::get<bool>(rec.value))
                throw MissingSimple("first card is not SIMPLE = T; not a FITS file");
            first = false;
        }
        if (rec.keyword == "END") {
            saw_end = true;
            break;
        }
        hdr.records.push_back(std::move(rec));
    }
    if (!saw_end)
        throw TruncatedData("END card not found");

    std::optional<long long> bitpix, naxis;
    std::vector<std::optional<long long>> axes;
    for (const FitsRecord& rec : hdr.records) {
        if (rec.keyword == "BITPIX")
            bitpix = detail::value_as_int(rec.value);
        else if (rec.keyword == "NAXIS")
            naxis = detail::value_as_int(rec.value);
        else if (rec.keyword.rfind("NAXIS", 0) == 0 && rec.keyword.size() > 5) {
            std::size_t idx = std::strtoull(rec.keyword.c_str() + 5, nullptr, 10);
            if (idx >= 1) {
                if (axes.size() < idx)
                    axes.resize(idx);
                axes[idx - 1] = detail::value_as_int(rec.value);
            }
        } else if (rec.keyword == "BSCALE")
            hdr.bscale = detail::value_as_real(rec.value, 1.0);
        else if (rec.keyword == "BZERO")
            hdr.bzero = detail::value_as_real(rec.value, 0.0);
        else if (rec.keyword == "BLANK")
            hdr.blank = detail::value_as_int(rec.value);
    }

    if (!bitpix || !detail::legal_bitpix(*bitpix))
        throw UnsupportedBitpix("BITPIX missing or outside {8, 16, 32, -32, -64}");
    hdr.bitpix = static_cast<int>(*bitpix);

    if (!naxis || *naxis != 2)
        throw NonImageHdu("primary HDU is not a 2-D image (NAXIS = " +
                          (naxis ? std::to_string(*naxis) : std::string("absent")) + ")");
    hdr.naxis = 2;
    if (axes.size() < 2 || !axes[0] || !axes[1] || *axes[0] < 1 || *axes[1] < 1 ||
        *axes[0] > 100000000 || *axes[1] > 100000000)
        throw NonImageHdu("NAXIS1/NAXIS2 missing or outside a usable range");
    hdr.axis_lengths = {static_cast<long>(*axes[0]), static_cast<long>(*axes[1])};

    const long width = hdr.axis_lengths[0];
    const long height = hdr.axis_lengths[1];
    const std::size_t sample_bytes = static_cast<std::size_t>(std::abs(hdr.bitpix)) / 8;
    const std::size_t pixel_count = static_cast<std::size_t>(width) * height;
    const std::size_t need = pixel_count * sample_bytes;

    const std::size_t header_blocks = (pos + kFitsBlock - 1) / kFitsBlock;
    const std::size_t data_start = header_blocks * kFitsBlock;
    if (bytes.size() < data_start || bytes.size() - data_start < need)
        throw TruncatedData("data block holds " + std::to_string(bytes.size() - std::min(bytes.size(), data_start)) +
                            " bytes but NAXIS1*NAXIS2*|BITPIX|/8 = " + std::to_string(need));

    const std::size_t data_blocks = (need + kFitsBlock - 1) / kFitsBlock;
    out.has_extensions = bytes.size() > data_start + data_blocks * kFitsBlock;

    // decode to physical values
    Image img(static_cast<int>(width), static_cast<int>(height));
    const std::uint8_t* p = bytes.data() + data_start;
    for (std::size_t i = 0; i < pixel_count; ++i, p += sample_bytes) {
        double physical;
        bool undefined = false;
        switch (hdr.bitpix) {
        case 8: {
            std::uint8_t s = *p;
            undefined = hdr.blank && *hdr.blank == s;
            physical = hdr.bzero + hdr.bscale * s;
            break;
        }
        case 16: {
            auto s = static_cast<std::int16_t>(detail::load_be16(p));
            undefined = hdr.blank && *hdr.blank == s;
            physical = hdr.bzero + hdr.bscale * s;
            break;
        }
        case 32: {
            auto s = static_cast<std::int32_t>(detail::load_be32(p));
            undefined = hdr.blank && *hdr.blank == s;
            physical = hdr.bzero + hdr.bscale * s;
            break;
        }
        case -32: {
            float s = std::bit_cast<float>(detail::load_be32(p));
            physical = hdr.bzero + hdr.bscale * static_cast<double>(s);
            undefined = !std::isfinite(physical);
            break;
        }
        default: {
            double s = std::bit_cast<double>(detail::load_be64(p));
            physical = hdr.bzero + hdr.bscale * s;
            undefined = !std::isfinite(physical);
            break;
        }
        }
        if (undefined) {
            physical = 0.0;
            ++out.blank_pixels;
        }
        img.data[i] = physical;
    }

    // min-max normalize; a constant image has no dynamic range and maps to zeros
    auto [lo, hi] = min_max(img);
    if (hi > lo) {
        for (double& v : img.data)
            v = (v - lo) / (hi - lo);
    } else {
        for (double& v : img.data)
            v = 0.0;
    }
    out.image = std::move(img);
    return out;
}

inline std::vector<std::uint8_t> write_fits(const FitsHeader& header, const Image& img) {
    if (header.naxis != 2 || header.axis_lengths.size() != 2 ||
        header.axis_lengths[0] != img.width || header.axis_lengths[1] != img.height)
        throw DimensionMismatch("header axes do not match a " + std::to_string(img.width) + "x" +
                                std::to_string(img.height) + " image");
    if (!detail::legal_bitpix(header.bitpix))
        throw UnsupportedBitpix("BITPIX " + std::to_string(header.bitpix));
    const double bscale = header.bscale == 0.0 ? 1.0 : header.bscale;

    std::vector<std::uint8_t> out;
    const std::vector<FitsRecord>* records = &header.records;
    FitsHeader synth;
    if (records->empty()) {
        synth = make_image_header(header.bitpix, img.width, img.height);
        records = &synth.records;
    }
    for (const FitsRecord& rec : *records) {
        std::string card = rec.raw.size() == kFitsCard ? rec.raw
                                                       : detail::format_card(rec.keyword, rec.value, rec.comment);
        out.insert(out.end(), card.begin(), card.end());
    }
    std::string end_card = "END";
    end_card.resize(kFitsCard, ' ');
    out.insert(out.end(), end_card.begin(), end_card.end());
    out.resize((out.size() + kFitsBlock - 1) / kFitsBlock * kFitsBlock, ' ');

    // intensities in [0,1] map onto the full positive range of the sample type,
    // then BSCALE/BZERO are inverted so a reader recovers the same physical values
    for (double v : img.data) {
        double clamped = clamp01(v);
        switch (header.bitpix) {
        case 8: {
            double stored = (clamped * 255.0 - header.bzero) / bscale;
            long long code = std::clamp<long long>(round_half_up(stored), 0, 255);
            out.push_back(static_cast<std::uint8_t>(code));
            break;
        }
        case 16: {
            double stored = (clamped * 32767.0 - header.bzero) / bscale;
            long long code = std::clamp<long long>(round_half_up(stored), -32768, 32767);
            detail::store_be16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(code)));
            break;
        }
        case 32: {
            double stored = (clamped * 2147483647.0 - header.bzero) / bscale;
            long long code = std::clamp<long long>(round_half_up(stored), -2147483648LL, 2147483647LL);
            detail::store_be32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(code)));
            break;
        }
        case -32: {
            auto stored = static_cast<float>((clamped - header.bzero) / bscale);
            detail::store_be32(out, std::bit_cast<std::uint32_t>(stored));
            break;
        }
        default: {
            double stored = (clamped - header.bzero) / bscale;
            detail::store_be64(out, std::bit_cast<std::uint64_t>(stored));
            break;
        }
        }
    }
    out.resize((out.size() + kFitsBlock - 1) / kFitsBlock * kFitsBlock, 0);
    return out;
}

} // namespace astroseg
