#include <gtest/gtest.h>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "astroseg/fits.hpp"
#include "astroseg/pgm.hpp"
#include "astroseg/rng.hpp"

using namespace astroseg;

namespace {

// Cards built by hand from the 80-column layout: keyword in columns 1-8,
// "= " in 9-10, value right-justified to column 30.
std::string card(const std::string& keyword, const std::string& value) {
    std::string c = keyword;
    c.resize(8, ' ');
    c += "= ";
    std::string v = value;
    v.insert(0, 20 - v.size(), ' ');
    c += v;
    c.resize(80, ' ');
    return c;
}

std::string bare_card(const std::string& text) {
    std::string c = text;
    c.resize(80, ' ');
    return c;
}

std::vector<std::uint8_t> fixture_2x2(const std::vector<std::uint8_t>& data) {
    std::string h;
    h += card("SIMPLE", "T");
    h += card("BITPIX", "8");
    h += card("NAXIS", "2");
    h += card("NAXIS1", "2");
    h += card("NAXIS2", "2");
    h += bare_card("END");
    h.resize(2880, ' ');
    std::vector<std::uint8_t> bytes(h.begin(), h.end());
    bytes.insert(bytes.end(), data.begin(), data.end());
    bytes.resize(2880 * 2, 0);
    return bytes;
}

} // namespace

TEST(FitsParse, HandBuiltTwoByTwo) {
    FitsImage fi = parse_fits(fixture_2x2({0, 85, 170, 255}));
    EXPECT_EQ(fi.header.bitpix, 8);
    EXPECT_EQ(fi.header.naxis, 2);
    ASSERT_EQ(fi.header.axis_lengths, (std::vector<long>{2, 2}));
    ASSERT_EQ(fi.image.width, 2);
    ASSERT_EQ(fi.image.height, 2);
    // normalization oracle: (v - min) / (max - min)
    EXPECT_DOUBLE_EQ(fi.image.data[0], 0.0);
    EXPECT_DOUBLE_EQ(fi.image.data[1], 85.0 / 255.0);
    EXPECT_DOUBLE_EQ(fi.image.data[2], 170.0 / 255.0);
    EXPECT_DOUBLE_EQ(fi.image.data[3], 1.0);
    EXPECT_EQ(fi.blank_pixels, 0u);
    EXPECT_FALSE(fi.has_extensions);
}

TEST(FitsParse, ConstantImageNormalizesToZeros) {
    FitsImage fi = parse_fits(fixture_2x2({7, 7, 7, 7}));
    for (double v : fi.image.data)
        EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(FitsParse, KeywordsPreservedVerbatim) {
    std::string h;
    h += card("SIMPLE", "T");
    h += card("BITPIX", "8");
    h += card("NAXIS", "2");
    h += card("NAXIS1", "2");
    h += card("NAXIS2", "2");
    h += bare_card("COMMENT   calibration frame");
    std::string observer = card("OBSERVER", "'HILLTOP '");
    h += observer;
    h += bare_card("END");
    h.resize(2880, ' ');
    std::vector<std::uint8_t> bytes(h.begin(), h.end());
    bytes.resize(2880 * 2, 0);
    bytes[2880] = 0;
    bytes[2881] = 85;
    bytes[2882] = 170;
    bytes[2883] = 255;

    FitsImage fi = parse_fits(bytes);
    ASSERT_EQ(fi.header.records.size(), 7u);
    EXPECT_EQ(fi.header.records[5].keyword, "COMMENT");
    EXPECT_EQ(fi.header.records[6].keyword, "OBSERVER");
    EXPECT_EQ(std::get<std::string>(fi.header.records[6].value), "HILLTOP");
    EXPECT_EQ(fi.header.records[6].raw, observer);
}

TEST(FitsParse, TruncatedDataAtDeclaredFullFrameSize) {
    // 1026 x 1024 at 16 bits wants 2,101,248 data bytes; one block is far short
    std::string h;
    h += card("SIMPLE", "T");
    h += card("BITPIX", "16");
    h += card("NAXIS", "2");
    h += card("NAXIS1", "1026");
    h += card("NAXIS2", "1024");
    h += bare_card("END");
    h.resize(2880, ' ');
    std::vector<std::uint8_t> bytes(h.begin(), h.end());
    bytes.resize(2880 * 2, 0);
    EXPECT_THROW(parse_fits(bytes), TruncatedData);
}

TEST(FitsParse, RejectsNonFitsAndBadHeaders) {
    std::vector<std::uint8_t> junk(2880, 'x');
    EXPECT_THROW(parse_fits(junk), MissingSimple);

    std::vector<std::uint8_t> ragged(1000, 0);
    EXPECT_THROW(parse_fits(ragged), TruncatedData);

    {
        std::string h = card("SIMPLE", "F") + card("BITPIX", "8") + card("NAXIS", "2") +
                        card("NAXIS1", "2") + card("NAXIS2", "2") + bare_card("END");
        h.resize(2880, ' ');
        std::vector<std::uint8_t> b(h.begin(), h.end());
        b.resize(2880 * 2, 0);
        EXPECT_THROW(parse_fits(b), MissingSimple);
    }
    {
        std::string h = card("SIMPLE", "T") + card("BITPIX", "12") + card("NAXIS", "2") +
                        card("NAXIS1", "2") + card("NAXIS2", "2") + bare_card("END");
        h.resize(2880, ' ');
        std::vector<std::uint8_t> b(h.begin(), h.end());
        b.resize(2880 * 2, 0);
        EXPECT_THROW(parse_fits(b), UnsupportedBitpix);
    }
    {
        std::string h = card("SIMPLE", "T") + card("BITPIX", "8") + card("NAXIS", "3") +
                        card("NAXIS1", "2") + card("NAXIS2", "2") + card("NAXIS3", "2") +
                        bare_card("END");
        h.resize(2880, ' ');
        std::vector<std::uint8_t> b(h.begin(), h.end());
        b.resize(2880 * 2, 0);
        EXPECT_THROW(parse_fits(b), NonImageHdu);
    }
}

TEST(FitsParse, BlankAndNanPixelsZeroedAndCounted) {
    // 16-bit with BLANK = -1: one undefined pixel
    std::string h;
    h += card("SIMPLE", "T");
    h += card("BITPIX", "16");
    h += card("NAXIS", "2");
    h += card("NAXIS1", "2");
    h += card("NAXIS2", "1");
    h += card("BLANK", "-1");
    h += bare_card("END");
    h.resize(2880, ' ');
    std::vector<std::uint8_t> bytes(h.begin(), h.end());
    bytes.insert(bytes.end(), {0xFF, 0xFF, 0x00, 0x64}); // -1 (blank), 100
    bytes.resize(2880 * 2, 0);
    FitsImage fi = parse_fits(bytes);
    EXPECT_EQ(fi.blank_pixels, 1u);
    EXPECT_DOUBLE_EQ(fi.image.data[0], 0.0); // zeroed, then min of the image
    EXPECT_DOUBLE_EQ(fi.image.data[1], 1.0);

    // float NaN counts as blank too
    Image img(2, 1);
    img.data = {0.0, 1.0};
    FitsHeader hdr = make_image_header(-32, 2, 1);
    std::vector<std::uint8_t> fbytes = write_fits(hdr, img);
    const std::size_t data_at = 2880;
    fbytes[data_at] = 0x7F; // quiet NaN big-endian
    fbytes[data_at + 1] = 0xC0;
    fbytes[data_at + 2] = 0x00;
    fbytes[data_at + 3] = 0x00;
    FitsImage fnan = parse_fits(fbytes);
    EXPECT_EQ(fnan.blank_pixels, 1u);
    EXPECT_DOUBLE_EQ(fnan.image.data[0], 0.0);
}

TEST(FitsParse, MultiBlockHeader) {
    // more than 36 cards pushes the header into a second 2880-byte block
    std::string h;
    h += card("SIMPLE", "T");
    h += card("BITPIX", "8");
    h += card("NAXIS", "2");
    h += card("NAXIS1", "2");
    h += card("NAXIS2", "2");
    for (int i = 0; i < 40; ++i)
        h += bare_card("HISTORY   pass " + std::to_string(i));
    h += bare_card("END");
    h.resize(2880 * 2, ' ');
    std::vector<std::uint8_t> bytes(h.begin(), h.end());
    bytes.insert(bytes.end(), {0, 85, 170, 255});
    bytes.resize(2880 * 3, 0);

    FitsImage fi = parse_fits(bytes);
    EXPECT_EQ(fi.header.records.size(), 45u);
    EXPECT_DOUBLE_EQ(fi.image.data[3], 1.0);
    EXPECT_FALSE(fi.has_extensions);
    // verbatim records make the round trip exact even across block boundaries
    EXPECT_EQ(write_fits(fi.header, fi.image), bytes);
}

TEST(FitsParse, ExtensionsDetectedAndIgnored) {
    std::vector<std::uint8_t> bytes = fixture_2x2({0, 85, 170, 255});
    bytes.resize(bytes.size() + 2880, ' ');
    FitsImage fi = parse_fits(bytes);
    EXPECT_TRUE(fi.has_extensions);
    EXPECT_EQ(fi.image.width, 2);
}

TEST(FitsWrite, RoundTripBytesIdentical) {
    std::vector<std::uint8_t> original = fixture_2x2({0, 85, 170, 255});
    FitsImage fi = parse_fits(original);
    std::vector<std::uint8_t> rewritten = write_fits(fi.header, fi.image);
    EXPECT_EQ(rewritten, original);
}

TEST(FitsWrite, TotalLengthIsBlockMultiple) {
    std::mt19937_64 rng(7);
    for (int bitpix : {8, 16, 32, -32, -64}) {
        Image img(37, 11);
        for (double& v : img.data)
            v = uniform01(rng);
        FitsHeader hdr = make_image_header(bitpix, img.width, img.height);
        std::vector<std::uint8_t> bytes = write_fits(hdr, img);
        EXPECT_EQ(bytes.size() % 2880, 0u) << "bitpix " << bitpix;
    }
}

TEST(FitsWrite, DimensionMismatchRejected) {
    FitsHeader hdr;
    hdr.bitpix = 8;
    hdr.naxis = 1;
    hdr.axis_lengths = {3};
    Image img(2, 2);
    EXPECT_THROW(write_fits(hdr, img), DimensionMismatch);

    FitsHeader hdr2 = make_image_header(8, 3, 1);
    EXPECT_THROW(write_fits(hdr2, img), DimensionMismatch);
}

TEST(FitsWrite, IntegerRoundTripExactOnGrid) {
    // images already on the code grid with both extremes present survive
    // parse(write(...)) exactly
    std::mt19937_64 rng(11);
    for (int bitpix : {8, 16, 32}) {
        const double scale = bitpix == 8 ? 255.0 : bitpix == 16 ? 32767.0 : 2147483647.0;
        Image img(8, 6);
        for (double& v : img.data) {
            auto code = static_cast<long long>(uniform_index(rng, static_cast<std::uint64_t>(scale) + 1));
            v = static_cast<double>(code) / scale;
        }
        img.data[0] = 0.0;
        img.data[1] = 1.0;
        FitsHeader hdr = make_image_header(bitpix, img.width, img.height);
        FitsImage fi = parse_fits(write_fits(hdr, img));
        for (std::size_t i = 0; i < img.size(); ++i)
            ASSERT_DOUBLE_EQ(fi.image.data[i], img.data[i]) << "bitpix " << bitpix << " at " << i;
    }
}

TEST(FitsWrite, FloatRoundTripWithinSinglePrecision) {
    std::mt19937_64 rng(13);
    Image img(16, 16);
    for (double& v : img.data)
        v = uniform01(rng);
    img.data[0] = 0.0;
    img.data[1] = 1.0;
    FitsHeader hdr = make_image_header(-32, img.width, img.height);
    FitsImage fi = parse_fits(write_fits(hdr, img));
    double worst = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i)
        worst = std::max(worst, std::abs(fi.image.data[i] - img.data[i]));
    EXPECT_LT(worst, 1e-6);
}

TEST(FitsParse, NormalizationIsMonotone) {
    std::mt19937_64 rng(17);
    Image img(12, 12);
    for (double& v : img.data)
        v = uniform01(rng);
    FitsHeader hdr = make_image_header(-64, img.width, img.height);
    FitsImage fi = parse_fits(write_fits(hdr, img));
    for (std::size_t i = 0; i < img.size(); ++i)
        for (std::size_t j = i + 1; j < img.size(); ++j)
            EXPECT_EQ(img.data[i] < img.data[j], fi.image.data[i] < fi.image.data[j]);
}

TEST(Pgm, WriteExamples) {
    Image one(1, 1);
    one.data = {1.0};
    std::vector<std::uint8_t> p = write_pgm(one, 255);
    std::string head(p.begin(), p.begin() + 11);
    EXPECT_EQ(head, "P5\n1 1\n255\n");
    ASSERT_EQ(p.size(), 12u);
    EXPECT_EQ(p.back(), 255);

    Image two(1, 2);
    two.data = {0.0, 0.5};
    std::vector<std::uint8_t> q = write_pgm(two, 255);
    ASSERT_GE(q.size(), 2u);
    EXPECT_EQ(q[q.size() - 2], 0);   // round-half-up: 0.5 * 255 = 127.5 -> 128
    EXPECT_EQ(q[q.size() - 1], 128);

    Image four(2, 2);
    four.data = {0.0, 85.0 / 255.0, 170.0 / 255.0, 1.0};
    std::vector<std::uint8_t> r = write_pgm(four, 255);
    ASSERT_GE(r.size(), 4u);
    EXPECT_EQ(r[r.size() - 4], 0);
    EXPECT_EQ(r[r.size() - 3], 85);
    EXPECT_EQ(r[r.size() - 2], 170);
    EXPECT_EQ(r[r.size() - 1], 255);

    EXPECT_THROW(write_pgm(one, 1000), InvalidArgument);
}

TEST(Pgm, RoundTripWithinHalfStep) {
    std::mt19937_64 rng(23);
    for (int maxval : {255, 65535}) {
        Image img(9, 7);
        for (double& v : img.data)
            v = uniform01(rng);
        Image back = read_pgm(write_pgm(img, maxval));
        ASSERT_EQ(back.width, img.width);
        ASSERT_EQ(back.height, img.height);
        for (std::size_t i = 0; i < img.size(); ++i)
            EXPECT_LE(std::abs(back.data[i] - img.data[i]), 0.5 / maxval);
    }
}

TEST(Pgm, MaskExportUsesFullScale) {
    Mask m(2, 1);
    m.set(0, 0, true);
    std::vector<std::uint8_t> p = write_mask_pgm(m);
    EXPECT_EQ(p[p.size() - 2], 255);
    EXPECT_EQ(p[p.size() - 1], 0);
    Mask back = read_mask_pgm(p);
    EXPECT_TRUE(back.at(0, 0));
    EXPECT_FALSE(back.at(1, 0));
}
