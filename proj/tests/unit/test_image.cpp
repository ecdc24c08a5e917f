#include <gtest/gtest.h>

#include <random>

#include "imagery/error.hpp"
#include "imagery/image.hpp"

using namespace imagery;

namespace {

RasterImage random_image(std::mt19937_64& rng, int w, int h) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
    for (auto& b : px) b = static_cast<std::uint8_t>(rng());
    return RasterImage(w, h, std::move(px));
}

}  // namespace

TEST(RasterImage, RejectsBadDimensions) {
    EXPECT_THROW(RasterImage(0, 4), ContractError);
    EXPECT_THROW(RasterImage(2, 2, std::vector<std::uint8_t>(5)), ContractError);
}

TEST(Png, RoundTripRandomImage) {
    std::mt19937_64 rng(1);
    const RasterImage img = random_image(rng, 37, 23);
    EXPECT_EQ(decode_png(encode_png(img)), img);
}

TEST(Png, EncodingIsStable) {
    std::mt19937_64 rng(2);
    const RasterImage img = random_image(rng, 16, 16);
    EXPECT_EQ(encode_png(img), encode_png(img));
}

TEST(Png, TruncatedOrCorruptFails) {
    std::mt19937_64 rng(3);
    auto bytes = encode_png(random_image(rng, 8, 8));
    const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + bytes.size() / 2);
    EXPECT_THROW(decode_png(truncated), DecodeError);
    EXPECT_THROW(decode_png(std::vector<std::uint8_t>{}), DecodeError);
    bytes[40] ^= 0xff;
    EXPECT_THROW(decode_png(bytes), DecodeError);
}

TEST(ImageDiff, Extremes) {
    const RasterImage black(4, 4, Rgb{0, 0, 0});
    const RasterImage white(4, 4, Rgb{255, 255, 255});
    EXPECT_EQ(image_diff(black, black), 0.0);
    EXPECT_EQ(image_diff(black, white), 1.0);
    EXPECT_THROW(image_diff(black, RasterImage(4, 5)), ContractError);
}

TEST(ImageDiff, ZeroOnlyWhenIdentical) {
    RasterImage a(3, 3);
    RasterImage b = a;
    b.set(1, 1, {254, 255, 255});
    EXPECT_GT(image_diff(a, b), 0.0);
}

TEST(Grid, SingleCellHasBanner) {
    const RasterImage cell(32, 32, Rgb{10, 20, 30});
    const RasterImage grid = compose_grid({{cell, "A"}});
    EXPECT_EQ(grid.width(), 32);
    EXPECT_EQ(grid.height(), 32 + kBannerHeight);
    EXPECT_EQ(grid.crop(0, kBannerHeight, 32, 32), cell);
    bool ink = false;
    for (int y = 0; y < kBannerHeight - 1; ++y)
        for (int x = 0; x < 32; ++x) ink = ink || grid.at(x, y) == Rgb{0, 0, 0};
    EXPECT_TRUE(ink);
}

TEST(Grid, WidthIsCellCountTimesCellWidth) {
    std::vector<std::pair<RasterImage, std::string>> cells;
    for (int i = 0; i < 6; ++i) cells.emplace_back(RasterImage(256, 256), "A" + std::to_string(i + 1));
    EXPECT_EQ(compose_grid(cells).width(), 6 * 256);
}

TEST(Grid, PreservesCommandOrder) {
    std::vector<std::pair<RasterImage, std::string>> cells;
    for (int i = 0; i < 20; ++i)
        cells.emplace_back(RasterImage(24, 24, Rgb{static_cast<std::uint8_t>(i * 10), 0, 0}), "right:30");
    const auto parts = split_grid(compose_grid(cells));
    ASSERT_EQ(parts.size(), 20u);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(parts[i], cells[i].first);
}

TEST(Grid, MixedResolutionsRejected) {
    EXPECT_THROW(compose_grid({{RasterImage(8, 8), "a"}, {RasterImage(8, 9), "b"}}), ContractError);
    EXPECT_THROW(compose_grid({}), ContractError);
}

TEST(Base64, KnownVectors) {
    auto enc = [](std::string_view s) {
        return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    };
    EXPECT_EQ(enc(""), "");
    EXPECT_EQ(enc("f"), "Zg==");
    EXPECT_EQ(enc("fo"), "Zm8=");
    EXPECT_EQ(enc("foo"), "Zm9v");
    EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
}
