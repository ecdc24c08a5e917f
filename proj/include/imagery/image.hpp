#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace imagery {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

/// Row-major RGB8 raster.
class RasterImage {
public:
    RasterImage(int width, int height, Rgb fill = {255, 255, 255});
    RasterImage(int width, int height, std::vector<std::uint8_t> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

    Rgb at(int x, int y) const;
    void set(int x, int y, Rgb c);
    void fill_rect(int x, int y, int w, int h, Rgb c);
    /// Copies `src` with its top-left corner at (x, y), clipped to this image.
    void blit(const RasterImage& src, int x, int y);
    RasterImage crop(int x, int y, int w, int h) const;

    bool operator==(const RasterImage&) const = default;

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> pixels_;
};

/// Mean absolute per-channel difference scaled to [0, 1]. Throws
/// ContractError on mismatched sizes.
double image_diff(const RasterImage& a, const RasterImage& b);

/// PNG, 8-bit RGB, no interlace, filter 0 on every row, zlib level 9.
std::vector<std::uint8_t> encode_png(const RasterImage& img);
/// Accepts 8-bit RGB and RGBA (alpha dropped) non-interlaced PNGs; throws
/// DecodeError on anything else or on corrupt data.
RasterImage decode_png(std::span<const std::uint8_t> bytes);

/// Height of the label strip placed above each grid cell.
inline constexpr int kBannerHeight = 16;

/// Draws `text` with the embedded 5x7 font (upper-cased; unknown glyphs
/// render as '?'), scaled 2x, starting at (x, y). Clipped to `max_width`.
void draw_text(RasterImage& img, int x, int y, std::string_view text, Rgb color, int max_width);

/// Single-row composite, left to right; each cell gets a 16px banner with
/// its label above the image. Throws ContractError when empty or when cell
/// sizes differ.
RasterImage compose_grid(const std::vector<std::pair<RasterImage, std::string>>& cells);

/// Splits a grid produced by compose_grid back into its image cells (banners
/// dropped). Cells are assumed square.
std::vector<RasterImage> split_grid(const RasterImage& grid);

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace imagery
