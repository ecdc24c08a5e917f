#include "imagery/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <cstring>

#include "imagery/error.hpp"

namespace imagery {

RasterImage::RasterImage(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ContractError("image dimensions must be positive");
    pixels_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
        pixels_[i] = fill.r;
        pixels_[i + 1] = fill.g;
        pixels_[i + 2] = fill.b;
    }
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) throw ContractError("image dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height * 3)
        throw ContractError("pixel buffer size does not match dimensions");
}

Rgb RasterImage::at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void RasterImage::set(int x, int y, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
}

void RasterImage::fill_rect(int x, int y, int w, int h, Rgb c) {
    const int x0 = std::max(x, 0), y0 = std::max(y, 0);
    const int x1 = std::min(x + w, width_), y1 = std::min(y + h, height_);
    for (int yy = y0; yy < y1; ++yy)
        for (int xx = x0; xx < x1; ++xx) set(xx, yy, c);
}

void RasterImage::blit(const RasterImage& src, int x, int y) {
    for (int sy = 0; sy < src.height(); ++sy) {
        const int dy = y + sy;
        if (dy < 0 || dy >= height_) continue;
        for (int sx = 0; sx < src.width(); ++sx) {
            const int dx = x + sx;
            if (dx < 0 || dx >= width_) continue;
            set(dx, dy, src.at(sx, sy));
        }
    }
}

RasterImage RasterImage::crop(int x, int y, int w, int h) const {
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > width_ || y + h > height_)
        throw ContractError("crop rectangle outside image");
    RasterImage out(w, h);
    for (int yy = 0; yy < h; ++yy)
        std::memcpy(out.pixels_.data() + static_cast<std::size_t>(yy) * w * 3,
                    pixels_.data() + (static_cast<std::size_t>(y + yy) * width_ + x) * 3,
                    static_cast<std::size_t>(w) * 3);
    return out;
}

double image_diff(const RasterImage& a, const RasterImage& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw ContractError("image_diff: resolution mismatch");
    const auto pa = a.pixels();
    const auto pb = b.pixels();
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) total += static_cast<std::uint64_t>(std::abs(int(pa[i]) - int(pb[i])));
    return static_cast<double>(total) / (255.0 * static_cast<double>(pa.size()));
}

namespace {

constexpr std::array<std::uint8_t, 8> kSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], std::span<const std::uint8_t> data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t type_pos = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0L, out.data() + type_pos, static_cast<uInt>(4 + data.size()));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

std::uint8_t paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
    const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * img.height());
    const auto px = img.pixels();
    for (int y = 0; y < img.height(); ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), px.begin() + y * stride, px.begin() + (y + 1) * stride);
    }

    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> packed(packed_size);
    if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw Error("zlib compression failed");
    packed.resize(packed_size);

    std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());
    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(img.width()));
    put_u32(ihdr, static_cast<std::uint32_t>(img.height()));
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    return out;
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kSignature.size() || !std::equal(kSignature.begin(), kSignature.end(), bytes.begin()))
        throw DecodeError("not a PNG file");

    std::size_t pos = kSignature.size();
    std::uint32_t width = 0, height = 0;
    int channels = 0;
    bool seen_header = false, seen_end = false;
    std::vector<std::uint8_t> idat;
    while (pos < bytes.size() && !seen_end) {
        if (bytes.size() - pos < 12) throw DecodeError("truncated chunk");
        const std::uint32_t len = get_u32(bytes.data() + pos);
        if (len > bytes.size() - pos - 12) throw DecodeError("truncated chunk");
        const std::uint8_t* type = bytes.data() + pos + 4;
        const std::uint8_t* data = type + 4;
        const std::uint32_t stored_crc = get_u32(data + len);
        if (static_cast<std::uint32_t>(crc32(0L, type, len + 4)) != stored_crc) throw DecodeError("chunk CRC mismatch");
        const std::string_view tag(reinterpret_cast<const char*>(type), 4);
        if (tag == "IHDR") {
            if (len != 13) throw DecodeError("bad IHDR");
            width = get_u32(data);
            height = get_u32(data + 4);
            const int depth = data[8], color = data[9];
            if (depth != 8 || (color != 2 && color != 6) || data[10] != 0 || data[11] != 0 || data[12] != 0)
                throw DecodeError("unsupported PNG format (need 8-bit RGB/RGBA, no interlace)");
            if (width == 0 || height == 0 || width > 1u << 16 || height > 1u << 16)
                throw DecodeError("unsupported PNG dimensions");
            channels = color == 2 ? 3 : 4;
            seen_header = true;
        } else if (tag == "IDAT") {
            if (!seen_header) throw DecodeError("IDAT before IHDR");
            idat.insert(idat.end(), data, data + len);
        } else if (tag == "IEND") {
            seen_end = true;
        }
        pos += 12 + len;
    }
    if (!seen_header || !seen_end || idat.empty()) throw DecodeError("missing required chunks");

    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    std::vector<std::uint8_t> raw((stride + 1) * height);
    uLongf raw_size = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_size != raw.size())
        throw DecodeError("corrupt image data");

    std::vector<std::uint8_t> rows(stride * height);
    for (std::uint32_t y = 0; y < height; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
        std::uint8_t* dst = rows.data() + y * stride;
        const std::uint8_t* prev = y ? dst - stride : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<std::size_t>(channels) ? dst[i - channels] : 0;
            const int b = prev ? prev[i] : 0;
            const int c = (prev && i >= static_cast<std::size_t>(channels)) ? prev[i - channels] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw DecodeError("unknown row filter");
            }
            dst[i] = static_cast<std::uint8_t>(v);
        }
    }

    if (channels == 3) return RasterImage(static_cast<int>(width), static_cast<int>(height), std::move(rows));
    std::vector<std::uint8_t> rgb;
    rgb.reserve(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < rows.size(); i += 4) rgb.insert(rgb.end(), rows.begin() + i, rows.begin() + i + 3);
    return RasterImage(static_cast<int>(width), static_cast<int>(height), std::move(rgb));
}

RasterImage compose_grid(const std::vector<std::pair<RasterImage, std::string>>& cells) {
    if (cells.empty()) throw ContractError("compose_grid: no images");
    const int w = cells.front().first.width();
    const int h = cells.front().first.height();
    for (const auto& [img, label] : cells)
        if (img.width() != w || img.height() != h) throw ContractError("compose_grid: mixed resolutions");

    RasterImage out(w * static_cast<int>(cells.size()), h + kBannerHeight);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const int x = static_cast<int>(i) * w;
        draw_text(out, x + 2, 1, cells[i].second, {0, 0, 0}, w - 4);
        out.blit(cells[i].first, x, kBannerHeight);
        out.fill_rect(x, kBannerHeight - 1, w, 1, {160, 160, 160});
    }
    return out;
}

std::vector<RasterImage> split_grid(const RasterImage& grid) {
    const int cell = grid.height() - kBannerHeight;
    if (cell <= 0 || grid.width() % cell != 0) throw ContractError("split_grid: not a grid of square cells");
    std::vector<RasterImage> out;
    for (int x = 0; x < grid.width(); x += cell) out.push_back(grid.crop(x, kBannerHeight, cell, cell));
    return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    if (i < bytes.size()) {
        std::uint32_t v = bytes[i] << 16;
        if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

}  // namespace imagery
