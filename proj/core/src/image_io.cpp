// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace cxr {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

PlanarImage to_planar(const GrayImage& img) {
    PlanarImage out(1, img.height, img.width);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) out.values[i] = img.pixels[i];
    return out;
}

GrayImage load_png_gray(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open PNG: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<std::uint8_t> interleaved;
    int width = 0, height = 0, channels = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);

    if (depth == 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InvalidInputError("16-bit PNG not supported (use raw 12-bit input): " + path);
    }
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    channels = png_get_channels(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    interleaved.resize(rowbytes * height);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = interleaved.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    GrayImage out(width, height, 8);
    if (channels == 1) {
        for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = interleaved[i];
    } else if (channels == 3) {
        for (std::size_t i = 0; i < out.pixels.size(); ++i) {
            const double r = interleaved[3 * i], g = interleaved[3 * i + 1], b = interleaved[3 * i + 2];
            out.pixels[i] = static_cast<std::uint16_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
        }
    } else {
        throw InvalidInputError("unsupported PNG channel count " + std::to_string(channels) +
                                ": " + path);
    }
    return out;
}

namespace {

void write_png(const std::string& path, int width, int height, int color_type,
               const std::uint8_t* data, std::size_t rowbytes) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot write PNG: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path);
    }
    png_init_io(png, f.get());
    // Fixed compression settings keep reruns byte-identical.
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(data + rowbytes * static_cast<std::size_t>(y));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void save_png_gray(const std::string& path, const GrayImage& img) {
    std::vector<std::uint8_t> bytes(img.pixels.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const std::uint16_t v = img.pixels[i];
        bytes[i] = static_cast<std::uint8_t>(v > 255 ? 255 : v);
    }
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, bytes.data(),
              static_cast<std::size_t>(img.width));
}

void save_png_rgb(const std::string& path, int width, int height,
                  const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
        throw InvalidInputError("RGB buffer size does not match dimensions");
    write_png(path, width, height, PNG_COLOR_TYPE_RGB, rgb.data(),
              static_cast<std::size_t>(width) * 3);
}

GrayImage load_raw12_be(const std::string& path, int width, int height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open raw image: " + path);
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::uint64_t>(in.tellg());
    const std::uint64_t expect = static_cast<std::uint64_t>(width) * height * 2;
    if (size != expect)
        throw InvalidInputError("raw image " + path + " has " + std::to_string(size) +
                                " bytes, expected " + std::to_string(expect));
    in.seekg(0);
    std::vector<std::uint8_t> buf(expect);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expect));
    if (!in) throw IoError("short read: " + path);

    GrayImage out(width, height, 12);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const std::uint16_t v =
            static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
        if (v > 4095)
            throw InvalidInputError("raw sample " + std::to_string(v) + " exceeds 12 bits at offset " +
                                    std::to_string(2 * i) + " in " + path);
        out.pixels[i] = v;
    }
    return out;
}

GrayImage render_minmax_8bit(const PlanarImage& img, int channel) {
    if (channel < 0 || channel >= img.channels) throw InvalidInputError("channel out of range");
    double lo = img.at(channel, 0, 0), hi = lo;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double v = img.at(channel, y, x);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    GrayImage out(img.width, img.height, 8);
    const double span = hi - lo;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double v = span > 0 ? (img.at(channel, y, x) - lo) / span : 0.0;
            out.at(y, x) = static_cast<std::uint16_t>(std::lround(v * 255.0));
        }
    return out;
}

GrayImage load_gray_auto(const std::string& path) {
    std::string ext;
    const std::size_t dot = path.find_last_of('.');
    if (dot != std::string::npos) {
        ext = path.substr(dot);
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
    if (ext == ".img") return load_raw12_be(path);
    return load_png_gray(path);
}

GrayImage quantize_plane(const PlanarImage& img, int channel, int max_value) {
    if (channel < 0 || channel >= img.channels) throw InvalidInputError("channel out of range");
    GrayImage out(img.width, img.height, 8);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            long v = std::lround(img.at(channel, y, x));
            if (v < 0) v = 0;
            if (v > max_value) v = max_value;
            out.at(y, x) = static_cast<std::uint16_t>(v * 255 / max_value);
        }
    return out;
}

}  // namespace cxr
