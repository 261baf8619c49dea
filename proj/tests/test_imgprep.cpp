// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cxr/image_io.hpp"
#include "cxr/imgprep.hpp"
#include "cxr/rng.hpp"
#include "test_support.hpp"

using namespace cxr;

namespace {

// ---------------------------------------------------------------------------
// Independent oracles. These deliberately share no code with the library:
// equalization recomputes the CDF per pixel by brute-force counting, the
// median oracle materializes an explicitly reflect-padded buffer and sorts
// each window.
// ---------------------------------------------------------------------------

GrayImage oracle_equalize(const GrayImage& img) {
    const std::size_t n = img.pixels.size();
    const int maxv = img.max_value();

    // count of pixels <= v, computed by scanning the whole image per level
    auto cdf_of = [&](int v) {
        std::size_t count = 0;
        for (std::uint16_t p : img.pixels)
            if (p <= v) ++count;
        return count;
    };
    std::size_t cdf_min = n + 1;
    std::set<int> levels(img.pixels.begin(), img.pixels.end());
    for (int v : levels) cdf_min = std::min(cdf_min, cdf_of(v));
    if (levels.size() == 1) return img;

    GrayImage out(img.width, img.height, img.bit_depth);
    for (std::size_t i = 0; i < n; ++i) {
        const double num = static_cast<double>(cdf_of(img.pixels[i]) - cdf_min);
        const double den = static_cast<double>(n - cdf_min);
        out.pixels[i] = static_cast<std::uint16_t>(std::lround(num / den * maxv));
    }
    return out;
}

int oracle_reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        else i = n - 1 - (i - n);
    }
    return i;
}

GrayImage oracle_median(const GrayImage& img, int window) {
    const int r = window / 2;
    // build the fully padded buffer first
    const int ph = img.height + 2 * r, pw = img.width + 2 * r;
    std::vector<std::uint16_t> padded(static_cast<std::size_t>(ph) * pw);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            padded[static_cast<std::size_t>(y) * pw + x] =
                img.at(oracle_reflect(y - r, img.height), oracle_reflect(x - r, img.width));

    GrayImage out(img.width, img.height, img.bit_depth);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            std::vector<std::uint16_t> vals;
            for (int dy = 0; dy < window; ++dy)
                for (int dx = 0; dx < window; ++dx)
                    vals.push_back(padded[static_cast<std::size_t>(y + dy) * pw + (x + dx)]);
            std::sort(vals.begin(), vals.end());
            out.at(y, x) = vals[vals.size() / 2];
        }
    return out;
}

GrayImage random_image(Rng& rng, int w, int h, int depth) {
    GrayImage img(w, h, depth);
    for (auto& p : img.pixels)
        p = static_cast<std::uint16_t>(rng.uniform_int(0, img.max_value()));
    return img;
}

}  // namespace

TEST_CASE("equalization: uniform histogram is a fixed point") {
    // 16x16 8-bit image where each of the 256 levels appears exactly once
    GrayImage img(16, 16, 8);
    for (int i = 0; i < 256; ++i) img.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(i);
    const GrayImage out = equalize_histogram(img);
    CHECK(out.pixels == img.pixels);
}

TEST_CASE("equalization: constant image returned unchanged") {
    GrayImage img(5, 7, 8, 123);
    const GrayImage out = equalize_histogram(img);
    CHECK(out.pixels == img.pixels);
}

TEST_CASE("equalization: 4x4 three-level example matches the CDF formula") {
    // intensities {0 x8, 128 x4, 255 x4}: cdf(0)=8, cdf(128)=12, cdf(255)=16,
    // cdf_min=8, N=16 -> map 0->0, 128->round(4/8*255)=128, 255->255
    GrayImage img(4, 4, 8);
    for (int i = 0; i < 8; ++i) img.pixels[static_cast<std::size_t>(i)] = 0;
    for (int i = 8; i < 12; ++i) img.pixels[static_cast<std::size_t>(i)] = 128;
    for (int i = 12; i < 16; ++i) img.pixels[static_cast<std::size_t>(i)] = 255;
    const GrayImage out = equalize_histogram(img);
    const GrayImage expect = oracle_equalize(img);
    CHECK(out.pixels == expect.pixels);
    CHECK(out.pixels[0] == 0);
    CHECK(out.pixels[8] == 128);
    CHECK(out.pixels[12] == 255);
}

TEST_CASE("equalization: matches brute-force oracle on random images") {
    Rng rng(101);
    for (int iter = 0; iter < 50; ++iter) {
        const int w = static_cast<int>(rng.uniform_int(1, 16));
        const int h = static_cast<int>(rng.uniform_int(1, 16));
        const int depth = rng.coin() ? 8 : 12;
        const GrayImage img = random_image(rng, w, h, depth);
        const GrayImage got = equalize_histogram(img);
        const GrayImage expect = oracle_equalize(img);
        REQUIRE(got.pixels == expect.pixels);
    }
}

TEST_CASE("equalization: mapping is monotone non-decreasing") {
    Rng rng(202);
    for (int iter = 0; iter < 20; ++iter) {
        const GrayImage img = random_image(rng, 12, 12, 8);
        const GrayImage out = equalize_histogram(img);
        // sort unique input levels, check mapped order
        std::vector<std::pair<std::uint16_t, std::uint16_t>> pairs;
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
            pairs.emplace_back(img.pixels[i], out.pixels[i]);
        std::sort(pairs.begin(), pairs.end());
        for (std::size_t i = 1; i < pairs.size(); ++i) {
            REQUIRE(pairs[i].second >= pairs[i - 1].second);
            if (pairs[i].first == pairs[i - 1].first) REQUIRE(pairs[i].second == pairs[i - 1].second);
        }
    }
}

TEST_CASE("median: constant image unchanged, any odd window") {
    GrayImage img(9, 4, 8, 42);
    for (int w : {1, 3, 5, 7}) {
        const GrayImage out = median_filter(img, w);
        CHECK(out.pixels == img.pixels);
    }
}

TEST_CASE("median: 3x3 holding 1..9 maps center to 5") {
    Rng rng(7);
    std::vector<std::uint16_t> vals = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    for (int iter = 0; iter < 10; ++iter) {
        rng.shuffle(vals);
        GrayImage img(3, 3, 8);
        img.pixels = vals;
        const GrayImage out = median_filter(img, 3);
        CHECK(out.at(1, 1) == 5);
    }
}

TEST_CASE("median: even window rejected") {
    GrayImage img(4, 4, 8, 1);
    CHECK_THROWS_AS(median_filter(img, 2), InvalidInputError);
    CHECK_THROWS_AS(median_filter(img, 0), InvalidInputError);
}

TEST_CASE("median: matches naive reflect-padded oracle on random images") {
    Rng rng(303);
    for (int iter = 0; iter < 50; ++iter) {
        const int w = static_cast<int>(rng.uniform_int(1, 16));
        const int h = static_cast<int>(rng.uniform_int(1, 16));
        const GrayImage img = random_image(rng, w, h, 8);
        const int window = rng.coin() ? 3 : 5;
        const GrayImage got = median_filter(img, window);
        const GrayImage expect = oracle_median(img, window);
        REQUIRE(got.pixels == expect.pixels);
    }
}

TEST_CASE("median: every output value belongs to its padded window") {
    Rng rng(404);
    const GrayImage img = random_image(rng, 8, 8, 8);
    const int window = 3, r = 1;
    const GrayImage out = median_filter(img, window);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            std::set<std::uint16_t> members;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    members.insert(img.at(reflect_index(y + dy, img.height),
                                          reflect_index(x + dx, img.width)));
            REQUIRE(members.count(out.at(y, x)) == 1);
        }
}

TEST_CASE("median: idempotent when already constant within every window") {
    // blockwise-constant image with block size >= window
    GrayImage img(12, 12, 8);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) img.at(y, x) = 17;
    const GrayImage once = median_filter(img, 3);
    const GrayImage twice = median_filter(once, 3);
    CHECK(once.pixels == twice.pixels);
}

TEST_CASE("resize: same-size resize is the identity") {
    Rng rng(505);
    PlanarImage img(1, 224, 224);
    for (auto& v : img.values) v = rng.uniform(0, 255);
    const PlanarImage out = resize_bilinear(img, 224);
    double max_diff = 0;
    for (std::size_t i = 0; i < img.values.size(); ++i)
        max_diff = std::max(max_diff, std::abs(out.values[i] - img.values[i]));
    CHECK(max_diff < 1e-12);
}

TEST_CASE("resize: 2048 -> 224 shape and intensity bounds") {
    Rng rng(606);
    PlanarImage img(1, 2048, 2048);
    for (auto& v : img.values) v = rng.uniform(0, 4095);
    const PlanarImage out = resize_bilinear(img, 224);
    CHECK(out.height == 224);
    CHECK(out.width == 224);
    for (double v : out.values) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 4095.0);
    }
}

TEST_CASE("resize: constant image upscales to constant") {
    PlanarImage img(1, 2, 2, 99.5);
    const PlanarImage out = resize_bilinear(img, 4);
    CHECK(out.height == 4);
    for (double v : out.values) REQUIRE(v == doctest::Approx(99.5).epsilon(1e-12));
}

TEST_CASE("resize: rejects non-positive target") {
    PlanarImage img(1, 4, 4, 1.0);
    CHECK_THROWS_AS(resize_bilinear(img, 0), InvalidInputError);
}

TEST_CASE("normalize: centering and direct arithmetic") {
    PlanarImage img(3, 1, 1);
    img.at(0, 0, 0) = 0.485;
    img.at(1, 0, 0) = 1.0;
    img.at(2, 0, 0) = 0.0;
    const std::array<double, 3> means{0.485, 0.5, 0.406};
    const std::array<double, 3> stds{0.229, 0.25, 0.225};
    const PlanarImage out = normalize_channels(img, means, stds);
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.at(1, 0, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("normalize: inverted exactly by denormalize within 1e-6") {
    Rng rng(707);
    PlanarImage img(3, 9, 9);
    for (auto& v : img.values) v = rng.uniform01();
    const std::array<double, 3> means{0.485, 0.456, 0.406};
    const std::array<double, 3> stds{0.229, 0.224, 0.225};
    const PlanarImage back = denormalize_channels(normalize_channels(img, means, stds), means, stds);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        REQUIRE(std::abs(back.values[i] - img.values[i]) < 1e-6);
}

TEST_CASE("normalize: zero or negative std rejected") {
    PlanarImage img(3, 2, 2, 0.5);
    CHECK_THROWS_AS(normalize_channels(img, {0, 0, 0}, {0.0, 1, 1}), InvalidInputError);
    CHECK_THROWS_AS(normalize_channels(img, {0, 0, 0}, {1, -0.2, 1}), InvalidInputError);
}

TEST_CASE("prepare: output shape is target x target x 3 and finite") {
    Rng rng(808);
    PrepConfig cfg;  // default target 224
    const GrayImage img = random_image(rng, 160, 120, 8);
    const PlanarImage out = prepare(img, cfg);
    CHECK(out.channels == 3);
    CHECK(out.height == 224);
    CHECK(out.width == 224);
    for (double v : out.values) REQUIRE(std::isfinite(v));
}

TEST_CASE("prepare: constant mid-gray composes the per-step results") {
    // equalization keeps a constant image, median keeps it, resize keeps it,
    // so each output channel must be (v/maxv - mean_c) / std_c.
    PrepConfig cfg;
    cfg.target_size = 32;
    const int v = 140;
    GrayImage img(50, 50, 8, v);
    const PlanarImage out = prepare(img, cfg);
    for (int c = 0; c < 3; ++c) {
        const double expect = (v / 255.0 - cfg.channel_means[static_cast<std::size_t>(c)]) /
                              cfg.channel_stds[static_cast<std::size_t>(c)];
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                REQUIRE(out.at(c, y, x) == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("prepare: 12-bit input scales by 4095") {
    PrepConfig cfg;
    cfg.target_size = 16;
    GrayImage img(32, 32, 12, 4095);
    const PlanarImage out = prepare(img, cfg);
    const double expect = (1.0 - cfg.channel_means[0]) / cfg.channel_stds[0];
    CHECK(out.at(0, 0, 0) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("prepare: double application only promises shape and finiteness") {
    Rng rng(909);
    PrepConfig cfg;
    cfg.target_size = 24;
    const GrayImage img = random_image(rng, 40, 40, 8);
    const PlanarImage once = prepare(img, cfg);
    CHECK(once.height == 24);
    CHECK(once.channels == 3);
    for (double v : once.values) REQUIRE(std::isfinite(v));
}

TEST_CASE("prepare_stages: emits the four stage snapshots") {
    Rng rng(111);
    PrepConfig cfg;
    cfg.target_size = 20;
    const GrayImage img = random_image(rng, 30, 30, 8);
    const PrepStages s = prepare_stages(img, cfg);
    CHECK(s.equalized.width == 30);
    CHECK(s.filtered.width == 30);
    CHECK(s.resized.height == 20);
    CHECK(s.normalized.channels == 3);
    CHECK(s.normalized.height == 20);
}

TEST_CASE("image io: png gray round-trip and raw12 loader") {
    const std::string dir = cxrtest::temp_dir("imgio");
    Rng rng(212);
    const GrayImage img = random_image(rng, 33, 21, 8);
    save_png_gray(dir + "/a.png", img);
    const GrayImage back = load_png_gray(dir + "/a.png");
    CHECK(back.width == 33);
    CHECK(back.height == 21);
    CHECK(back.pixels == img.pixels);

    // raw 12-bit big-endian
    GrayImage raw(16, 8, 12);
    for (std::size_t i = 0; i < raw.pixels.size(); ++i)
        raw.pixels[i] = static_cast<std::uint16_t>(rng.uniform_int(0, 4095));
    {
        std::ofstream out(dir + "/a.raw", std::ios::binary);
        for (std::uint16_t v : raw.pixels) {
            const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
            out.write(bytes, 2);
        }
    }
    const GrayImage raw_back = load_raw12_be(dir + "/a.raw", 16, 8);
    CHECK(raw_back.bit_depth == 12);
    CHECK(raw_back.pixels == raw.pixels);

    // wrong size is rejected with the byte counts in the message
    CHECK_THROWS_AS(load_raw12_be(dir + "/a.raw", 32, 32), InvalidInputError);
}
