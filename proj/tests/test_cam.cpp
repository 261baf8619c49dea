// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "cxr/cam.hpp"
#include "cxr/csv.hpp"
#include "cxr/error.hpp"
#include "cxr/loss.hpp"
#include "cxr/rng.hpp"
#include "test_support.hpp"

using namespace cxr;

namespace {

Tensor random_features(Rng& rng, int n, int k, int h, int w) {
    Tensor t({n, k, h, w});
    for (double& v : t.data) v = rng.uniform(-2, 2);
    return t;
}

Tensor random_input(Rng& rng, int n, int size) {
    Tensor t({n, 3, size, size});
    for (double& v : t.data) v = rng.uniform(-1, 1);
    return t;
}

ModelConfig desk_model() {
    ModelConfig cfg;
    cfg.kind = BackboneKind::desk_tiny;
    return cfg;
}

ModelConfig micro_densenet() {
    ModelConfig cfg;
    cfg.kind = BackboneKind::dense121;
    cfg.densenet.stem_channels = 8;
    cfg.densenet.growth = 4;
    cfg.densenet.bn_size = 2;
    cfg.densenet.block_layers = {2, 2};
    return cfg;
}

}  // namespace

TEST_CASE("cam with one unit weight is the feature map itself") {
    Rng rng(1);
    const Tensor f = random_features(rng, 2, 1, 3, 4);
    const ActivationMap map = compute_cam(f, 1, {1.0});
    REQUIRE(map.height == 3);
    REQUIRE(map.width == 4);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x) CHECK(map.raw_at(y, x) == f.at4(1, 0, y, x));
}

TEST_CASE("cam with zero weights is identically zero") {
    Rng rng(2);
    const Tensor f = random_features(rng, 1, 5, 4, 4);
    const ActivationMap map = compute_cam(f, 0, std::vector<double>(5, 0.0));
    for (double v : map.raw) CHECK(v == 0.0);
    for (double v : map.normalized) CHECK(v == 0.0);  // degenerate map renders flat
}

TEST_CASE("cam matches a hand computation on 2x2 maps") {
    Tensor f({1, 3, 2, 2});
    // channel 0: [[1,2],[3,4]], channel 1: [[0,1],[0,1]], channel 2: [[-1,-1],[2,0]]
    f.data = {1, 2, 3, 4, 0, 1, 0, 1, -1, -1, 2, 0};
    const std::vector<double> w = {0.5, 2.0, -1.0};
    const ActivationMap map = compute_cam(f, 0, w);
    CHECK(map.raw_at(0, 0) == doctest::Approx(0.5 * 1 + 2.0 * 0 - 1.0 * -1).epsilon(1e-15));
    CHECK(map.raw_at(0, 1) == doctest::Approx(0.5 * 2 + 2.0 * 1 - 1.0 * -1).epsilon(1e-15));
    CHECK(map.raw_at(1, 0) == doctest::Approx(0.5 * 3 + 2.0 * 0 - 1.0 * 2).epsilon(1e-15));
    CHECK(map.raw_at(1, 1) == doctest::Approx(0.5 * 4 + 2.0 * 1 - 1.0 * 0).epsilon(1e-15));
}

TEST_CASE("cam rejects mismatched weights and bad samples") {
    Rng rng(3);
    const Tensor f = random_features(rng, 1, 4, 2, 2);
    CHECK_THROWS_AS(compute_cam(f, 0, {1.0, 2.0}), InvalidInputError);
    CHECK_THROWS_AS(compute_cam(f, 1, std::vector<double>(4, 1.0)), InvalidInputError);
    CHECK_THROWS_AS(compute_cam(Tensor({2, 2}), 0, {1.0, 1.0}), InvalidInputError);
}

TEST_CASE("cam is linear in the weights") {
    Rng rng(4);
    const Tensor f = random_features(rng, 1, 6, 3, 3);
    std::vector<double> w1, w2;
    for (int i = 0; i < 6; ++i) {
        w1.push_back(rng.uniform(-1, 1));
        w2.push_back(rng.uniform(-1, 1));
    }
    const double alpha = 1.7;

    std::vector<double> scaled, summed;
    for (int i = 0; i < 6; ++i) {
        scaled.push_back(alpha * w1[static_cast<std::size_t>(i)]);
        summed.push_back(w1[static_cast<std::size_t>(i)] + w2[static_cast<std::size_t>(i)]);
    }
    const ActivationMap m1 = compute_cam(f, 0, w1);
    const ActivationMap m2 = compute_cam(f, 0, w2);
    const ActivationMap ms = compute_cam(f, 0, scaled);
    const ActivationMap mp = compute_cam(f, 0, summed);
    for (std::size_t i = 0; i < m1.raw.size(); ++i) {
        CHECK(std::abs(ms.raw[i] - alpha * m1.raw[i]) <= 1e-10);
        CHECK(std::abs(mp.raw[i] - (m1.raw[i] + m2.raw[i])) <= 1e-10);
    }
}

TEST_CASE("normalization maps min to 0 and max to 1") {
    Rng rng(5);
    const Tensor f = random_features(rng, 1, 2, 5, 5);
    const ActivationMap map = compute_cam(f, 0, {0.3, -0.9});
    double lo = 1e300, hi = -1e300;
    for (double v : map.normalized) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
}

TEST_CASE("cam mean plus bias reproduces the logit") {
    Rng rng(6);

    ClassifierModel desk(desk_model(), 77);
    const Tensor x = random_input(rng, 2, 32);
    for (int sample = 0; sample < 2; ++sample) {
        const CamIdentityCheck check = cam_logit_identity(desk, x, sample);
        CHECK(check.ok);
        CHECK(check.abs_diff <= 1e-10);  // structurally exact up to roundoff
    }

    ClassifierModel dense(micro_densenet(), 78);
    const Tensor xd = random_input(rng, 1, 32);
    CHECK(cam_logit_identity(dense, xd, 0).ok);
}

TEST_CASE("zeroing the head weights pins the logit to the bias") {
    ClassifierModel model(desk_model(), 11);
    for (Parameter* p : model.parameters())
        if (p->name == "classifier.weight")
            for (double& v : p->value.data) v = 0.0;

    Rng rng(7);
    const Tensor x = random_input(rng, 1, 24);
    const CamIdentityCheck check = cam_logit_identity(model, x, 0);
    CHECK(check.ok);
    double raw_sum = 0;
    const ForwardResult fwd = model.forward_detail(x);
    const ActivationMap map = compute_cam(fwd.features, 0, model.head_weights());
    for (double v : map.raw) raw_sum += v;
    CHECK(raw_sum == 0.0);
    CHECK(check.logit == doctest::Approx(model.head_bias()).epsilon(1e-15));
}

TEST_CASE("identity survives a training step") {
    ClassifierModel model(desk_model(), 12);
    Rng rng(8);
    const Tensor x = random_input(rng, 4, 24);

    AdamOptimizer opt(model.parameters(), 1e-2, 0.9, 0.999, 1e-8);
    const Tensor logits = model.forward(x, true);
    std::vector<double> dl;
    weighted_bce_from_logits(logits.data, {1, 0, 1, 0}, {0.5, 0.5}, &dl);
    Tensor grad({4});
    grad.data = dl;
    opt.zero_grad();
    model.backward(grad);
    opt.step();

    CHECK(cam_logit_identity(model, x, 2).ok);
}

TEST_CASE("upsampling keeps the map intact at native size") {
    Rng rng(9);
    const Tensor f = random_features(rng, 1, 3, 6, 6);
    const ActivationMap map = compute_cam(f, 0, {1.0, -0.5, 0.25});
    const PlanarImage up = upsample_map(map, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            CHECK(std::abs(up.at(0, y, x) -
                           map.normalized[static_cast<std::size_t>(y) * 6 + x]) <= 1e-12);

    const PlanarImage big = upsample_map(map, 48);
    CHECK(big.height == 48);
    for (double v : big.values) {
        CHECK(v >= -1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("colormap hits the documented stops") {
    std::uint8_t rgb[3];
    colormap_rgb(0.0, rgb);
    CHECK(rgb[0] == 0);
    CHECK(rgb[1] == 0);
    CHECK(rgb[2] == 255);
    colormap_rgb(0.25, rgb);
    CHECK(rgb[0] == 0);
    CHECK(rgb[1] == 255);
    CHECK(rgb[2] == 255);
    colormap_rgb(0.5, rgb);
    CHECK(rgb[0] == 0);
    CHECK(rgb[1] == 255);
    CHECK(rgb[2] == 0);
    colormap_rgb(0.75, rgb);
    CHECK(rgb[0] == 255);
    CHECK(rgb[1] == 255);
    CHECK(rgb[2] == 0);
    colormap_rgb(1.0, rgb);
    CHECK(rgb[0] == 255);
    CHECK(rgb[1] == 0);
    CHECK(rgb[2] == 0);
    colormap_rgb(2.0, rgb);  // clamped
    CHECK(rgb[0] == 255);
}

TEST_CASE("alpha zero renders the base image exactly") {
    Rng rng(10);
    GrayImage base(16, 16, 8);
    for (auto& p : base.pixels) p = static_cast<std::uint16_t>(rng.below(256));
    const Tensor f = random_features(rng, 1, 2, 4, 4);
    const ActivationMap map = compute_cam(f, 0, {1.0, 1.0});

    const std::vector<std::uint8_t> rgb = render_overlay(base, map, 0.0);
    REQUIRE(rgb.size() == 16u * 16u * 3u);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const std::uint8_t want = static_cast<std::uint8_t>(base.at(y, x));
            const std::uint8_t* px = rgb.data() + (static_cast<std::size_t>(y) * 16 + x) * 3;
            CHECK(px[0] == want);
            CHECK(px[1] == want);
            CHECK(px[2] == want);
        }
}

TEST_CASE("constant map tints the whole frame uniformly") {
    GrayImage base(8, 8, 8, 100);
    Tensor f({1, 1, 2, 2}, 3.5);  // constant feature -> degenerate map -> normalized 0
    const ActivationMap map = compute_cam(f, 0, {1.0});
    const std::vector<std::uint8_t> rgb = render_overlay(base, map, 0.4);
    for (std::size_t i = 3; i < rgb.size(); i += 3) {
        CHECK(rgb[i] == rgb[0]);
        CHECK(rgb[i + 1] == rgb[1]);
        CHECK(rgb[i + 2] == rgb[2]);
    }
    // blend arithmetic: 0.6*100 + 0.4*colormap(0)
    CHECK(rgb[0] == static_cast<std::uint8_t>(std::lround(0.6 * 100)));
    CHECK(rgb[2] == static_cast<std::uint8_t>(std::lround(0.6 * 100 + 0.4 * 255)));
}

TEST_CASE("ground-truth circle pixels turn blue and out-of-frame centers clamp") {
    GrayImage base(32, 32, 8, 0);
    Tensor f({1, 1, 4, 4}, 0.0);
    const ActivationMap map = compute_cam(f, 0, {1.0});

    Circle circle{16, 16, 6};
    const std::vector<std::uint8_t> rgb = render_overlay(base, map, 0.0, circle);
    const auto px = [&](int y, int x) {
        return rgb.data() + (static_cast<std::size_t>(y) * 32 + x) * 3;
    };
    CHECK(px(16, 22)[2] == 255);  // on the ring
    CHECK(px(16, 16)[2] == 0);    // center untouched
    CHECK(px(0, 0)[2] == 0);      // far corner untouched

    std::vector<std::string> warnings;
    Circle outside{100, 16, 4};
    render_overlay(base, map, 0.0, outside, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("clamped") != std::string::npos);

    CHECK_THROWS_AS(render_overlay(base, map, 1.5), InvalidInputError);
}

TEST_CASE("cam peak lands on the hot feature cell") {
    Tensor f({1, 1, 4, 4}, 0.0);
    f.at4(0, 0, 1, 2) = 5.0;  // hot cell at feature (row 1, col 2)
    const ActivationMap map = compute_cam(f, 0, {1.0});
    const CamPeak peak = cam_peak(map, 64);
    // feature cell (1,2) of a 4->64 upsample is centered near (24, 40); the
    // half-pixel sample grid never lands exactly on the cell center, so the
    // peak reads slightly below the normalized maximum of 1.
    CHECK(std::abs(peak.x - 40) <= 8);
    CHECK(std::abs(peak.y - 24) <= 8);
    CHECK(peak.value >= 0.9);
    CHECK(peak.value <= 1.0);
}

TEST_CASE("cam csv round trips") {
    CamRecord rec;
    rec.image_id = "synthetic_0001";
    rec.stage = "C";
    rec.peak = {12, 30, 0.9};
    rec.raw_min = -0.5;
    rec.raw_max = 2.25;
    rec.raw_mean = 0.75;
    rec.logit = 1.5;
    rec.prob = sigmoid(1.5);

    const std::string dir = cxrtest::temp_dir("cam_csv");
    const std::string path = dir + "/cams.csv";
    write_cam_csv(path, {rec});
    const CsvTable table = csv_read_file(path);
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0][table.column("image_id")] == "synthetic_0001");
    CHECK(table.rows[0][table.column("peak_x")] == "12");
    CHECK(std::stod(table.rows[0][table.column("prob")]) ==
          doctest::Approx(sigmoid(1.5)).epsilon(1e-12));
}
