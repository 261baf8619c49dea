// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "cxr/imgprep.hpp"
#include "cxr/rng.hpp"

namespace {

cxr::GrayImage random_image(int size, int depth) {
    cxr::Rng rng(42);
    cxr::GrayImage img(size, size, depth);
    for (auto& p : img.pixels)
        p = static_cast<std::uint16_t>(rng.uniform_int(0, img.max_value()));
    return img;
}

void BM_EqualizeHistogram1024(benchmark::State& state) {
    const cxr::GrayImage img = random_image(1024, 8);
    for (auto _ : state) benchmark::DoNotOptimize(cxr::equalize_histogram(img));
}
BENCHMARK(BM_EqualizeHistogram1024);

void BM_MedianFilter1024(benchmark::State& state) {
    const cxr::GrayImage img = random_image(1024, 8);
    for (auto _ : state) benchmark::DoNotOptimize(cxr::median_filter(img, 3));
}
BENCHMARK(BM_MedianFilter1024);

void BM_ResizeBilinear1024To224(benchmark::State& state) {
    const cxr::GrayImage img = random_image(1024, 8);
    cxr::PlanarImage plane(1, img.height, img.width);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) plane.values[i] = img.pixels[i];
    for (auto _ : state) benchmark::DoNotOptimize(cxr::resize_bilinear(plane, 224));
}
BENCHMARK(BM_ResizeBilinear1024To224);

void BM_FullPrepare1024(benchmark::State& state) {
    const cxr::GrayImage img = random_image(1024, 8);
    const cxr::PrepConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(cxr::prepare(img, cfg));
}
BENCHMARK(BM_FullPrepare1024);

}  // namespace

BENCHMARK_MAIN();
