// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "cxr/augment.hpp"
#include "cxr/csv.hpp"
#include "cxr/loss.hpp"
#include "cxr/model.hpp"
#include "cxr/rng.hpp"
#include "cxr/schedule.hpp"
#include "cxr/splits.hpp"
#include "cxr/synthetic.hpp"
#include "cxr/train.hpp"
#include "test_support.hpp"

using namespace cxr;

namespace {

// Independent rendering of the weighted BCE, written directly from its
// definition with explicit clamping, accumulated in long double.
double oracle_weighted_bce(const std::vector<double>& probs, const std::vector<int>& labels,
                           double w_pos, double w_neg) {
    long double total = 0.0L;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        long double p = probs[i];
        if (p < 1e-7L) p = 1e-7L;
        if (p > 1.0L - 1e-7L) p = 1.0L - 1e-7L;
        if (labels[i] == 1)
            total += -static_cast<long double>(w_pos) * std::log(p);
        else
            total += -static_cast<long double>(w_neg) * std::log(1.0L - p);
    }
    return static_cast<double>(total / static_cast<long double>(probs.size()));
}

PlanarImage gaussian_blob_image(int size, double amplitude, double sigma) {
    PlanarImage img(1, size, size);
    const double c = (size - 1) / 2.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double d2 = (x - c) * (x - c) + (y - c) * (y - c);
            img.at(0, y, x) = amplitude * std::exp(-d2 / (2 * sigma * sigma));
        }
    return img;
}

PrepConfig desk_prep(int size) {
    PrepConfig prep;
    prep.target_size = size;
    return prep;
}

ModelConfig desk_model() {
    ModelConfig cfg;
    cfg.kind = BackboneKind::desk_tiny;
    return cfg;
}

bool state_equal(ClassifierModel& a, ClassifierModel& b) {
    auto sa = a.named_state();
    auto sb = b.named_state();
    if (sa.size() != sb.size()) return false;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        if (sa[i].first != sb[i].first) return false;
        if (sa[i].second->data != sb[i].second->data) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("class weights follow the negative-share rule") {
    const ClassWeights w = compute_class_weights({100, 47});
    CHECK(w.w_pos == doctest::Approx(47.0 / 147.0).epsilon(1e-15));
    CHECK(w.w_neg == doctest::Approx(100.0 / 147.0).epsilon(1e-15));
    CHECK(w.w_pos + w.w_neg == doctest::Approx(1.0).epsilon(1e-15));

    // The rarer class carries the larger weight.
    const ClassWeights skew = compute_class_weights({10, 90});
    CHECK(skew.w_pos > skew.w_neg);

    CHECK_THROWS_AS(compute_class_weights({0, 0}), InvalidInputError);

    // Single-class splits are legal but flagged.
    std::vector<std::string> warnings;
    const ClassWeights degenerate = compute_class_weights({0, 10}, &warnings);
    CHECK(degenerate.w_pos == 1.0);
    CHECK(degenerate.w_neg == 0.0);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("negative") != std::string::npos);
}

TEST_CASE("weighted bce matches the brute-force oracle") {
    Rng rng(2026);
    for (int iter = 0; iter < 200; ++iter) {
        const int n = 1 + static_cast<int>(rng.below(40));
        std::vector<double> probs;
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            // include exact 0/1 probabilities so the clamp path is exercised
            const double roll = rng.uniform01();
            probs.push_back(roll < 0.05 ? 0.0 : roll < 0.1 ? 1.0 : rng.uniform01());
            labels.push_back(rng.coin() ? 1 : 0);
        }
        const ClassWeights w{rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)};
        const double got = weighted_bce(probs, labels, w);
        const double want = oracle_weighted_bce(probs, labels, w.w_pos, w.w_neg);
        CHECK(std::abs(got - want) <= 1e-10 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("weighted bce frozen values") {
    // Hand-evaluated: single positive at p=0.5 -> -w_pos*log(0.5).
    CHECK(weighted_bce({0.5}, {1}, {0.7, 0.3}) ==
          doctest::Approx(-0.7 * std::log(0.5)).epsilon(1e-15));
    // Saturated wrong answer hits the clamp: p=0 under label 1.
    CHECK(weighted_bce({0.0}, {1}, {1.0, 1.0}) ==
          doctest::Approx(-std::log(1e-7)).epsilon(1e-15));
    CHECK(std::isfinite(weighted_bce({1.0}, {0}, {1.0, 1.0})));
}

TEST_CASE("weighted bce rejects bad input") {
    CHECK_THROWS_AS(weighted_bce({}, {}, {1, 1}), InvalidInputError);
    CHECK_THROWS_AS(weighted_bce({0.5}, {2}, {1, 1}), InvalidInputError);
    CHECK_THROWS_AS(weighted_bce({0.5, 0.5}, {1}, {1, 1}), InvalidInputError);
}

TEST_CASE("logit form agrees with the probability form and its gradient is exact") {
    Rng rng(77);
    for (int iter = 0; iter < 100; ++iter) {
        const int n = 1 + static_cast<int>(rng.below(16));
        std::vector<double> logits;
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            logits.push_back(rng.uniform(-6, 6));
            labels.push_back(rng.coin() ? 1 : 0);
        }
        const ClassWeights w{rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)};

        std::vector<double> grad;
        const double loss = weighted_bce_from_logits(logits, labels, w, &grad);

        std::vector<double> probs;
        for (double z : logits) probs.push_back(sigmoid(z));
        CHECK(loss == doctest::Approx(weighted_bce(probs, labels, w)).epsilon(1e-12));

        // Closed form: (-w_pos*y*(1-p) + w_neg*(1-y)*p) / N.
        REQUIRE(grad.size() == logits.size());
        for (int i = 0; i < n; ++i) {
            const double p = probs[static_cast<std::size_t>(i)];
            const double want = (labels[static_cast<std::size_t>(i)] == 1
                                     ? -w.w_pos * (1 - p)
                                     : w.w_neg * p) /
                                n;
            CHECK(std::abs(grad[static_cast<std::size_t>(i)] - want) <= 1e-14);
        }
    }
}

TEST_CASE("logit-form gradient matches finite differences") {
    Rng rng(4242);
    std::vector<double> logits;
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
        logits.push_back(rng.uniform(-3, 3));  // moderate: keep clear of the clamp
        labels.push_back(rng.coin() ? 1 : 0);
    }
    const ClassWeights w{0.38, 0.62};
    std::vector<double> grad;
    weighted_bce_from_logits(logits, labels, w, &grad);

    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        std::vector<double> up = logits, dn = logits;
        up[i] += h;
        dn[i] -= h;
        const double fd = (weighted_bce_from_logits(up, labels, w) -
                           weighted_bce_from_logits(dn, labels, w)) /
                          (2 * h);
        CHECK(std::abs(grad[i] - fd) <= 1e-8 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("plateau schedule reproduces the flat-metric trace") {
    // Patience 1: the rate survives one flat epoch and drops on the second.
    PlateauSchedule sched(0.001, 0.1, 1, 1e-4, 1e-6);
    std::vector<double> trace;
    for (int i = 0; i < 3; ++i) trace.push_back(sched.observe(1.0));
    CHECK(trace == std::vector<double>{0.001, 0.001, 0.0001});
    CHECK(sched.just_dropped());
    CHECK(sched.bad_epochs() == 0);
}

TEST_CASE("plateau schedule improvement test is relative and strict") {
    PlateauSchedule sched(0.001, 0.1, 0, 1e-4, 0.0);
    sched.observe(1.0);
    CHECK(sched.best() == 1.0);
    sched.observe(0.9999);  // exactly at best*(1-1e-4): not an improvement
    CHECK(sched.best() == 1.0);
    CHECK(sched.lr() == doctest::Approx(0.0001).epsilon(1e-12));
    sched.observe(0.99989);  // strictly below the line: improvement
    CHECK(sched.best() == 0.99989);
    CHECK(sched.lr() == doctest::Approx(0.0001).epsilon(1e-12));
}

TEST_CASE("plateau schedule floors at min_lr") {
    PlateauSchedule sched(1e-3, 0.1, 0, 1e-4, 1e-6);
    sched.observe(1.0);
    std::vector<double> rates;
    for (int i = 0; i < 6; ++i) rates.push_back(sched.observe(1.0));
    CHECK(rates[0] == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(rates[1] == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(rates[2] == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(rates[3] == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(rates[5] == doctest::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("plateau schedule rejects bad parameters") {
    CHECK_THROWS_AS(PlateauSchedule(0.0), InvalidInputError);
    CHECK_THROWS_AS(PlateauSchedule(1e-3, 1.0), InvalidInputError);
    CHECK_THROWS_AS(PlateauSchedule(1e-3, 0.1, -1), InvalidInputError);
}

TEST_CASE("hflip mirrors columns and is an involution") {
    Rng rng(5);
    PlanarImage img(2, 5, 7);
    for (double& v : img.values) v = rng.uniform(0, 100);

    const PlanarImage flipped = hflip(img);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 7; ++x) CHECK(flipped.at(c, y, x) == img.at(c, y, 6 - x));
    CHECK(hflip(flipped).values == img.values);
}

TEST_CASE("rotation by zero degrees is exact identity") {
    Rng rng(6);
    PlanarImage img(1, 9, 9);
    for (double& v : img.values) v = rng.uniform(0, 255);
    CHECK(rotate_bilinear(img, 0.0).values == img.values);
}

TEST_CASE("rotation by 90 degrees matches the index permutation") {
    // For a square image, the inverse map at 90 degrees sends destination
    // (row y, col x) to source (row n-1-x, col y) exactly (up to the epsilon
    // in cos(pi/2)).
    Rng rng(7);
    const int n = 11;
    PlanarImage img(1, n, n);
    for (double& v : img.values) v = rng.uniform(0, 255);

    const PlanarImage turned = rotate_bilinear(img, 90.0);
    // Skip the frame border: cos(pi/2) in doubles is ~6e-17, which pushes
    // border samples epsilon outside the frame where the 0 fill applies.
    for (int y = 1; y < n - 1; ++y)
        for (int x = 1; x < n - 1; ++x)
            CHECK(turned.at(0, y, x) ==
                  doctest::Approx(img.at(0, n - 1 - x, y)).epsilon(1e-9));
}

TEST_CASE("rotation round trip recovers centrally concentrated content") {
    // Smooth blob well inside the frame: rotating +17 then -17 degrees only
    // pays two bilinear resampling errors, so the interior must come back.
    const int n = 33;
    const PlanarImage img = gaussian_blob_image(n, 100.0, 8.0);
    const PlanarImage back = rotate_bilinear(rotate_bilinear(img, 17.0), -17.0);

    const double c = (n - 1) / 2.0;
    double max_diff = 0, sum_diff = 0;
    int count = 0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            if ((x - c) * (x - c) + (y - c) * (y - c) > (n / 3.0) * (n / 3.0)) continue;
            const double d = std::abs(back.at(0, y, x) - img.at(0, y, x));
            max_diff = std::max(max_diff, d);
            sum_diff += d;
            ++count;
        }
    REQUIRE(count > 100);
    CHECK(max_diff < 1.5);
    CHECK(sum_diff / count < 0.25);
}

TEST_CASE("augment_sample honors the no-op config and the draw order") {
    Rng fill(8);
    PlanarImage img(1, 16, 16);
    for (double& v : img.values) v = fill.uniform(0, 255);

    AugmentConfig off;
    off.hflip = false;
    off.max_rotate_deg = 0;
    Rng rng(123);
    CHECK(augment_sample(img, off, rng).values == img.values);

    // Flip decision is the first draw: predict it with a twin stream.
    AugmentConfig flip_only;
    flip_only.hflip = true;
    flip_only.max_rotate_deg = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Rng twin(seed);
        const bool expect_flip = twin.coin();
        Rng use(seed);
        const PlanarImage out = augment_sample(img, flip_only, use);
        CHECK(out.values == (expect_flip ? hflip(img) : img).values);
    }

    // With rotation enabled the angle is the second draw.
    AugmentConfig both;
    both.hflip = true;
    both.max_rotate_deg = 25.0;
    Rng twin(99);
    const bool expect_flip = twin.coin();
    const double angle = twin.uniform(-25.0, 25.0);
    Rng use(99);
    const PlanarImage got = augment_sample(img, both, use);
    const PlanarImage want = rotate_bilinear(expect_flip ? hflip(img) : img, angle);
    CHECK(got.values == want.values);
}

TEST_CASE("load_prepared is worker-count invariant and labels correctly") {
    const std::string dir = cxrtest::temp_dir("train_load");
    const Manifest m = generate_synthetic(6, 6, 32, 99, dir);
    REQUIRE(m.records.size() == 12);

    std::vector<int> idx;
    for (int i = 0; i < 12; ++i) idx.push_back(i);
    const PrepConfig prep = desk_prep(24);

    const PreparedDataset one = load_prepared(m, idx, Task::nodule_vs_nonnodule, prep, 1);
    const PreparedDataset three = load_prepared(m, idx, Task::nodule_vs_nonnodule, prep, 3);
    REQUIRE(one.samples.size() == 12);
    REQUIRE(three.samples.size() == 12);
    for (int i = 0; i < 12; ++i) {
        CHECK(one.samples[i].gray.values == three.samples[i].gray.values);
        CHECK(one.samples[i].label == three.samples[i].label);
        CHECK(one.samples[i].bit_depth == 8);
        CHECK(one.samples[i].label == label_of(m.records[i], Task::nodule_vs_nonnodule));
        CHECK(one.samples[i].gray.height == 24);
        CHECK(one.samples[i].gray.channels == 1);
    }
    const ClassCounts counts = one.counts();
    CHECK(counts.n_pos == 6);
    CHECK(counts.n_neg == 6);

    CHECK_THROWS_AS(load_prepared(m, {12}, Task::nodule_vs_nonnodule, prep, 1),
                    InvalidInputError);
    CHECK_THROWS_AS(load_prepared(m, {0}, Task::nodule_vs_nonnodule, prep, 0),
                    InvalidInputError);
}

TEST_CASE("batch_tensor stacks finalize_prepared outputs") {
    const std::string dir = cxrtest::temp_dir("train_batch");
    const Manifest m = generate_synthetic(2, 2, 24, 5, dir);
    std::vector<int> idx{0, 1, 2, 3};
    const PrepConfig prep = desk_prep(16);
    const PreparedDataset set = load_prepared(m, idx, Task::nodule_vs_nonnodule, prep, 1);

    const Tensor x = batch_tensor(set, {2, 0});
    REQUIRE(x.shape == std::vector<int>{2, 3, 16, 16});
    const PlanarImage want0 = finalize_prepared(set.samples[2].gray, 8, prep);
    const PlanarImage want1 = finalize_prepared(set.samples[0].gray, 8, prep);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int xx = 0; xx < 16; ++xx) {
                CHECK(x.at4(0, c, y, xx) == want0.at(c, y, xx));
                CHECK(x.at4(1, c, y, xx) == want1.at(c, y, xx));
            }
    CHECK_THROWS_AS(batch_tensor(set, {}), InvalidInputError);
}

namespace {

struct TinyFixture {
    Manifest manifest;
    PreparedDataset train_set;
    PreparedDataset val_set;
};

TinyFixture tiny_fixture(const std::string& name, int pos, int neg, int val_per_class,
                         int image_size, int target) {
    TinyFixture f;
    const std::string dir = cxrtest::temp_dir(name);
    f.manifest = generate_synthetic(pos, neg, image_size, 31337, dir);
    // Positives come first in the generated manifest; interleave the split so
    // both classes appear on both sides.
    std::vector<int> train_idx, val_idx;
    for (int i = 0; i < pos + neg; ++i) {
        const bool is_pos = i < pos;
        const int rank = is_pos ? i : i - pos;
        (rank < val_per_class ? val_idx : train_idx).push_back(i);
    }
    const PrepConfig prep = desk_prep(target);
    f.train_set = load_prepared(f.manifest, train_idx, Task::nodule_vs_nonnodule, prep, 2);
    f.val_set = load_prepared(f.manifest, val_idx, Task::nodule_vs_nonnodule, prep, 2);
    return f;
}

}  // namespace

TEST_CASE("train_stage overfits a small synthetic detection set") {
    TinyFixture f = tiny_fixture("train_overfit", 10, 10, 2, 32, 32);
    REQUIRE(f.train_set.samples.size() == 16);
    REQUIRE(f.val_set.samples.size() == 4);

    ClassifierModel model(desk_model(), 2024);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.lr = 1e-3;
    cfg.max_epochs = 40;
    cfg.early_stop_patience = 0;  // chase train accuracy, not the val stop
    cfg.augment.hflip = false;
    cfg.seed = 11;
    const TrainResult res = train_stage(model, f.train_set, f.val_set, cfg);

    REQUIRE(res.epochs.size() >= 2);
    CHECK(res.epochs.front().epoch == 0);
    CHECK(res.steps <= 80);
    CHECK(res.best_val_loss < res.epochs.front().val_loss);
    CHECK(res.epochs.back().train_accuracy >= 0.9);

    // The returned model must carry the best-epoch weights: re-evaluating the
    // validation loss reproduces best_val_loss exactly.
    const std::vector<double> probs = predict_probs(model, f.val_set);
    const double val_now = weighted_bce(probs, dataset_labels(f.val_set), res.class_weights);
    CHECK(val_now == doctest::Approx(res.best_val_loss).epsilon(1e-12));

    // Class weights reflect the (balanced) training split.
    CHECK(res.class_weights.w_pos == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("train_stage is deterministic in the seed and worker-invariant") {
    TinyFixture f = tiny_fixture("train_det", 4, 4, 1, 24, 24);

    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.max_epochs = 3;
    cfg.augment.hflip = true;
    cfg.augment.max_rotate_deg = 30.0;
    cfg.seed = 7;

    auto run = [&](int workers, std::uint64_t seed) {
        TrainConfig c = cfg;
        c.workers = workers;
        c.seed = seed;
        ClassifierModel model(desk_model(), 555);
        TrainResult r = train_stage(model, f.train_set, f.val_set, c);
        return std::make_pair(std::move(model), std::move(r));
    };

    auto [m1, r1] = run(1, 7);
    auto [m2, r2] = run(1, 7);
    auto [m3, r3] = run(3, 7);
    auto [m4, r4] = run(1, 8);

    REQUIRE(r1.epochs.size() == r2.epochs.size());
    for (std::size_t i = 0; i < r1.epochs.size(); ++i) {
        CHECK(r1.epochs[i].train_loss == r2.epochs[i].train_loss);
        CHECK(r1.epochs[i].val_loss == r2.epochs[i].val_loss);
    }
    CHECK(state_equal(m1, m2));

    // Worker count must not leak into the math.
    REQUIRE(r1.epochs.size() == r3.epochs.size());
    for (std::size_t i = 0; i < r1.epochs.size(); ++i) {
        CHECK(r1.epochs[i].train_loss == r3.epochs[i].train_loss);
        CHECK(r1.epochs[i].val_loss == r3.epochs[i].val_loss);
    }
    CHECK(state_equal(m1, m3));

    // A different seed must change the trajectory somewhere.
    bool any_diff = !state_equal(m1, m4);
    for (std::size_t i = 1; i < std::min(r1.epochs.size(), r4.epochs.size()); ++i)
        if (r1.epochs[i].train_loss != r4.epochs[i].train_loss) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("train_stage respects the optimizer step budget") {
    TinyFixture f = tiny_fixture("train_steps", 4, 4, 1, 24, 24);
    ClassifierModel model(desk_model(), 1);
    TrainConfig cfg;
    cfg.batch_size = 4;  // 6 train samples -> 2 steps per epoch
    cfg.max_epochs = 50;
    cfg.max_steps = 3;
    cfg.augment.hflip = false;
    const TrainResult res = train_stage(model, f.train_set, f.val_set, cfg);
    CHECK(res.steps == 3);
    CHECK(res.epochs.back().epoch <= 2);
}

TEST_CASE("train_stage with zero epochs returns the initial model as best") {
    TinyFixture f = tiny_fixture("train_zero", 3, 3, 1, 24, 24);
    ClassifierModel model(desk_model(), 42);
    ClassifierModel untouched(desk_model(), 42);

    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.max_epochs = 0;
    const TrainResult res = train_stage(model, f.train_set, f.val_set, cfg);
    CHECK(res.steps == 0);
    CHECK(res.best_epoch == 0);
    REQUIRE(res.epochs.size() == 1);
    CHECK(res.epochs[0].is_best);
    CHECK(state_equal(model, untouched));
}

TEST_CASE("train_stage restores the initial weights when training only hurts") {
    TinyFixture f = tiny_fixture("train_hurts", 3, 3, 1, 24, 24);
    ClassifierModel model(desk_model(), 42);
    ClassifierModel untouched(desk_model(), 42);

    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.lr = 50.0;  // blow up on purpose
    cfg.max_epochs = 4;
    cfg.early_stop_patience = 2;
    cfg.augment.hflip = false;
    const TrainResult res = train_stage(model, f.train_set, f.val_set, cfg);
    if (res.best_epoch == 0) {
        CHECK(state_equal(model, untouched));
        CHECK(res.epochs.size() <= 4);  // early stop fired before max_epochs+1
    }
}

TEST_CASE("train_stage rejects empty splits") {
    TinyFixture f = tiny_fixture("train_empty", 3, 3, 1, 24, 24);
    PreparedDataset empty;
    empty.prep = f.train_set.prep;
    ClassifierModel model(desk_model(), 3);
    TrainConfig cfg;
    CHECK_THROWS_AS(train_stage(model, empty, f.val_set, cfg), TrainingError);
    CHECK_THROWS_AS(train_stage(model, f.train_set, empty, cfg), TrainingError);
}

TEST_CASE("epoch log csv round trips through the csv reader") {
    TrainResult res;
    res.epochs.push_back({0, 0.5, 0.5, 0.6, 1e-3, true});
    res.epochs.push_back({1, 0.25, 0.875, 0.4, 1e-3, true});
    const std::string dir = cxrtest::temp_dir("train_log");
    const std::string path = dir + "/log.csv";
    write_epoch_log_csv(path, res);

    const CsvTable table = csv_read_file(path);
    REQUIRE(table.header.size() == 6);
    CHECK(table.header[0] == "epoch");
    CHECK(table.header[3] == "val_loss");
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[1][table.column("epoch")] == "1");
    CHECK(std::stod(table.rows[1][table.column("train_loss")]) == doctest::Approx(0.25));
    CHECK(table.rows[0][table.column("is_best")] == "1");
}
