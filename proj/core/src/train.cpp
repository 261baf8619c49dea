// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <numeric>
#include <thread>
#include <utility>

#include "cxr/csv.hpp"
#include "cxr/error.hpp"
#include "cxr/image_io.hpp"
#include "cxr/parallel.hpp"
#include "cxr/rng.hpp"
#include "cxr/schedule.hpp"

namespace cxr {
namespace {

// Stream ids for Rng::derive. Epoch shuffles live in a tagged band disjoint
// from the per-(epoch, sample) augmentation streams, whose ids are
// epoch << 32 | sample with epoch >= 1.
std::uint64_t shuffle_stream(int epoch) {
    return (0xABULL << 56) | static_cast<std::uint32_t>(epoch);
}

std::uint64_t augment_stream(int epoch, int sample) {
    return (static_cast<std::uint64_t>(epoch) << 32) | static_cast<std::uint32_t>(sample);
}

void copy_plane_into(Tensor& batch, int n, const PlanarImage& img) {
    const int c = img.channels, h = img.height, w = img.width;
    double* dst = batch.data.data() + static_cast<std::size_t>(n) * c * h * w;
    std::copy(img.values.begin(), img.values.end(), dst);
}

// Snapshot / restore of the full model state (parameters + BN buffers).
std::vector<Tensor> snapshot_state(ClassifierModel& model) {
    std::vector<Tensor> out;
    for (auto& [name, t] : model.named_state()) out.push_back(*t);
    return out;
}

void restore_state(ClassifierModel& model, const std::vector<Tensor>& snap) {
    auto state = model.named_state();
    for (std::size_t i = 0; i < state.size(); ++i) *state[i].second = snap[i];
}

}  // namespace

ClassCounts PreparedDataset::counts() const {
    ClassCounts c;
    for (const auto& s : samples) (s.label ? c.n_pos : c.n_neg)++;
    return c;
}

PreparedDataset load_prepared(const Manifest& manifest, const std::vector<int>& indices, Task task,
                              const PrepConfig& prep, int workers) {
    prep.validate();
    for (int idx : indices)
        if (idx < 0 || idx >= static_cast<int>(manifest.records.size()))
            throw InvalidInputError("sample index " + std::to_string(idx) +
                                    " out of range for manifest of " +
                                    std::to_string(manifest.records.size()));
    PreparedDataset out;
    out.prep = prep;
    out.samples.resize(indices.size());
    parallel_for(indices.size(), workers, [&](std::size_t i) {
        const SampleRecord& rec = manifest.records[static_cast<std::size_t>(indices[i])];
        const GrayImage img = load_gray_auto(rec.image_ref);
        PreparedSample s;
        s.bit_depth = img.bit_depth;
        s.gray = prepare_gray(img, prep);
        s.label = label_of(rec, task);
        out.samples[i] = std::move(s);
    });
    return out;
}

Tensor batch_tensor(const PreparedDataset& set, const std::vector<int>& indices) {
    if (indices.empty()) throw InvalidInputError("batch must be non-empty");
    const int n = static_cast<int>(indices.size());
    const int s = set.prep.target_size;
    Tensor x({n, 3, s, s});
    for (int i = 0; i < n; ++i) {
        const PreparedSample& smp = set.samples.at(static_cast<std::size_t>(indices[i]));
        copy_plane_into(x, i, finalize_prepared(smp.gray, smp.bit_depth, set.prep));
    }
    return x;
}

std::vector<int> dataset_labels(const PreparedDataset& set) {
    std::vector<int> labels;
    labels.reserve(set.samples.size());
    for (const auto& s : set.samples) labels.push_back(s.label);
    return labels;
}

std::vector<double> predict_probs(ClassifierModel& model, const PreparedDataset& set,
                                  int batch_size) {
    if (batch_size < 1) throw InvalidInputError("batch size must be >= 1");
    std::vector<double> probs;
    probs.reserve(set.samples.size());
    const int n = static_cast<int>(set.samples.size());
    for (int lo = 0; lo < n; lo += batch_size) {
        std::vector<int> idx;
        for (int i = lo; i < std::min(n, lo + batch_size); ++i) idx.push_back(i);
        const Tensor logits = model.forward(batch_tensor(set, idx), /*train=*/false);
        for (double z : logits.data) probs.push_back(sigmoid(z));
    }
    return probs;
}

namespace {

struct EvalResult {
    double loss = 0;
    double accuracy = 0;
};

EvalResult evaluate_set(ClassifierModel& model, const PreparedDataset& set, const ClassWeights& w,
                        int batch_size) {
    const std::vector<double> probs = predict_probs(model, set, batch_size);
    const std::vector<int> labels = dataset_labels(set);
    EvalResult r;
    r.loss = weighted_bce(probs, labels, w);
    long long correct = 0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        if ((probs[i] >= 0.5 ? 1 : 0) == labels[i]) ++correct;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(probs.size());
    return r;
}

}  // namespace

TrainResult train_stage(ClassifierModel& model, const PreparedDataset& train_set,
                        const PreparedDataset& val_set, const TrainConfig& cfg) {
    if (train_set.empty()) throw TrainingError("training split is empty");
    if (val_set.empty()) throw TrainingError("validation split is empty");
    if (cfg.batch_size < 1) throw InvalidInputError("batch size must be >= 1");
    if (cfg.max_epochs < 0) throw InvalidInputError("max_epochs must be >= 0");
    if (!(cfg.lr > 0)) throw InvalidInputError("learning rate must be positive");

    const ClassWeights w = compute_class_weights(train_set.counts());
    AdamOptimizer opt(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    PlateauSchedule sched(cfg.lr, cfg.plateau_factor, cfg.plateau_patience,
                          cfg.plateau_rel_threshold, cfg.min_lr);
    const std::vector<int> train_labels = dataset_labels(train_set);
    const int n_train = static_cast<int>(train_set.samples.size());

    TrainResult res;
    res.class_weights = w;

    // The untouched initial weights are the epoch-0 candidate: a run that
    // never beats them hands back the model it was given.
    const EvalResult train0 = evaluate_set(model, train_set, w, cfg.batch_size);
    const EvalResult val0 = evaluate_set(model, val_set, w, cfg.batch_size);
    res.best_val_loss = val0.loss;
    res.best_epoch = 0;
    std::vector<Tensor> best_state = snapshot_state(model);
    res.epochs.push_back({0, train0.loss, train0.accuracy, val0.loss, cfg.lr, true});

    int epochs_since_best = 0;
    bool out_of_steps = false;
    for (int epoch = 1; epoch <= cfg.max_epochs && !out_of_steps; ++epoch) {
        std::vector<int> perm(static_cast<std::size_t>(n_train));
        std::iota(perm.begin(), perm.end(), 0);
        Rng shuffle_rng(Rng::derive(cfg.seed, shuffle_stream(epoch)));
        shuffle_rng.shuffle(perm);

        double loss_weighted_sum = 0;
        long long seen = 0, correct = 0;
        for (int lo = 0; lo < n_train; lo += cfg.batch_size) {
            if (cfg.max_steps > 0 && res.steps >= cfg.max_steps) {
                out_of_steps = true;
                break;
            }
            const int hi = std::min(n_train, lo + cfg.batch_size);
            const int bn = hi - lo;
            const int s = train_set.prep.target_size;
            Tensor x({bn, 3, s, s});
            std::vector<int> labels(static_cast<std::size_t>(bn));
            parallel_for(static_cast<std::size_t>(bn), cfg.workers, [&](std::size_t i) {
                const int idx = perm[static_cast<std::size_t>(lo) + i];
                const PreparedSample& smp = train_set.samples[static_cast<std::size_t>(idx)];
                Rng aug_rng(Rng::derive(cfg.seed, augment_stream(epoch, idx)));
                const PlanarImage aug = augment_sample(smp.gray, cfg.augment, aug_rng);
                copy_plane_into(x, static_cast<int>(i), finalize_prepared(aug, smp.bit_depth,
                                                                          train_set.prep));
                labels[i] = smp.label;
            });

            const Tensor logits = model.forward(x, /*train=*/true);
            std::vector<double> dlogits;
            const double loss =
                weighted_bce_from_logits(logits.data, labels, w, &dlogits);
            if (!std::isfinite(loss))
                throw TrainingError("training loss is not finite at step " +
                                    std::to_string(res.steps + 1));
            opt.zero_grad();
            Tensor dl({bn});
            dl.data = dlogits;
            model.backward(dl);
            opt.step();
            ++res.steps;

            loss_weighted_sum += loss * bn;
            seen += bn;
            for (int i = 0; i < bn; ++i)
                if ((sigmoid(logits.data[static_cast<std::size_t>(i)]) >= 0.5 ? 1 : 0) ==
                    labels[static_cast<std::size_t>(i)])
                    ++correct;
        }
        if (seen == 0) break;  // step budget hit exactly at an epoch boundary

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_weighted_sum / static_cast<double>(seen);
        log.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
        log.val_loss = evaluate_set(model, val_set, w, cfg.batch_size).loss;

        sched.observe(log.val_loss);
        opt.set_lr(sched.lr());
        log.lr = sched.lr();

        log.is_best = log.val_loss < res.best_val_loss;
        if (log.is_best) {
            res.best_val_loss = log.val_loss;
            res.best_epoch = epoch;
            best_state = snapshot_state(model);
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
        }
        res.epochs.push_back(log);
        if (cfg.early_stop_patience > 0 && epochs_since_best >= cfg.early_stop_patience) break;
    }

    restore_state(model, best_state);
    return res;
}

void write_epoch_log_csv(const std::string& path, const TrainResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write epoch log: " + path);
    out << "epoch,train_loss,train_accuracy,val_loss,lr,is_best\n";
    out.precision(17);
    for (const auto& e : result.epochs) {
        out << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ',' << e.val_loss
            << ',' << e.lr << ',' << (e.is_best ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("cannot write epoch log: " + path);
}

}  // namespace cxr
