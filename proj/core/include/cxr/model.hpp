// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cxr/nn.hpp"
#include "cxr/tensor.hpp"

namespace cxr {

enum class BackboneKind { desk_tiny, dense121 };

const char* to_string(BackboneKind k);
BackboneKind backbone_from_string(const std::string& s);

/// Densely connected backbone geometry. Defaults give the standard 121-layer
/// arrangement; tests shrink it to exercise the same code path cheaply.
struct DenseNetConfig {
    int stem_channels = 64;
    int growth = 32;
    int bn_size = 4;
    std::vector<int> block_layers = {6, 12, 24, 16};
    double compression = 0.5;
};

/// Three conv/BN/ReLU blocks; the first two are followed by 2x2 average
/// pooling, the third keeps its resolution so the class activation map
/// retains some spatial detail at desk-scale inputs.
struct DeskTinyConfig {
    std::vector<int> widths = {8, 16, 32};
};

struct ModelConfig {
    BackboneKind kind = BackboneKind::desk_tiny;
    int in_channels = 3;
    DenseNetConfig densenet;
    DeskTinyConfig desk;
};

struct ForwardResult {
    Tensor logits;    // [N]
    Tensor features;  // [N,K,h,w], the map feeding global average pooling
    Tensor pooled;    // [N,K]
};

/// Backbone + global-average-pool + single-logit linear head. One sigmoid
/// unit; the sigmoid itself lives in the loss/eval layers so the model
/// exposes raw logits.
class ClassifierModel {
 public:
    ClassifierModel(const ModelConfig& cfg, std::uint64_t init_seed);
    ~ClassifierModel();
    ClassifierModel(ClassifierModel&&) noexcept;
    ClassifierModel& operator=(ClassifierModel&&) noexcept;
    ClassifierModel(const ClassifierModel&) = delete;
    ClassifierModel& operator=(const ClassifierModel&) = delete;

    /// [N,C,S,S] -> logits [N]. train=true retains backward caches.
    Tensor forward(const Tensor& x, bool train);

    /// Inference pass that additionally returns the final feature map and
    /// pooled vector (the ingredients of the class activation map).
    ForwardResult forward_detail(const Tensor& x);

    /// Backpropagate d(loss)/d(logit) for the batch of the last training
    /// forward; accumulates into parameter gradients.
    void backward(const Tensor& dlogits);

    std::vector<Parameter*> parameters();
    /// Parameters plus batch-norm running statistics, in a stable order.
    std::vector<std::pair<std::string, Tensor*>> named_state();
    void zero_grad();

    const ModelConfig& config() const { return cfg_; }
    int feature_channels() const;
    std::vector<double> head_weights() const;  // [K], the CAM weights
    double head_bias() const;

    /// Copy all state (parameters and buffers) from another instance with an
    /// identical architecture.
    void copy_state_from(const ClassifierModel& other);

    long long parameter_count();

 private:
    struct Impl;
    ModelConfig cfg_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace cxr
