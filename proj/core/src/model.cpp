// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/model.hpp"

#include <algorithm>
#include <cmath>

#include "cxr/error.hpp"

namespace cxr {

const char* to_string(BackboneKind k) {
    return k == BackboneKind::dense121 ? "dense121" : "desk_tiny";
}

BackboneKind backbone_from_string(const std::string& s) {
    if (s == "desk_tiny") return BackboneKind::desk_tiny;
    if (s == "dense121") return BackboneKind::dense121;
    throw ParseError("unrecognized backbone: '" + s + "'");
}

namespace {

// One densely connected layer: BN-ReLU-Conv1x1 bottleneck, BN-ReLU-Conv3x3
// producing `growth` new channels.
struct DenseLayer {
    BatchNorm2d norm1;
    ReLU relu1;
    Conv2d conv1;
    BatchNorm2d norm2;
    ReLU relu2;
    Conv2d conv2;

    DenseLayer(const std::string& prefix, int in_ch, int growth, int bn_size)
        : norm1(prefix + ".norm1", in_ch),
          conv1(prefix + ".conv1", in_ch, bn_size * growth, 1, 1, 0, false),
          norm2(prefix + ".norm2", bn_size * growth),
          conv2(prefix + ".conv2", bn_size * growth, growth, 3, 1, 1, false) {}

    Tensor forward(const Tensor& x, bool train) {
        Tensor t = norm1.forward(x, train);
        t = relu1.forward(t, train);
        t = conv1.forward(t, train);
        t = norm2.forward(t, train);
        t = relu2.forward(t, train);
        return conv2.forward(t, train);
    }

    Tensor backward(const Tensor& dy) {
        Tensor d = conv2.backward(dy);
        d = relu2.backward(d);
        d = norm2.backward(d);
        d = conv1.backward(d);
        d = relu1.backward(d);
        return norm1.backward(d);
    }

    void collect(std::vector<Parameter*>& out) {
        norm1.collect(out);
        conv1.collect(out);
        norm2.collect(out);
        conv2.collect(out);
    }
};

struct DenseBlock {
    std::vector<DenseLayer> layers;
    std::vector<int> widths;    // input width then one growth per layer
    int out_channels = 0;

    DenseBlock(const std::string& prefix, int in_ch, int n_layers, int growth, int bn_size) {
        int ch = in_ch;
        widths.push_back(in_ch);
        for (int j = 0; j < n_layers; ++j) {
            layers.emplace_back(prefix + ".denselayer" + std::to_string(j + 1), ch, growth, bn_size);
            ch += growth;
            widths.push_back(growth);
        }
        out_channels = ch;
    }

    Tensor forward(const Tensor& x, bool train) {
        std::vector<Tensor> xs;
        xs.push_back(x);
        for (auto& layer : layers) {
            std::vector<const Tensor*> parts;
            for (const Tensor& t : xs) parts.push_back(&t);
            Tensor in = concat_channels(parts);
            xs.push_back(layer.forward(in, train));
        }
        std::vector<const Tensor*> parts;
        for (const Tensor& t : xs) parts.push_back(&t);
        return concat_channels(parts);
    }

    Tensor backward(const Tensor& d_out) {
        // Split the output gradient into the concat slices, then run the
        // layers in reverse, each adding its share to the earlier slices.
        std::vector<Tensor> d_xs = split_channels(d_out, widths);
        for (std::size_t j = layers.size(); j-- > 0;) {
            const Tensor d_in = layers[j].backward(d_xs[j + 1]);
            const std::vector<int> in_widths(widths.begin(), widths.begin() + j + 1);
            std::vector<Tensor> shares = split_channels(d_in, in_widths);
            for (std::size_t t = 0; t <= j; ++t)
                for (std::size_t i = 0; i < shares[t].data.size(); ++i)
                    d_xs[t].data[i] += shares[t].data[i];
        }
        return std::move(d_xs[0]);
    }

    void collect(std::vector<Parameter*>& out) {
        for (auto& layer : layers) layer.collect(out);
    }
};

struct Transition {
    BatchNorm2d norm;
    ReLU relu;
    Conv2d conv;
    AvgPool2d pool{2, 2};
    int out_channels;

    Transition(const std::string& prefix, int in_ch, double compression)
        : norm(prefix + ".norm", in_ch),
          conv(prefix + ".conv", in_ch,
               std::max(1, static_cast<int>(std::floor(in_ch * compression))), 1, 1, 0, false),
          out_channels(std::max(1, static_cast<int>(std::floor(in_ch * compression)))) {}

    Tensor forward(const Tensor& x, bool train) {
        Tensor t = norm.forward(x, train);
        t = relu.forward(t, train);
        t = conv.forward(t, train);
        return pool.forward(t, train);
    }

    Tensor backward(const Tensor& dy) {
        Tensor d = pool.backward(dy);
        d = conv.backward(d);
        d = relu.backward(d);
        return norm.backward(d);
    }

    void collect(std::vector<Parameter*>& out) {
        norm.collect(out);
        conv.collect(out);
    }
};

struct DeskBlock {
    Conv2d conv;
    BatchNorm2d norm;
    ReLU relu;
    bool pooled;
    AvgPool2d pool{2, 2};

    DeskBlock(const std::string& prefix, int in_ch, int out_ch, bool with_pool)
        : conv(prefix + ".conv", in_ch, out_ch, 3, 1, 1, false),
          norm(prefix + ".norm", out_ch),
          pooled(with_pool) {}

    Tensor forward(const Tensor& x, bool train) {
        Tensor t = conv.forward(x, train);
        t = norm.forward(t, train);
        t = relu.forward(t, train);
        return pooled ? pool.forward(t, train) : std::move(t);
    }

    Tensor backward(const Tensor& dy) {
        Tensor d = pooled ? pool.backward(dy) : dy;
        d = relu.backward(d);
        d = norm.backward(d);
        return conv.backward(d);
    }

    void collect(std::vector<Parameter*>& out) {
        conv.collect(out);
        norm.collect(out);
    }
};

}  // namespace

struct ClassifierModel::Impl {
    // densenet pieces (empty for desk_tiny)
    std::unique_ptr<Conv2d> conv0;
    std::unique_ptr<BatchNorm2d> norm0;
    ReLU relu0;
    std::unique_ptr<MaxPool2d> pool0;
    std::vector<DenseBlock> dense_blocks;
    std::vector<Transition> transitions;
    std::unique_ptr<BatchNorm2d> norm5;
    ReLU relu5;

    // desk_tiny pieces
    std::vector<DeskBlock> desk_blocks;

    // shared tail
    GlobalAvgPool gap;
    std::unique_ptr<Linear> classifier;
    int feature_channels = 0;
};

ClassifierModel::ClassifierModel(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg), impl_(std::make_unique<Impl>()) {
    if (cfg.in_channels < 1) throw InvalidInputError("in_channels must be positive");
    Rng rng(Rng::derive(init_seed, 0x10de1));

    if (cfg.kind == BackboneKind::desk_tiny) {
        if (cfg.desk.widths.empty()) throw InvalidInputError("desk_tiny needs at least one block");
        int ch = cfg.in_channels;
        for (std::size_t i = 0; i < cfg.desk.widths.size(); ++i) {
            const bool with_pool = i + 1 < cfg.desk.widths.size();
            impl_->desk_blocks.emplace_back("blocks." + std::to_string(i), ch, cfg.desk.widths[i],
                                            with_pool);
            ch = cfg.desk.widths[i];
        }
        impl_->feature_channels = ch;
    } else {
        const DenseNetConfig& d = cfg.densenet;
        if (d.block_layers.empty()) throw InvalidInputError("densenet needs at least one block");
        if (d.growth < 1 || d.bn_size < 1 || d.stem_channels < 1 || d.compression <= 0 ||
            d.compression > 1)
            throw InvalidInputError("bad densenet configuration");
        impl_->conv0 =
            std::make_unique<Conv2d>("features.conv0", cfg.in_channels, d.stem_channels, 7, 2, 3,
                                     false);
        impl_->norm0 = std::make_unique<BatchNorm2d>("features.norm0", d.stem_channels);
        impl_->pool0 = std::make_unique<MaxPool2d>(3, 2, 1);
        int ch = d.stem_channels;
        for (std::size_t i = 0; i < d.block_layers.size(); ++i) {
            impl_->dense_blocks.emplace_back("features.denseblock" + std::to_string(i + 1), ch,
                                             d.block_layers[i], d.growth, d.bn_size);
            ch = impl_->dense_blocks.back().out_channels;
            if (i + 1 < d.block_layers.size()) {
                impl_->transitions.emplace_back("features.transition" + std::to_string(i + 1), ch,
                                                d.compression);
                ch = impl_->transitions.back().out_channels;
            }
        }
        impl_->norm5 = std::make_unique<BatchNorm2d>("features.norm5", ch);
        impl_->feature_channels = ch;
    }
    impl_->classifier = std::make_unique<Linear>("classifier", impl_->feature_channels, 1);

    if (cfg.kind == BackboneKind::desk_tiny) {
        for (auto& b : impl_->desk_blocks) b.conv.init_default(rng);
    } else {
        impl_->conv0->init_default(rng);
        for (auto& blk : impl_->dense_blocks)
            for (auto& l : blk.layers) {
                l.conv1.init_default(rng);
                l.conv2.init_default(rng);
            }
        for (auto& t : impl_->transitions) t.conv.init_default(rng);
    }
    impl_->classifier->init_default(rng);
}

ClassifierModel::~ClassifierModel() = default;
ClassifierModel::ClassifierModel(ClassifierModel&&) noexcept = default;
ClassifierModel& ClassifierModel::operator=(ClassifierModel&&) noexcept = default;

namespace {

Tensor squeeze_logits(Tensor t) {
    // [N,1] -> [N]
    t.shape = {t.dim(0)};
    return t;
}

}  // namespace

Tensor ClassifierModel::forward(const Tensor& x, bool train) {
    if (x.shape.size() != 4 || x.dim(1) != cfg_.in_channels)
        throw InvalidInputError("model expects [N," + std::to_string(cfg_.in_channels) +
                                ",H,W], got " + x.shape_str());
    Tensor t = x;
    if (cfg_.kind == BackboneKind::desk_tiny) {
        for (auto& b : impl_->desk_blocks) t = b.forward(t, train);
    } else {
        t = impl_->conv0->forward(t, train);
        t = impl_->norm0->forward(t, train);
        t = impl_->relu0.forward(t, train);
        t = impl_->pool0->forward(t, train);
        for (std::size_t i = 0; i < impl_->dense_blocks.size(); ++i) {
            t = impl_->dense_blocks[i].forward(t, train);
            if (i < impl_->transitions.size()) t = impl_->transitions[i].forward(t, train);
        }
        t = impl_->norm5->forward(t, train);
        t = impl_->relu5.forward(t, train);
    }
    t = impl_->gap.forward(t, train);
    return squeeze_logits(impl_->classifier->forward(t, train));
}

ForwardResult ClassifierModel::forward_detail(const Tensor& x) {
    if (x.shape.size() != 4 || x.dim(1) != cfg_.in_channels)
        throw InvalidInputError("model expects [N," + std::to_string(cfg_.in_channels) +
                                ",H,W], got " + x.shape_str());
    Tensor t = x;
    if (cfg_.kind == BackboneKind::desk_tiny) {
        for (auto& b : impl_->desk_blocks) t = b.forward(t, false);
    } else {
        t = impl_->conv0->forward(t, false);
        t = impl_->norm0->forward(t, false);
        t = impl_->relu0.forward(t, false);
        t = impl_->pool0->forward(t, false);
        for (std::size_t i = 0; i < impl_->dense_blocks.size(); ++i) {
            t = impl_->dense_blocks[i].forward(t, false);
            if (i < impl_->transitions.size()) t = impl_->transitions[i].forward(t, false);
        }
        t = impl_->norm5->forward(t, false);
        t = impl_->relu5.forward(t, false);
    }
    ForwardResult r;
    r.features = t;
    r.pooled = impl_->gap.forward(t, false);
    r.logits = squeeze_logits(impl_->classifier->forward(r.pooled, false));
    return r;
}

void ClassifierModel::backward(const Tensor& dlogits) {
    if (dlogits.shape.size() != 1)
        throw InvalidInputError("backward expects [N] logit gradients, got " + dlogits.shape_str());
    Tensor d = dlogits;
    d.shape = {d.dim(0), 1};
    d = impl_->classifier->backward(d);
    d = impl_->gap.backward(d);
    if (cfg_.kind == BackboneKind::desk_tiny) {
        for (std::size_t i = impl_->desk_blocks.size(); i-- > 0;)
            d = impl_->desk_blocks[i].backward(d);
    } else {
        d = impl_->relu5.backward(d);
        d = impl_->norm5->backward(d);
        for (std::size_t i = impl_->dense_blocks.size(); i-- > 0;) {
            if (i < impl_->transitions.size()) d = impl_->transitions[i].backward(d);
            d = impl_->dense_blocks[i].backward(d);
        }
        d = impl_->pool0->backward(d);
        d = impl_->relu0.backward(d);
        d = impl_->norm0->backward(d);
        d = impl_->conv0->backward(d);
    }
}

std::vector<Parameter*> ClassifierModel::parameters() {
    std::vector<Parameter*> out;
    if (cfg_.kind == BackboneKind::desk_tiny) {
        for (auto& b : impl_->desk_blocks) b.collect(out);
    } else {
        impl_->conv0->collect(out);
        impl_->norm0->collect(out);
        for (std::size_t i = 0; i < impl_->dense_blocks.size(); ++i) {
            impl_->dense_blocks[i].collect(out);
            if (i < impl_->transitions.size()) impl_->transitions[i].collect(out);
        }
        impl_->norm5->collect(out);
    }
    impl_->classifier->collect(out);
    return out;
}

std::vector<std::pair<std::string, Tensor*>> ClassifierModel::named_state() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (Parameter* p : parameters()) out.emplace_back(p->name, &p->value);

    auto add_bn = [&out](BatchNorm2d& bn) {
        const std::string base = bn.weight.name.substr(0, bn.weight.name.size() - 7);
        out.emplace_back(base + ".running_mean", &bn.running_mean);
        out.emplace_back(base + ".running_var", &bn.running_var);
    };
    if (cfg_.kind == BackboneKind::desk_tiny) {
        for (auto& b : impl_->desk_blocks) add_bn(b.norm);
    } else {
        add_bn(*impl_->norm0);
        for (std::size_t i = 0; i < impl_->dense_blocks.size(); ++i) {
            for (auto& l : impl_->dense_blocks[i].layers) {
                add_bn(l.norm1);
                add_bn(l.norm2);
            }
            if (i < impl_->transitions.size()) add_bn(impl_->transitions[i].norm);
        }
        add_bn(*impl_->norm5);
    }
    return out;
}

void ClassifierModel::zero_grad() {
    for (Parameter* p : parameters()) p->zero_grad();
}

int ClassifierModel::feature_channels() const { return impl_->feature_channels; }

std::vector<double> ClassifierModel::head_weights() const {
    return impl_->classifier->weight.value.data;
}

double ClassifierModel::head_bias() const { return impl_->classifier->bias.value.data[0]; }

void ClassifierModel::copy_state_from(const ClassifierModel& other) {
    auto dst = named_state();
    auto src = const_cast<ClassifierModel&>(other).named_state();
    if (dst.size() != src.size())
        throw InvalidInputError("copy_state_from: architectures differ in state entry count");
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (dst[i].first != src[i].first || !dst[i].second->same_shape(*src[i].second))
            throw InvalidInputError("copy_state_from: mismatch at '" + dst[i].first + "'");
        dst[i].second->data = src[i].second->data;
    }
}

long long ClassifierModel::parameter_count() {
    long long n = 0;
    for (Parameter* p : parameters()) n += p->value.numel();
    return n;
}

}  // namespace cxr
