// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "config_json.hpp"
#include "cxr/error.hpp"
#include "cxr/hash.hpp"

namespace cxr {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'C', 'X', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr int kFormatVersion = 1;

static_assert(sizeof(double) == 8, "checkpoint format assumes 8-byte doubles");

std::string hash_state(const std::vector<std::pair<std::string, Tensor*>>& state) {
    Sha256Stream sha;
    for (const auto& [name, tensor] : state) {
        (void)name;
        sha.update(tensor->data.data(), tensor->data.size() * sizeof(double));
    }
    return sha.hex();
}

json meta_to_json(const CheckpointMeta& meta) {
    return {{"task", meta.task},
            {"stage", meta.stage},
            {"fold", meta.fold},
            {"parent_hash", meta.parent_hash},
            {"prep", prep_config_to_json(meta.prep)}};
}

CheckpointMeta meta_from_json(const json& j) {
    CheckpointMeta meta;
    meta.task = j.at("task").get<std::string>();
    meta.stage = j.at("stage").get<std::string>();
    meta.fold = j.at("fold").get<int>();
    meta.parent_hash = j.at("parent_hash").get<std::string>();
    meta.prep = prep_config_from_json(j.at("prep"));
    return meta;
}

struct RawCheckpoint {
    json header;
    std::vector<double> payload;
};

RawCheckpoint read_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError("not a checkpoint file (bad magic): " + path);

    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), 8);
    if (!in || header_len == 0 || header_len > (1ull << 30))
        throw ParseError("corrupt checkpoint header length: " + path);

    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw ParseError("truncated checkpoint header: " + path);

    RawCheckpoint raw;
    try {
        raw.header = json::parse(header_text);
    } catch (const json::parse_error& e) {
        throw ParseError("invalid checkpoint header JSON in " + path + ": " + e.what());
    }
    if (raw.header.value("format_version", -1) != kFormatVersion)
        throw ParseError("unsupported checkpoint format version in " + path);

    std::uint64_t total = 0;
    for (const auto& t : raw.header.at("tensors")) total += t.at("count").get<std::uint64_t>();
    raw.payload.resize(total);
    in.read(reinterpret_cast<char*>(raw.payload.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw ParseError("truncated checkpoint payload: " + path);

    Sha256Stream sha;
    sha.update(raw.payload.data(), raw.payload.size() * sizeof(double));
    const std::string actual = sha.hex();
    const std::string recorded = raw.header.at("param_hash").get<std::string>();
    if (actual != recorded)
        throw ParseError("checkpoint payload hash mismatch in " + path +
                         " (file is corrupt): expected " + recorded + ", got " + actual);
    return raw;
}

void fill_model_from_raw(const RawCheckpoint& raw, ClassifierModel& model,
                         const std::string& path) {
    auto state = model.named_state();
    std::size_t cursor = 0, entry = 0;
    const auto& tensors = raw.header.at("tensors");
    if (tensors.size() != state.size())
        throw ParseError("checkpoint " + path + " stores " + std::to_string(tensors.size()) +
                         " tensors, model has " + std::to_string(state.size()));
    for (const auto& t : tensors) {
        const std::string name = t.at("name").get<std::string>();
        const auto shape = t.at("shape").get<std::vector<int>>();
        const std::uint64_t count = t.at("count").get<std::uint64_t>();
        auto& [want_name, tensor] = state[entry++];
        if (name != want_name)
            throw ParseError("checkpoint tensor order mismatch in " + path + ": stored '" + name +
                             "', model expects '" + want_name + "'");
        if (shape != tensor->shape)
            throw ParseError("shape mismatch for tensor '" + name + "' in " + path + ": stored " +
                             Tensor(shape).shape_str() + ", model has " + tensor->shape_str());
        if (count != tensor->data.size())
            throw ParseError("count mismatch for tensor '" + name + "' in " + path);
        std::copy(raw.payload.begin() + static_cast<std::ptrdiff_t>(cursor),
                  raw.payload.begin() + static_cast<std::ptrdiff_t>(cursor + count),
                  tensor->data.begin());
        cursor += count;
    }
}

}  // namespace

std::string param_hash(ClassifierModel& model) { return hash_state(model.named_state()); }

void save_checkpoint(const std::string& path, ClassifierModel& model, const CheckpointMeta& meta) {
    auto state = model.named_state();

    json header{{"format_version", kFormatVersion},
                {"model", model_config_to_json(model.config())},
                {"meta", meta_to_json(meta)},
                {"param_hash", hash_state(state)}};
    header["tensors"] = json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : state) {
        header["tensors"].push_back({{"name", name},
                                     {"shape", tensor->shape},
                                     {"offset", offset},
                                     {"count", tensor->data.size()}});
        offset += tensor->data.size();
    }
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    const std::uint64_t header_len = header_text.size();
    out.write(reinterpret_cast<const char*>(&header_len), 8);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, tensor] : state) {
        (void)name;
        out.write(reinterpret_cast<const char*>(tensor->data.data()),
                  static_cast<std::streamsize>(tensor->data.size() * sizeof(double)));
    }
    if (!out) throw IoError("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    const RawCheckpoint raw = read_raw(path);
    LoadedCheckpoint loaded;
    loaded.config = model_config_from_json(raw.header.at("model"));
    loaded.meta = meta_from_json(raw.header.at("meta"));
    loaded.param_hash = raw.header.at("param_hash").get<std::string>();
    loaded.model = std::make_unique<ClassifierModel>(loaded.config, 0);
    fill_model_from_raw(raw, *loaded.model, path);
    return loaded;
}

CheckpointMeta load_checkpoint_into(const std::string& path, ClassifierModel& model) {
    const RawCheckpoint raw = read_raw(path);
    const json want = model_config_to_json(model.config());
    if (raw.header.at("model") != want)
        throw InvalidInputError("checkpoint " + path + " holds architecture " +
                                raw.header.at("model").dump() + ", model is " + want.dump());
    fill_model_from_raw(raw, model, path);
    return meta_from_json(raw.header.at("meta"));
}

}  // namespace cxr
