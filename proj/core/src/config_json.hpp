// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Internal JSON (de)serialization for config structs, shared by the
// checkpoint and experiment translation units.

#include <json.hpp>

#include "cxr/imgprep.hpp"
#include "cxr/model.hpp"

namespace cxr {

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j{{"kind", to_string(cfg.kind)}, {"in_channels", cfg.in_channels}};
    if (cfg.kind == BackboneKind::dense121) {
        j["densenet"] = {{"stem_channels", cfg.densenet.stem_channels},
                         {"growth", cfg.densenet.growth},
                         {"bn_size", cfg.densenet.bn_size},
                         {"block_layers", cfg.densenet.block_layers},
                         {"compression", cfg.densenet.compression}};
    } else {
        j["desk"] = {{"widths", cfg.desk.widths}};
    }
    return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.kind = backbone_from_string(j.at("kind").get<std::string>());
    cfg.in_channels = j.at("in_channels").get<int>();
    if (cfg.kind == BackboneKind::dense121 && j.contains("densenet")) {
        const auto& d = j.at("densenet");
        cfg.densenet.stem_channels = d.at("stem_channels").get<int>();
        cfg.densenet.growth = d.at("growth").get<int>();
        cfg.densenet.bn_size = d.at("bn_size").get<int>();
        cfg.densenet.block_layers = d.at("block_layers").get<std::vector<int>>();
        cfg.densenet.compression = d.at("compression").get<double>();
    }
    if (cfg.kind == BackboneKind::desk_tiny && j.contains("desk"))
        cfg.desk.widths = j.at("desk").at("widths").get<std::vector<int>>();
    return cfg;
}

inline nlohmann::json prep_config_to_json(const PrepConfig& cfg) {
    return {{"target_size", cfg.target_size},
            {"median_window", cfg.median_window},
            {"channel_means", cfg.channel_means},
            {"channel_stds", cfg.channel_stds}};
}

inline PrepConfig prep_config_from_json(const nlohmann::json& j) {
    PrepConfig cfg;
    cfg.target_size = j.at("target_size").get<int>();
    cfg.median_window = j.at("median_window").get<int>();
    const auto means = j.at("channel_means").get<std::vector<double>>();
    const auto stds = j.at("channel_stds").get<std::vector<double>>();
    if (means.size() != 3 || stds.size() != 3)
        throw ParseError("channel_means/channel_stds must have three entries");
    std::copy(means.begin(), means.end(), cfg.channel_means.begin());
    std::copy(stds.begin(), stds.end(), cfg.channel_stds.begin());
    cfg.validate();
    return cfg;
}

}  // namespace cxr
