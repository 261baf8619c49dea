// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "cxr/error.hpp"
#include "cxr/rng.hpp"

namespace cxr {

namespace {

using json = nlohmann::json;

struct Group {
    std::string key;
    std::vector<int> indices;
    int pos = 0, neg = 0;
};

std::vector<Group> build_groups(const Manifest& manifest, Task task, GroupingKey grouping) {
    std::map<std::string, Group> by_key;
    std::vector<std::string> order;
    for (int i = 0; i < static_cast<int>(manifest.records.size()); ++i) {
        const auto& rec = manifest.records[i];
        const std::string key =
            grouping == GroupingKey::patient ? rec.patient_id : std::to_string(i);
        auto [it, inserted] = by_key.try_emplace(key);
        if (inserted) {
            it->second.key = key;
            order.push_back(key);
        }
        it->second.indices.push_back(i);
        (label_of(rec, task) == 1 ? it->second.pos : it->second.neg) += 1;
    }
    std::vector<Group> groups;
    groups.reserve(order.size());
    for (const auto& key : order) groups.push_back(std::move(by_key[key]));
    return groups;
}

/// Largest-remainder apportionment of n into parts proportional to weights.
std::vector<long long> apportion(long long n, const std::vector<double>& weights) {
    double total = 0;
    for (double w : weights) {
        if (w < 0) throw InvalidInputError("split ratios must be non-negative");
        total += w;
    }
    if (!(total > 0)) throw InvalidInputError("split ratios must not all be zero");
    std::vector<long long> out(weights.size());
    std::vector<std::pair<double, std::size_t>> rema;
    long long assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = n * weights[i] / total;
        out[i] = static_cast<long long>(std::floor(exact));
        assigned += out[i];
        rema.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (long long r = n - assigned, i = 0; r > 0; --r, ++i) out[rema[i % rema.size()].second] += 1;
    return out;
}

void sort_indices(SplitSpec& s) {
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.validation.begin(), s.validation.end());
    std::sort(s.test.begin(), s.test.end());
}

}  // namespace

const char* to_string(GroupingKey g) { return g == GroupingKey::patient ? "patient" : "record"; }

GroupingKey grouping_from_string(const std::string& s) {
    if (s == "patient") return GroupingKey::patient;
    if (s == "record") return GroupingKey::record;
    throw ParseError("unrecognized grouping key: '" + s + "'");
}

SplitSizes SplitSizes::from_ratios(double train, double validation, double test) {
    SplitSizes s;
    s.mode = Mode::ratios;
    s.train = train;
    s.validation = validation;
    s.test = test;
    return s;
}

SplitSizes SplitSizes::balanced(int val_pos, int val_neg, int test_pos, int test_neg) {
    SplitSizes s;
    s.mode = Mode::balanced_counts;
    s.validation_pos = val_pos;
    s.validation_neg = val_neg;
    s.test_pos = test_pos;
    s.test_neg = test_neg;
    return s;
}

SplitSpec split_grouped(const Manifest& manifest, Task task, const SplitSizes& sizes,
                        GroupingKey grouping, std::uint64_t seed) {
    std::vector<Group> groups = build_groups(manifest, task, grouping);
    Rng rng(Rng::derive(seed, 0x5197));
    rng.shuffle(groups);

    SplitSpec out;
    out.grouping = grouping;
    out.seed = seed;

    if (sizes.mode == SplitSizes::Mode::ratios) {
        const long long n = static_cast<long long>(manifest.records.size());
        const auto targets = apportion(n, {sizes.train, sizes.validation, sizes.test});
        // Greedy fill: validation, then test, remainder to train. A group
        // that would overshoot a quota is passed along to the next bucket,
        // so with patient grouping the smaller buckets may undershoot by
        // less than one group; with record grouping the sizes are exact.
        long long need_val = targets[1], need_test = targets[2];
        for (const auto& g : groups) {
            const long long sz = static_cast<long long>(g.indices.size());
            if (sz <= need_val) {
                out.validation.insert(out.validation.end(), g.indices.begin(), g.indices.end());
                need_val -= sz;
            } else if (sz <= need_test) {
                out.test.insert(out.test.end(), g.indices.begin(), g.indices.end());
                need_test -= sz;
            } else {
                out.train.insert(out.train.end(), g.indices.begin(), g.indices.end());
            }
        }
    } else {
        long long val_pos = sizes.validation_pos, val_neg = sizes.validation_neg;
        long long test_pos = sizes.test_pos, test_neg = sizes.test_neg;
        for (const auto& g : groups) {
            if (g.pos <= val_pos && g.neg <= val_neg) {
                out.validation.insert(out.validation.end(), g.indices.begin(), g.indices.end());
                val_pos -= g.pos;
                val_neg -= g.neg;
            } else if (g.pos <= test_pos && g.neg <= test_neg) {
                out.test.insert(out.test.end(), g.indices.begin(), g.indices.end());
                test_pos -= g.pos;
                test_neg -= g.neg;
            } else {
                out.train.insert(out.train.end(), g.indices.begin(), g.indices.end());
            }
        }
        if (val_pos || val_neg || test_pos || test_neg) {
            const ClassCounts avail = class_counts(manifest, task);
            throw InvalidInputError(
                "balanced split quotas infeasible under " + std::string(to_string(grouping)) +
                " grouping: unmet validation (" + std::to_string(val_pos) + " pos, " +
                std::to_string(val_neg) + " neg) and test (" + std::to_string(test_pos) +
                " pos, " + std::to_string(test_neg) + " neg); manifest has " +
                std::to_string(avail.n_pos) + " pos / " + std::to_string(avail.n_neg) + " neg");
        }
    }
    sort_indices(out);
    return out;
}

FoldPlan make_folds(const Manifest& manifest, Task task, int k, std::uint64_t seed,
                    double train_ratio, double validation_ratio) {
    if (k < 2) throw InvalidInputError("fold count must be >= 2");
    const int n = static_cast<int>(manifest.records.size());
    if (k > n)
        throw InvalidInputError("fold count " + std::to_string(k) + " exceeds manifest size " +
                                std::to_string(n));

    // Stratified chunking: shuffle each class separately, deal contiguous
    // chunks (sizes differing by at most one) to the k folds.
    std::vector<int> pos, neg;
    for (int i = 0; i < n; ++i)
        (label_of(manifest.records[i], task) == 1 ? pos : neg).push_back(i);
    Rng rng(Rng::derive(seed, 0xf01d));
    rng.shuffle(pos);
    rng.shuffle(neg);

    std::vector<std::vector<int>> chunks(static_cast<std::size_t>(k));
    auto deal = [&](const std::vector<int>& cls) {
        const int base = static_cast<int>(cls.size()) / k;
        const int extra = static_cast<int>(cls.size()) % k;
        std::size_t at = 0;
        for (int f = 0; f < k; ++f) {
            const int take = base + (f < extra ? 1 : 0);
            for (int t = 0; t < take; ++t) chunks[f].push_back(cls[at++]);
        }
    };
    deal(pos);
    deal(neg);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    for (int f = 0; f < k; ++f) {
        SplitSpec split;
        split.grouping = GroupingKey::record;
        split.seed = seed;
        split.test = chunks[f];

        // Remainder split per class into train : validation.
        std::vector<int> rem_pos, rem_neg;
        for (int g = 0; g < k; ++g) {
            if (g == f) continue;
            for (int idx : chunks[g])
                (label_of(manifest.records[idx], task) == 1 ? rem_pos : rem_neg).push_back(idx);
        }
        Rng fold_rng(Rng::derive(seed, 0xa100 + static_cast<std::uint64_t>(f)));
        auto assign = [&](std::vector<int>& rem) {
            fold_rng.shuffle(rem);
            long long n_val = 0;
            if (rem.size() >= 2) {
                const double frac = validation_ratio / (train_ratio + validation_ratio);
                n_val = std::max<long long>(1, std::llround(frac * static_cast<double>(rem.size())));
            }
            for (std::size_t i = 0; i < rem.size(); ++i)
                (static_cast<long long>(i) < n_val ? split.validation : split.train).push_back(rem[i]);
        };
        assign(rem_pos);
        assign(rem_neg);
        sort_indices(split);
        plan.folds.push_back(std::move(split));
    }
    return plan;
}

ClassCounts class_counts(const Manifest& manifest, Task task) {
    ClassCounts c;
    for (const auto& rec : manifest.records) (label_of(rec, task) == 1 ? c.n_pos : c.n_neg) += 1;
    return c;
}

ClassCounts class_counts(const Manifest& manifest, const std::vector<int>& indices, Task task) {
    ClassCounts c;
    for (int i : indices) {
        if (i < 0 || i >= static_cast<int>(manifest.records.size()))
            throw InvalidInputError("split index " + std::to_string(i) + " out of manifest range");
        (label_of(manifest.records[i], task) == 1 ? c.n_pos : c.n_neg) += 1;
    }
    return c;
}

namespace {

json split_to_json(const SplitSpec& s) {
    return json{{"grouping", to_string(s.grouping)},
                {"seed", s.seed},
                {"train", s.train},
                {"validation", s.validation},
                {"test", s.test}};
}

SplitSpec split_from_json(const json& j) {
    SplitSpec s;
    s.grouping = grouping_from_string(j.at("grouping").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train = j.at("train").get<std::vector<int>>();
    s.validation = j.at("validation").get<std::vector<int>>();
    s.test = j.at("test").get<std::vector<int>>();
    return s;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON in ") + path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace

void save_split_json(const std::string& path, const SplitSpec& split) {
    write_json_file(path, split_to_json(split));
}

SplitSpec load_split_json(const std::string& path) { return split_from_json(load_json_file(path)); }

void save_folds_json(const std::string& path, const FoldPlan& plan) {
    json j{{"k", plan.k}, {"seed", plan.seed}};
    j["folds"] = json::array();
    for (const auto& f : plan.folds) j["folds"].push_back(split_to_json(f));
    write_json_file(path, j);
}

FoldPlan load_folds_json(const std::string& path) {
    const json j = load_json_file(path);
    FoldPlan plan;
    plan.k = j.at("k").get<int>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("folds")) plan.folds.push_back(split_from_json(f));
    return plan;
}

}  // namespace cxr
