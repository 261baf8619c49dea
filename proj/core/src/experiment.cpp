// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <utility>

#include <json.hpp>

#include "config_json.hpp"
#include "cxr/checkpoint.hpp"
#include "cxr/error.hpp"
#include "cxr/hash.hpp"
#include "cxr/loss.hpp"
#include "cxr/rng.hpp"
#include "cxr/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cxr {
namespace {

// Independent derive streams for everything randomized in a run.
constexpr std::uint64_t kStreamBaseInit = 0xBA5E;
constexpr std::uint64_t kStreamSplitA = 0x5704;
constexpr std::uint64_t kStreamFolds = 0xF01D;
constexpr std::uint64_t kStreamSynthA = 0x5A;
constexpr std::uint64_t kStreamSynthBc = 0x5B;
constexpr std::uint64_t kStreamTrainA = 0x7A;
constexpr std::uint64_t kStreamTrainB = 0x7B000000;  // + fold
constexpr std::uint64_t kStreamTrainC = 0x7C000000;  // + fold

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& scope) {
    if (!j.is_object()) throw ParseError("config section '" + scope + "' must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (allowed.find(it.key()) == allowed.end())
            throw ParseError("unknown config key \"" + it.key() + "\" in " + scope);
}

json data_source_to_json(const DataSourceConfig& ds) {
    json j{{"kind", ds.kind}};
    if (ds.kind == "jsrt" || ds.kind == "chestxray14") {
        j["root"] = ds.root;
        j["metadata"] = ds.metadata;
    } else if (ds.kind == "manifest") {
        j["metadata"] = ds.metadata;
    } else if (ds.kind == "synthetic") {
        j["n_pos"] = ds.n_pos;
        j["n_neg"] = ds.n_neg;
        j["image_size"] = ds.image_size;
    } else if (ds.kind == "synthetic_graded") {
        j["n_malignant"] = ds.n_malignant;
        j["n_benign"] = ds.n_benign;
        j["n_nonnodule"] = ds.n_nonnodule;
        j["image_size"] = ds.image_size;
    }
    return j;
}

DataSourceConfig data_source_from_json(const json& j, const std::string& scope) {
    DataSourceConfig ds;
    if (!j.is_object() || !j.contains("kind"))
        throw ParseError("config section '" + scope + "' needs a \"kind\"");
    ds.kind = j.at("kind").get<std::string>();
    if (ds.kind == "jsrt" || ds.kind == "chestxray14") {
        check_keys(j, {"kind", "root", "metadata"}, scope);
        ds.root = j.value("root", "");
        ds.metadata = j.value("metadata", "");
    } else if (ds.kind == "manifest") {
        check_keys(j, {"kind", "metadata"}, scope);
        ds.metadata = j.value("metadata", "");
    } else if (ds.kind == "synthetic") {
        check_keys(j, {"kind", "n_pos", "n_neg", "image_size"}, scope);
        ds.n_pos = j.value("n_pos", ds.n_pos);
        ds.n_neg = j.value("n_neg", ds.n_neg);
        ds.image_size = j.value("image_size", ds.image_size);
    } else if (ds.kind == "synthetic_graded") {
        check_keys(j, {"kind", "n_malignant", "n_benign", "n_nonnodule", "image_size"}, scope);
        ds.n_malignant = j.value("n_malignant", ds.n_malignant);
        ds.n_benign = j.value("n_benign", ds.n_benign);
        ds.n_nonnodule = j.value("n_nonnodule", ds.n_nonnodule);
        ds.image_size = j.value("image_size", ds.image_size);
    } else {
        throw ParseError("unknown dataset kind \"" + ds.kind + "\" in " + scope);
    }
    return ds;
}

json train_config_to_json(const TrainConfig& t, double rotate_deg) {
    return {{"batch_size", t.batch_size},
            {"lr", t.lr},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"adam_eps", t.adam_eps},
            {"max_epochs", t.max_epochs},
            {"plateau_patience", t.plateau_patience},
            {"plateau_factor", t.plateau_factor},
            {"plateau_rel_threshold", t.plateau_rel_threshold},
            {"min_lr", t.min_lr},
            {"early_stop_patience", t.early_stop_patience},
            {"max_steps", t.max_steps},
            {"rotate_deg", rotate_deg}};
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
    json stages = json::array();
    for (Stage s : cfg.stages) stages.push_back(to_string(s));
    return {{"version", cfg.version},
            {"out_dir", cfg.out_dir},
            {"seed", cfg.seed},
            {"workers", cfg.workers},
            {"stages", stages},
            {"base_checkpoint", cfg.base_checkpoint},
            {"checkpoint_a", cfg.checkpoint_a},
            {"model", model_config_to_json(cfg.model)},
            {"prep", prep_config_to_json(cfg.prep)},
            {"train", train_config_to_json(cfg.train, cfg.rotate_deg)},
            {"data",
             {{"stage_a", data_source_to_json(cfg.stage_a)},
              {"stage_bc", data_source_to_json(cfg.stage_bc)},
              {"a_split",
               {{"train", cfg.a_train},
                {"validation", cfg.a_validation},
                {"test", cfg.a_test},
                {"grouping", to_string(cfg.a_grouping)}}},
              {"folds", cfg.folds},
              {"fold_train_ratio", cfg.fold_train_ratio},
              {"fold_validation_ratio", cfg.fold_validation_ratio}}}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
    check_keys(j, {"version", "out_dir", "seed", "workers", "stages", "base_checkpoint",
                   "checkpoint_a", "model", "prep", "train", "data"},
               "config");
    ExperimentConfig cfg;
    if (!j.contains("version")) throw ParseError("config is missing \"version\"");
    cfg.version = j.at("version").get<int>();
    if (cfg.version != 1)
        throw ParseError("unsupported config version " + std::to_string(cfg.version) +
                         " (this build reads version 1)");
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.workers = j.value("workers", cfg.workers);
    if (j.contains("stages")) {
        cfg.stages.clear();
        for (const auto& s : j.at("stages")) cfg.stages.push_back(stage_from_string(s));
    }
    cfg.base_checkpoint = j.value("base_checkpoint", cfg.base_checkpoint);
    cfg.checkpoint_a = j.value("checkpoint_a", cfg.checkpoint_a);

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, {"kind", "in_channels", "densenet", "desk"}, "model");
        if (m.contains("densenet"))
            check_keys(m.at("densenet"),
                       {"stem_channels", "growth", "bn_size", "block_layers", "compression"},
                       "model.densenet");
        if (m.contains("desk")) check_keys(m.at("desk"), {"widths"}, "model.desk");
        cfg.model = model_config_from_json(m);
    }
    if (j.contains("prep")) {
        const json& p = j.at("prep");
        check_keys(p, {"target_size", "median_window", "channel_means", "channel_stds"}, "prep");
        cfg.prep = prep_config_from_json(p);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t,
                   {"batch_size", "lr", "beta1", "beta2", "adam_eps", "max_epochs",
                    "plateau_patience", "plateau_factor", "plateau_rel_threshold", "min_lr",
                    "early_stop_patience", "max_steps", "rotate_deg"},
                   "train");
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.lr = t.value("lr", cfg.train.lr);
        cfg.train.beta1 = t.value("beta1", cfg.train.beta1);
        cfg.train.beta2 = t.value("beta2", cfg.train.beta2);
        cfg.train.adam_eps = t.value("adam_eps", cfg.train.adam_eps);
        cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
        cfg.train.plateau_patience = t.value("plateau_patience", cfg.train.plateau_patience);
        cfg.train.plateau_factor = t.value("plateau_factor", cfg.train.plateau_factor);
        cfg.train.plateau_rel_threshold =
            t.value("plateau_rel_threshold", cfg.train.plateau_rel_threshold);
        cfg.train.min_lr = t.value("min_lr", cfg.train.min_lr);
        cfg.train.early_stop_patience =
            t.value("early_stop_patience", cfg.train.early_stop_patience);
        cfg.train.max_steps = t.value("max_steps", cfg.train.max_steps);
        cfg.rotate_deg = t.value("rotate_deg", cfg.rotate_deg);
    }
    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d,
                   {"stage_a", "stage_bc", "a_split", "folds", "fold_train_ratio",
                    "fold_validation_ratio"},
                   "data");
        if (d.contains("stage_a")) cfg.stage_a = data_source_from_json(d.at("stage_a"), "data.stage_a");
        if (d.contains("stage_bc"))
            cfg.stage_bc = data_source_from_json(d.at("stage_bc"), "data.stage_bc");
        if (d.contains("a_split")) {
            const json& s = d.at("a_split");
            check_keys(s, {"train", "validation", "test", "grouping"}, "data.a_split");
            cfg.a_train = s.value("train", cfg.a_train);
            cfg.a_validation = s.value("validation", cfg.a_validation);
            cfg.a_test = s.value("test", cfg.a_test);
            if (s.contains("grouping"))
                cfg.a_grouping = grouping_from_string(s.at("grouping").get<std::string>());
        }
        cfg.folds = d.value("folds", cfg.folds);
        cfg.fold_train_ratio = d.value("fold_train_ratio", cfg.fold_train_ratio);
        cfg.fold_validation_ratio = d.value("fold_validation_ratio", cfg.fold_validation_ratio);
    }
    return cfg;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + path);
}

}  // namespace

ExperimentConfig desk_config(const std::string& out_dir, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.out_dir = out_dir;
    cfg.seed = seed;
    cfg.model.kind = BackboneKind::desk_tiny;
    cfg.prep.target_size = 32;
    cfg.train.batch_size = 16;
    cfg.train.max_epochs = 10;
    cfg.train.max_steps = 200;
    cfg.stage_a.kind = "synthetic";
    cfg.stage_a.n_pos = 100;
    cfg.stage_a.n_neg = 100;
    cfg.stage_a.image_size = 64;
    cfg.stage_bc.kind = "synthetic_graded";
    cfg.stage_bc.n_malignant = 24;
    cfg.stage_bc.n_benign = 12;
    cfg.stage_bc.n_nonnodule = 12;
    cfg.stage_bc.image_size = 64;
    cfg.folds = 2;
    cfg.fold_train_ratio = 5;
    cfg.fold_validation_ratio = 1;
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
    try {
        return experiment_config_from_json(j);
    } catch (const json::exception& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
}

void save_experiment_config(const std::string& path, const ExperimentConfig& cfg) {
    write_json_file(path, experiment_config_to_json(cfg));
}

Manifest resolve_dataset(const DataSourceConfig& ds, std::uint64_t seed,
                         const std::string& synth_dir, std::string* hash_out,
                         std::vector<std::string>* warnings) {
    Manifest m;
    std::string hash_path;
    if (ds.kind == "jsrt") {
        m = load_jsrt_manifest(ds.root, ds.metadata, warnings);
        hash_path = ds.metadata;
    } else if (ds.kind == "chestxray14") {
        m = load_chestxray14_manifest(ds.root, ds.metadata, warnings);
        hash_path = ds.metadata;
    } else if (ds.kind == "manifest") {
        m = load_manifest_csv(ds.metadata);
        hash_path = ds.metadata;
    } else if (ds.kind == "synthetic") {
        if (synth_dir.empty())
            throw InvalidInputError("synthetic datasets need an output directory");
        m = generate_synthetic(ds.n_pos, ds.n_neg, ds.image_size, seed, synth_dir);
        hash_path = synth_dir + "/manifest.csv";
    } else if (ds.kind == "synthetic_graded") {
        if (synth_dir.empty())
            throw InvalidInputError("synthetic datasets need an output directory");
        m = generate_synthetic_graded(ds.n_malignant, ds.n_benign, ds.n_nonnodule, ds.image_size,
                                      seed, synth_dir);
        hash_path = synth_dir + "/manifest.csv";
    } else {
        throw InvalidInputError("unknown dataset kind: " + ds.kind);
    }
    if (hash_out) *hash_out = sha256_file_hex(hash_path);
    return m;
}

CascadeResult run_cascade(const ExperimentConfig& cfg, std::vector<std::string>* warnings) {
    if (cfg.stages.empty()) throw InvalidInputError("no stages selected");
    cfg.prep.validate();

    const fs::path run_dir = cfg.out_dir;
    const fs::path ckpt_dir = run_dir / "checkpoints";
    const fs::path log_dir = run_dir / "logs";
    const fs::path report_dir = run_dir / "reports";
    const fs::path data_dir = run_dir / "data";
    for (const fs::path& d : {run_dir, ckpt_dir, log_dir, report_dir, data_dir})
        fs::create_directories(d);

    const auto planned = [&](Stage s) {
        for (Stage t : cfg.stages)
            if (t == s) return true;
        return false;
    };
    const bool run_a = planned(Stage::a), run_b = planned(Stage::b), run_c = planned(Stage::c);

    CascadeResult result;
    result.run_dir = run_dir.string();

    json run_manifest;
    run_manifest["config"] = experiment_config_to_json(cfg);
    run_manifest["datasets"] = json::object();
    run_manifest["outputs"] = json::array();

    // The shared starting point ("base model"): loaded weights or a seeded
    // random init. A and every B fold start here.
    ClassifierModel base(cfg.model, Rng::derive(cfg.seed, kStreamBaseInit));
    if (!cfg.base_checkpoint.empty()) load_checkpoint_into(cfg.base_checkpoint, base);
    const std::string base_hash = param_hash(base);
    run_manifest["base_param_hash"] = base_hash;

    const auto stage_train_cfg = [&](std::uint64_t stream, double rotate) {
        TrainConfig t = cfg.train;
        t.seed = Rng::derive(cfg.seed, stream);
        t.workers = cfg.workers;
        t.augment.hflip = true;
        t.augment.max_rotate_deg = rotate;
        return t;
    };

    const auto eval_test = [&](ClassifierModel& model, const PreparedDataset& test_set,
                               Stage stage) {
        const std::vector<double> probs = predict_probs(model, test_set, cfg.train.batch_size);
        return evaluate_at(probs, dataset_labels(test_set), default_threshold(stage));
    };

    const auto record_output = [&](StageOutput&& out) {
        json o{{"stage", to_string(out.stage)},
               {"fold", out.fold},
               {"checkpoint", out.checkpoint_path},
               {"param_hash", out.param_hash},
               {"parent_hash", out.parent_hash},
               {"best_epoch", out.train.best_epoch},
               {"best_val_loss", out.train.best_val_loss},
               {"steps", out.train.steps},
               {"test_accuracy", out.test_report.accuracy}};
        run_manifest["outputs"].push_back(std::move(o));
        result.outputs.push_back(std::move(out));
    };

    std::unique_ptr<ClassifierModel> model_a;

    if (run_a) {
        std::string data_hash;
        const Manifest ma =
            resolve_dataset(cfg.stage_a, Rng::derive(cfg.seed, kStreamSynthA),
                            (data_dir / "stage_a").string(), &data_hash, warnings);
        run_manifest["datasets"]["stage_a"] = {
            {"kind", cfg.stage_a.kind}, {"sha256", data_hash}, {"records", ma.records.size()}};

        const SplitSpec split = split_grouped(
            ma, Task::nodule_vs_nonnodule,
            SplitSizes::from_ratios(cfg.a_train, cfg.a_validation, cfg.a_test), cfg.a_grouping,
            Rng::derive(cfg.seed, kStreamSplitA));
        save_split_json((data_dir / "a_split.json").string(), split);

        const PreparedDataset train_set =
            load_prepared(ma, split.train, Task::nodule_vs_nonnodule, cfg.prep, cfg.workers);
        const PreparedDataset val_set =
            load_prepared(ma, split.validation, Task::nodule_vs_nonnodule, cfg.prep, cfg.workers);
        const PreparedDataset test_set =
            load_prepared(ma, split.test, Task::nodule_vs_nonnodule, cfg.prep, cfg.workers);

        model_a = std::make_unique<ClassifierModel>(cfg.model, 0);
        model_a->copy_state_from(base);
        StageOutput out;
        out.stage = Stage::a;
        // Stage A augmentation: horizontal flips only.
        out.train = train_stage(*model_a, train_set, val_set, stage_train_cfg(kStreamTrainA, 0.0));
        write_epoch_log_csv((log_dir / "A_epochs.csv").string(), out.train);

        CheckpointMeta meta;
        meta.task = "nodule";
        meta.stage = "A";
        meta.parent_hash = base_hash;
        meta.prep = cfg.prep;
        out.checkpoint_path = (ckpt_dir / "A.ckpt").string();
        save_checkpoint(out.checkpoint_path, *model_a, meta);
        out.param_hash = param_hash(*model_a);
        out.parent_hash = base_hash;
        out.test_report = eval_test(*model_a, test_set, Stage::a);
        write_cv_csv((report_dir / "A_metrics.csv").string(), cv_aggregate({out.test_report}));
        record_output(std::move(out));
    }

    CVSummary a_summary;
    if (run_a) a_summary = cv_aggregate({result.outputs.front().test_report});

    if (run_b || run_c) {
        // Weights for C's initialization: stage A from this run, or a prior
        // checkpoint named in the config.
        std::unique_ptr<ClassifierModel> a_loaded;
        ClassifierModel* a_model = model_a.get();
        std::string a_hash;
        if (run_c) {
            if (a_model == nullptr) {
                if (cfg.checkpoint_a.empty())
                    throw TrainingError(
                        "stage C needs stage-A weights: run stage A first (or in the same "
                        "invocation), or point checkpoint_a at an existing stage-A checkpoint");
                a_loaded = std::make_unique<ClassifierModel>(cfg.model, 0);
                const CheckpointMeta ameta = load_checkpoint_into(cfg.checkpoint_a, *a_loaded);
                if (ameta.stage != "A" && warnings)
                    warnings->push_back("checkpoint_a was stamped stage \"" + ameta.stage +
                                        "\", not \"A\"");
                a_model = a_loaded.get();
            }
            a_hash = param_hash(*a_model);
        }

        std::string data_hash;
        const Manifest mbc =
            resolve_dataset(cfg.stage_bc, Rng::derive(cfg.seed, kStreamSynthBc),
                            (data_dir / "stage_bc").string(), &data_hash, warnings);
        run_manifest["datasets"]["stage_bc"] = {
            {"kind", cfg.stage_bc.kind}, {"sha256", data_hash}, {"records", mbc.records.size()}};

        const FoldPlan plan =
            make_folds(mbc, Task::malignant_vs_nonmalignant, cfg.folds,
                       Rng::derive(cfg.seed, kStreamFolds), cfg.fold_train_ratio,
                       cfg.fold_validation_ratio);
        save_folds_json((data_dir / "bc_folds.json").string(), plan);

        std::vector<MetricsReport> b_reports, c_reports;
        for (int f = 0; f < plan.k; ++f) {
            const SplitSpec& fold = plan.folds[static_cast<std::size_t>(f)];
            const PreparedDataset train_set = load_prepared(
                mbc, fold.train, Task::malignant_vs_nonmalignant, cfg.prep, cfg.workers);
            const PreparedDataset val_set = load_prepared(
                mbc, fold.validation, Task::malignant_vs_nonmalignant, cfg.prep, cfg.workers);
            const PreparedDataset test_set = load_prepared(
                mbc, fold.test, Task::malignant_vs_nonmalignant, cfg.prep, cfg.workers);

            const auto run_fold_stage = [&](Stage stage, ClassifierModel& init_from,
                                            const std::string& parent,
                                            std::uint64_t stream) {
                ClassifierModel model(cfg.model, 0);
                model.copy_state_from(init_from);
                StageOutput out;
                out.stage = stage;
                out.fold = f;
                out.train = train_stage(model, train_set, val_set,
                                        stage_train_cfg(stream, cfg.rotate_deg));
                const std::string tag =
                    std::string(to_string(stage)) + "_fold" + std::to_string(f);
                write_epoch_log_csv((log_dir / (tag + "_epochs.csv")).string(), out.train);

                CheckpointMeta meta;
                meta.task = "malignancy";
                meta.stage = to_string(stage);
                meta.fold = f;
                meta.parent_hash = parent;
                meta.prep = cfg.prep;
                out.checkpoint_path = (ckpt_dir / (tag + ".ckpt")).string();
                save_checkpoint(out.checkpoint_path, model, meta);
                out.param_hash = param_hash(model);
                out.parent_hash = parent;
                out.test_report = eval_test(model, test_set, stage);
                return out;
            };

            if (run_b) {
                StageOutput out = run_fold_stage(Stage::b, base, base_hash,
                                                 kStreamTrainB + static_cast<std::uint64_t>(f));
                b_reports.push_back(out.test_report);
                record_output(std::move(out));
            }
            if (run_c) {
                StageOutput out = run_fold_stage(Stage::c, *a_model, a_hash,
                                                 kStreamTrainC + static_cast<std::uint64_t>(f));
                c_reports.push_back(out.test_report);
                record_output(std::move(out));
            }
        }
        if (run_b) {
            result.b_summary = cv_aggregate(b_reports);
            write_cv_csv((report_dir / "B_cv.csv").string(), result.b_summary);
        }
        if (run_c) {
            result.c_summary = cv_aggregate(c_reports);
            write_cv_csv((report_dir / "C_cv.csv").string(), result.c_summary);
        }
    }

    std::vector<ReportRow> rows;
    if (run_a)
        rows.push_back({"A", cfg.stage_a.kind, "nodule vs non-nodule", a_summary});
    if (run_b)
        rows.push_back({"B", cfg.stage_bc.kind, "malignant vs non-malignant", result.b_summary});
    if (run_c)
        rows.push_back({"C", cfg.stage_bc.kind, "malignant vs non-malignant", result.c_summary});
    result.report_text = format_report(rows);
    {
        std::ofstream out(report_dir / "report.txt", std::ios::binary);
        if (!out) throw IoError("cannot write report.txt");
        out << result.report_text;
    }

    save_experiment_config((run_dir / "config.json").string(), cfg);
    write_json_file((run_dir / "run_manifest.json").string(), run_manifest);
    return result;
}

}  // namespace cxr
