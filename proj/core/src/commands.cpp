// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <utility>

#include "cxr/cam.hpp"
#include "cxr/checkpoint.hpp"
#include "cxr/csv.hpp"
#include "cxr/error.hpp"
#include "cxr/image_io.hpp"
#include "cxr/loss.hpp"
#include "cxr/parallel.hpp"

namespace fs = std::filesystem;

namespace cxr {
namespace {

void hard_error(CommandResult& res, std::ostream& log, const std::exception& e) {
    log << "error: " << e.what() << "\n";
    res.errors.push_back(e.what());
    res.exit_code = 2;
}

void print_warnings(const CommandResult& res, std::ostream& log, std::size_t from = 0) {
    for (std::size_t i = from; i < res.warnings.size(); ++i)
        log << "warning: " << res.warnings[i] << "\n";
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << csv_join(header) << "\n";
    for (const auto& r : rows) out << csv_join(r) << "\n";
    if (!out) throw IoError("cannot write " + path);
}

std::string stem_of(const std::string& ref) { return fs::path(ref).stem().string(); }

/// Deterministic unique ids from image_ref stems ("x", "x_2", "x_3", ...).
std::vector<std::string> unique_ids(const Manifest& m) {
    std::vector<std::string> ids;
    ids.reserve(m.records.size());
    std::map<std::string, int> seen;
    for (const auto& rec : m.records) {
        std::string id = stem_of(rec.image_ref);
        if (id.empty()) id = "image";
        const int n = ++seen[id];
        if (n > 1) id += "_" + std::to_string(n);
        ids.push_back(id);
    }
    return ids;
}

/// 8-bit rendering of an integer image of any supported depth.
GrayImage gray_to_8bit(const GrayImage& img) {
    if (img.bit_depth == 8) return img;
    GrayImage out(img.width, img.height, 8);
    const double scale = 255.0 / img.max_value();
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        out.pixels[i] = static_cast<std::uint16_t>(
            std::lround(std::clamp(img.pixels[i] * scale, 0.0, 255.0)));
    return out;
}

/// Quantize a real-valued single-channel plane in [0, src_max] to 8 bits.
GrayImage plane_to_8bit(const PlanarImage& plane, int src_max) {
    GrayImage out(plane.width, plane.height, 8);
    const double scale = 255.0 / src_max;
    for (int y = 0; y < plane.height; ++y)
        for (int x = 0; x < plane.width; ++x)
            out.at(y, x) = static_cast<std::uint16_t>(
                std::lround(std::clamp(plane.at(0, y, x) * scale, 0.0, 255.0)));
    return out;
}

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".img";
}

Manifest scan_images_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("input directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && has_image_extension(entry.path()))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    Manifest m;
    for (const auto& f : files) {
        SampleRecord rec;
        rec.image_ref = f.string();
        rec.patient_id = f.stem().string();
        m.records.push_back(std::move(rec));
    }
    return m;
}

std::vector<Stage> parse_stage_plan(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "cascade") return {Stage::a, Stage::b, Stage::c};
    if (s == "a" || s == "b" || s == "c") return {stage_from_string(s)};
    throw InvalidInputError("unknown stage plan \"" + s + "\" (expected A, B, C or cascade)");
}

std::string metric_cell(double value, bool defined) {
    return defined ? format_percent(value) : "undef";
}

void log_metrics_line(std::ostream& log, const MetricsReport& rep) {
    log << "threshold " << rep.threshold << "  n " << rep.n << "  accuracy "
        << format_percent(rep.accuracy) << "  specificity "
        << metric_cell(rep.specificity, rep.specificity_defined) << "  sensitivity "
        << metric_cell(rep.sensitivity, rep.sensitivity_defined) << "\n";
}

}  // namespace

CommandResult cmd_prepare(const PrepareOptions& opt, std::ostream& log) {
    CommandResult res;
    try {
        opt.prep.validate();
        if (opt.workers < 1) throw InvalidInputError("worker count must be >= 1");

        Manifest input;
        if (opt.kind == "images") {
            input = scan_images_dir(opt.input);
        } else if (opt.kind == "jsrt") {
            input = load_jsrt_manifest(opt.root, opt.input, &res.warnings);
        } else if (opt.kind == "chestxray14") {
            input = load_chestxray14_manifest(opt.root, opt.input, &res.warnings);
        } else if (opt.kind == "manifest") {
            input = load_manifest_csv(opt.input);
        } else {
            throw InvalidInputError("unknown input kind \"" + opt.kind +
                                    "\" (expected images, jsrt, chestxray14 or manifest)");
        }

        const fs::path out_dir = opt.out_dir;
        const fs::path images_dir = out_dir / "images";
        const fs::path debug_dir = out_dir / "debug";
        fs::create_directories(images_dir);
        if (opt.debug_stages) fs::create_directories(debug_dir);

        const std::vector<std::string> ids = unique_ids(input);
        const std::size_t n = input.records.size();
        std::vector<SampleRecord> prepared(n);
        std::vector<std::string> failures(n);

        parallel_for(n, opt.workers, [&](std::size_t i) {
            const SampleRecord& rec = input.records[i];
            try {
                const GrayImage img = load_gray_auto(rec.image_ref);
                PlanarImage resized;
                if (opt.debug_stages) {
                    const PrepStages stages = prepare_stages(img, opt.prep);
                    const std::string base = (debug_dir / ids[i]).string();
                    save_png_gray(base + "_1_equalized.png", gray_to_8bit(stages.equalized));
                    save_png_gray(base + "_2_median.png", gray_to_8bit(stages.filtered));
                    save_png_gray(base + "_3_resized.png",
                                  plane_to_8bit(stages.resized, img.max_value()));
                    save_png_gray(base + "_4_normalized.png",
                                  render_minmax_8bit(stages.normalized, 0));
                    resized = stages.resized;
                } else {
                    resized = prepare_gray(img, opt.prep);
                }
                SampleRecord out = rec;
                out.image_ref = (images_dir / (ids[i] + ".png")).string();
                save_png_gray(out.image_ref, plane_to_8bit(resized, img.max_value()));
                // Rescale nodule geometry to the prepared resolution.
                const double sx = static_cast<double>(opt.prep.target_size) / img.width;
                const double sy = static_cast<double>(opt.prep.target_size) / img.height;
                if (out.nodule_center) {
                    out.nodule_center->x *= sx;
                    out.nodule_center->y *= sy;
                }
                if (out.nodule_size) *out.nodule_size *= 0.5 * (sx + sy);
                prepared[i] = std::move(out);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        });

        Manifest out_manifest;
        out_manifest.source = input.source;
        std::vector<std::vector<std::string>> error_rows;
        for (std::size_t i = 0; i < n; ++i) {
            if (failures[i].empty()) {
                out_manifest.records.push_back(std::move(prepared[i]));
            } else {
                res.errors.push_back(input.records[i].image_ref + ": " + failures[i]);
                error_rows.push_back({input.records[i].image_ref, failures[i]});
            }
        }
        save_manifest_csv((out_dir / "prepared_manifest.csv").string(), out_manifest);
        if (!error_rows.empty()) {
            write_csv((out_dir / "errors.csv").string(), {"image_ref", "error"}, error_rows);
            res.exit_code = 1;
        }
        if (n == 0) res.warnings.push_back("no input images found; wrote an empty store");

        print_warnings(res, log);
        for (const auto& e : res.errors) log << "error: " << e << "\n";
        log << "prepared " << out_manifest.records.size() << " image(s) -> " << out_dir.string();
        if (!error_rows.empty()) log << " (" << error_rows.size() << " failed, see errors.csv)";
        log << "\n";
    } catch (const std::exception& e) {
        hard_error(res, log, e);
    }
    return res;
}

CommandResult cmd_train(const TrainOptions& opt, std::ostream& log) {
    CommandResult res;
    try {
        if (!opt.config_path.empty() && opt.desk)
            throw InvalidInputError("pass either --config or --desk, not both");
        ExperimentConfig cfg;
        if (!opt.config_path.empty())
            cfg = load_experiment_config(opt.config_path);
        else if (opt.desk)
            cfg = desk_config(opt.out_dir.empty() ? "desk_run" : opt.out_dir,
                              opt.has_seed ? opt.seed : 0);
        else
            throw InvalidInputError("training needs --config <file> or --desk");

        if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
        if (opt.has_seed) cfg.seed = opt.seed;
        if (opt.workers > 0) cfg.workers = opt.workers;
        cfg.stages = parse_stage_plan(opt.stage);

        const CascadeResult out = run_cascade(cfg, &res.warnings);
        print_warnings(res, log);
        log << out.report_text;
        log << "run artifacts in " << out.run_dir << "\n";
    } catch (const std::exception& e) {
        hard_error(res, log, e);
    }
    return res;
}

CommandResult cmd_eval(const EvalOptions& opt, std::ostream& log) {
    CommandResult res;
    try {
        LoadedCheckpoint ck = load_checkpoint(opt.checkpoint);

        Task task;
        if (!opt.task.empty()) {
            task = task_from_string(opt.task);
            if (!ck.meta.task.empty() && task != task_from_string(ck.meta.task)) {
                if (!opt.force)
                    throw InvalidInputError("checkpoint was trained for task \"" + ck.meta.task +
                                            "\" but --task asks for \"" + opt.task +
                                            "\"; pass --force to evaluate anyway");
                res.warnings.push_back("task override forced: checkpoint task \"" + ck.meta.task +
                                       "\" evaluated as \"" + opt.task + "\"");
            }
        } else if (!ck.meta.task.empty()) {
            task = task_from_string(ck.meta.task);
        } else {
            throw InvalidInputError("checkpoint records no task; pass --task");
        }

        const Manifest manifest = load_manifest_csv(opt.manifest_csv);
        std::vector<int> indices;
        if (!opt.split_json.empty()) {
            const SplitSpec split = load_split_json(opt.split_json);
            if (opt.subset == "train")
                indices = split.train;
            else if (opt.subset == "validation")
                indices = split.validation;
            else if (opt.subset == "test")
                indices = split.test;
            else
                throw InvalidInputError("unknown split subset \"" + opt.subset +
                                        "\" (expected train, validation or test)");
        } else {
            indices.resize(manifest.records.size());
            std::iota(indices.begin(), indices.end(), 0);
        }

        double threshold = opt.threshold;
        if (threshold < 0) {
            threshold = 0.5;
            if (!ck.meta.stage.empty()) {
                try {
                    threshold = default_threshold(stage_from_string(ck.meta.stage));
                } catch (const std::exception&) {
                    res.warnings.push_back("checkpoint stage \"" + ck.meta.stage +
                                           "\" has no default threshold; using 0.5");
                }
            }
        }

        const PreparedDataset set =
            load_prepared(manifest, indices, task, ck.meta.prep, opt.workers);
        const std::vector<double> probs = predict_probs(*ck.model, set);
        const std::vector<int> labels = dataset_labels(set);

        fs::create_directories(opt.out_dir);
        {
            std::vector<std::vector<std::string>> rows;
            for (std::size_t i = 0; i < probs.size(); ++i)
                rows.push_back({std::to_string(indices[i]),
                                manifest.records[static_cast<std::size_t>(indices[i])].image_ref,
                                std::to_string(labels[i]), fmt_g(probs[i])});
            write_csv((fs::path(opt.out_dir) / "predictions.csv").string(),
                      {"index", "image_ref", "label", "prob"}, rows);
        }

        const MetricsReport rep = evaluate_at(probs, labels, threshold);
        write_cv_csv((fs::path(opt.out_dir) / "metrics.csv").string(), cv_aggregate({rep}));
        print_warnings(res, log);
        log_metrics_line(log, rep);

        if (opt.sweep) {
            const SweepResult sr = sweep_threshold(probs, labels);
            std::vector<std::vector<std::string>> rows;
            for (const SweepPoint& p : sr.table) {
                const MetricsReport& r = p.report;
                rows.push_back({fmt_g(p.threshold), fmt_g(p.objective),
                                std::to_string(r.counts.tp),
                                std::to_string(r.counts.tn), std::to_string(r.counts.fp),
                                std::to_string(r.counts.fn), fmt_g(r.accuracy),
                                r.specificity_defined ? fmt_g(r.specificity) : "",
                                r.sensitivity_defined ? fmt_g(r.sensitivity) : ""});
            }
            write_csv((fs::path(opt.out_dir) / "sweep.csv").string(),
                      {"threshold", "objective", "tp", "tn", "fp", "fn", "accuracy",
                       "specificity", "sensitivity"},
                      rows);
            log << "sweep best threshold " << sr.best_threshold << " (objective "
                << fmt_g(sr.best.specificity + sr.best.sensitivity) << ")\n";
        }
        log << "eval artifacts in " << opt.out_dir << "\n";
    } catch (const std::exception& e) {
        hard_error(res, log, e);
    }
    return res;
}

CommandResult cmd_cam(const CamOptions& opt, std::ostream& log) {
    CommandResult res;
    try {
        if (!(opt.alpha >= 0.0 && opt.alpha <= 1.0))
            throw InvalidInputError("alpha must lie in [0, 1]");
        LoadedCheckpoint ck = load_checkpoint(opt.checkpoint);
        const std::string stage_tag = ck.meta.stage.empty() ? "model" : ck.meta.stage;

        Manifest work;
        for (const std::string& path : opt.images) {
            SampleRecord rec;
            rec.image_ref = path;
            rec.patient_id = stem_of(path);
            work.records.push_back(std::move(rec));
        }
        if (!opt.manifest_csv.empty()) {
            const Manifest m = load_manifest_csv(opt.manifest_csv);
            std::size_t take = m.records.size();
            if (opt.limit > 0) take = std::min<std::size_t>(take, static_cast<std::size_t>(opt.limit));
            for (std::size_t i = 0; i < take; ++i) work.records.push_back(m.records[i]);
        }
        if (work.records.empty()) {
            res.warnings.push_back("no input images given; nothing to render");
            print_warnings(res, log);
            return res;
        }

        fs::create_directories(opt.out_dir);
        const std::vector<std::string> ids = unique_ids(work);
        const std::vector<double> head_w = ck.model->head_weights();
        std::vector<CamRecord> records;
        std::vector<std::vector<std::string>> error_rows;

        for (std::size_t i = 0; i < work.records.size(); ++i) {
            const SampleRecord& rec = work.records[i];
            try {
                const GrayImage img = load_gray_auto(rec.image_ref);
                if (img.width != img.height)
                    throw InvalidInputError("overlays need square inputs, got " +
                                            std::to_string(img.width) + "x" +
                                            std::to_string(img.height));
                const PlanarImage x3 = prepare(img, ck.meta.prep);
                Tensor x({1, x3.channels, x3.height, x3.width});
                x.data = x3.values;
                const ForwardResult fr = ck.model->forward_detail(x);
                const ActivationMap map = compute_cam(fr.features, 0, head_w);

                std::optional<Circle> circle;
                if (rec.nodule_center) {
                    const double radius =
                        rec.nodule_size ? *rec.nodule_size / 2.0 : img.width * 0.04;
                    circle = Circle{rec.nodule_center->x, rec.nodule_center->y, radius};
                }
                const std::vector<std::uint8_t> rgb =
                    render_overlay(img, map, opt.alpha, circle, &res.warnings);
                const std::string out_png =
                    (fs::path(opt.out_dir) / (ids[i] + "_" + stage_tag + "_cam.png")).string();
                save_png_rgb(out_png, img.width, img.height, rgb);

                CamRecord cr;
                cr.image_id = ids[i];
                cr.stage = stage_tag;
                cr.peak = cam_peak(map, img.width);
                const auto [mn, mx] = std::minmax_element(map.raw.begin(), map.raw.end());
                cr.raw_min = *mn;
                cr.raw_max = *mx;
                cr.raw_mean = std::accumulate(map.raw.begin(), map.raw.end(), 0.0) /
                              static_cast<double>(map.raw.size());
                cr.logit = fr.logits.data[0];
                cr.prob = sigmoid(cr.logit);
                records.push_back(std::move(cr));
            } catch (const std::exception& e) {
                res.errors.push_back(rec.image_ref + ": " + e.what());
                error_rows.push_back({rec.image_ref, e.what()});
            }
        }

        write_cam_csv((fs::path(opt.out_dir) / "cams.csv").string(), records);
        if (!error_rows.empty()) {
            write_csv((fs::path(opt.out_dir) / "errors.csv").string(), {"image_ref", "error"},
                      error_rows);
            res.exit_code = 1;
        }
        print_warnings(res, log);
        for (const auto& e : res.errors) log << "error: " << e << "\n";
        log << "rendered " << records.size() << " overlay(s) -> " << opt.out_dir;
        if (!res.errors.empty()) log << " (" << res.errors.size() << " failed, see errors.csv)";
        log << "\n";
    } catch (const std::exception& e) {
        hard_error(res, log, e);
    }
    return res;
}

}  // namespace cxr
