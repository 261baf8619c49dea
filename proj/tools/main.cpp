// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cxr/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"cxrcascade: cascaded transfer learning for chest x-ray screening"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cxrcascade 0.1.0");

    // Global flags, usable before or after the subcommand name.
    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int workers = 0;
    bool desk = false;
    app.add_option("--config", config_path, "experiment config JSON (see train)");
    CLI::Option* seed_opt = app.add_option("--seed", seed, "master seed for every derived stream");
    app.add_flag("--desk", desk, "desk-scale preset: synthetic data + tiny backbone, CPU minutes");
    app.add_option("--workers", workers,
                   "parallel workers; results are identical at any worker count");
    app.add_option("--out", out_dir, "output directory");

    cxr::PrepareOptions popt;
    CLI::App* prepare =
        app.add_subcommand("prepare", "run the four-step preparation chain over a dataset");
    prepare->fallthrough();
    prepare->add_option("--input", popt.input, "images directory or metadata CSV (see --kind)")
        ->required();
    prepare->add_option("--kind", popt.kind, "images | jsrt | chestxray14 | manifest");
    prepare->add_option("--root", popt.root, "image root for jsrt / chestxray14 metadata");
    prepare->add_option("--target-size", popt.prep.target_size, "prepared resolution (default 224)");
    prepare->add_option("--median-window", popt.prep.median_window,
                        "median filter window, odd (default 3)");
    prepare->add_flag("--debug-stages", popt.debug_stages,
                      "also write the equalized / median / resized / normalized stage images");

    cxr::TrainOptions topt;
    CLI::App* train = app.add_subcommand(
        "train", "train cascade stages from --config or the --desk preset");
    train->fallthrough();
    train->add_option("--stage", topt.stage, "A | B | C | cascade (default cascade)");

    cxr::EvalOptions eopt;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    eval->fallthrough();
    eval->add_option("--checkpoint", eopt.checkpoint, "trained checkpoint file")->required();
    eval->add_option("--manifest", eopt.manifest_csv, "manifest CSV to evaluate")->required();
    eval->add_option("--split", eopt.split_json, "saved split JSON restricting the rows");
    eval->add_option("--subset", eopt.subset, "train | validation | test (default test)");
    eval->add_option("--threshold", eopt.threshold,
                     "decision threshold; default is the checkpoint stage's (A 0.55, B/C 0.5)");
    eval->add_flag("--sweep", eopt.sweep, "emit the full 0.00..1.00 threshold table");
    eval->add_option("--task", eopt.task, "override the checkpoint's task (needs --force)");
    eval->add_flag("--force", eopt.force, "allow a task override that contradicts the checkpoint");

    cxr::CamOptions copt;
    CLI::App* cam = app.add_subcommand("cam", "render class activation overlays");
    cam->fallthrough();
    cam->add_option("--checkpoint", copt.checkpoint, "trained checkpoint file")->required();
    cam->add_option("--image", copt.images, "image file (repeatable)");
    cam->add_option("--manifest", copt.manifest_csv, "render every record of this manifest");
    cam->add_option("--limit", copt.limit, "only the first N manifest records");
    cam->add_option("--alpha", copt.alpha, "heatmap blend weight in [0,1] (default 0.4)");

    CLI11_PARSE(app, argc, argv);

    std::ostream& log = std::cout;
    cxr::CommandResult res;
    if (prepare->parsed()) {
        if (!out_dir.empty()) popt.out_dir = out_dir;
        if (workers > 0) popt.workers = workers;
        res = cxr::cmd_prepare(popt, log);
    } else if (train->parsed()) {
        topt.config_path = config_path;
        topt.desk = desk;
        topt.out_dir = out_dir;
        topt.has_seed = seed_opt->count() > 0;
        topt.seed = seed;
        topt.workers = workers;
        res = cxr::cmd_train(topt, log);
    } else if (eval->parsed()) {
        if (!out_dir.empty()) eopt.out_dir = out_dir;
        if (workers > 0) eopt.workers = workers;
        res = cxr::cmd_eval(eopt, log);
    } else if (cam->parsed()) {
        if (!out_dir.empty()) copt.out_dir = out_dir;
        res = cxr::cmd_cam(copt, log);
    }
    return res.exit_code;
}
