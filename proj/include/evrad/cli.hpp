// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: simulate, train, render, eval, export-crf.
#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "eval.hpp"
#include "scene_gen.hpp"
#include "train.hpp"

namespace evrad::cli {

inline std::string resolve_manifest(const std::string& path) {
    if (std::filesystem::is_directory(path))
        return (std::filesystem::path(path) / "manifest.json").string();
    return path;
}

inline Mat4 read_pose_file(const std::string& path) {
    auto f = open_in(path);
    Mat4 m;
    for (int i = 0; i < 16; ++i)
        if (!(f >> m.m[i])) throw std::runtime_error("pose file needs 16 numbers: " + path);
    if (m.rotation_defect() > 1e-6)
        throw std::runtime_error("pose file rotation is not orthonormal: " + path);
    return m;
}

inline int run_simulate(const std::string& scene_path, const std::string& out_dir,
                        std::int64_t seed_override) {
    SceneDescription d = parse_scene_manifest(scene_path);
    if (seed_override >= 0) d.seed = std::uint64_t(seed_override);
    std::filesystem::create_directories(out_dir);
    generate_dataset(d, out_dir);
    std::cout << "wrote dataset to " << out_dir << "\n";
    return 0;
}

struct TrainArgs {
    std::string dataset, out, resume, metrics;
    std::uint64_t iters = 3000;
    double lambda = 0.005;
    double lr0 = 5e-4, lr_final = 5e-5, crf_lr_scale = 0.1;
    int b = 4;
    int batch = 256;
    int samples = 48;
    std::int64_t seed = 1;
    std::uint64_t eval_every = 250;
    bool no_events = false;
    bool verbose = false;
    std::string backend = "voxel";
    int field_res = 32;
};

inline int run_train(const TrainArgs& a) {
    const Dataset data = load_dataset(resolve_manifest(a.dataset));

    TrainConfig cfg;
    CheckpointEnv env;
    env.camera = data.manifest.camera;
    env.near = data.manifest.near;
    env.far = data.manifest.far;
    env.bounds = data.manifest.bounds;
    env.phi = data.manifest.phi;
    env.exposure_time = data.views.empty() ? 0.0 : data.views.front().rec.exposure_time;

    TrainState<VoxelField> vstate;
    TrainState<MlpField> mstate;
    bool use_mlp = a.backend == "mlp";
    if (!a.resume.empty()) {
        const Checkpoint ck = load_checkpoint(a.resume);
        cfg = ck.cfg;
        env = ck.env;
        cfg.iterations = a.iters;
        use_mlp = cfg.backend == FieldBackend::mlp;
        if (use_mlp) mstate = state_from_checkpoint<MlpField>(ck);
        else vstate = state_from_checkpoint<VoxelField>(ck);
    } else {
        if (a.backend != "voxel" && a.backend != "mlp")
            throw std::runtime_error("unknown backend '" + a.backend + "' (voxel or mlp)");
        cfg.iterations = a.iters;
        cfg.batch_pixels = a.batch;
        cfg.lr0 = a.lr0;
        cfg.lr_final = a.lr_final;
        cfg.crf_lr_scale = a.crf_lr_scale;
        cfg.b = a.b;
        cfg.lambda = a.lambda;
        cfg.theta = data.manifest.theta_sim;
        cfg.bayer = data.manifest.bayer;
        cfg.use_events = !a.no_events;
        cfg.samples_per_ray = a.samples;
        cfg.seed = std::uint64_t(a.seed);
        cfg.eval_every = a.eval_every;
        cfg.backend = use_mlp ? FieldBackend::mlp : FieldBackend::voxel;
        cfg.field_res = a.field_res;
        if (use_mlp) mstate = init_train_state<MlpField>(cfg, env.bounds);
        else vstate = init_train_state<VoxelField>(cfg, env.bounds);
    }

    const TrainSetup setup = prepare_training(data, cfg);
    TrainResult res;
    if (use_mlp) {
        res = train(mstate, setup, cfg, a.verbose);
        save_checkpoint(a.out, mstate, cfg, env);
    } else {
        res = train(vstate, setup, cfg, a.verbose);
        save_checkpoint(a.out, vstate, cfg, env);
    }
    const std::string metrics_path = a.metrics.empty() ? a.out + ".metrics.csv" : a.metrics;
    write_metrics_log(metrics_path, res.log);
    if (!res.log.empty())
        std::cout << "final holdout psnr " << res.log.back().psnr_holdout << " dB\n";
    std::cout << "wrote checkpoint to " << a.out << "\n";
    return 0;
}

inline int run_render(const std::string& ckpt_path, const std::string& pose_path,
                      const std::string& out_path, double exposure, int samples) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    const Mat4 pose = read_pose_file(pose_path);
    const int n = samples > 0 ? samples : ck.cfg.samples_per_ray;
    Imagef hdr;
    if (ck.cfg.backend == FieldBackend::voxel)
        hdr = render_image(ck.vox, ck.env.camera, pose, ck.env.near, ck.env.far, n);
    else
        hdr = render_image(ck.mlpf, ck.env.camera, pose, ck.env.near, ck.env.far, n);

    const auto ext = std::filesystem::path(out_path).extension().string();
    if (ext == ".pfm") {
        write_pfm(out_path, hdr);
    } else if (ext == ".ppm") {
        const double dt = exposure > 0 ? exposure : ck.env.exposure_time;
        if (!(dt > 0)) throw std::runtime_error("render: need --exposure for ldr output");
        write_ppm(out_path, quantize8(apply_crf_image(ck.crf, hdr, dt)));
    } else {
        throw std::runtime_error("render: output must end in .pfm (hdr) or .ppm (ldr)");
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

inline int run_eval(const std::string& ckpt_path, const std::string& dataset_path,
                    const std::string& report_path, int samples) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    const Dataset data = load_dataset(resolve_manifest(dataset_path));
    std::vector<MetricRow> rows = evaluate_checkpoint(ck, data, samples);

    // Per-task means appended after the per-view rows.
    std::vector<std::string> order;
    for (const auto& r : rows)
        if (std::find(order.begin(), order.end(), r.task) == order.end()) order.push_back(r.task);
    std::vector<MetricRow> means;
    for (const auto& task : order) {
        double p = 0, s = 0;
        int n = 0;
        for (const auto& r : rows)
            if (r.task == task) { p += r.psnr; s += r.ssim; ++n; }
        if (n > 0) means.push_back({task, "mean", p / n, s / n});
    }
    rows.insert(rows.end(), means.begin(), means.end());
    write_metric_report(report_path, rows);
    for (const auto& r : means)
        std::printf("%-22s psnr %7.3f  ssim %.4f\n", r.task.c_str(), r.psnr, r.ssim);
    return 0;
}

inline int run_export_crf(const std::string& ckpt_path, const std::string& out_path,
                          const std::string& range, int n) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    double lo = std::log(kLogFloor), hi = 3.0;
    if (!range.empty()) {
        if (std::sscanf(range.c_str(), "%lf,%lf", &lo, &hi) != 2)
            throw std::runtime_error("export-crf: --range expects 'lo,hi'");
    }
    const auto samples = crf_export(ck.crf, lo, hi, n);
    std::vector<CurveRow> rows;
    for (const auto& s : samples)
        rows.push_back({s.log_exposure, {s.rgb[0], s.rgb[1], s.rgb[2]}});
    write_crf_csv(out_path, rows);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

inline int run(int argc, char** argv) {
    CLI::App app{"event-assisted radiance field reconstruction"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "generate a dataset from a scene description");
    std::string sim_scene, sim_out;
    std::int64_t sim_seed = -1;
    sim->add_option("--scene", sim_scene, "scene description json")->required();
    sim->add_option("--out", sim_out, "output dataset directory")->required();
    sim->add_option("--seed", sim_seed, "override the scene seed");

    auto* tr = app.add_subcommand("train", "fit the fields to a dataset");
    TrainArgs ta;
    tr->add_option("--dataset", ta.dataset, "dataset manifest.json or its directory")->required();
    tr->add_option("--out", ta.out, "output checkpoint path")->required();
    tr->add_option("--iters", ta.iters, "total optimization steps");
    tr->add_option("--lambda", ta.lambda, "event loss weight");
    tr->add_option("--lr", ta.lr0, "initial learning rate");
    tr->add_option("--lr-final", ta.lr_final, "final learning rate");
    tr->add_option("--crf-lr-scale", ta.crf_lr_scale, "response net learning rate factor");
    tr->add_option("--b", ta.b, "time samples per exposure minus one");
    tr->add_option("--batch", ta.batch, "pixels per step");
    tr->add_option("--samples", ta.samples, "depth samples per ray");
    tr->add_option("--seed", ta.seed, "rng seed");
    tr->add_option("--eval-every", ta.eval_every, "holdout metric cadence");
    tr->add_option("--backend", ta.backend, "field backend: voxel or mlp");
    tr->add_option("--field-res", ta.field_res, "voxel grid resolution");
    tr->add_option("--resume", ta.resume, "checkpoint to continue from");
    tr->add_option("--metrics", ta.metrics, "metrics csv path");
    tr->add_flag("--no-events", ta.no_events, "train from the blurred images alone");
    tr->add_flag("--verbose", ta.verbose, "log progress to stderr");

    auto* re = app.add_subcommand("render", "render a checkpoint at a pose");
    std::string re_ckpt, re_pose, re_out;
    double re_exposure = 0;
    int re_samples = 0;
    re->add_option("--ckpt", re_ckpt, "checkpoint path")->required();
    re->add_option("--pose", re_pose, "text file with a row-major 4x4 camera-to-world")->required();
    re->add_option("--out", re_out, "output image (.pfm hdr, .ppm ldr)")->required();
    re->add_option("--exposure", re_exposure, "exposure time for ldr output");
    re->add_option("--samples", re_samples, "depth samples per ray");

    auto* ev = app.add_subcommand("eval", "score a checkpoint against a dataset");
    std::string ev_ckpt, ev_dataset, ev_report;
    int ev_samples = 0;
    ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
    ev->add_option("--dataset", ev_dataset, "dataset manifest.json or its directory")->required();
    ev->add_option("--report", ev_report, "output metrics csv")->required();
    ev->add_option("--samples", ev_samples, "depth samples per ray");

    auto* ex = app.add_subcommand("export-crf", "sample the learned response curves");
    std::string ex_ckpt, ex_out, ex_range;
    int ex_n = 256;
    ex->add_option("--ckpt", ex_ckpt, "checkpoint path")->required();
    ex->add_option("--out", ex_out, "output csv")->required();
    ex->add_option("--range", ex_range, "log exposure range 'lo,hi'");
    ex->add_option("--n", ex_n, "sample count");

    try {
        app.parse(argc, argv);
        if (sim->parsed()) return run_simulate(sim_scene, sim_out, sim_seed);
        if (tr->parsed()) return run_train(ta);
        if (re->parsed()) return run_render(re_ckpt, re_pose, re_out, re_exposure, re_samples);
        if (ev->parsed()) return run_eval(ev_ckpt, ev_dataset, ev_report, ev_samples);
        if (ex->parsed()) return run_export_crf(ex_ckpt, ex_out, ex_range, ex_n);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace evrad::cli
