// SPDX-License-Identifier: Apache-2.0
//
// Scene manifests, procedural ground-truth content, intra-exposure shake
// trajectories, and dataset generation (all files a training run consumes).
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "io.hpp"
#include "sim.hpp"

namespace evrad {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

struct SceneDescription {
    std::uint64_t seed = 1;
    int nx = 32, ny = 32, nz = 32;
    Aabb bounds{{-1, -1, -1}, {1, 1, 1}};
    // Procedural content (emissive Gaussian blobs) or a field snapshot base path.
    std::string field_snapshot; // when non-empty, overrides the procedural content
    int blob_count = 7;
    double min_intensity = 0.02, max_intensity = 25.0;
    double background_emission = 0.0;
    Camera camera{64, 64, 64, 64, 32, 32};
    double near = 0.8, far = 5.0;
    int train_views = 8, test_views = 4;
    double orbit_radius = 2.8, orbit_height = 0.5;
    double shake_translation = 0.08, shake_rotation_deg = 1.5;
    double exposure_time = 0.24;
    SimConfig sim;
    std::vector<double> novel_exposure_factors{0.25, 4.0};
};

inline SceneDescription parse_scene_manifest(const std::string& path) {
    auto f = open_in(path);
    nlohmann::json j;
    f >> j;
    if (j.value("format", "") != "evrad-scene-v1")
        throw std::runtime_error("scene manifest: unrecognized format field in " + path);
    SceneDescription d;
    d.seed = j.value("seed", d.seed);
    if (j.contains("resolution")) {
        const auto r = j["resolution"].get<std::vector<int>>();
        if (r.size() != 3) throw std::runtime_error("scene manifest: resolution needs 3 entries");
        d.nx = r[0];
        d.ny = r[1];
        d.nz = r[2];
    }
    if (j.contains("bounds")) {
        const auto lo = j["bounds"].at("lo").get<std::vector<double>>();
        const auto hi = j["bounds"].at("hi").get<std::vector<double>>();
        if (lo.size() != 3 || hi.size() != 3)
            throw std::runtime_error("scene manifest: bounds need lo/hi triples");
        d.bounds = {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
    }
    if (j.contains("content")) {
        const auto& c = j["content"];
        d.field_snapshot = c.value("field_snapshot", "");
        d.blob_count = c.value("blob_count", d.blob_count);
        d.min_intensity = c.value("min_intensity", d.min_intensity);
        d.max_intensity = c.value("max_intensity", d.max_intensity);
        d.background_emission = c.value("background_emission", d.background_emission);
    }
    if (j.contains("camera")) {
        const auto& c = j["camera"];
        d.camera = {c.at("width").get<int>(), c.at("height").get<int>(),
                    c.at("fx").get<double>(), c.at("fy").get<double>(),
                    c.at("cx").get<double>(), c.at("cy").get<double>()};
    }
    d.camera.validate();
    d.near = j.value("near", d.near);
    d.far = j.value("far", d.far);
    if (j.contains("views")) {
        const auto& v = j["views"];
        d.train_views = v.value("train", d.train_views);
        d.test_views = v.value("test", d.test_views);
        d.orbit_radius = v.value("orbit_radius", d.orbit_radius);
        d.orbit_height = v.value("orbit_height", d.orbit_height);
        d.shake_translation = v.value("shake_translation", d.shake_translation);
        d.shake_rotation_deg = v.value("shake_rotation_deg", d.shake_rotation_deg);
    }
    d.exposure_time = j.value("exposure_time", d.exposure_time);
    d.sim.b_sim = j.value("b_sim", 9);
    if (j.contains("sim")) {
        const auto& s = j["sim"];
        d.sim.theta_sim = s.value("theta", d.sim.theta_sim);
        d.sim.phi = s.value("phi", d.sim.phi);
        d.sim.spurious_rate = s.value("spurious_rate", d.sim.spurious_rate);
        d.sim.samples_per_ray = s.value("samples_per_ray", d.sim.samples_per_ray);
        d.sim.event_refine = s.value("event_refine", d.sim.event_refine);
        const std::string bayer = s.value("bayer", "rggb");
        if (bayer == "rggb") d.sim.bayer = BayerMode::rggb;
        else if (bayer == "none") d.sim.bayer = BayerMode::none;
        else throw std::runtime_error("scene manifest: bayer must be rggb or none");
        if (s.contains("latency")) {
            const auto& l = s["latency"];
            const std::string mode = l.value("mode", "constant");
            if (mode == "constant") {
                d.sim.latency.mode = LatencyProfile::Mode::constant;
                d.sim.latency.value = l.value("value", 1.0);
            } else if (mode == "logistic") {
                d.sim.latency.mode = LatencyProfile::Mode::logistic;
                d.sim.latency.floor = l.value("floor", d.sim.latency.floor);
                d.sim.latency.center = l.value("center", d.sim.latency.center);
                d.sim.latency.gain = l.value("gain", d.sim.latency.gain);
            } else {
                throw std::runtime_error("scene manifest: latency mode must be constant or logistic");
            }
        }
    }
    if (j.contains("novel_exposure_factors"))
        d.novel_exposure_factors = j["novel_exposure_factors"].get<std::vector<double>>();
    d.sim.seed = d.seed;
    d.sim.validate();
    if (d.train_views < 1) throw std::runtime_error("scene manifest: need at least one train view");
    if (!(d.exposure_time > 0)) throw std::runtime_error("scene manifest: exposure_time must be positive");
    return d;
}

inline void write_scene_manifest(const std::string& path, const SceneDescription& d) {
    nlohmann::json j;
    j["format"] = "evrad-scene-v1";
    j["seed"] = d.seed;
    j["resolution"] = {d.nx, d.ny, d.nz};
    j["bounds"] = {{"lo", {d.bounds.lo.x, d.bounds.lo.y, d.bounds.lo.z}},
                   {"hi", {d.bounds.hi.x, d.bounds.hi.y, d.bounds.hi.z}}};
    j["content"] = {{"blob_count", d.blob_count},
                    {"min_intensity", d.min_intensity},
                    {"max_intensity", d.max_intensity},
                    {"background_emission", d.background_emission}};
    if (!d.field_snapshot.empty()) j["content"]["field_snapshot"] = d.field_snapshot;
    j["camera"] = {{"width", d.camera.width}, {"height", d.camera.height}, {"fx", d.camera.fx},
                   {"fy", d.camera.fy},       {"cx", d.camera.cx},         {"cy", d.camera.cy}};
    j["near"] = d.near;
    j["far"] = d.far;
    j["views"] = {{"train", d.train_views},
                  {"test", d.test_views},
                  {"orbit_radius", d.orbit_radius},
                  {"orbit_height", d.orbit_height},
                  {"shake_translation", d.shake_translation},
                  {"shake_rotation_deg", d.shake_rotation_deg}};
    j["exposure_time"] = d.exposure_time;
    j["b_sim"] = d.sim.b_sim;
    j["sim"] = {{"theta", d.sim.theta_sim},
                {"phi", d.sim.phi},
                {"spurious_rate", d.sim.spurious_rate},
                {"samples_per_ray", d.sim.samples_per_ray},
                {"event_refine", d.sim.event_refine},
                {"bayer", d.sim.bayer == BayerMode::rggb ? "rggb" : "none"}};
    if (d.sim.latency.mode == LatencyProfile::Mode::constant)
        j["sim"]["latency"] = {{"mode", "constant"}, {"value", d.sim.latency.value}};
    else
        j["sim"]["latency"] = {{"mode", "logistic"},
                               {"floor", d.sim.latency.floor},
                               {"center", d.sim.latency.center},
                               {"gain", d.sim.latency.gain}};
    j["novel_exposure_factors"] = d.novel_exposure_factors;
    auto f = open_out(path);
    f << j.dump(1) << "\n";
}

// Gaussian emissive blobs over the grid, seeded. Raw values are set through
// the softplus inverse so queries reproduce the intended density/emission.
inline GroundTruthScene build_scene(const SceneDescription& d) {
    GroundTruthScene scene;
    scene.near = d.near;
    scene.far = d.far;
    if (!d.field_snapshot.empty()) {
        scene.field = read_field_snapshot(d.field_snapshot);
        return scene;
    }
    VoxelField field(d.nx, d.ny, d.nz, d.bounds);
    Rng rng(mix_seed(d.seed, 0x5ce17e));
    struct Blob {
        Vec3 c;
        double r, amp, inten, col[3];
    };
    std::vector<Blob> blobs(size_t(d.blob_count));
    const Vec3 ext = d.bounds.hi - d.bounds.lo;
    for (auto& b : blobs) {
        b.c = {d.bounds.lo.x + ext.x * rng.uniform(0.2, 0.8),
               d.bounds.lo.y + ext.y * rng.uniform(0.2, 0.8),
               d.bounds.lo.z + ext.z * rng.uniform(0.2, 0.8)};
        b.r = rng.uniform(0.12, 0.3) * std::min({ext.x, ext.y, ext.z});
        b.amp = rng.uniform(4.0, 10.0);
        b.inten = std::exp(rng.uniform(std::log(d.min_intensity), std::log(d.max_intensity)));
        for (auto& c : b.col) c = rng.uniform(0.25, 1.0);
    }
    auto node_pos = [&](int ix, int iy, int iz) {
        return Vec3{d.nx == 1 ? 0.5 * (d.bounds.lo.x + d.bounds.hi.x)
                              : d.bounds.lo.x + ext.x * ix / (d.nx - 1),
                    d.ny == 1 ? 0.5 * (d.bounds.lo.y + d.bounds.hi.y)
                              : d.bounds.lo.y + ext.y * iy / (d.ny - 1),
                    d.nz == 1 ? 0.5 * (d.bounds.lo.z + d.bounds.hi.z)
                              : d.bounds.lo.z + ext.z * iz / (d.nz - 1)};
    };
    constexpr double tiny = 1e-4;
    for (int iz = 0; iz < d.nz; ++iz)
        for (int iy = 0; iy < d.ny; ++iy)
            for (int ix = 0; ix < d.nx; ++ix) {
                const Vec3 p = node_pos(ix, iy, iz);
                double dens = tiny;
                double emis[3] = {d.background_emission + tiny, d.background_emission + tiny,
                                  d.background_emission + tiny};
                for (const auto& b : blobs) {
                    const Vec3 q = p - b.c;
                    const double g = std::exp(-q.dot(q) / (2 * b.r * b.r));
                    dens += b.amp * g;
                    for (int ch = 0; ch < 3; ++ch) emis[ch] += b.inten * b.col[ch] * g;
                }
                const size_t node = field.node_index(ix, iy, iz);
                field.density_raw(node) = softplus_inverse(dens);
                for (int ch = 0; ch < 3; ++ch)
                    field.emission_raw(node, ch) = softplus_inverse(emis[ch]);
            }
    scene.field = std::move(field);
    return scene;
}

inline Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 z = (target - eye).normalized();
    const Vec3 x = up.cross(z).normalized();
    const Vec3 y = z.cross(x);
    Mat4 m = Mat4::identity();
    m.at(0, 0) = x.x; m.at(1, 0) = x.y; m.at(2, 0) = x.z;
    m.at(0, 1) = y.x; m.at(1, 1) = y.y; m.at(2, 1) = y.z;
    m.at(0, 2) = z.x; m.at(1, 2) = z.y; m.at(2, 2) = z.z;
    m.at(0, 3) = eye.x; m.at(1, 3) = eye.y; m.at(2, 3) = eye.z;
    return m;
}

inline Mat4 small_motion(const Vec3& angles, const Vec3& offset) {
    const double ca = std::cos(angles.x), sa = std::sin(angles.x);
    const double cb = std::cos(angles.y), sb = std::sin(angles.y);
    const double cc = std::cos(angles.z), sc = std::sin(angles.z);
    Mat4 rx = Mat4::identity(), ry = Mat4::identity(), rz = Mat4::identity();
    rx.at(1, 1) = ca; rx.at(1, 2) = -sa; rx.at(2, 1) = sa; rx.at(2, 2) = ca;
    ry.at(0, 0) = cb; ry.at(0, 2) = sb; ry.at(2, 0) = -sb; ry.at(2, 2) = cb;
    rz.at(0, 0) = cc; rz.at(0, 1) = -sc; rz.at(1, 0) = sc; rz.at(1, 1) = cc;
    Mat4 m = rx.mul(ry).mul(rz);
    m.at(0, 3) = offset.x;
    m.at(1, 3) = offset.y;
    m.at(2, 3) = offset.z;
    return m;
}

// Smooth sinusoidal camera shake in the camera frame, one draw of phases and
// frequencies per view.
struct ShakeParams {
    Vec3 t_amp, t_phase, t_freq;
    Vec3 r_amp, r_phase, r_freq;

    static ShakeParams draw(Rng& rng, double t_amplitude, double r_amplitude_rad) {
        ShakeParams s;
        auto vec = [&](double amp) {
            return Vec3{amp * rng.uniform(0.4, 1.0), amp * rng.uniform(0.4, 1.0),
                        amp * rng.uniform(0.4, 1.0)};
        };
        s.t_amp = vec(t_amplitude);
        s.r_amp = vec(r_amplitude_rad);
        s.t_phase = {rng.uniform(0, 6.283), rng.uniform(0, 6.283), rng.uniform(0, 6.283)};
        s.r_phase = {rng.uniform(0, 6.283), rng.uniform(0, 6.283), rng.uniform(0, 6.283)};
        s.t_freq = {rng.uniform(0.7, 1.6), rng.uniform(0.7, 1.6), rng.uniform(0.7, 1.6)};
        s.r_freq = {rng.uniform(0.7, 1.6), rng.uniform(0.7, 1.6), rng.uniform(0.7, 1.6)};
        return s;
    }

    Mat4 offset(double u) const { // u in [0,1] across the exposure
        auto osc = [&](const Vec3& amp, const Vec3& phase, const Vec3& freq) {
            constexpr double tau = 6.28318530717958648;
            return Vec3{amp.x * std::sin(tau * (freq.x * u) + phase.x),
                        amp.y * std::sin(tau * (freq.y * u) + phase.y),
                        amp.z * std::sin(tau * (freq.z * u) + phase.z)};
        };
        return small_motion(osc(r_amp, r_phase, r_freq), osc(t_amp, t_phase, t_freq));
    }
};

// Timed poses for one training view: orbit base pose composed with shake.
inline std::vector<TimedPose> make_view_trajectory(const SceneDescription& d, int view_idx,
                                                   const ShakeParams& shake, TimedPose& ref_pose) {
    constexpr double tau = 6.28318530717958648;
    const double ang = tau * view_idx / std::max(1, d.train_views);
    const Vec3 eye{d.orbit_radius * std::cos(ang), d.orbit_height, d.orbit_radius * std::sin(ang)};
    const Mat4 base = look_at(eye, {0, 0, 0}, {0, 1, 0});
    std::vector<TimedPose> poses(size_t(d.sim.b_sim) + 1);
    for (int i = 0; i <= d.sim.b_sim; ++i) {
        const double u = double(i) / d.sim.b_sim;
        poses[i].t = d.exposure_time * u;
        poses[i].c2w = base.mul(shake.offset(u));
        poses[i].validate();
    }
    ref_pose.t = 0.5 * d.exposure_time;
    ref_pose.c2w = base.mul(shake.offset(0.5));
    return poses;
}

inline Mat4 make_test_pose(const SceneDescription& d, int test_idx) {
    constexpr double tau = 6.28318530717958648;
    const double ang = tau * (test_idx + 0.5) / std::max(1, d.test_views);
    const Vec3 eye{d.orbit_radius * std::cos(ang), d.orbit_height, d.orbit_radius * std::sin(ang)};
    return look_at(eye, {0, 0, 0}, {0, 1, 0});
}

// Simulates every view and writes the dataset tree:
//   manifest.json, view_###/{ldr.ppm,events.csv,hdr_gt.pfm},
//   test_###/hdr_gt.pfm, crf_gt.csv
inline DatasetManifest generate_dataset(const SceneDescription& d, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const GroundTruthScene scene = build_scene(d);
    fs::create_directories(out_dir);
    DatasetManifest m;
    m.camera = d.camera;
    m.near = d.near;
    m.far = d.far;
    m.bounds = d.bounds;
    m.b_sim = d.sim.b_sim;
    m.theta_sim = d.sim.theta_sim;
    m.phi = d.sim.phi;
    m.seed = d.seed;
    m.bayer = d.sim.bayer;
    m.novel_exposure_factors = d.novel_exposure_factors;

    std::vector<float> positive_rads;
    char name[64];
    for (int v = 0; v < d.train_views; ++v) {
        Rng vrng(mix_seed(d.seed, 0x1000 + std::uint64_t(v)));
        const auto shake =
            ShakeParams::draw(vrng, d.shake_translation, d.shake_rotation_deg * kDegToRad);
        TimedPose ref;
        const auto poses = make_view_trajectory(d, v, shake, ref);
        SimConfig cfg = d.sim;
        cfg.seed = mix_seed(d.seed, 0x2000 + std::uint64_t(v));
        const ExposureBlock blk =
            simulate_view(scene.field, d.camera, poses, ref, d.near, d.far, cfg);
        std::snprintf(name, sizeof(name), "view_%03d", v);
        fs::create_directories(fs::path(out_dir) / name);
        ViewRecord rec;
        rec.id = v;
        rec.t_start = blk.t_start;
        rec.t_end = blk.t_end;
        rec.exposure_time = d.exposure_time;
        rec.poses = poses;
        rec.ref_pose = ref;
        rec.ldr_path = std::string(name) + "/ldr.ppm";
        rec.events_path = std::string(name) + "/events.csv";
        rec.hdr_gt_path = std::string(name) + "/hdr_gt.pfm";
        write_ppm((fs::path(out_dir) / rec.ldr_path).string(), blk.ldr);
        write_events_csv((fs::path(out_dir) / rec.events_path).string(), blk.events);
        write_pfm((fs::path(out_dir) / rec.hdr_gt_path).string(), blk.gt_sharp_hdr);
        for (float val : blk.blur_hdr.data)
            if (val > 0) positive_rads.push_back(val);
        m.views.push_back(std::move(rec));
    }
    for (int tv = 0; tv < d.test_views; ++tv) {
        TestViewRecord rec;
        rec.id = tv;
        rec.pose.t = 0;
        rec.pose.c2w = make_test_pose(d, tv);
        std::snprintf(name, sizeof(name), "test_%03d", tv);
        fs::create_directories(fs::path(out_dir) / name);
        rec.hdr_gt_path = std::string(name) + "/hdr_gt.pfm";
        const Imagef gt = render_image(scene.field, d.camera, rec.pose.c2w, d.near, d.far,
                                       d.sim.samples_per_ray);
        write_pfm((fs::path(out_dir) / rec.hdr_gt_path).string(), gt);
        m.test_views.push_back(std::move(rec));
    }
    // Ground-truth response curve over the exposure range the data covers.
    // Coverage means central mass, not isolated extremes: a decade reached
    // by a handful of pixels is not recoverable from these images, so the
    // declared range spans the 1st through 99th percentile of the positive
    // blurred exposures.
    if (positive_rads.empty())
        throw std::runtime_error("generate_dataset: scene renders to black");
    std::sort(positive_rads.begin(), positive_rads.end());
    const double lo_rad = positive_rads[size_t(0.01 * double(positive_rads.size() - 1))];
    const double hi_rad = positive_rads[size_t(0.99 * double(positive_rads.size() - 1))];
    m.crf_lo = std::log(std::max(lo_rad * d.exposure_time, kLogFloor));
    m.crf_hi = std::log(hi_rad * d.exposure_time);
    m.crf_gt_path = "crf_gt.csv";
    std::vector<CurveRow> rows(256);
    for (int i = 0; i < 256; ++i) {
        const double u = m.crf_lo + (m.crf_hi - m.crf_lo) * i / 255.0;
        const double val = reinhard_log_exposure(u, d.sim.phi);
        rows[i] = {u, {val, val, val}};
    }
    write_crf_csv((fs::path(out_dir) / m.crf_gt_path).string(), rows);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), m);
    return m;
}

} // namespace evrad
