// SPDX-License-Identifier: Apache-2.0
//
// Joint optimization of the radiance field, response field and event
// mapping field against blurred LDR images and event-count targets.
// One train step: sample pixels, render b+1 timed rays per pixel, integrate
// the exposure, apply the response once per pixel, predict calibrated event
// counts from the same renders, and backpropagate the summed squared
// residuals of both branches (total = ldr + lambda * events) through the
// hand-derived chain into one flat gradient vector consumed by Adam.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crf.hpp"
#include "events.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "render.hpp"

namespace evrad {

enum class FieldBackend : std::uint8_t { voxel, mlp };

struct TrainConfig {
    // Optimization schedule.
    std::uint64_t iterations = 3000;
    int batch_pixels = 256;
    double lr0 = 5e-4, lr_final = 5e-5;
    double crf_lr_scale = 0.1; // response nets run slower than the field
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::uint64_t seed = 1;
    std::uint64_t eval_every = 250;

    // Measurement model.
    int b = 4;              // reconstruction time samples per exposure = b + 1
    double lambda = 0.005;  // event-loss weight
    double theta = 0.2;     // contrast threshold shared with the data
    BayerMode bayer = BayerMode::rggb;
    bool use_events = true;
    SoftCountMode soft_counts = SoftCountMode::straight_through;
    WeightScheme weights = WeightScheme::uniform;
    SampleMode sample_mode = SampleMode::stratified;
    int samples_per_ray = 48;

    // Field backend.
    FieldBackend backend = FieldBackend::voxel;
    int field_res = 32;                       // voxel backend, cubic
    double density_init = 0.05, emission_init = 0.5;
    int mlp_pos_levels = 10, mlp_dir_levels = 4, mlp_layers = 4, mlp_width = 64;

    // Response and mapping nets.
    std::vector<int> crf_widths{1, 32, 32, 1};
    Act crf_hidden = Act::relu;
    std::vector<int> f_ev_widths{1, 32, 32, 1};
    Act f_ev_hidden = Act::relu;
    double latency_init = 0.9; // initial lowpass coefficient, near passthrough
    double crf_monotone_weight = 0.0; // soft penalty, off by default
    int crf_monotone_probes = 32;

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("TrainConfig: need iterations >= 1");
        if (batch_pixels < 1) throw std::invalid_argument("TrainConfig: need batch_pixels >= 1");
        if (b < 1) throw std::invalid_argument("TrainConfig: need b >= 1");
        if (lambda < 0) throw std::invalid_argument("TrainConfig: negative lambda");
        if (!(theta > 0)) throw std::invalid_argument("TrainConfig: theta must be positive");
        if (!(lr0 > 0) || !(lr_final > 0)) throw std::invalid_argument("TrainConfig: bad lr");
        if (!(crf_lr_scale > 0)) throw std::invalid_argument("TrainConfig: bad crf lr scale");
        if (!(latency_init > 0) || !(latency_init < 1))
            throw std::invalid_argument("TrainConfig: latency_init must lie in (0, 1)");
        if (samples_per_ray < 1) throw std::invalid_argument("TrainConfig: need samples per ray");
    }
};

// Per-view data frozen before the loop: equal-count bin boundaries, count
// targets, calibration offsets, exposure weights, and the interpolated pose
// at every boundary time.
struct ViewTrainData {
    Imagef target; // dequantized LDR
    double dt = 0;
    std::vector<double> boundaries; // b + 1
    std::vector<double> weights;
    std::vector<Mat4> poses; // pose at each boundary
    BinGrid bins;
    OffsetGrid offsets;
    bool has_events = false;
};

struct HoldoutView {
    Mat4 pose;
    Imagef hdr_gt;
};

struct TrainSetup {
    Camera camera;
    double near = 0, far = 0;
    Aabb bounds;
    double phi = 62.5;
    double dt_eval = 0;
    std::vector<ViewTrainData> views;
    std::vector<HoldoutView> holdout;
};

inline TrainSetup prepare_training(const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.views.empty()) throw std::invalid_argument("prepare_training: dataset has no views");
    TrainSetup s;
    s.camera = data.manifest.camera;
    s.near = data.manifest.near;
    s.far = data.manifest.far;
    s.bounds = data.manifest.bounds;
    s.phi = data.manifest.phi;
    s.dt_eval = data.views.front().rec.exposure_time;
    for (const auto& v : data.views) {
        ViewTrainData t;
        t.target = v.ldr;
        t.dt = v.rec.exposure_time;
        t.has_events = cfg.use_events && !v.events.events.empty();
        if (t.has_events) {
            t.boundaries = divide_events(v.events, v.rec.t_start, v.rec.t_end, cfg.b);
            t.bins = build_bin_grid(v.events, t.boundaries, s.camera.width, s.camera.height);
            t.offsets = compute_offset_grid(v.events, t.boundaries, s.camera.width, s.camera.height);
        } else {
            t.boundaries = divide_events(EventStream{}, v.rec.t_start, v.rec.t_end, cfg.b);
            t.bins = BinGrid(cfg.b, s.camera.width, s.camera.height);
            t.offsets = OffsetGrid(cfg.b, s.camera.width, s.camera.height);
        }
        t.weights = exposure_weights(t.boundaries, cfg.weights);
        for (double tb : t.boundaries) t.poses.push_back(interpolate_pose(v.rec.poses, tb));
        s.views.push_back(std::move(t));
    }
    for (const auto& tv : data.tests) s.holdout.push_back({tv.rec.pose.c2w, tv.hdr_gt});
    return s;
}

template <typename Field>
Field make_field(const TrainConfig& cfg, const Aabb& bounds);

template <>
inline VoxelField make_field<VoxelField>(const TrainConfig& cfg, const Aabb& bounds) {
    VoxelField f(cfg.field_res, cfg.field_res, cfg.field_res, bounds);
    f.fill(softplus_inverse(cfg.density_init), softplus_inverse(cfg.emission_init));
    return f;
}

template <>
inline MlpField make_field<MlpField>(const TrainConfig& cfg, const Aabb& bounds) {
    return MlpField(bounds, cfg.mlp_pos_levels, cfg.mlp_dir_levels, cfg.mlp_layers, cfg.mlp_width);
}

template <typename Field>
std::vector<double>& field_params(Field& f) {
    if constexpr (std::is_same_v<Field, VoxelField>) return f.params;
    else return f.net.params;
}

template <typename Field>
struct TrainState {
    Field field;
    CrfField crf;
    EventMappingField evmap;
    std::vector<double> adam_m, adam_v;
    std::uint64_t iteration = 0;
    Rng rng{0};

    // Flat parameter order: field, crf r, crf g, crf b, f_ev.
    std::array<std::span<double>, 5> segments() {
        return {std::span<double>(field_params(field)), std::span<double>(crf.net[0].params),
                std::span<double>(crf.net[1].params), std::span<double>(crf.net[2].params),
                std::span<double>(evmap.f_ev.params)};
    }

    size_t param_count() {
        size_t n = 0;
        for (auto s : segments()) n += s.size();
        return n;
    }
};

template <typename Field>
TrainState<Field> init_train_state(const TrainConfig& cfg, const Aabb& bounds) {
    cfg.validate();
    TrainState<Field> st;
    st.field = make_field<Field>(cfg, bounds);
    st.crf = CrfField(cfg.crf_widths, cfg.crf_hidden);
    st.evmap = EventMappingField(cfg.f_ev_widths, cfg.theta, cfg.f_ev_hidden);
    st.rng = Rng(cfg.seed);
    Rng init_rng(mix_seed(cfg.seed, 0xf1e1d));
    if constexpr (std::is_same_v<Field, MlpField>) st.field.net.init(init_rng);
    st.crf.init(init_rng);
    st.evmap.f_ev.init(init_rng);
    // A cold lowpass damps predicted counts; bias the sensor model toward
    // passthrough and let the data pull the coefficient down if it must.
    st.evmap.f_ev.params.back() = std::log(cfg.latency_init / (1.0 - cfg.latency_init));
    const size_t n = st.param_count();
    st.adam_m.assign(n, 0.0);
    st.adam_v.assign(n, 0.0);
    st.iteration = 0;
    return st;
}

struct StepStats {
    double loss_total = 0, loss_ldr = 0, loss_evs = 0;
    bool finite = true;
    std::uint64_t pixels = 0;
    std::uint64_t crf_applies = 0;
};

// Bias-corrected Adam over one segment of the flat parameter space.
inline void adam_segment(std::span<double> p, std::span<const double> g, std::span<double> m,
                         std::span<double> v, double lr, double b1, double b2, double eps,
                         std::uint64_t t) {
    const double c1 = 1.0 - std::pow(b1, double(t));
    const double c2 = 1.0 - std::pow(b2, double(t));
    for (size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1 - b1) * g[i];
        v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
}

inline double lr_at(const TrainConfig& cfg, std::uint64_t t) {
    const double frac = double(t) / double(cfg.iterations);
    return cfg.lr0 * std::pow(cfg.lr_final / cfg.lr0, frac);
}

// Scratch reused across steps.
template <typename Field>
struct TrainScratch {
    typename Field::Workspace fw;
    CrfWorkspace cw;
    std::vector<RaySampleSet> rays;
    std::vector<double> e;        // 3 * (b+1) rendered rgb
    std::vector<double> de;       // matching gradient
    std::vector<double> plane;    // clamped sensor-plane radiance, b+1
    std::vector<double> eps;      // latency coefficients
    std::vector<double> lp;       // low-passed radiance
    std::vector<double> dlp;
    std::vector<MlpWorkspace> fev_ws;
    std::vector<double> grads; // flat, aligned with TrainState::segments order
};

// Forward + backward over one pixel batch. Fills sc.grads (flat, segment
// order) and returns the batch losses; consumes rng for pixel selection and,
// in stratified mode, depth jitter. No parameter update.
template <typename Field>
StepStats compute_gradients(TrainState<Field>& st, const TrainSetup& setup,
                            const TrainConfig& cfg, TrainScratch<Field>& sc) {
    StepStats stats;
    const int b1 = cfg.b + 1;
    auto segs = st.segments();
    size_t total_params = 0;
    for (auto s : segs) total_params += s.size();
    sc.grads.assign(total_params, 0.0);
    size_t off = segs[0].size();
    std::span<double> gfield(sc.grads.data(), off);
    std::span<double> gcrf[3];
    for (int ch = 0; ch < 3; ++ch) {
        gcrf[ch] = std::span<double>(sc.grads.data() + off, segs[1 + ch].size());
        off += segs[1 + ch].size();
    }
    std::span<double> gev(sc.grads.data() + off, segs[4].size());

    sc.rays.resize(b1);
    sc.e.resize(3 * b1);
    sc.de.resize(3 * b1);
    sc.plane.resize(b1);
    sc.eps.resize(b1);
    sc.dlp.resize(b1);
    sc.fev_ws.resize(b1);

    for (int n = 0; n < cfg.batch_pixels; ++n) {
        const auto& view = setup.views[st.rng.index(setup.views.size())];
        const int px = int(st.rng.index(std::uint64_t(setup.camera.width)));
        const int py = int(st.rng.index(std::uint64_t(setup.camera.height)));

        for (int i = 0; i < b1; ++i) {
            const Ray r = generate_ray(setup.camera, view.poses[i], px, py);
            sample_depths(setup.near, setup.far, cfg.samples_per_ray, cfg.sample_mode, &st.rng,
                          sc.rays[i]);
            sc.rays[i].origin = r.origin;
            sc.rays[i].dir = r.dir;
            render_ray(st.field, sc.rays[i], &sc.e[3 * i], sc.fw);
        }

        double hdr[3];
        integrate_exposure(sc.e, view.weights, hdr);
        double ldr[3];
        crf_apply(st.crf, hdr, view.dt, ldr, sc.cw);
        ++stats.crf_applies;
        double up_ldr[3];
        for (int ch = 0; ch < 3; ++ch) {
            const double diff = ldr[ch] - view.target.at(py, px, ch);
            stats.loss_ldr += diff * diff;
            up_ldr[ch] = 2.0 * diff;
        }
        double dhdr[3];
        crf_apply_backward(st.crf, hdr, up_ldr, dhdr, gcrf, sc.cw);
        for (int i = 0; i < b1; ++i)
            for (int ch = 0; ch < 3; ++ch) sc.de[3 * i + ch] = view.weights[i] * dhdr[ch];

        if (view.has_events) {
            for (int i = 0; i < b1; ++i) {
                const double s = sensor_plane_value(&sc.e[3 * i], px, py, cfg.bayer);
                sc.plane[i] = std::max(s, kLogFloor);
                const double u = std::log(sc.plane[i]);
                double out;
                st.evmap.f_ev.forward({&u, 1}, {&out, 1}, sc.fev_ws[i]);
                // The sigmoid can underflow to 0 in deep saturation; the
                // low-pass needs strictly positive coefficients.
                sc.eps[i] = std::max(out, 1e-12);
            }
            sc.lp = lowpass_sequence(sc.plane, sc.eps);
            const auto counts = predicted_counts(sc.lp, cfg.theta, cfg.soft_counts);
            std::fill(sc.dlp.begin(), sc.dlp.end(), 0.0);
            bool any_up = false;
            for (int i = 0; i < cfg.b; ++i) {
                // The offset measures how much of each bin's first event
                // belongs to the neighboring bin, so it calibrates the
                // observed count rather than the prediction.
                const double r = counts[i] -
                                 (double(view.bins.at(i, py, px)) - view.offsets.at(i, py, px));
                stats.loss_evs += r * r;
                if (cfg.lambda > 0) {
                    const double dv = cfg.lambda * 2.0 * r / cfg.theta;
                    sc.dlp[i + 1] += dv / sc.lp[i + 1];
                    sc.dlp[i] -= dv / sc.lp[i];
                    any_up = true;
                }
            }
            if (any_up) {
                // Backward through the low-pass recursion, latency net and
                // clamped log, accumulating into the rendered-value grads.
                for (int i = cfg.b; i >= 1; --i) {
                    const double dP = sc.dlp[i];
                    if (dP != 0.0) {
                        sc.dlp[i - 1] += (1 - sc.eps[i]) * dP;
                        const double deps = (sc.plane[i] - sc.lp[i - 1]) * dP;
                        double du = 0;
                        st.evmap.f_ev.backward({&deps, 1}, gev, {&du, 1}, sc.fev_ws[i]);
                        double dplane = sc.eps[i] * dP + du / sc.plane[i];
                        const double raw = sensor_plane_value(&sc.e[3 * i], px, py, cfg.bayer);
                        if (raw >= kLogFloor) {
                            if (cfg.bayer == BayerMode::rggb) {
                                sc.de[3 * i + bayer_channel(px, py)] += dplane;
                            } else {
                                for (int ch = 0; ch < 3; ++ch) sc.de[3 * i + ch] += dplane / 3.0;
                            }
                        }
                    }
                }
                const double raw0 = sensor_plane_value(&sc.e[0], px, py, cfg.bayer);
                if (sc.dlp[0] != 0.0 && raw0 >= kLogFloor) {
                    if (cfg.bayer == BayerMode::rggb) {
                        sc.de[bayer_channel(px, py)] += sc.dlp[0];
                    } else {
                        for (int ch = 0; ch < 3; ++ch) sc.de[ch] += sc.dlp[0] / 3.0;
                    }
                }
            }
        }

        for (int i = 0; i < b1; ++i) {
            render_ray_backward(st.field, sc.rays[i], &sc.de[3 * i], gfield, sc.fw);
        }
        ++stats.pixels;
    }

    if (cfg.crf_monotone_weight > 0) {
        std::vector<double> tmp[3];
        std::span<double> tspan[3];
        for (int ch = 0; ch < 3; ++ch) {
            tmp[ch].assign(gcrf[ch].size(), 0.0);
            tspan[ch] = tmp[ch];
        }
        const double pen = crf_monotonicity_penalty(st.crf, std::log(kLogFloor), 8.0,
                                                    cfg.crf_monotone_probes, tspan);
        stats.loss_ldr += cfg.crf_monotone_weight * pen;
        for (int ch = 0; ch < 3; ++ch)
            for (size_t i = 0; i < tmp[ch].size(); ++i)
                gcrf[ch][i] += cfg.crf_monotone_weight * tmp[ch][i];
    }

    stats.loss_total = stats.loss_ldr + cfg.lambda * stats.loss_evs;
    stats.finite = std::isfinite(stats.loss_total);
    return stats;
}

// One optimization step: gradients, then bias-corrected Adam. A non-finite
// loss aborts the step leaving parameters, moments and the rng untouched.
template <typename Field>
StepStats train_step(TrainState<Field>& st, const TrainSetup& setup, const TrainConfig& cfg,
                     TrainScratch<Field>& sc) {
    const Rng rng_snapshot = st.rng;
    const StepStats stats = compute_gradients(st, setup, cfg, sc);
    if (!stats.finite) {
        st.rng = rng_snapshot;
        return stats;
    }

    const std::uint64_t t = st.iteration + 1;
    const double lr = lr_at(cfg, t);
    size_t moff = 0;
    size_t idx = 0;
    for (auto seg : st.segments()) {
        // Segments 1..3 are the response nets; they adapt much faster than
        // the sparse field gradients, so a scale below one keeps the
        // radiance/response split from drifting while the field catches up.
        const double seg_lr = (idx >= 1 && idx <= 3) ? lr * cfg.crf_lr_scale : lr;
        adam_segment(seg, std::span<const double>(sc.grads.data() + moff, seg.size()),
                     std::span<double>(st.adam_m.data() + moff, seg.size()),
                     std::span<double>(st.adam_v.data() + moff, seg.size()), seg_lr, cfg.beta1,
                     cfg.beta2, cfg.adam_eps, t);
        moff += seg.size();
        ++idx;
    }
    st.iteration = t;
    return stats;
}

// Mean tone-mapped PSNR over the held-out views; deterministic (midpoint
// sampling, no rng use).
template <typename Field>
double holdout_psnr(const TrainState<Field>& st, const TrainSetup& setup, const TrainConfig& cfg) {
    if (setup.holdout.empty()) return 0.0;
    double sum = 0;
    for (const auto& hv : setup.holdout) {
        const Imagef pred = render_image(st.field, setup.camera, hv.pose, setup.near, setup.far,
                                         cfg.samples_per_ray);
        sum += psnr(reinhard_tonemap(pred, setup.dt_eval, setup.phi),
                    reinhard_tonemap(hv.hdr_gt, setup.dt_eval, setup.phi));
    }
    return sum / double(setup.holdout.size());
}

struct MetricsLogRow {
    std::uint64_t iteration;
    double loss_total, loss_ldr, loss_evs, psnr_holdout;
};

inline void write_metrics_log(const std::string& path, std::span<const MetricsLogRow> rows) {
    auto f = open_out(path);
    f << "iteration,loss_total,loss_ldr,loss_evs,psnr_holdout\n";
    char line[192];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%llu,%.9g,%.9g,%.9g,%.6f\n",
                      (unsigned long long)r.iteration, r.loss_total, r.loss_ldr, r.loss_evs,
                      r.psnr_holdout);
        f << line;
    }
    if (!f) throw std::runtime_error("write_metrics_log: write failed: " + path);
}

struct TrainResult {
    std::vector<MetricsLogRow> log;
    std::uint64_t aborted_steps = 0;
};

template <typename Field>
TrainResult train(TrainState<Field>& st, const TrainSetup& setup, const TrainConfig& cfg,
                  bool verbose = false) {
    TrainResult res;
    TrainScratch<Field> sc;
    while (st.iteration < cfg.iterations) {
        const StepStats stats = train_step(st, setup, cfg, sc);
        if (!stats.finite) {
            ++res.aborted_steps;
            std::fprintf(stderr, "warning: non-finite loss at iteration %llu, step skipped\n",
                         (unsigned long long)(st.iteration + 1));
            if (res.aborted_steps > 50)
                throw std::runtime_error("train: too many non-finite steps, giving up");
            continue;
        }
        if (st.iteration % cfg.eval_every == 0 || st.iteration == cfg.iterations) {
            MetricsLogRow row{st.iteration, stats.loss_total, stats.loss_ldr, stats.loss_evs,
                              holdout_psnr(st, setup, cfg)};
            res.log.push_back(row);
            if (verbose)
                std::fprintf(stderr, "iter %6llu  loss %.5f  ldr %.5f  evs %.3f  psnr %.2f\n",
                             (unsigned long long)row.iteration, row.loss_total, row.loss_ldr,
                             row.loss_evs, row.psnr_holdout);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Checkpoints: one binary file, a JSON header followed by raw little-endian
// f64 parameter/moment blobs and the rng words. Lossless, so a save/load
// pair resumes bit-identically.

namespace detail {
inline void write_blob(std::ofstream& f, std::span<const double> v) {
    f.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
}
inline void read_blob(std::ifstream& f, std::span<double> v) {
    f.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint: truncated blob");
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
    return {{"iterations", c.iterations},
            {"batch_pixels", c.batch_pixels},
            {"lr0", c.lr0},
            {"lr_final", c.lr_final},
            {"crf_lr_scale", c.crf_lr_scale},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_eps", c.adam_eps},
            {"seed", c.seed},
            {"eval_every", c.eval_every},
            {"b", c.b},
            {"lambda", c.lambda},
            {"theta", c.theta},
            {"bayer", c.bayer == BayerMode::rggb ? "rggb" : "none"},
            {"use_events", c.use_events},
            {"soft_counts", c.soft_counts == SoftCountMode::straight_through ? "straight_through"
                                                                             : "linear"},
            {"weights", c.weights == WeightScheme::uniform ? "uniform" : "trapezoid"},
            {"sample_mode", c.sample_mode == SampleMode::midpoint ? "midpoint" : "stratified"},
            {"samples_per_ray", c.samples_per_ray},
            {"backend", c.backend == FieldBackend::voxel ? "voxel" : "mlp"},
            {"field_res", c.field_res},
            {"density_init", c.density_init},
            {"emission_init", c.emission_init},
            {"mlp_pos_levels", c.mlp_pos_levels},
            {"mlp_dir_levels", c.mlp_dir_levels},
            {"mlp_layers", c.mlp_layers},
            {"mlp_width", c.mlp_width},
            {"crf_widths", c.crf_widths},
            {"crf_hidden", int(c.crf_hidden)},
            {"f_ev_widths", c.f_ev_widths},
            {"f_ev_hidden", int(c.f_ev_hidden)},
            {"latency_init", c.latency_init},
            {"crf_monotone_weight", c.crf_monotone_weight},
            {"crf_monotone_probes", c.crf_monotone_probes}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.iterations = j.at("iterations").get<std::uint64_t>();
    c.batch_pixels = j.at("batch_pixels").get<int>();
    c.lr0 = j.at("lr0").get<double>();
    c.lr_final = j.at("lr_final").get<double>();
    c.crf_lr_scale = j.value("crf_lr_scale", 1.0);
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.eval_every = j.at("eval_every").get<std::uint64_t>();
    c.b = j.at("b").get<int>();
    c.lambda = j.at("lambda").get<double>();
    c.theta = j.at("theta").get<double>();
    c.bayer = j.at("bayer").get<std::string>() == "rggb" ? BayerMode::rggb : BayerMode::none;
    c.use_events = j.at("use_events").get<bool>();
    c.soft_counts = j.at("soft_counts").get<std::string>() == "linear"
                        ? SoftCountMode::linear
                        : SoftCountMode::straight_through;
    c.weights = j.at("weights").get<std::string>() == "trapezoid" ? WeightScheme::trapezoid
                                                                  : WeightScheme::uniform;
    c.sample_mode = j.at("sample_mode").get<std::string>() == "midpoint" ? SampleMode::midpoint
                                                                         : SampleMode::stratified;
    c.samples_per_ray = j.at("samples_per_ray").get<int>();
    c.backend = j.at("backend").get<std::string>() == "mlp" ? FieldBackend::mlp
                                                            : FieldBackend::voxel;
    c.field_res = j.at("field_res").get<int>();
    c.density_init = j.at("density_init").get<double>();
    c.emission_init = j.at("emission_init").get<double>();
    c.mlp_pos_levels = j.at("mlp_pos_levels").get<int>();
    c.mlp_dir_levels = j.at("mlp_dir_levels").get<int>();
    c.mlp_layers = j.at("mlp_layers").get<int>();
    c.mlp_width = j.at("mlp_width").get<int>();
    c.crf_widths = j.at("crf_widths").get<std::vector<int>>();
    c.crf_hidden = Act(j.at("crf_hidden").get<int>());
    c.f_ev_widths = j.at("f_ev_widths").get<std::vector<int>>();
    c.f_ev_hidden = Act(j.at("f_ev_hidden").get<int>());
    c.latency_init = j.value("latency_init", 0.5);
    c.crf_monotone_weight = j.at("crf_monotone_weight").get<double>();
    c.crf_monotone_probes = j.at("crf_monotone_probes").get<int>();
    return c;
}
} // namespace detail

// Environment a checkpoint must remember to render and evaluate on its own.
struct CheckpointEnv {
    Camera camera;
    double near = 0, far = 0;
    Aabb bounds;
    double exposure_time = 0;
    double phi = 62.5;
};

struct Checkpoint {
    TrainConfig cfg;
    CheckpointEnv env;
    VoxelField vox;   // valid when cfg.backend == voxel
    MlpField mlpf;    // valid when cfg.backend == mlp
    CrfField crf;
    EventMappingField evmap;
    std::vector<double> adam_m, adam_v;
    std::uint64_t iteration = 0;
    std::array<std::uint64_t, 4> rng_state{};
};

template <typename Field>
void save_checkpoint(const std::string& path, TrainState<Field>& st, const TrainConfig& cfg,
                     const CheckpointEnv& env) {
    nlohmann::json j;
    j["config"] = detail::config_to_json(cfg);
    j["camera"] = {{"width", env.camera.width}, {"height", env.camera.height},
                   {"fx", env.camera.fx},       {"fy", env.camera.fy},
                   {"cx", env.camera.cx},       {"cy", env.camera.cy}};
    j["near"] = env.near;
    j["far"] = env.far;
    j["bounds"] = {{"lo", {env.bounds.lo.x, env.bounds.lo.y, env.bounds.lo.z}},
                   {"hi", {env.bounds.hi.x, env.bounds.hi.y, env.bounds.hi.z}}};
    j["exposure_time"] = env.exposure_time;
    j["phi"] = env.phi;
    j["iteration"] = st.iteration;
    j["rng"] = st.rng.s;
    std::vector<size_t> sizes;
    for (auto s : st.segments()) sizes.push_back(s.size());
    j["segment_sizes"] = sizes;
    const std::string header = j.dump();
    auto f = open_out(path, std::ios::binary);
    f << "EVRADCKPT1\n";
    const std::uint64_t hlen = header.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(header.data(), std::streamsize(header.size()));
    for (auto s : st.segments()) detail::write_blob(f, s);
    detail::write_blob(f, st.adam_m);
    detail::write_blob(f, st.adam_v);
    if (!f) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    auto f = open_in(path, std::ios::binary);
    std::string magic;
    std::getline(f, magic);
    if (magic != "EVRADCKPT1") throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header(hlen, '\0');
    f.read(header.data(), std::streamsize(hlen));
    if (!f) throw std::runtime_error("checkpoint: truncated header in " + path);
    const auto j = nlohmann::json::parse(header);
    Checkpoint ck;
    ck.cfg = detail::config_from_json(j.at("config"));
    const auto& jc = j.at("camera");
    ck.env.camera = {jc.at("width").get<int>(), jc.at("height").get<int>(),
                     jc.at("fx").get<double>(), jc.at("fy").get<double>(),
                     jc.at("cx").get<double>(), jc.at("cy").get<double>()};
    ck.env.near = j.at("near").get<double>();
    ck.env.far = j.at("far").get<double>();
    const auto lo = j.at("bounds").at("lo").get<std::vector<double>>();
    const auto hi = j.at("bounds").at("hi").get<std::vector<double>>();
    ck.env.bounds = {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
    ck.env.exposure_time = j.at("exposure_time").get<double>();
    ck.env.phi = j.at("phi").get<double>();
    ck.iteration = j.at("iteration").get<std::uint64_t>();
    const auto rs = j.at("rng").get<std::vector<std::uint64_t>>();
    std::copy(rs.begin(), rs.end(), ck.rng_state.begin());
    const auto sizes = j.at("segment_sizes").get<std::vector<size_t>>();
    if (sizes.size() != 5) throw std::runtime_error("checkpoint: expected 5 parameter segments");

    ck.crf = CrfField(ck.cfg.crf_widths, ck.cfg.crf_hidden);
    ck.evmap = EventMappingField(ck.cfg.f_ev_widths, ck.cfg.theta, ck.cfg.f_ev_hidden);
    if (ck.cfg.backend == FieldBackend::voxel) {
        ck.vox = make_field<VoxelField>(ck.cfg, ck.env.bounds);
        if (ck.vox.params.size() != sizes[0])
            throw std::runtime_error("checkpoint: voxel grid size disagrees with header");
        detail::read_blob(f, ck.vox.params);
    } else {
        ck.mlpf = make_field<MlpField>(ck.cfg, ck.env.bounds);
        if (ck.mlpf.net.params.size() != sizes[0])
            throw std::runtime_error("checkpoint: mlp field size disagrees with header");
        detail::read_blob(f, ck.mlpf.net.params);
    }
    for (int ch = 0; ch < 3; ++ch) {
        if (ck.crf.net[ch].params.size() != sizes[1 + ch])
            throw std::runtime_error("checkpoint: response net size disagrees with header");
        detail::read_blob(f, ck.crf.net[ch].params);
    }
    if (ck.evmap.f_ev.params.size() != sizes[4])
        throw std::runtime_error("checkpoint: f_ev size disagrees with header");
    detail::read_blob(f, ck.evmap.f_ev.params);
    size_t total = 0;
    for (size_t s : sizes) total += s;
    ck.adam_m.resize(total);
    ck.adam_v.resize(total);
    detail::read_blob(f, ck.adam_m);
    detail::read_blob(f, ck.adam_v);
    return ck;
}

template <typename Field>
TrainState<Field> state_from_checkpoint(const Checkpoint& ck) {
    TrainState<Field> st;
    if constexpr (std::is_same_v<Field, VoxelField>) st.field = ck.vox;
    else st.field = ck.mlpf;
    st.crf = ck.crf;
    st.evmap = ck.evmap;
    st.adam_m = ck.adam_m;
    st.adam_v = ck.adam_v;
    st.iteration = ck.iteration;
    st.rng.s = {ck.rng_state[0], ck.rng_state[1], ck.rng_state[2], ck.rng_state[3]};
    return st;
}

} // namespace evrad
