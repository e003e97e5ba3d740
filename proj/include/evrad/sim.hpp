// SPDX-License-Identifier: Apache-2.0
//
// Forward measurement simulator: sharp HDR frame sequences along the
// intra-exposure trajectory, pixelwise blur synthesis, fixed tone mapping
// and 8-bit quantization for the LDR branch, and per-pixel
// integrate-and-fire event generation with residual carrying on the
// mosaiced plane. Bit-deterministic for a fixed seed.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "camera.hpp"
#include "events.hpp"
#include "field.hpp"
#include "image.hpp"
#include "render.hpp"
#include "rng.hpp"
#include "tonemap.hpp"

namespace evrad {

// Latency coefficient profile used when synthesizing events. `constant`
// uses a fixed coefficient; `logistic` lets the coefficient fall toward
// `floor` in dark regions: eps(E) = floor + (1-floor) * sigmoid(gain * (ln E - center)).
struct LatencyProfile {
    enum class Mode : std::uint8_t { constant, logistic } mode = Mode::constant;
    double value = 1.0;  // constant mode
    double floor = 0.05; // logistic mode parameters
    double center = -2.0;
    double gain = 1.5;

    double eval(double radiance) const {
        if (mode == Mode::constant) return value;
        const double u = std::log(std::max(radiance, kLogFloor));
        return floor + (1.0 - floor) * sigmoid(gain * (u - center));
    }

    void validate() const {
        if (mode == Mode::constant) {
            if (!(value > 0) || value > 1)
                throw std::invalid_argument("LatencyProfile: constant value must be in (0, 1]");
        } else if (!(floor > 0) || floor > 1) {
            throw std::invalid_argument("LatencyProfile: floor must be in (0, 1]");
        }
    }
};

struct SimConfig {
    int b_sim = 16;            // frames per exposure = b_sim + 1
    int event_refine = 4;      // event-branch subdivisions per blur interval
    double theta_sim = 0.2;    // contrast threshold, log units
    double phi = 62.5;         // tone-map scale
    double spurious_rate = 0;  // spurious events per pixel per second
    int samples_per_ray = 64;
    BayerMode bayer = BayerMode::rggb;
    LatencyProfile latency;
    std::uint64_t seed = 1;

    void validate() const {
        if (b_sim < 1) throw std::invalid_argument("SimConfig: need b_sim >= 1");
        if (event_refine < 1) throw std::invalid_argument("SimConfig: need event_refine >= 1");
        if (!(theta_sim > 0)) throw std::invalid_argument("SimConfig: theta_sim must be positive");
        if (!(phi > 0)) throw std::invalid_argument("SimConfig: phi must be positive");
        if (spurious_rate < 0) throw std::invalid_argument("SimConfig: negative spurious rate");
        if (samples_per_ray < 1) throw std::invalid_argument("SimConfig: need samples per ray");
        latency.validate();
    }
};

// Ground-truth content: a frozen voxel field.
struct GroundTruthScene {
    VoxelField field;
    double near = 0.5, far = 5.0;
};

// Everything the simulator produces for one training view.
struct ExposureBlock {
    Camera camera;
    double t_start = 0, t_end = 0;
    std::vector<TimedPose> poses; // b_sim + 1 timed poses
    Imagef blur_hdr;              // pixelwise mean of the sharp frames
    Imageb ldr;                   // quantized tone-mapped blur
    EventStream events;
    TimedPose ref_pose;  // mid-exposure reference
    Imagef gt_sharp_hdr; // sharp HDR at the reference pose (held out)
};

template <typename Field>
std::vector<Imagef> render_sharp_sequence(const Field& field, const Camera& cam,
                                          std::span<const TimedPose> poses, double near,
                                          double far, int samples_per_ray) {
    std::vector<Imagef> frames;
    frames.reserve(poses.size());
    for (const auto& p : poses)
        frames.push_back(render_image(field, cam, p.c2w, near, far, samples_per_ray));
    return frames;
}

// Pixelwise mean over the frame stack.
inline Imagef synthesize_blur(std::span<const Imagef> frames) {
    if (frames.empty()) throw std::invalid_argument("synthesize_blur: no frames");
    Imagef out(frames[0].width, frames[0].height, frames[0].channels);
    for (const auto& f : frames) {
        if (!f.same_shape(out)) throw std::invalid_argument("synthesize_blur: shape mismatch");
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += f.data[i];
    }
    for (auto& v : out.data) v = float(v / double(frames.size()));
    return out;
}

// Integrate-and-fire event synthesis over the mosaiced radiance plane.
// Every pixel keeps a low-passed radiance state and a log-domain reference;
// each frame-to-frame log change of at least theta emits events whose
// timestamps interpolate the inter-frame interval uniformly, and the
// reference advances by the emitted whole number of thresholds so residual
// change carries over. Spurious events arrive as a seeded per-pixel process.
inline EventStream simulate_events(std::span<const Imagef> frames, std::span<const double> times,
                                   const SimConfig& cfg) {
    cfg.validate();
    if (frames.size() != times.size() || frames.size() < 2)
        throw std::invalid_argument("simulate_events: need one frame per time, at least two");
    for (size_t i = 0; i + 1 < times.size(); ++i)
        if (!(times[i] < times[i + 1]))
            throw std::invalid_argument("simulate_events: times must be strictly increasing");
    const int w = frames[0].width, h = frames[0].height;
    EventStream out;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto plane = [&](size_t j) {
                const double rgb[3] = {frames[j].at(y, x, 0), frames[j].at(y, x, 1),
                                       frames[j].at(y, x, 2)};
                return sensor_plane_value(rgb, x, y, cfg.bayer);
            };
            double state = plane(0);
            double ref = std::log(std::max(state, kLogFloor));
            for (size_t j = 1; j < frames.size(); ++j) {
                const double incoming = plane(j);
                const double eps = cfg.latency.eval(incoming);
                state = (1 - eps) * state + eps * incoming;
                const double cur = std::log(std::max(state, kLogFloor));
                const long long k = floor_toward_zero((cur - ref) / cfg.theta_sim);
                if (k != 0) {
                    const long long count = k > 0 ? k : -k;
                    const int pol = k > 0 ? 1 : -1;
                    for (long long e = 0; e < count; ++e) {
                        const double frac = double(e + 1) / double(count + 1);
                        out.events.push_back(
                            {x, y, pol, times[j - 1] + frac * (times[j] - times[j - 1])});
                    }
                    ref += double(k) * cfg.theta_sim;
                }
            }
            if (cfg.spurious_rate > 0) {
                Rng pix(mix_seed(cfg.seed, (std::uint64_t(y) << 20) | std::uint64_t(x)));
                double t = times.front() + pix.exponential(cfg.spurious_rate);
                while (t < times.back()) {
                    out.events.push_back({x, y, pix.uniform() < 0.5 ? 1 : -1, t});
                    t += pix.exponential(cfg.spurious_rate);
                }
            }
        }
    sort_event_stream(out.events);
    return out;
}

// Simulates one training view: frames at b_sim+1 uniformly spaced times
// across the exposure, blur + tone map + quantize for the LDR branch,
// events from a finer interpolation of the same trajectory, and the
// held-out sharp reference render. The event branch subdivides each blur
// interval `event_refine` times so that a render at any interpolated pose
// stays consistent with the emitted stream; edge pixels sweep through
// several thresholds inside one blur interval even when the endpoints sit
// at similar levels.
template <typename Field>
ExposureBlock simulate_view(const Field& field, const Camera& cam,
                            std::span<const TimedPose> poses, const TimedPose& ref_pose,
                            double near, double far, const SimConfig& cfg) {
    cfg.validate();
    if (int(poses.size()) != cfg.b_sim + 1)
        throw std::invalid_argument("simulate_view: need b_sim + 1 poses");
    ExposureBlock blk;
    blk.camera = cam;
    blk.t_start = poses.front().t;
    blk.t_end = poses.back().t;
    blk.poses.assign(poses.begin(), poses.end());
    blk.ref_pose = ref_pose;
    const auto frames = render_sharp_sequence(field, cam, poses, near, far, cfg.samples_per_ray);
    blk.blur_hdr = synthesize_blur(frames);
    const double dt = blk.t_end - blk.t_start;
    blk.ldr = quantize8(reinhard_tonemap(blk.blur_hdr, dt, cfg.phi));
    std::vector<Imagef> event_frames;
    std::vector<double> event_times;
    for (size_t j = 0; j + 1 < poses.size(); ++j)
        for (int s = 0; s < cfg.event_refine; ++s) {
            const double u = double(s) / cfg.event_refine;
            const double t = poses[j].t + u * (poses[j + 1].t - poses[j].t);
            event_times.push_back(t);
            if (s == 0)
                event_frames.push_back(frames[j]);
            else
                event_frames.push_back(render_image(field, cam, interpolate_pose(poses, t), near,
                                                    far, cfg.samples_per_ray));
        }
    event_times.push_back(poses.back().t);
    event_frames.push_back(frames.back());
    blk.events = simulate_events(event_frames, event_times, cfg);
    blk.gt_sharp_hdr = render_image(field, cam, ref_pose.c2w, near, far, cfg.samples_per_ray);
    return blk;
}

} // namespace evrad
