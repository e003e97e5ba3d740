// SPDX-License-Identifier: Apache-2.0
//
// Event-sensor measurement model: ideal log-intensity counting, latency as a
// learned first-order low-pass, count prediction with a straight-through
// floor, sub-event boundary calibration offsets, and the equal-count
// division of a stream into time bins.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "image.hpp"
#include "mlp.hpp"

namespace evrad {

struct Event {
    int x = 0, y = 0;
    int p = 0; // +1 or -1
    double t = 0;
};

struct EventStream {
    std::vector<Event> events; // sorted by (t, y, x)
};

inline void sort_event_stream(std::vector<Event>& ev) {
    std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
}

inline void validate_event(const Event& e, int width, int height) {
    if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height)
        throw std::invalid_argument("event: coordinates outside sensor");
    if (e.p != 1 && e.p != -1) throw std::invalid_argument("event: polarity must be +1 or -1");
    if (!(e.t >= 0) || !std::isfinite(e.t)) throw std::invalid_argument("event: bad timestamp");
}

// Integer part toward zero, as a signed count.
inline long long floor_toward_zero(double v) { return static_cast<long long>(std::trunc(v)); }

// Signed number of whole threshold crossings between two radiance levels.
inline long long ideal_event_count(double l1, double l2, double theta) {
    if (!(l1 > 0) || !(l2 > 0)) throw std::invalid_argument("ideal_event_count: radiance must be positive");
    if (!(theta > 0)) throw std::invalid_argument("ideal_event_count: threshold must be positive");
    return floor_toward_zero((std::log(l2) - std::log(l1)) / theta);
}

// ---------------------------------------------------------------------------
// Bayer handling. Pattern anchored at (0,0) = R:
//   R at (even y, even x), G at (even,odd) and (odd,even), B at (odd,odd).

enum class BayerMode : std::uint8_t { rggb, none };

inline int bayer_channel(int x, int y) {
    const bool ex = (x % 2) == 0, ey = (y % 2) == 0;
    if (ex && ey) return 0;
    if (!ex && !ey) return 2;
    return 1;
}

// Scalar radiance the event sensor observes at a pixel: the mosaiced channel
// under rggb, the channel mean otherwise.
inline double sensor_plane_value(const double rgb[3], int x, int y, BayerMode mode) {
    if (mode == BayerMode::rggb) return rgb[bayer_channel(x, y)];
    return (rgb[0] + rgb[1] + rgb[2]) / 3.0;
}

// Collapses an RGB image to the single mosaiced plane.
inline Imagef bayer_adapt(const Imagef& rgb, BayerMode mode) {
    if (rgb.channels != 3) throw std::invalid_argument("bayer_adapt: need an RGB image");
    Imagef out(rgb.width, rgb.height, 1);
    for (int y = 0; y < rgb.height; ++y)
        for (int x = 0; x < rgb.width; ++x) {
            const double px[3] = {rgb.at(y, x, 0), rgb.at(y, x, 1), rgb.at(y, x, 2)};
            out.at(y, x, 0) = float(sensor_plane_value(px, x, y, mode));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Stream division and binned count targets.

// Splits [t_start, t_end] into b bins. With at least b events (inside the
// window) the interior boundaries sit at midpoints between consecutive
// events so per-bin counts differ by at most one, earlier bins taking the
// remainder. With fewer events the division is uniform in time.
inline std::vector<double> divide_events(const EventStream& stream, double t_start, double t_end,
                                         int b) {
    if (b < 1) throw std::invalid_argument("divide_events: need b >= 1");
    if (!(t_end > t_start)) throw std::invalid_argument("divide_events: need t_end > t_start");
    std::vector<double> times;
    times.reserve(stream.events.size());
    for (const Event& e : stream.events)
        if (e.t >= t_start && e.t <= t_end) times.push_back(e.t);
    std::sort(times.begin(), times.end());
    std::vector<double> bounds(size_t(b) + 1);
    bounds.front() = t_start;
    bounds.back() = t_end;
    const size_t n = times.size();
    if (n < size_t(b)) {
        for (int i = 1; i < b; ++i) bounds[i] = t_start + (t_end - t_start) * i / b;
        return bounds;
    }
    // Bins 0..rem-1 hold base+1 events, the rest hold base.
    const size_t base = n / b, rem = n % b;
    size_t cum = 0;
    for (int i = 1; i < b; ++i) {
        cum += base + (size_t(i - 1) < rem ? 1 : 0);
        double bd = 0.5 * (times[cum - 1] + times[cum]);
        // Keep boundaries strictly increasing even with duplicate timestamps.
        if (bd <= bounds[i - 1]) bd = std::nextafter(bounds[i - 1], t_end);
        bounds[i] = bd;
    }
    if (bounds[b - 1] >= t_end)
        throw std::runtime_error("divide_events: degenerate stream, boundaries collapse");
    return bounds;
}

// Signed event counts per (bin, pixel) for t in [t_i, t_{i+1}).
struct BinGrid {
    int bins = 0, width = 0, height = 0;
    std::vector<std::int32_t> counts;

    BinGrid() = default;
    BinGrid(int b, int w, int h) : bins(b), width(w), height(h), counts(size_t(b) * w * h, 0) {}
    std::int32_t& at(int bin, int y, int x) {
        return counts[(size_t(bin) * height + y) * width + x];
    }
    std::int32_t at(int bin, int y, int x) const {
        return counts[(size_t(bin) * height + y) * width + x];
    }
};

inline BinGrid build_bin_grid(const EventStream& stream, std::span<const double> bounds, int width,
                              int height) {
    if (bounds.size() < 2) throw std::invalid_argument("build_bin_grid: need at least one bin");
    const int b = int(bounds.size()) - 1;
    BinGrid grid(b, width, height);
    for (const Event& e : stream.events) {
        validate_event(e, width, height);
        if (e.t < bounds.front() || e.t >= bounds.back()) continue;
        const auto it = std::upper_bound(bounds.begin(), bounds.end(), e.t);
        const int bin = int(it - bounds.begin()) - 1;
        grid.at(bin, e.y, e.x) += e.p;
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Calibration offsets (sub-event boundary misattribution), precomputed per
// pixel per bin; no gradients flow through them.
//
// For g_j = phi((t_j - t_last^{j-1}) / (t_first^j - t_last^{j-1})) * p_first^j,
// the offset of bin i is h_i = g_i - g_{i+1}. A g_j vanishes when bin j has
// no events (or j is out of range); phi falls back to 0.5 when the previous
// bin offers no reference event.

struct OffsetGrid {
    int bins = 0, width = 0, height = 0;
    std::vector<double> h;

    OffsetGrid() = default;
    OffsetGrid(int b, int w, int h_) : bins(b), width(w), height(h_), h(size_t(b) * w * h_, 0.0) {}
    double& at(int bin, int y, int x) { return h[(size_t(bin) * height + y) * width + x]; }
    double at(int bin, int y, int x) const { return h[(size_t(bin) * height + y) * width + x]; }
};

// Offsets for one pixel whose events (time, polarity) are time-sorted.
inline std::vector<double> calibration_offsets_for_pixel(
    std::span<const std::pair<double, int>> pixel_events, std::span<const double> bounds) {
    const int b = int(bounds.size()) - 1;
    if (b < 1) throw std::invalid_argument("calibration_offsets: need at least one bin");
    // First/last event index per bin, -1 when empty.
    std::vector<int> first(b, -1), last(b, -1);
    for (size_t k = 0; k < pixel_events.size(); ++k) {
        const double t = pixel_events[k].first;
        if (t < bounds.front() || t >= bounds.back()) continue;
        const auto it = std::upper_bound(bounds.begin(), bounds.end(), t);
        const int bin = int(it - bounds.begin()) - 1;
        if (first[bin] < 0) first[bin] = int(k);
        last[bin] = int(k);
    }
    auto g = [&](int j) -> double {
        if (j < 0 || j >= b || first[j] < 0) return 0.0;
        const double t_first = pixel_events[first[j]].first;
        const int p_first = pixel_events[first[j]].second;
        double phi = 0.5;
        if (j >= 1 && last[j - 1] >= 0) {
            const double t_prev_last = pixel_events[last[j - 1]].first;
            const double denom = t_first - t_prev_last;
            if (denom > 0) phi = (bounds[j] - t_prev_last) / denom;
        }
        return phi * p_first;
    };
    std::vector<double> h(b);
    for (int i = 0; i < b; ++i) h[i] = g(i) - g(i + 1);
    return h;
}

// Offsets for a single pixel straight from a stream (test/diagnostic path).
inline std::vector<double> calibration_offset(const EventStream& stream,
                                              std::span<const double> bounds, int px, int py) {
    std::vector<std::pair<double, int>> pe;
    for (const Event& e : stream.events)
        if (e.x == px && e.y == py) pe.emplace_back(e.t, e.p);
    std::sort(pe.begin(), pe.end());
    return calibration_offsets_for_pixel(pe, bounds);
}

// Offsets for every pixel; one pass to bucket events per pixel.
inline OffsetGrid compute_offset_grid(const EventStream& stream, std::span<const double> bounds,
                                      int width, int height) {
    const int b = int(bounds.size()) - 1;
    OffsetGrid grid(b, width, height);
    std::vector<std::vector<std::pair<double, int>>> per_pixel(size_t(width) * height);
    for (const Event& e : stream.events) {
        validate_event(e, width, height);
        per_pixel[size_t(e.y) * width + e.x].emplace_back(e.t, e.p);
    }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            auto& pe = per_pixel[size_t(y) * width + x];
            if (pe.empty()) continue;
            std::sort(pe.begin(), pe.end());
            const auto h = calibration_offsets_for_pixel(pe, bounds);
            for (int i = 0; i < b; ++i) grid.at(i, y, x) = h[i];
        }
    return grid;
}

// ---------------------------------------------------------------------------
// Latency field and count prediction.

// Learned event mapping: one scalar MLP produces the low-pass coefficient
// from log radiance, plus the fixed contrast threshold.
struct EventMappingField {
    Mlp f_ev; // 1 -> 1, sigmoid output, so coefficients lie in (0, 1)
    double theta = 0.2;

    EventMappingField() = default;
    EventMappingField(const std::vector<int>& widths, double theta_, Act hidden_act = Act::relu)
        : f_ev(widths, hidden_act, Act::sigmoid), theta(theta_) {
        if (widths.front() != 1 || widths.back() != 1)
            throw std::invalid_argument("EventMappingField: f_ev must map one scalar to one scalar");
        if (!(theta > 0)) throw std::invalid_argument("EventMappingField: theta must be positive");
    }
};

inline double latency_coefficient(const EventMappingField& field, double radiance,
                                  MlpWorkspace& ws) {
    if (!(radiance >= 0) || !std::isfinite(radiance))
        throw std::invalid_argument("latency_coefficient: radiance must be finite and non-negative");
    const double u = std::log(std::max(radiance, kLogFloor));
    return field.f_ev.eval1(u, ws);
}

// First-order low-pass over a radiance sequence: state starts at the first
// element, then L_i = (1 - eps_i) L_{i-1} + eps_i E_i.
inline std::vector<double> lowpass_sequence(std::span<const double> radiance,
                                            std::span<const double> eps) {
    if (radiance.empty()) throw std::invalid_argument("lowpass_sequence: empty sequence");
    if (eps.size() != radiance.size())
        throw std::invalid_argument("lowpass_sequence: coefficient count mismatch");
    for (double e : eps)
        if (!(e > 0) || e > 1) throw std::invalid_argument("lowpass_sequence: eps must be in (0, 1]");
    std::vector<double> out(radiance.size());
    out[0] = radiance[0];
    for (size_t i = 1; i < radiance.size(); ++i)
        out[i] = (1 - eps[i]) * out[i - 1] + eps[i] * radiance[i];
    return out;
}

enum class SoftCountMode : std::uint8_t { straight_through, linear };

// Per-bin model counts from the low-passed radiance at the b+1 boundary
// times. straight_through floors the forward value toward zero while its
// backward treats the floor as identity; linear keeps the raw ratio.
inline std::vector<double> predicted_counts(std::span<const double> lowpassed, double theta,
                                            SoftCountMode mode) {
    if (lowpassed.size() < 2) throw std::invalid_argument("predicted_counts: need at least two samples");
    if (!(theta > 0)) throw std::invalid_argument("predicted_counts: threshold must be positive");
    for (double v : lowpassed)
        if (!(v > 0)) throw std::invalid_argument("predicted_counts: radiance must be positive");
    std::vector<double> out(lowpassed.size() - 1);
    for (size_t i = 0; i + 1 < lowpassed.size(); ++i) {
        const double v = (std::log(lowpassed[i + 1]) - std::log(lowpassed[i])) / theta;
        out[i] = mode == SoftCountMode::straight_through ? double(floor_toward_zero(v)) : v;
    }
    return out;
}

// Measurement-aligned counts: predicted minus the precomputed offsets.
inline std::vector<double> calibrated_counts(std::span<const double> predicted,
                                             std::span<const double> offsets) {
    if (predicted.size() != offsets.size())
        throw std::invalid_argument("calibrated_counts: size mismatch");
    std::vector<double> out(predicted.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = predicted[i] - offsets[i];
    return out;
}

} // namespace evrad
