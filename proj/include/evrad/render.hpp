// SPDX-License-Identifier: Apache-2.0
//
// Emission-absorption volume rendering along rays, plus the weighted
// time-sample integration that models one photographic exposure.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "camera.hpp"
#include "field.hpp"
#include "image.hpp"
#include "rng.hpp"

namespace evrad {

enum class SampleMode : std::uint8_t { midpoint, stratified };
enum class WeightScheme : std::uint8_t { uniform, trapezoid };

struct RaySampleSet {
    Vec3 origin;
    Vec3 dir; // unit length
    std::vector<double> depths; // strictly increasing, in [near, far)
    std::vector<double> deltas; // deltas[i] = depths[i+1] - depths[i]; last closes to far
};

// Depth placement over [near, far) with n equal bins: bin midpoints, or one
// uniform draw per bin (stratified).
inline void sample_depths(double near, double far, int n, SampleMode mode, Rng* rng,
                          RaySampleSet& out) {
    if (!(near >= 0 && far > near))
        throw std::invalid_argument("sample_depths: need 0 <= near < far");
    if (n <= 0) throw std::invalid_argument("sample_depths: non-positive sample count");
    if (mode == SampleMode::stratified && rng == nullptr)
        throw std::invalid_argument("sample_depths: stratified mode needs an rng");
    const double w = (far - near) / n;
    out.depths.resize(n);
    out.deltas.resize(n);
    for (int i = 0; i < n; ++i) {
        const double u = mode == SampleMode::midpoint ? 0.5 : rng->uniform();
        out.depths[i] = near + (i + u) * w;
    }
    for (int i = 0; i + 1 < n; ++i) out.deltas[i] = out.depths[i + 1] - out.depths[i];
    out.deltas[n - 1] = far - out.depths[n - 1];
}

// E = sum_i T_i (1 - exp(-sigma_i delta_i)) e_i with T_1 = 1 and
// T_i = exp(-sum_{j<i} sigma_j delta_j). Optionally records per-sample
// transmittance for diagnostics.
template <typename Field>
void render_ray(const Field& field, const RaySampleSet& s, double e_out[3],
                typename Field::Workspace& ws, std::vector<double>* transmittance = nullptr) {
    double T = 1.0;
    e_out[0] = e_out[1] = e_out[2] = 0.0;
    if (transmittance) transmittance->clear();
    double e[3], sigma;
    for (size_t i = 0; i < s.depths.size(); ++i) {
        if (transmittance) transmittance->push_back(T);
        const Vec3 p = s.origin + s.dir * s.depths[i];
        field.query(p, s.dir, e, sigma, ws);
        const double att = std::exp(-sigma * s.deltas[i]);
        const double alpha = 1.0 - att;
        for (int ch = 0; ch < 3; ++ch) e_out[ch] += T * alpha * e[ch];
        T *= att;
    }
}

// Accumulates d(upstream . E)/dparams into grad. Recomputes the forward pass
// to obtain per-sample radiance and opacity, then sweeps backward carrying
// the suffix sum_{j>i} T_j alpha_j e_j needed for the density gradient.
template <typename Field>
void render_ray_backward(const Field& field, const RaySampleSet& s, const double upstream[3],
                         std::span<double> grad, typename Field::Workspace& ws) {
    const size_t n = s.depths.size();
    std::vector<double> sig(n), em(3 * n), trans(n);
    double T = 1.0;
    double e[3], sigma;
    for (size_t i = 0; i < n; ++i) {
        trans[i] = T;
        const Vec3 p = s.origin + s.dir * s.depths[i];
        field.query(p, s.dir, e, sigma, ws);
        sig[i] = sigma;
        for (int ch = 0; ch < 3; ++ch) em[3 * i + ch] = e[ch];
        T *= std::exp(-sigma * s.deltas[i]);
    }
    double suffix[3] = {0, 0, 0};
    for (size_t i = n; i-- > 0;) {
        const double att = std::exp(-sig[i] * s.deltas[i]);
        const double alpha = 1.0 - att;
        double up_e[3];
        double up_dot_e = 0, up_dot_suffix = 0;
        for (int ch = 0; ch < 3; ++ch) {
            up_e[ch] = upstream[ch] * trans[i] * alpha;
            up_dot_e += upstream[ch] * em[3 * i + ch];
            up_dot_suffix += upstream[ch] * suffix[ch];
        }
        const double up_sigma = s.deltas[i] * (trans[i] * att * up_dot_e - up_dot_suffix);
        const Vec3 p = s.origin + s.dir * s.depths[i];
        field.query_backward(p, s.dir, up_e, up_sigma, grad, ws);
        for (int ch = 0; ch < 3; ++ch) suffix[ch] += trans[i] * alpha * em[3 * i + ch];
    }
}

// Quadrature weights for time samples inside one exposure. `uniform` gives
// 1/(b+1); `trapezoid` weights interior samples by half the span of their
// neighbors, normalized to sum 1.
inline std::vector<double> exposure_weights(std::span<const double> times, WeightScheme scheme) {
    if (times.empty()) throw std::invalid_argument("exposure_weights: empty time list");
    for (size_t i = 0; i + 1 < times.size(); ++i)
        if (!(times[i] < times[i + 1]))
            throw std::invalid_argument("exposure_weights: times must be strictly increasing");
    const size_t n = times.size();
    std::vector<double> w(n);
    if (n == 1 || scheme == WeightScheme::uniform) {
        for (auto& v : w) v = 1.0 / double(n);
        return w;
    }
    w[0] = 0.5 * (times[1] - times[0]);
    w[n - 1] = 0.5 * (times[n - 1] - times[n - 2]);
    for (size_t i = 1; i + 1 < n; ++i) w[i] = 0.5 * (times[i + 1] - times[i - 1]);
    double sum = 0;
    for (double v : w) sum += v;
    for (auto& v : w) v /= sum;
    return w;
}

// Blurred HDR pixel estimate: weighted sum of per-time radiances.
inline void integrate_exposure(std::span<const double> e_list, std::span<const double> weights,
                               double out[3]) {
    if (e_list.size() != 3 * weights.size())
        throw std::invalid_argument("integrate_exposure: size mismatch");
    out[0] = out[1] = out[2] = 0;
    for (size_t i = 0; i < weights.size(); ++i)
        for (int ch = 0; ch < 3; ++ch) out[ch] += weights[i] * e_list[3 * i + ch];
}

// Full-frame HDR render at one pose. Midpoint depth placement, so the result
// is deterministic; pixels are independent.
template <typename Field>
Imagef render_image(const Field& field, const Camera& cam, const Mat4& c2w, double near,
                    double far, int samples_per_ray) {
    cam.validate();
    Imagef img(cam.width, cam.height, 3);
    typename Field::Workspace ws;
    RaySampleSet s;
    sample_depths(near, far, samples_per_ray, SampleMode::midpoint, nullptr, s);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const Ray r = generate_ray(cam, c2w, x, y);
            s.origin = r.origin;
            s.dir = r.dir;
            double e[3];
            render_ray(field, s, e, ws);
            for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = float(e[ch]);
        }
    return img;
}

} // namespace evrad
