// SPDX-License-Identifier: Apache-2.0
//
// Learned per-channel camera response: three independent scalar MLPs with
// sigmoid outputs, applied to log exposure ln(radiance * exposure_time).
// Applied once per pixel, after exposure integration.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "mlp.hpp"

namespace evrad {

struct CrfField {
    Mlp net[3]; // r, g, b

    CrfField() = default;
    explicit CrfField(const std::vector<int>& widths, Act hidden_act = Act::relu) {
        if (widths.front() != 1 || widths.back() != 1)
            throw std::invalid_argument("CrfField: nets must map one scalar to one scalar");
        for (auto& n : net) n = Mlp(widths, hidden_act, Act::sigmoid);
    }

    void init(Rng& rng) {
        for (auto& n : net) n.init(rng);
    }

    size_t param_count_per_channel() const { return net[0].param_count(); }
};

struct CrfWorkspace {
    MlpWorkspace mw[3];
    double u[3] = {0, 0, 0};     // log exposure per channel
    bool clamped[3] = {false, false, false};
};

// ldr_c = net_c(ln(max(raw_c * dt, floor))). Raw values must be finite and
// non-negative; output lies in (0, 1) by construction.
inline void crf_apply(const CrfField& crf, const double raw[3], double dt, double ldr[3],
                      CrfWorkspace& ws) {
    if (!(dt > 0)) throw std::invalid_argument("crf_apply: exposure time must be positive");
    for (int ch = 0; ch < 3; ++ch) {
        if (!(raw[ch] >= 0) || !std::isfinite(raw[ch]))
            throw std::invalid_argument("crf_apply: raw radiance must be finite and non-negative");
        const double x = raw[ch] * dt;
        ws.clamped[ch] = x < kLogFloor;
        ws.u[ch] = std::log(ws.clamped[ch] ? kLogFloor : x);
        double out;
        crf.net[ch].forward({&ws.u[ch], 1}, {&out, 1}, ws.mw[ch]);
        ldr[ch] = out;
    }
}

// Backward for the ws state left by crf_apply. Accumulates per-channel net
// gradients into grad_net[ch] and writes d(loss)/d(raw) to raw_grad. Where
// the log floor clamped, the raw gradient is zero.
inline void crf_apply_backward(const CrfField& crf, const double raw[3],
                               const double upstream[3], double raw_grad[3],
                               std::span<double> grad_net[3], CrfWorkspace& ws) {
    for (int ch = 0; ch < 3; ++ch) {
        double in_grad = 0;
        crf.net[ch].backward({&upstream[ch], 1}, grad_net[ch], {&in_grad, 1}, ws.mw[ch]);
        // d u / d raw = 1 / raw on the unclamped branch.
        raw_grad[ch] = ws.clamped[ch] ? 0.0 : in_grad / raw[ch];
    }
}

struct CrfSample {
    double log_exposure;
    double rgb[3];
};

// Samples the response curves at n evenly spaced log exposures across
// [lo, hi], the export format consumed by the curve writer.
inline std::vector<CrfSample> crf_export(const CrfField& crf, double lo, double hi, int n) {
    if (n < 2) throw std::invalid_argument("crf_export: need at least two samples");
    if (!(lo < hi)) throw std::invalid_argument("crf_export: need lo < hi");
    std::vector<CrfSample> rows(n);
    MlpWorkspace mw;
    for (int i = 0; i < n; ++i) {
        const double u = lo + (hi - lo) * i / (n - 1);
        rows[i].log_exposure = u;
        for (int ch = 0; ch < 3; ++ch) rows[i].rgb[ch] = crf.net[ch].eval1(u, mw);
    }
    return rows;
}

// Soft penalty on decreasing stretches of the exported curve: sum of squared
// negative finite-difference slopes at n probe points. Off unless the
// trainer enables a positive weight. Accumulates gradients when buffers are
// provided.
inline double crf_monotonicity_penalty(const CrfField& crf, double lo, double hi, int n,
                                       std::span<double> grad_net[3]) {
    if (n < 2) throw std::invalid_argument("crf_monotonicity_penalty: need at least two probes");
    const double du = (hi - lo) / (n - 1);
    double total = 0;
    MlpWorkspace mw_a, mw_b;
    for (int ch = 0; ch < 3; ++ch) {
        for (int i = 0; i + 1 < n; ++i) {
            double ua = lo + du * i, ub = ua + du;
            double fa, fb;
            crf.net[ch].forward({&ua, 1}, {&fa, 1}, mw_a);
            crf.net[ch].forward({&ub, 1}, {&fb, 1}, mw_b);
            const double slope = (fb - fa) / du;
            if (slope >= 0) continue;
            total += slope * slope;
            if (!grad_net[ch].empty()) {
                const double up_b = 2 * slope / du;
                const double up_a = -up_b;
                crf.net[ch].backward({&up_b, 1}, grad_net[ch], {}, mw_b);
                crf.net[ch].backward({&up_a, 1}, grad_net[ch], {}, mw_a);
            }
        }
    }
    return total;
}

} // namespace evrad
