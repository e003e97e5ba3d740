// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode core for small fixed-topology MLPs. Backward passes
// are hand-derived; finite_diff_check is the reference oracle for every
// gradient path built on top of this file. All arithmetic is double.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "math.hpp"
#include "rng.hpp"

namespace evrad {

enum class Act : std::uint8_t { identity, relu, sigmoid, tanh_fn, softplus };

inline double act_eval(Act a, double z) {
    switch (a) {
        case Act::identity: return z;
        case Act::relu: return z > 0 ? z : 0.0;
        case Act::sigmoid: return sigmoid(z);
        case Act::tanh_fn: return std::tanh(z);
        case Act::softplus: return softplus(z);
    }
    return z;
}

// Derivative with respect to the pre-activation z. relu takes slope 0 at z=0.
inline double act_deriv(Act a, double z) {
    switch (a) {
        case Act::identity: return 1.0;
        case Act::relu: return z > 0 ? 1.0 : 0.0;
        case Act::sigmoid: {
            const double s = sigmoid(z);
            return s * (1.0 - s);
        }
        case Act::tanh_fn: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Act::softplus: return softplus_deriv(z);
    }
    return 1.0;
}

// Flat gradient accumulator aligned with a parameter vector.
struct GradBuffer {
    std::vector<double> g;

    void reset(size_t n) { g.assign(n, 0.0); }
    void add(const GradBuffer& o) {
        if (o.g.size() != g.size()) throw std::invalid_argument("GradBuffer::add: size mismatch");
        for (size_t i = 0; i < g.size(); ++i) g[i] += o.g[i];
    }
};

// Sinusoidal feature expansion. Output order: for each input component x_k,
// for each level m = 0..levels: sin(2^m pi x_k), cos(2^m pi x_k).
inline void positional_encode(std::span<const double> x, int levels, std::vector<double>& out) {
    if (levels < 0) throw std::invalid_argument("positional_encode: negative level count");
    out.clear();
    out.reserve(x.size() * 2 * size_t(levels + 1));
    constexpr double pi = 3.14159265358979323846;
    for (double xk : x) {
        double f = pi;
        for (int m = 0; m <= levels; ++m) {
            out.push_back(std::sin(f * xk));
            out.push_back(std::cos(f * xk));
            f *= 2.0;
        }
    }
}

inline size_t positional_encode_size(size_t input_len, int levels) {
    return input_len * 2 * size_t(levels + 1);
}

struct MlpWorkspace {
    // Per layer: input activations and pre-activations, kept for backward.
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> pre;
    std::vector<double> delta, delta_prev;
};

// Fully connected network with one flat parameter vector. Per-layer layout:
// weights (w_out x w_in, row-major) followed by biases (w_out), layers in
// order. GradBuffers and the optimizer index into the same layout.
struct Mlp {
    std::vector<int> widths; // e.g. {3, 64, 64, 4}
    Act hidden = Act::relu;
    Act output = Act::identity;
    std::vector<double> params;

    Mlp() = default;
    Mlp(std::vector<int> w, Act h, Act o) : widths(std::move(w)), hidden(h), output(o) {
        if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least one layer");
        for (int v : widths)
            if (v <= 0) throw std::invalid_argument("Mlp: non-positive width");
        params.assign(param_count(), 0.0);
    }

    size_t layer_count() const { return widths.size() - 1; }

    size_t param_count() const {
        size_t n = 0;
        for (size_t l = 0; l + 1 < widths.size(); ++l)
            n += size_t(widths[l]) * widths[l + 1] + widths[l + 1];
        return n;
    }

    size_t layer_offset(size_t layer) const {
        size_t n = 0;
        for (size_t l = 0; l < layer; ++l)
            n += size_t(widths[l]) * widths[l + 1] + widths[l + 1];
        return n;
    }

    // Uniform init in [-a, a], a = sqrt(6 / (w_in + w_out)), per layer.
    // Draw order: layer by layer, weights row-major, then biases.
    void init(Rng& rng) {
        size_t off = 0;
        for (size_t l = 0; l + 1 < widths.size(); ++l) {
            const double a = std::sqrt(6.0 / (widths[l] + widths[l + 1]));
            const size_t n = size_t(widths[l]) * widths[l + 1] + widths[l + 1];
            for (size_t i = 0; i < n; ++i) params[off + i] = rng.uniform(-a, a);
            off += n;
        }
    }

    void forward(std::span<const double> in, std::span<double> out, MlpWorkspace& ws) const {
        if (in.size() != size_t(widths.front()))
            throw std::invalid_argument("Mlp::forward: input width mismatch");
        if (out.size() != size_t(widths.back()))
            throw std::invalid_argument("Mlp::forward: output width mismatch");
        const size_t L = layer_count();
        ws.inputs.resize(L);
        ws.pre.resize(L);
        ws.inputs[0].assign(in.begin(), in.end());
        size_t off = 0;
        for (size_t l = 0; l < L; ++l) {
            const int win = widths[l], wout = widths[l + 1];
            const double* W = params.data() + off;
            const double* b = W + size_t(win) * wout;
            ws.pre[l].resize(wout);
            const double* a = ws.inputs[l].data();
            for (int r = 0; r < wout; ++r) {
                double z = b[r];
                const double* wr = W + size_t(r) * win;
                for (int c = 0; c < win; ++c) z += wr[c] * a[c];
                ws.pre[l][r] = z;
            }
            const Act act = (l + 1 == L) ? output : hidden;
            if (l + 1 == L) {
                for (int r = 0; r < wout; ++r) out[r] = act_eval(act, ws.pre[l][r]);
            } else {
                ws.inputs[l + 1].resize(wout);
                for (int r = 0; r < wout; ++r) ws.inputs[l + 1][r] = act_eval(act, ws.pre[l][r]);
            }
            off += size_t(win) * wout + wout;
        }
    }

    // Backprop after a forward() that filled ws. Accumulates (+=) parameter
    // gradients into grad (aligned with params); writes dL/dinput to
    // input_grad when non-empty.
    void backward(std::span<const double> upstream, std::span<double> grad,
                  std::span<double> input_grad, MlpWorkspace& ws) const {
        if (upstream.size() != size_t(widths.back()))
            throw std::invalid_argument("Mlp::backward: upstream width mismatch");
        if (grad.size() != param_count())
            throw std::invalid_argument("Mlp::backward: grad buffer size mismatch");
        const size_t L = layer_count();
        ws.delta.assign(upstream.begin(), upstream.end());
        for (size_t li = L; li-- > 0;) {
            const int win = widths[li], wout = widths[li + 1];
            const Act act = (li + 1 == L) ? output : hidden;
            for (int r = 0; r < wout; ++r) ws.delta[r] *= act_deriv(act, ws.pre[li][r]);
            const size_t off = layer_offset(li);
            double* gW = grad.data() + off;
            double* gb = gW + size_t(win) * wout;
            const double* a = ws.inputs[li].data();
            for (int r = 0; r < wout; ++r) {
                const double d = ws.delta[r];
                double* gr = gW + size_t(r) * win;
                for (int c = 0; c < win; ++c) gr[c] += d * a[c];
                gb[r] += d;
            }
            const double* W = params.data() + off;
            ws.delta_prev.assign(win, 0.0);
            for (int r = 0; r < wout; ++r) {
                const double d = ws.delta[r];
                const double* wr = W + size_t(r) * win;
                for (int c = 0; c < win; ++c) ws.delta_prev[c] += d * wr[c];
            }
            ws.delta = ws.delta_prev;
        }
        if (!input_grad.empty()) {
            if (input_grad.size() != size_t(widths.front()))
                throw std::invalid_argument("Mlp::backward: input_grad width mismatch");
            for (size_t i = 0; i < input_grad.size(); ++i) input_grad[i] = ws.delta[i];
        }
    }

    // Convenience single-input single-output evaluation.
    double eval1(double x, MlpWorkspace& ws) const {
        double in = x, out = 0;
        forward({&in, 1}, {&out, 1}, ws);
        return out;
    }
};

// Central-difference check of an analytic gradient. `loss` is called as
// loss(p, grad_or_null); when the second argument is non-null it must fill
// the analytic gradient. Returns the max elementwise relative error with
// denominator max(|analytic|, |numeric|, 1e-8). Any non-finite loss or
// gradient yields +infinity so callers treat it as a failure.
template <typename F>
double finite_diff_check(F&& loss, std::span<double> params, double step) {
    if (step <= 0) throw std::invalid_argument("finite_diff_check: step must be positive");
    std::vector<double> analytic(params.size(), 0.0);
    const double base = loss(std::span<const double>(params.data(), params.size()), analytic.data());
    if (!std::isfinite(base)) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        if (!std::isfinite(analytic[i])) return std::numeric_limits<double>::infinity();
        const double saved = params[i];
        params[i] = saved + step;
        const double fp = loss(std::span<const double>(params.data(), params.size()), nullptr);
        params[i] = saved - step;
        const double fm = loss(std::span<const double>(params.data(), params.size()), nullptr);
        params[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            return std::numeric_limits<double>::infinity();
        const double numeric = (fp - fm) / (2.0 * step);
        const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
        worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
    return worst;
}

} // namespace evrad
