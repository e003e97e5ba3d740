// SPDX-License-Identifier: Apache-2.0
//
// Fixed global tone curve and 8-bit quantization shared by the simulator
// and the evaluation metrics.
#pragma once

#include <cmath>
#include <stdexcept>

#include "image.hpp"

namespace evrad {

// (phi * dt * v / (phi * dt * v + 1)) ^ (1/2.2), componentwise.
inline double reinhard_value(double v, double dt, double phi) {
    const double x = phi * dt * v;
    return std::pow(x / (x + 1.0), 1.0 / 2.2);
}

// Same curve expressed over log exposure u = ln(v * dt).
inline double reinhard_log_exposure(double u, double phi) {
    const double x = phi * std::exp(u);
    return std::pow(x / (x + 1.0), 1.0 / 2.2);
}

inline Imagef reinhard_tonemap(const Imagef& hdr, double dt, double phi) {
    if (!(dt > 0) || !(phi > 0)) throw std::invalid_argument("reinhard_tonemap: dt and phi must be positive");
    Imagef out(hdr.width, hdr.height, hdr.channels);
    for (size_t i = 0; i < hdr.data.size(); ++i) {
        const double v = hdr.data[i];
        if (!(v >= 0) || !std::isfinite(double(hdr.data[i])))
            throw std::invalid_argument("reinhard_tonemap: radiance must be finite and non-negative");
        out.data[i] = float(reinhard_value(v, dt, phi));
    }
    return out;
}

// Round half away from zero to 8 bits; inputs are clamped to [0, 1] first.
inline std::uint8_t quantize8_value(double v) {
    const double c = v < 0 ? 0 : (v > 1 ? 1 : v);
    return std::uint8_t(std::lround(c * 255.0));
}

inline Imageb quantize8(const Imagef& ldr) {
    Imageb out(ldr.width, ldr.height, ldr.channels);
    for (size_t i = 0; i < ldr.data.size(); ++i) out.data[i] = quantize8_value(ldr.data[i]);
    return out;
}

inline Imagef dequantize8(const Imageb& img) {
    Imagef out(img.width, img.height, img.channels);
    for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = float(img.data[i] / 255.0);
    return out;
}

} // namespace evrad
