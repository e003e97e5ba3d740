// SPDX-License-Identifier: Apache-2.0
//
// Image quality metrics over [0,1] images: PSNR capped at 99 dB and mean
// local SSIM over valid (fully interior) 11x11 Gaussian windows.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "image.hpp"
#include "io.hpp"
#include "tonemap.hpp"

namespace evrad {

inline double psnr(const Imagef& a, const Imagef& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    if (a.data.empty()) throw std::invalid_argument("psnr: empty image");
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        mse += d * d;
    }
    mse /= double(a.data.size());
    if (mse <= 0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace detail {
inline std::vector<double> ssim_window() {
    // 11x11 Gaussian, sigma 1.5, normalized to sum 1.
    std::vector<double> w(121);
    double sum = 0;
    for (int dy = -5; dy <= 5; ++dy)
        for (int dx = -5; dx <= 5; ++dx) {
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            w[(dy + 5) * 11 + (dx + 5)] = v;
            sum += v;
        }
    for (auto& v : w) v /= sum;
    return w;
}
} // namespace detail

// Mean SSIM with K1 = 0.01, K2 = 0.03, dynamic range 1. Windows are not
// padded; both dimensions must be at least 11. Channels average equally.
inline double ssim(const Imagef& a, const Imagef& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    if (a.width < 11 || a.height < 11)
        throw std::invalid_argument("ssim: images must be at least 11x11");
    static const std::vector<double> win = detail::ssim_window();
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    size_t windows = 0;
    for (int ch = 0; ch < a.channels; ++ch)
        for (int y = 5; y < a.height - 5; ++y)
            for (int x = 5; x < a.width - 5; ++x) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int dy = -5; dy <= 5; ++dy)
                    for (int dx = -5; dx <= 5; ++dx) {
                        const double w = win[(dy + 5) * 11 + (dx + 5)];
                        const double va = a.at(y + dy, x + dx, ch);
                        const double vb = b.at(y + dy, x + dx, ch);
                        mx += w * va;
                        my += w * vb;
                        sxx += w * va * va;
                        syy += w * vb * vb;
                        sxy += w * va * vb;
                    }
                const double vx = sxx - mx * mx;
                const double vy = syy - my * my;
                const double cxy = sxy - mx * my;
                total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
                         ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++windows;
            }
    return total / double(windows);
}

// Tone-map both images with the same fixed curve, then compare.
struct HdrScore {
    double psnr;
    double ssim;
};

inline HdrScore eval_hdr(const Imagef& pred, const Imagef& gt, double phi_eval, double dt_eval) {
    const Imagef tp = reinhard_tonemap(pred, dt_eval, phi_eval);
    const Imagef tg = reinhard_tonemap(gt, dt_eval, phi_eval);
    return {psnr(tp, tg), ssim(tp, tg)};
}

// Per-view metric rows plus per-task means, written as CSV.
struct MetricRow {
    std::string task; // e.g. "deblur_ldr", "hdr_tonemapped", "novel_exposure_x0.25"
    std::string view; // view id or "mean"
    double psnr = 0;
    double ssim = 0;
};

inline void write_metric_report(const std::string& path, std::span<const MetricRow> rows) {
    auto f = open_out(path);
    f << "task,view,psnr,ssim\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%s,%.6f,%.6f\n", r.task.c_str(), r.view.c_str(),
                      r.psnr, r.ssim);
        f << line;
    }
    if (!f) throw std::runtime_error("write_metric_report: write failed: " + path);
}

} // namespace evrad
