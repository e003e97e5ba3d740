// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>

#include <evrad/metrics.hpp>

using namespace evrad;

namespace {

// Independent windowed reference: separable Gaussian filtering (rows, then
// columns) instead of direct per-window sums.
double ssim_oracle(const Imagef& a, const Imagef& b) {
    const int R = 5;
    std::array<double, 11> g;
    double gsum = 0;
    for (int i = -R; i <= R; ++i) {
        g[i + R] = std::exp(-(i * i) / (2.0 * 1.5 * 1.5));
        gsum += g[i + R];
    }
    for (auto& v : g) v /= gsum;
    const int W = a.width, H = a.height;
    const int vw = W - 2 * R, vh = H - 2 * R;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

    auto filter = [&](auto&& value) {
        // Horizontal pass over every row, then vertical over the result.
        std::vector<double> rows(size_t(H) * vw, 0.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < vw; ++x) {
                double s = 0;
                for (int d = 0; d < 11; ++d) s += g[d] * value(y, x + d);
                rows[size_t(y) * vw + x] = s;
            }
        std::vector<double> out(size_t(vh) * vw, 0.0);
        for (int y = 0; y < vh; ++y)
            for (int x = 0; x < vw; ++x) {
                double s = 0;
                for (int d = 0; d < 11; ++d) s += g[d] * rows[size_t(y + d) * vw + x];
                out[size_t(y) * vw + x] = s;
            }
        return out;
    };

    double total = 0;
    size_t n = 0;
    for (int ch = 0; ch < a.channels; ++ch) {
        auto va = [&](int y, int x) { return double(a.at(y, x, ch)); };
        auto vb = [&](int y, int x) { return double(b.at(y, x, ch)); };
        const auto mu_a = filter(va);
        const auto mu_b = filter(vb);
        const auto aa = filter([&](int y, int x) { return va(y, x) * va(y, x); });
        const auto bb = filter([&](int y, int x) { return vb(y, x) * vb(y, x); });
        const auto ab = filter([&](int y, int x) { return va(y, x) * vb(y, x); });
        for (size_t i = 0; i < mu_a.size(); ++i) {
            const double var_a = aa[i] - mu_a[i] * mu_a[i];
            const double var_b = bb[i] - mu_b[i] * mu_b[i];
            const double cov = ab[i] - mu_a[i] * mu_b[i];
            total += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
                     ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
            ++n;
        }
    }
    return total / double(n);
}

Imagef noise_image(int w, int h, int c, std::uint64_t seed) {
    Imagef img(w, h, c);
    Rng rng(seed);
    for (auto& v : img.data) v = float(rng.uniform());
    return img;
}

} // namespace

TEST_CASE("psnr of a known mse is exact", "[metrics]") {
    Imagef a(5, 4, 3), b(5, 4, 3);
    for (size_t i = 0; i < a.data.size(); ++i) {
        a.data[i] = 0.5f;
        b.data[i] = 0.6f;
    }
    // MSE 0.01 on a unit range: 10 log10(1/0.01) = 20 dB.
    CHECK(psnr(a, b) == Catch::Approx(20.0).margin(1e-6));
    CHECK(psnr(b, a) == Catch::Approx(20.0).margin(1e-6));
}

TEST_CASE("psnr saturates at the cap for identical images", "[metrics]") {
    const Imagef a = noise_image(6, 6, 3, 1);
    CHECK(psnr(a, a) == 99.0);
}

TEST_CASE("psnr requires matching shapes", "[metrics]") {
    Imagef a(4, 4, 3), b(4, 4, 1);
    CHECK_THROWS_AS(psnr(a, b), std::invalid_argument);
    Imagef c(5, 4, 3);
    CHECK_THROWS_AS(psnr(a, c), std::invalid_argument);
}

TEST_CASE("ssim is one for identical images", "[metrics]") {
    const Imagef a = noise_image(16, 12, 3, 2);
    CHECK(ssim(a, a) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("ssim drops below one under noise and below zero under inversion", "[metrics]") {
    const Imagef a = noise_image(16, 16, 1, 3);
    Imagef noisy = a;
    Rng rng(4);
    for (auto& v : noisy.data) v = float(std::clamp(v + 0.2 * (rng.uniform() - 0.5), 0.0, 1.0));
    const double s = ssim(a, noisy);
    CHECK(s < 1.0);
    CHECK(s > 0.0);
    Imagef inverted = a;
    for (auto& v : inverted.data) v = 1.0f - v;
    CHECK(ssim(a, inverted) < 0.0);
}

TEST_CASE("ssim needs a full window", "[metrics]") {
    Imagef a(10, 11, 1), b(10, 11, 1);
    CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
    Imagef c(11, 11, 1), d(11, 11, 1);
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] = d.data[i] = float(i % 7) / 7.0f;
    CHECK(ssim(c, d) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("ssim matches an independent implementation", "[metrics]") {
    const Imagef a = noise_image(18, 15, 2, 5);
    Imagef b = a;
    Rng rng(6);
    for (auto& v : b.data) v = float(std::clamp(v + 0.15 * (rng.uniform() - 0.5), 0.0, 1.0));
    CHECK(ssim(a, b) == Catch::Approx(ssim_oracle(a, b)).margin(1e-9));
}

TEST_CASE("hdr scoring tone maps both sides identically", "[metrics]") {
    const Imagef gt = noise_image(16, 16, 3, 7);
    const HdrScore same = eval_hdr(gt, gt, 62.5, 0.2);
    CHECK(same.psnr == 99.0);
    CHECK(same.ssim == Catch::Approx(1.0).margin(1e-12));
    Imagef off = gt;
    for (auto& v : off.data) v *= 1.4f;
    const HdrScore worse = eval_hdr(off, gt, 62.5, 0.2);
    CHECK(worse.psnr < 99.0);
    CHECK(worse.ssim < 1.0);
}

TEST_CASE("metric reports serialize to csv", "[metrics]") {
    const auto path = std::filesystem::temp_directory_path() / "evrad_metrics_test.csv";
    std::vector<MetricRow> rows{{"deblur_ldr", "view_000", 31.25, 0.97},
                                {"deblur_ldr", "mean", 31.25, 0.97}};
    write_metric_report(path.string(), rows);
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    CHECK(line == "task,view,psnr,ssim");
    std::getline(f, line);
    CHECK(line.substr(0, 20) == "deblur_ldr,view_000,");
    std::filesystem::remove(path);
}
