// SPDX-License-Identifier: Apache-2.0
//
// Small fixed-size linear algebra used by the renderer and pose handling.
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace evrad {

// Radiance floor under every log: keeps ln finite near zero.
constexpr double kLogFloor = 1e-6;

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double k) const { return {x * k, y * k, z * k}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double k, const Vec3& v) { return v * k; }

struct Aabb {
    Vec3 lo, hi;
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }
};

// 4x4 homogeneous transform, row-major.
struct Mat4 {
    std::array<double, 16> m{};

    static Mat4 identity() {
        Mat4 r;
        r.m = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
        return r;
    }

    double& at(int r, int c) { return m[4 * r + c]; }
    double at(int r, int c) const { return m[4 * r + c]; }

    Vec3 transform_point(const Vec3& p) const {
        return {at(0, 0) * p.x + at(0, 1) * p.y + at(0, 2) * p.z + at(0, 3),
                at(1, 0) * p.x + at(1, 1) * p.y + at(1, 2) * p.z + at(1, 3),
                at(2, 0) * p.x + at(2, 1) * p.y + at(2, 2) * p.z + at(2, 3)};
    }

    Vec3 rotate(const Vec3& v) const {
        return {at(0, 0) * v.x + at(0, 1) * v.y + at(0, 2) * v.z,
                at(1, 0) * v.x + at(1, 1) * v.y + at(1, 2) * v.z,
                at(2, 0) * v.x + at(2, 1) * v.y + at(2, 2) * v.z};
    }

    Vec3 translation() const { return {at(0, 3), at(1, 3), at(2, 3)}; }

    Mat4 mul(const Mat4& o) const {
        Mat4 r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double s = 0;
                for (int k = 0; k < 4; ++k) s += at(i, k) * o.at(k, j);
                r.at(i, j) = s;
            }
        return r;
    }

    // Max deviation of R^T R from identity over the 3x3 block.
    double rotation_defect() const {
        double worst = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += at(k, i) * at(k, j);
                worst = std::max(worst, std::fabs(s - (i == j ? 1.0 : 0.0)));
            }
        return worst;
    }
};

inline double softplus(double x) {
    // Stable on both tails.
    return x > 30 ? x : std::log1p(std::exp(x));
}

inline double softplus_deriv(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Inverse of softplus, for seeding raw grids from target activations.
inline double softplus_inverse(double y) {
    if (y <= 0) throw std::invalid_argument("softplus_inverse: y must be positive");
    return y > 30 ? y : std::log(std::expm1(y));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace evrad
