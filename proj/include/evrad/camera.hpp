// SPDX-License-Identifier: Apache-2.0
//
// Pinhole camera, timed camera-to-world poses and pose interpolation.
// Convention: camera looks down +z, pixel (x, y) maps through the center
// offset (x + 0.5, y + 0.5).
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "math.hpp"

namespace evrad {

struct Camera {
    int width = 0, height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;

    void validate() const {
        if (width <= 0 || height <= 0) throw std::invalid_argument("Camera: non-positive size");
        if (fx <= 0 || fy <= 0) throw std::invalid_argument("Camera: non-positive focal length");
    }
};

// Camera-to-world transform tagged with a capture time. The rotation block
// must be orthonormal within 1e-6.
struct TimedPose {
    double t = 0;
    Mat4 c2w = Mat4::identity();

    void validate() const {
        if (!std::isfinite(t)) throw std::invalid_argument("TimedPose: non-finite time");
        if (c2w.rotation_defect() > 1e-6)
            throw std::invalid_argument("TimedPose: rotation not orthonormal");
    }
};

struct Ray {
    Vec3 origin;
    Vec3 dir; // unit length
};

inline Ray generate_ray(const Camera& cam, const Mat4& c2w, int px, int py) {
    if (px < 0 || py < 0 || px >= cam.width || py >= cam.height)
        throw std::invalid_argument("generate_ray: pixel outside sensor");
    const Vec3 d_cam{(px + 0.5 - cam.cx) / cam.fx, (py + 0.5 - cam.cy) / cam.fy, 1.0};
    Ray r;
    r.origin = c2w.translation();
    r.dir = c2w.rotate(d_cam).normalized();
    return r;
}

// Re-orthonormalize the rotation block (Gram-Schmidt on columns) after
// componentwise interpolation; adequate for the small intra-exposure motions
// this toolkit handles.
inline void orthonormalize_rotation(Mat4& m) {
    Vec3 c0{m.at(0, 0), m.at(1, 0), m.at(2, 0)};
    Vec3 c1{m.at(0, 1), m.at(1, 1), m.at(2, 1)};
    c0 = c0.normalized();
    c1 = (c1 - c0 * c1.dot(c0)).normalized();
    const Vec3 c2 = c0.cross(c1);
    m.at(0, 0) = c0.x; m.at(1, 0) = c0.y; m.at(2, 0) = c0.z;
    m.at(0, 1) = c1.x; m.at(1, 1) = c1.y; m.at(2, 1) = c1.z;
    m.at(0, 2) = c2.x; m.at(1, 2) = c2.y; m.at(2, 2) = c2.z;
}

// Piecewise-linear pose interpolation over a time-sorted pose list: lerp of
// translation and rotation entries followed by re-orthonormalization.
// Clamps outside the covered interval.
inline Mat4 interpolate_pose(std::span<const TimedPose> poses, double t) {
    if (poses.empty()) throw std::invalid_argument("interpolate_pose: empty pose list");
    if (t <= poses.front().t) return poses.front().c2w;
    if (t >= poses.back().t) return poses.back().c2w;
    size_t hi = 1;
    while (hi < poses.size() && poses[hi].t < t) ++hi;
    const TimedPose& a = poses[hi - 1];
    const TimedPose& b = poses[hi];
    const double u = (t - a.t) / (b.t - a.t);
    Mat4 out;
    for (int i = 0; i < 16; ++i) out.m[i] = (1 - u) * a.c2w.m[i] + u * b.c2w.m[i];
    orthonormalize_rotation(out);
    return out;
}

} // namespace evrad
