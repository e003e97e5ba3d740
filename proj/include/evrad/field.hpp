// SPDX-License-Identifier: Apache-2.0
//
// Emissive radiance field backends. Both store raw (pre-activation) values
// and apply softplus at query time, return exact zeros outside the bounds,
// and expose one flat trainable parameter vector. The voxel backend is the
// default; the MLP backend keeps the encoded-coordinate path exercised.
#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "math.hpp"
#include "mlp.hpp"

namespace evrad {

inline void check_query_inputs(const Vec3& p, const Vec3& dir) {
    if (!p.finite() || !dir.finite())
        throw std::invalid_argument("field query: non-finite input");
    if (std::fabs(dir.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("field query: direction must be unit length");
}

// Node-centered trilinear grid over an axis-aligned box. Parameter vector
// layout: density raw (n nodes, x fastest) then emission raw (3 per node).
struct VoxelField {
    struct Workspace {};

    int nx = 0, ny = 0, nz = 0;
    Aabb bounds;
    std::vector<double> params;

    VoxelField() = default;
    VoxelField(int nx_, int ny_, int nz_, const Aabb& b) : nx(nx_), ny(ny_), nz(nz_), bounds(b) {
        if (nx <= 0 || ny <= 0 || nz <= 0)
            throw std::invalid_argument("VoxelField: non-positive resolution");
        if (!(b.lo.x < b.hi.x && b.lo.y < b.hi.y && b.lo.z < b.hi.z))
            throw std::invalid_argument("VoxelField: empty bounds");
        params.assign(size_t(4) * node_count(), 0.0);
    }

    size_t node_count() const { return size_t(nx) * ny * nz; }
    size_t node_index(int ix, int iy, int iz) const {
        return (size_t(iz) * ny + iy) * nx + ix;
    }
    double& density_raw(size_t node) { return params[node]; }
    double& emission_raw(size_t node, int ch) { return params[node_count() + 3 * node + ch]; }
    double density_raw(size_t node) const { return params[node]; }
    double emission_raw(size_t node, int ch) const { return params[node_count() + 3 * node + ch]; }

    void fill(double density_raw_value, double emission_raw_value) {
        const size_t n = node_count();
        for (size_t i = 0; i < n; ++i) params[i] = density_raw_value;
        for (size_t i = n; i < params.size(); ++i) params[i] = emission_raw_value;
    }

    struct Corners {
        std::array<size_t, 8> node;
        std::array<double, 8> w;
    };

    // Trilinear corner weights; the point must be inside the bounds.
    Corners corners(const Vec3& p) const {
        auto axis = [](double v, double lo, double hi, int n, int& i0, double& f) {
            if (n == 1) {
                i0 = 0;
                f = 0;
                return;
            }
            double u = (v - lo) / (hi - lo) * (n - 1);
            if (u <= 0) {
                i0 = 0;
                f = 0;
                return;
            }
            if (u >= n - 1) {
                i0 = n - 2;
                f = 1;
                return;
            }
            i0 = int(u);
            f = u - i0;
        };
        int ix, iy, iz;
        double fx, fy, fz;
        axis(p.x, bounds.lo.x, bounds.hi.x, nx, ix, fx);
        axis(p.y, bounds.lo.y, bounds.hi.y, ny, iy, fy);
        axis(p.z, bounds.lo.z, bounds.hi.z, nz, iz, fz);
        Corners c;
        int k = 0;
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx, ++k) {
                    const int jx = std::min(ix + dx, nx - 1);
                    const int jy = std::min(iy + dy, ny - 1);
                    const int jz = std::min(iz + dz, nz - 1);
                    c.node[k] = node_index(jx, jy, jz);
                    c.w[k] = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
                }
        return c;
    }

    // Pre-activation interpolated values, exposed for tests.
    void query_raw(const Vec3& p, double e_raw[3], double& sigma_raw) const {
        const Corners c = corners(p);
        sigma_raw = 0;
        e_raw[0] = e_raw[1] = e_raw[2] = 0;
        for (int k = 0; k < 8; ++k) {
            sigma_raw += c.w[k] * density_raw(c.node[k]);
            for (int ch = 0; ch < 3; ++ch) e_raw[ch] += c.w[k] * emission_raw(c.node[k], ch);
        }
    }

    void query(const Vec3& p, const Vec3& dir, double e[3], double& sigma, Workspace&) const {
        check_query_inputs(p, dir);
        if (!bounds.contains(p)) {
            e[0] = e[1] = e[2] = 0;
            sigma = 0;
            return;
        }
        double e_raw[3], s_raw;
        query_raw(p, e_raw, s_raw);
        sigma = softplus(s_raw);
        for (int ch = 0; ch < 3; ++ch) e[ch] = softplus(e_raw[ch]);
    }

    // Accumulates (+=) gradients of upstream_e . e + upstream_sigma * sigma
    // into grad (aligned with params). Touches at most 8 nodes.
    void query_backward(const Vec3& p, const Vec3& dir, const double upstream_e[3],
                        double upstream_sigma, std::span<double> grad, Workspace&) const {
        check_query_inputs(p, dir);
        if (grad.size() != params.size())
            throw std::invalid_argument("VoxelField::query_backward: grad size mismatch");
        if (!bounds.contains(p)) return;
        const Corners c = corners(p);
        double e_raw[3], s_raw;
        query_raw(p, e_raw, s_raw);
        const double ds = softplus_deriv(s_raw) * upstream_sigma;
        double de[3];
        for (int ch = 0; ch < 3; ++ch) de[ch] = softplus_deriv(e_raw[ch]) * upstream_e[ch];
        const size_t n = node_count();
        for (int k = 0; k < 8; ++k) {
            grad[c.node[k]] += c.w[k] * ds;
            for (int ch = 0; ch < 3; ++ch) grad[n + 3 * c.node[k] + ch] += c.w[k] * de[ch];
        }
    }
};

// Coordinate-network backend: sinusoidally encoded position and direction
// through one MLP with softplus outputs (emission rgb + density).
struct MlpField {
    struct Workspace {
        MlpWorkspace mw;
        std::vector<double> enc, tmp, in, out, up;
    };

    Aabb bounds;
    int pos_levels = 10;
    int dir_levels = 4;
    Mlp net;

    MlpField() = default;
    MlpField(const Aabb& b, int pos_levels_, int dir_levels_, int hidden_layers, int width)
        : bounds(b), pos_levels(pos_levels_), dir_levels(dir_levels_) {
        const int in = int(positional_encode_size(3, pos_levels) + positional_encode_size(3, dir_levels));
        std::vector<int> widths;
        widths.push_back(in);
        for (int l = 0; l < hidden_layers; ++l) widths.push_back(width);
        widths.push_back(4);
        net = Mlp(widths, Act::relu, Act::softplus);
    }

    std::vector<double>& params_ref() { return net.params; }

    void encode(const Vec3& p, const Vec3& dir, Workspace& ws) const {
        // Position is normalized into [-1, 1] per axis before encoding.
        const double q[3] = {
            2 * (p.x - bounds.lo.x) / (bounds.hi.x - bounds.lo.x) - 1,
            2 * (p.y - bounds.lo.y) / (bounds.hi.y - bounds.lo.y) - 1,
            2 * (p.z - bounds.lo.z) / (bounds.hi.z - bounds.lo.z) - 1,
        };
        const double d[3] = {dir.x, dir.y, dir.z};
        positional_encode({q, 3}, pos_levels, ws.in);
        positional_encode({d, 3}, dir_levels, ws.tmp);
        ws.in.insert(ws.in.end(), ws.tmp.begin(), ws.tmp.end());
    }

    void query(const Vec3& p, const Vec3& dir, double e[3], double& sigma, Workspace& ws) const {
        check_query_inputs(p, dir);
        if (!bounds.contains(p)) {
            e[0] = e[1] = e[2] = 0;
            sigma = 0;
            return;
        }
        encode(p, dir, ws);
        ws.out.resize(4);
        net.forward(ws.in, ws.out, ws.mw);
        e[0] = ws.out[0];
        e[1] = ws.out[1];
        e[2] = ws.out[2];
        sigma = ws.out[3];
    }

    void query_backward(const Vec3& p, const Vec3& dir, const double upstream_e[3],
                        double upstream_sigma, std::span<double> grad, Workspace& ws) const {
        check_query_inputs(p, dir);
        if (grad.size() != net.param_count())
            throw std::invalid_argument("MlpField::query_backward: grad size mismatch");
        if (!bounds.contains(p)) return;
        encode(p, dir, ws);
        ws.out.resize(4);
        net.forward(ws.in, ws.out, ws.mw);
        ws.up = {upstream_e[0], upstream_e[1], upstream_e[2], upstream_sigma};
        net.backward(ws.up, grad, {}, ws.mw);
    }
};

} // namespace evrad
