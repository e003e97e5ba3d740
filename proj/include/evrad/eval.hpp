// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint evaluation against a dataset: sharp-LDR recovery on the train
// views, tone-mapped HDR quality on the held-out views, and re-exposure at
// novel exposure times through the learned response.
#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "render.hpp"
#include "tonemap.hpp"
#include "train.hpp"

namespace evrad {

// Maps a rendered HDR frame through the learned response at exposure dt.
inline Imagef apply_crf_image(const CrfField& crf, const Imagef& hdr, double dt) {
    Imagef out(hdr.width, hdr.height, 3);
    CrfWorkspace ws;
    double raw[3], ldr[3];
    for (int y = 0; y < hdr.height; ++y)
        for (int x = 0; x < hdr.width; ++x) {
            for (int ch = 0; ch < 3; ++ch) raw[ch] = std::max(0.0, double(hdr.at(y, x, ch)));
            crf_apply(crf, raw, dt, ldr, ws);
            for (int ch = 0; ch < 3; ++ch) out.at(y, x, ch) = float(ldr[ch]);
        }
    return out;
}

template <typename Field>
std::vector<MetricRow> evaluate_tasks(const Field& field, const CrfField& crf,
                                      const Dataset& data, const CheckpointEnv& env,
                                      int samples_per_ray) {
    std::vector<MetricRow> rows;
    char name[64];

    for (size_t v = 0; v < data.views.size(); ++v) {
        const auto& view = data.views[v];
        if (view.hdr_gt.data.empty()) continue;
        const Imagef pred_hdr = render_image(field, env.camera, view.rec.ref_pose.c2w, env.near,
                                             env.far, samples_per_ray);
        const Imagef pred_ldr = apply_crf_image(crf, pred_hdr, view.rec.exposure_time);
        const Imagef gt_ldr = reinhard_tonemap(view.hdr_gt, view.rec.exposure_time, env.phi);
        std::snprintf(name, sizeof(name), "view_%03zu", v);
        rows.push_back({"deblur_ldr", name, psnr(pred_ldr, gt_ldr), ssim(pred_ldr, gt_ldr)});
    }

    for (size_t v = 0; v < data.tests.size(); ++v) {
        const auto& tv = data.tests[v];
        const Imagef pred_hdr = render_image(field, env.camera, tv.rec.pose.c2w, env.near, env.far,
                                             samples_per_ray);
        const HdrScore score = eval_hdr(pred_hdr, tv.hdr_gt, env.phi, env.exposure_time);
        std::snprintf(name, sizeof(name), "test_%03zu", v);
        rows.push_back({"hdr_tonemapped", name, score.psnr, score.ssim});

        for (double f : data.manifest.novel_exposure_factors) {
            const double dt = f * env.exposure_time;
            const Imagef pred_ldr = apply_crf_image(crf, pred_hdr, dt);
            const Imagef gt_ldr = reinhard_tonemap(tv.hdr_gt, dt, env.phi);
            char task[48];
            std::snprintf(task, sizeof(task), "novel_exposure_x%g", f);
            rows.push_back({task, name, psnr(pred_ldr, gt_ldr), ssim(pred_ldr, gt_ldr)});
        }
    }
    return rows;
}

inline std::vector<MetricRow> evaluate_checkpoint(const Checkpoint& ck, const Dataset& data,
                                                  int samples_per_ray = 0) {
    const int n = samples_per_ray > 0 ? samples_per_ray : ck.cfg.samples_per_ray;
    if (ck.cfg.backend == FieldBackend::voxel)
        return evaluate_tasks(ck.vox, ck.crf, data, ck.env, n);
    return evaluate_tasks(ck.mlpf, ck.crf, data, ck.env, n);
}

} // namespace evrad
