// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <evrad/field.hpp>
#include <evrad/render.hpp>

using namespace evrad;

namespace {

// Homogeneous medium with a constant density and emission; the rendering
// equation then has a closed form to test against.
struct ConstField {
    struct Workspace {};
    double sigma = 1.0;
    double e[3] = {1.0, 1.0, 1.0};
    void query(const Vec3&, const Vec3&, double e_out[3], double& s, Workspace&) const {
        s = sigma;
        for (int ch = 0; ch < 3; ++ch) e_out[ch] = e[ch];
    }
};

RaySampleSet make_samples(double near, double far, int n) {
    RaySampleSet s;
    sample_depths(near, far, n, SampleMode::midpoint, nullptr, s);
    s.origin = {0, 0, 0};
    s.dir = {0, 0, 1};
    return s;
}

} // namespace

TEST_CASE("midpoint depth placement matches the worked example", "[render]") {
    RaySampleSet s;
    sample_depths(0.0, 1.0, 2, SampleMode::midpoint, nullptr, s);
    REQUIRE(s.depths.size() == 2);
    CHECK(s.depths[0] == Catch::Approx(0.25).margin(1e-15));
    CHECK(s.depths[1] == Catch::Approx(0.75).margin(1e-15));
    CHECK(s.deltas[0] == Catch::Approx(0.5).margin(1e-15));
    CHECK(s.deltas[1] == Catch::Approx(0.25).margin(1e-15)); // closes to far
}

TEST_CASE("stratified depths stay inside their bins", "[render]") {
    Rng rng(100);
    RaySampleSet s;
    sample_depths(0.5, 2.5, 8, SampleMode::stratified, &rng, s);
    const double w = 2.0 / 8;
    for (int i = 0; i < 8; ++i) {
        CHECK(s.depths[i] >= 0.5 + i * w);
        CHECK(s.depths[i] < 0.5 + (i + 1) * w);
        if (i > 0) CHECK(s.depths[i] > s.depths[i - 1]);
    }
    CHECK_THROWS_AS(sample_depths(0.5, 2.5, 8, SampleMode::stratified, nullptr, s),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_depths(1.0, 0.5, 8, SampleMode::midpoint, nullptr, s),
                    std::invalid_argument);
}

TEST_CASE("single sample renders the analytic opacity", "[render]") {
    ConstField f;
    f.sigma = 0.8;
    f.e[0] = 2.0;
    f.e[1] = 0.5;
    f.e[2] = 1.0;
    RaySampleSet s = make_samples(1.0, 2.0, 1);
    ConstField::Workspace ws;
    double out[3];
    render_ray(f, s, out, ws);
    // One midpoint sample at depth 1.5 whose delta closes to far: 0.5.
    const double alpha = 1.0 - std::exp(-0.8 * 0.5);
    CHECK(out[0] == Catch::Approx(alpha * 2.0).margin(1e-12));
    CHECK(out[1] == Catch::Approx(alpha * 0.5).margin(1e-12));
    CHECK(out[2] == Catch::Approx(alpha * 1.0).margin(1e-12));
}

TEST_CASE("two samples compose with transmittance", "[render]") {
    ConstField f;
    f.sigma = 0.6;
    RaySampleSet s = make_samples(0.0, 1.0, 2);
    ConstField::Workspace ws;
    double out[3];
    std::vector<double> trans;
    render_ray(f, s, out, ws, &trans);
    const double a1 = 1.0 - std::exp(-0.6 * 0.5);
    const double T2 = std::exp(-0.6 * 0.5);
    const double a2 = 1.0 - std::exp(-0.6 * 0.25);
    CHECK(out[0] == Catch::Approx(a1 + T2 * a2).margin(1e-12));
    REQUIRE(trans.size() == 2);
    CHECK(trans[0] == 1.0); // T_1 = 1 by definition
    CHECK(trans[1] == Catch::Approx(T2).margin(1e-12));
}

TEST_CASE("rendered radiance is linear in the emission", "[render]") {
    ConstField f;
    f.sigma = 1.3;
    f.e[0] = 0.7;
    RaySampleSet s = make_samples(0.5, 3.0, 16);
    ConstField::Workspace ws;
    double a[3], b[3];
    render_ray(f, s, a, ws);
    f.e[0] *= 2.0;
    f.e[1] *= 2.0;
    f.e[2] *= 2.0;
    render_ray(f, s, b, ws);
    for (int ch = 0; ch < 3; ++ch) CHECK(b[ch] == Catch::Approx(2.0 * a[ch]).epsilon(1e-12));
}

TEST_CASE("empty space renders to zero", "[render]") {
    ConstField f;
    f.sigma = 0.0;
    RaySampleSet s = make_samples(0.5, 2.0, 4);
    ConstField::Workspace ws;
    double out[3];
    render_ray(f, s, out, ws);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 0.0);
}

TEST_CASE("render backward agrees with central differences", "[render]") {
    const Aabb box{{-1, -1, -1}, {1, 1, 1}};
    VoxelField f(2, 2, 2, box);
    Rng rng(77);
    for (auto& p : f.params) p = rng.uniform(-0.5, 0.5);
    RaySampleSet s;
    sample_depths(0.2, 1.8, 6, SampleMode::midpoint, nullptr, s);
    s.origin = {-0.3, 0.2, -0.9};
    s.dir = Vec3{0.2, -0.1, 1.0}.normalized();
    const double up[3] = {1.0, -0.7, 0.4};

    auto loss = [&](std::span<const double> p, double* grad) {
        VoxelField probe = f;
        probe.params.assign(p.begin(), p.end());
        VoxelField::Workspace ws;
        double out[3];
        render_ray(probe, s, out, ws);
        if (grad) {
            std::vector<double> g(probe.params.size(), 0.0);
            render_ray_backward(probe, s, up, g, ws);
            std::copy(g.begin(), g.end(), grad);
        }
        return up[0] * out[0] + up[1] * out[1] + up[2] * out[2];
    };
    std::vector<double> p = f.params;
    CHECK(finite_diff_check(loss, p, 1e-5) < 1e-5);
}

TEST_CASE("uniform exposure weights", "[render]") {
    const std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
    const auto w = exposure_weights(times, WeightScheme::uniform);
    REQUIRE(w.size() == 5);
    for (double wi : w) CHECK(wi == Catch::Approx(0.2).margin(1e-15));
}

TEST_CASE("trapezoid exposure weights match the worked example", "[render]") {
    const std::vector<double> times{0.0, 0.5, 1.0};
    const auto w = exposure_weights(times, WeightScheme::trapezoid);
    REQUIRE(w.size() == 3);
    CHECK(w[0] == Catch::Approx(0.25).margin(1e-15));
    CHECK(w[1] == Catch::Approx(0.5).margin(1e-15));
    CHECK(w[2] == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("trapezoid weights adapt to uneven spacing and normalize", "[render]") {
    const std::vector<double> times{0.0, 0.1, 1.0};
    const auto w = exposure_weights(times, WeightScheme::trapezoid);
    CHECK(w[0] == Catch::Approx(0.05).margin(1e-12));
    CHECK(w[1] == Catch::Approx(0.5).margin(1e-12));
    CHECK(w[2] == Catch::Approx(0.45).margin(1e-12));
    CHECK(w[0] + w[1] + w[2] == Catch::Approx(1.0).margin(1e-12));
    const std::vector<double> bad{0.0, 0.5, 0.5};
    CHECK_THROWS_AS(exposure_weights(bad, WeightScheme::trapezoid), std::invalid_argument);
}

TEST_CASE("static exposure integrates to the single frame", "[render]") {
    // All time samples render identically, so any normalized weighting must
    // return that same radiance.
    std::vector<double> e_list;
    const double frame[3] = {0.3, 1.4, 0.9};
    for (int i = 0; i < 5; ++i) e_list.insert(e_list.end(), frame, frame + 3);
    const std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
    for (auto scheme : {WeightScheme::uniform, WeightScheme::trapezoid}) {
        const auto w = exposure_weights(times, scheme);
        double out[3];
        integrate_exposure(e_list, w, out);
        for (int ch = 0; ch < 3; ++ch) CHECK(out[ch] == Catch::Approx(frame[ch]).margin(1e-12));
    }
}

TEST_CASE("exposure integration is the weighted sum", "[render]") {
    const std::vector<double> e_list{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    const std::vector<double> w{0.25, 0.75};
    double out[3];
    integrate_exposure(e_list, w, out);
    CHECK(out[0] == Catch::Approx(0.25 * 1 + 0.75 * 4).margin(1e-15));
    CHECK(out[1] == Catch::Approx(0.25 * 2 + 0.75 * 5).margin(1e-15));
    CHECK(out[2] == Catch::Approx(0.25 * 3 + 0.75 * 6).margin(1e-15));
}

TEST_CASE("camera rays pass through pixel centers", "[render]") {
    Camera cam{4, 4, 4.0, 4.0, 2.0, 2.0};
    const Mat4 I = Mat4::identity();
    const Ray r = generate_ray(cam, I, 1, 2);
    // Pixel center (1.5, 2.5): direction ((1.5-2)/4, (2.5-2)/4, 1) normalized.
    const Vec3 d = Vec3{-0.125, 0.125, 1.0}.normalized();
    CHECK(r.dir.x == Catch::Approx(d.x).margin(1e-12));
    CHECK(r.dir.y == Catch::Approx(d.y).margin(1e-12));
    CHECK(r.dir.z == Catch::Approx(d.z).margin(1e-12));
    CHECK(r.origin.x == 0.0);
    CHECK_THROWS_AS(generate_ray(cam, I, 4, 0), std::invalid_argument);
    CHECK_THROWS_AS(generate_ray(cam, I, 0, -1), std::invalid_argument);
}

TEST_CASE("pose interpolation is exact at the knots and clamps outside", "[render]") {
    std::vector<TimedPose> poses;
    for (int i = 0; i < 3; ++i) {
        TimedPose p;
        p.t = double(i);
        p.c2w = Mat4::identity();
        p.c2w.at(0, 3) = double(i);
        poses.push_back(p);
    }
    const Mat4 at1 = interpolate_pose(poses, 1.0);
    CHECK(at1.m[3] == Catch::Approx(1.0).margin(1e-12));
    const Mat4 mid = interpolate_pose(poses, 0.5);
    CHECK(mid.m[3] == Catch::Approx(0.5).margin(1e-12));
    const Mat4 before = interpolate_pose(poses, -5.0);
    CHECK(before.m[3] == Catch::Approx(0.0).margin(1e-12));
    const Mat4 after = interpolate_pose(poses, 9.0);
    CHECK(after.m[3] == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("interpolated rotations stay orthonormal", "[render]") {
    auto rot_z = [](double a) {
        Mat4 r = Mat4::identity();
        r.at(0, 0) = std::cos(a);
        r.at(0, 1) = -std::sin(a);
        r.at(1, 0) = std::sin(a);
        r.at(1, 1) = std::cos(a);
        return r;
    };
    std::vector<TimedPose> poses(2);
    poses[0].t = 0.0;
    poses[0].c2w = rot_z(0.0);
    poses[1].t = 1.0;
    poses[1].c2w = rot_z(0.5);
    const Mat4 mid = interpolate_pose(poses, 0.5);
    CHECK(mid.rotation_defect() < 1e-12);
}

TEST_CASE("full frame render is deterministic", "[render]") {
    const Aabb box{{-1, -1, -1}, {1, 1, 1}};
    VoxelField f(3, 3, 3, box);
    Rng rng(5);
    for (auto& p : f.params) p = rng.uniform(-0.5, 1.0);
    Camera cam{8, 6, 8.0, 8.0, 4.0, 3.0};
    Mat4 pose = Mat4::identity();
    pose.at(2, 3) = -2.5;
    const Imagef a = render_image(f, cam, pose, 0.5, 4.0, 12);
    const Imagef b = render_image(f, cam, pose, 0.5, 4.0, 12);
    CHECK(a.data == b.data);
    CHECK(a.width == 8);
    CHECK(a.height == 6);
    CHECK(a.channels == 3);
}
