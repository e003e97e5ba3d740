// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <evrad/cli.hpp>
#include <evrad/scene_gen.hpp>

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("evrad_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "evrad");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return evrad::cli::run(int(argv.size()), argv.data());
}

evrad::SceneDescription tiny_scene() {
    evrad::SceneDescription d;
    d.seed = 7;
    d.nx = d.ny = d.nz = 8;
    d.camera = {12, 12, 12, 12, 6, 6};
    d.near = 0.8;
    d.far = 4.5;
    d.train_views = 2;
    d.test_views = 1;
    d.blob_count = 3;
    d.max_intensity = 6.0;
    d.exposure_time = 0.2;
    d.sim.b_sim = 4;
    d.sim.samples_per_ray = 8;
    d.sim.spurious_rate = 0;
    d.novel_exposure_factors = {0.5};
    return d;
}

} // namespace

TEST_CASE("cli rejects bad invocations", "[cli]") {
    CHECK(run_cli({}) != 0);
    CHECK(run_cli({"frobnicate"}) != 0);
    CHECK(run_cli({"train"}) != 0);                      // missing required options
    CHECK(run_cli({"simulate", "--scene", "/nonexistent/scene.json", "--out", "/tmp/x"}) != 0);
    CHECK(run_cli({"render", "--ckpt", "/nonexistent.ckpt", "--pose", "/nonexistent.txt", "--out",
                   "/tmp/x.pfm"}) != 0);
}

TEST_CASE("cli help exits cleanly", "[cli]") {
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"train", "--help"}) == 0);
}

TEST_CASE("the five stage pipeline runs end to end", "[cli]") {
    TempDir td;
    const fs::path scene = td.path / "scene.json";
    const fs::path data = td.path / "data";
    const fs::path ckpt = td.path / "model.ckpt";
    evrad::write_scene_manifest(scene.string(), tiny_scene());

    REQUIRE(run_cli({"simulate", "--scene", scene.string(), "--out", data.string()}) == 0);
    CHECK(fs::exists(data / "manifest.json"));
    CHECK(fs::exists(data / "crf_gt.csv"));

    REQUIRE(run_cli({"train", "--dataset", data.string(), "--out", ckpt.string(), "--iters", "30",
                     "--batch", "16", "--samples", "8", "--field-res", "8", "--eval-every",
                     "15"}) == 0);
    REQUIRE(fs::exists(ckpt));
    CHECK(fs::exists(td.path / "model.ckpt.metrics.csv"));

    const fs::path pose = td.path / "pose.txt";
    {
        std::ofstream f(pose);
        f << "1 0 0 0\n0 1 0 0\n0 0 1 -2.6\n0 0 0 1\n";
    }
    const fs::path hdr = td.path / "out.pfm";
    const fs::path ldr = td.path / "out.ppm";
    REQUIRE(run_cli({"render", "--ckpt", ckpt.string(), "--pose", pose.string(), "--out",
                     hdr.string()}) == 0);
    REQUIRE(run_cli({"render", "--ckpt", ckpt.string(), "--pose", pose.string(), "--out",
                     ldr.string()}) == 0);
    CHECK(fs::file_size(hdr) > 0);
    CHECK(fs::file_size(ldr) > 0);

    const fs::path report = td.path / "report.csv";
    REQUIRE(run_cli({"eval", "--ckpt", ckpt.string(), "--dataset", data.string(), "--report",
                     report.string(), "--samples", "8"}) == 0);
    {
        std::ifstream f(report);
        std::string line;
        std::getline(f, line);
        CHECK(line == "task,view,psnr,ssim");
        int rows = 0;
        while (std::getline(f, line))
            if (!line.empty()) ++rows;
        CHECK(rows > 0);
    }

    const fs::path crf = td.path / "crf.csv";
    REQUIRE(run_cli({"export-crf", "--ckpt", ckpt.string(), "--out", crf.string(), "--n",
                     "17"}) == 0);
    {
        std::ifstream f(crf);
        std::string line;
        int rows = 0;
        while (std::getline(f, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 18); // header + samples
    }

    // Resuming from the checkpoint must extend rather than restart.
    REQUIRE(run_cli({"train", "--dataset", data.string(), "--out",
                     (td.path / "model2.ckpt").string(), "--resume", ckpt.string(), "--iters",
                     "40"}) == 0);
    const evrad::Checkpoint ck = evrad::load_checkpoint((td.path / "model2.ckpt").string());
    CHECK(ck.iteration == 40);
}

TEST_CASE("pose files are validated", "[cli]") {
    TempDir td;
    const fs::path pose = td.path / "bad_pose.txt";
    {
        std::ofstream f(pose);
        f << "1 0 0\n"; // too few numbers
    }
    CHECK_THROWS(evrad::cli::read_pose_file(pose.string()));
    {
        std::ofstream f(pose);
        // Non-orthonormal rotation block.
        f << "2 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n";
    }
    CHECK_THROWS(evrad::cli::read_pose_file(pose.string()));
    {
        std::ofstream f(pose);
        f << "1 0 0 0.5\n0 1 0 0\n0 0 1 -2.0\n0 0 0 1\n";
    }
    const evrad::Mat4 m = evrad::cli::read_pose_file(pose.string());
    CHECK(m.at(0, 3) == 0.5);
    CHECK(m.at(2, 3) == -2.0);
}
