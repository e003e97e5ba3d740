// SPDX-License-Identifier: Apache-2.0
//
// File formats: PFM (HDR), binary PPM (LDR), event streams as CSV and a
// fixed 16-byte binary record, CSV curve/metric writers, raw f32 field
// snapshots, and the dataset manifest (JSON).
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "camera.hpp"
#include "events.hpp"
#include "field.hpp"
#include "image.hpp"
#include "tonemap.hpp"

namespace evrad {

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream f(path, mode);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    return f;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream f(path, mode);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    return f;
}

// ---------------------------------------------------------------------------
// PFM: "PF" (rgb) or "Pf" (single channel), scale -1.0 (little endian),
// rows stored bottom-up.

inline void write_pfm(const std::string& path, const Imagef& img) {
    if (img.channels != 3 && img.channels != 1)
        throw std::invalid_argument("write_pfm: 1 or 3 channels only");
    auto f = open_out(path, std::ios::binary);
    f << (img.channels == 3 ? "PF" : "Pf") << "\n"
      << img.width << " " << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        f.write(reinterpret_cast<const char*>(&img.data[size_t(y) * img.width * img.channels]),
                std::streamsize(sizeof(float)) * img.width * img.channels);
    if (!f) throw std::runtime_error("write_pfm: write failed: " + path);
}

inline Imagef read_pfm(const std::string& path) {
    auto f = open_in(path, std::ios::binary);
    std::string magic;
    f >> magic;
    int channels;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw std::runtime_error("read_pfm: bad magic in " + path);
    int w, h;
    double scale;
    f >> w >> h >> scale;
    f.get(); // single whitespace after the header
    if (w <= 0 || h <= 0) throw std::runtime_error("read_pfm: bad dimensions in " + path);
    if (scale >= 0) throw std::runtime_error("read_pfm: big-endian PFM not supported: " + path);
    Imagef img(w, h, channels);
    for (int y = h - 1; y >= 0; --y)
        f.read(reinterpret_cast<char*>(&img.data[size_t(y) * w * channels]),
               std::streamsize(sizeof(float)) * w * channels);
    if (!f) throw std::runtime_error("read_pfm: truncated file: " + path);
    return img;
}

// ---------------------------------------------------------------------------
// PPM: binary P6, maxval 255 only.

inline void write_ppm(const std::string& path, const Imageb& img) {
    if (img.channels != 3) throw std::invalid_argument("write_ppm: need an RGB image");
    auto f = open_out(path, std::ios::binary);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.data.data()), std::streamsize(img.data.size()));
    if (!f) throw std::runtime_error("write_ppm: write failed: " + path);
}

inline Imageb read_ppm(const std::string& path) {
    auto f = open_in(path, std::ios::binary);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw std::runtime_error("read_ppm: only binary P6 supported: " + path);
    int w, h, maxval;
    f >> w >> h >> maxval;
    f.get();
    if (w <= 0 || h <= 0) throw std::runtime_error("read_ppm: bad dimensions in " + path);
    if (maxval != 255) throw std::runtime_error("read_ppm: maxval must be 255: " + path);
    Imageb img(w, h, 3);
    f.read(reinterpret_cast<char*>(img.data.data()), std::streamsize(img.data.size()));
    if (!f) throw std::runtime_error("read_ppm: truncated file: " + path);
    return img;
}

// ---------------------------------------------------------------------------
// Event stream files.

// Text form: header "x,y,t,p", one event per row, t printed with 9
// significant digits.
inline void write_events_csv(const std::string& path, const EventStream& stream) {
    auto f = open_out(path);
    f << "x,y,t,p\n";
    char line[96];
    for (const Event& e : stream.events) {
        std::snprintf(line, sizeof(line), "%d,%d,%.9g,%d\n", e.x, e.y, e.t, e.p);
        f << line;
    }
    if (!f) throw std::runtime_error("write_events_csv: write failed: " + path);
}

inline EventStream read_events_csv(const std::string& path, int width, int height) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line) || line != "x,y,t,p")
        throw std::runtime_error("read_events_csv: missing x,y,t,p header: " + path);
    EventStream s;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        Event e;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%d", &e.x, &e.y, &e.t, &e.p) != 4)
            throw std::runtime_error("read_events_csv: bad row '" + line + "' in " + path);
        validate_event(e, width, height);
        s.events.push_back(e);
    }
    sort_event_stream(s.events);
    return s;
}

// Binary form: 16-byte little-endian records, time-sorted.
struct EventRecord {
    std::uint16_t x;
    std::uint16_t y;
    std::int8_t p;
    std::uint8_t pad[3];
    double t;
};
static_assert(sizeof(EventRecord) == 16, "event record must pack to 16 bytes");

inline void write_events_bin(const std::string& path, const EventStream& stream) {
    auto f = open_out(path, std::ios::binary);
    for (const Event& e : stream.events) {
        EventRecord r{};
        r.x = std::uint16_t(e.x);
        r.y = std::uint16_t(e.y);
        r.p = std::int8_t(e.p);
        r.t = e.t;
        f.write(reinterpret_cast<const char*>(&r), sizeof(r));
    }
    if (!f) throw std::runtime_error("write_events_bin: write failed: " + path);
}

inline EventStream read_events_bin(const std::string& path, int width, int height) {
    auto f = open_in(path, std::ios::binary);
    EventStream s;
    EventRecord r;
    double prev_t = -1;
    while (f.read(reinterpret_cast<char*>(&r), sizeof(r))) {
        Event e{int(r.x), int(r.y), int(r.p), r.t};
        validate_event(e, width, height);
        if (e.t < prev_t) throw std::runtime_error("read_events_bin: records not time-sorted: " + path);
        prev_t = e.t;
        s.events.push_back(e);
    }
    if (f.gcount() != 0) throw std::runtime_error("read_events_bin: trailing partial record: " + path);
    return s;
}

// ---------------------------------------------------------------------------
// Curve and metric CSV writers.

struct CurveRow {
    double log_exposure;
    double rgb[3];
};

inline void write_crf_csv(const std::string& path, std::span<const CurveRow> rows) {
    auto f = open_out(path);
    f << "log_exposure,r,g,b\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g,%.9g\n", r.log_exposure, r.rgb[0],
                      r.rgb[1], r.rgb[2]);
        f << line;
    }
    if (!f) throw std::runtime_error("write_crf_csv: write failed: " + path);
}

inline std::vector<CurveRow> read_crf_csv(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line) || line != "log_exposure,r,g,b")
        throw std::runtime_error("read_crf_csv: missing header: " + path);
    std::vector<CurveRow> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        CurveRow r;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &r.log_exposure, &r.rgb[0], &r.rgb[1],
                        &r.rgb[2]) != 4)
            throw std::runtime_error("read_crf_csv: bad row '" + line + "' in " + path);
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Field snapshot: text manifest naming two raw little-endian f32 grids.
// Layout matches VoxelField node order (x fastest), emission interleaved rgb.

inline void write_f32_raw(const std::string& path, std::span<const double> values) {
    auto f = open_out(path, std::ios::binary);
    std::vector<float> tmp(values.begin(), values.end());
    f.write(reinterpret_cast<const char*>(tmp.data()), std::streamsize(tmp.size() * sizeof(float)));
    if (!f) throw std::runtime_error("write_f32_raw: write failed: " + path);
}

inline std::vector<float> read_f32_raw(const std::string& path, size_t count) {
    auto f = open_in(path, std::ios::binary);
    std::vector<float> tmp(count);
    f.read(reinterpret_cast<char*>(tmp.data()), std::streamsize(count * sizeof(float)));
    if (!f) throw std::runtime_error("read_f32_raw: truncated file: " + path);
    return tmp;
}

inline void write_field_snapshot(const std::string& base, const VoxelField& field) {
    const std::string dens = base + ".density.f32", emis = base + ".emission.f32";
    auto f = open_out(base + ".txt");
    f << "resolution " << field.nx << " " << field.ny << " " << field.nz << "\n"
      << "bounds " << field.bounds.lo.x << " " << field.bounds.lo.y << " " << field.bounds.lo.z
      << " " << field.bounds.hi.x << " " << field.bounds.hi.y << " " << field.bounds.hi.z << "\n"
      << "density " << std::filesystem::path(dens).filename().string() << "\n"
      << "emission " << std::filesystem::path(emis).filename().string() << "\n";
    const size_t n = field.node_count();
    write_f32_raw(dens, std::span<const double>(field.params.data(), n));
    write_f32_raw(emis, std::span<const double>(field.params.data() + n, 3 * n));
}

inline VoxelField read_field_snapshot(const std::string& base) {
    auto f = open_in(base + ".txt");
    std::string key, dens_file, emis_file;
    int nx, ny, nz;
    Aabb b;
    f >> key >> nx >> ny >> nz;
    if (key != "resolution") throw std::runtime_error("field snapshot: expected resolution line");
    f >> key >> b.lo.x >> b.lo.y >> b.lo.z >> b.hi.x >> b.hi.y >> b.hi.z;
    if (key != "bounds") throw std::runtime_error("field snapshot: expected bounds line");
    f >> key >> dens_file;
    if (key != "density") throw std::runtime_error("field snapshot: expected density line");
    f >> key >> emis_file;
    if (key != "emission") throw std::runtime_error("field snapshot: expected emission line");
    const auto dir = std::filesystem::path(base + ".txt").parent_path();
    VoxelField field(nx, ny, nz, b);
    const size_t n = field.node_count();
    const auto d = read_f32_raw((dir / dens_file).string(), n);
    const auto e = read_f32_raw((dir / emis_file).string(), 3 * n);
    for (size_t i = 0; i < n; ++i) field.params[i] = d[i];
    for (size_t i = 0; i < 3 * n; ++i) field.params[n + i] = e[i];
    return field;
}

// ---------------------------------------------------------------------------
// Dataset manifest.

struct ViewRecord {
    int id = 0;
    double t_start = 0, t_end = 0, exposure_time = 0;
    std::string ldr_path, events_path, hdr_gt_path;
    std::vector<TimedPose> poses; // b_sim + 1, time-sorted, spanning the exposure
    TimedPose ref_pose;           // mid-exposure pose the held-out sharp image uses
};

struct TestViewRecord {
    int id = 0;
    TimedPose pose;
    std::string hdr_gt_path;
};

struct DatasetManifest {
    Camera camera;
    double near = 0, far = 0;
    Aabb bounds{{-1, -1, -1}, {1, 1, 1}}; // reconstruction volume hint
    int b_sim = 0;
    double theta_sim = 0, phi = 0;
    std::uint64_t seed = 0;
    BayerMode bayer = BayerMode::rggb;
    std::vector<double> novel_exposure_factors;
    std::string crf_gt_path;
    double crf_lo = 0, crf_hi = 0;
    std::vector<ViewRecord> views;
    std::vector<TestViewRecord> test_views;
};

namespace detail {
inline nlohmann::json pose_to_json(const TimedPose& p) {
    return {{"t", p.t}, {"m", p.c2w.m}};
}
inline TimedPose pose_from_json(const nlohmann::json& j) {
    TimedPose p;
    p.t = j.at("t").get<double>();
    const auto m = j.at("m").get<std::vector<double>>();
    if (m.size() != 16) throw std::runtime_error("manifest: pose matrix must have 16 entries");
    std::copy(m.begin(), m.end(), p.c2w.m.begin());
    p.validate();
    return p;
}
} // namespace detail

inline void write_manifest(const std::string& path, const DatasetManifest& m) {
    nlohmann::json j;
    j["format"] = "evrad-dataset-v1";
    j["camera"] = {{"width", m.camera.width}, {"height", m.camera.height}, {"fx", m.camera.fx},
                   {"fy", m.camera.fy},       {"cx", m.camera.cx},         {"cy", m.camera.cy}};
    j["near"] = m.near;
    j["far"] = m.far;
    j["bounds"] = {{"lo", {m.bounds.lo.x, m.bounds.lo.y, m.bounds.lo.z}},
                   {"hi", {m.bounds.hi.x, m.bounds.hi.y, m.bounds.hi.z}}};
    j["b_sim"] = m.b_sim;
    j["theta_sim"] = m.theta_sim;
    j["phi"] = m.phi;
    j["seed"] = m.seed;
    j["bayer"] = m.bayer == BayerMode::rggb ? "rggb" : "none";
    j["novel_exposure_factors"] = m.novel_exposure_factors;
    j["crf_gt"] = {{"path", m.crf_gt_path}, {"lo", m.crf_lo}, {"hi", m.crf_hi}};
    for (const auto& v : m.views) {
        if (int(v.poses.size()) != m.b_sim + 1)
            throw std::invalid_argument("write_manifest: view must carry b_sim+1 poses");
        nlohmann::json jv;
        jv["id"] = v.id;
        jv["t_start"] = v.t_start;
        jv["t_end"] = v.t_end;
        jv["exposure_time"] = v.exposure_time;
        jv["ldr"] = v.ldr_path;
        jv["events"] = v.events_path;
        jv["hdr_gt"] = v.hdr_gt_path;
        jv["ref_pose"] = detail::pose_to_json(v.ref_pose);
        for (const auto& p : v.poses) jv["poses"].push_back(detail::pose_to_json(p));
        j["views"].push_back(jv);
    }
    for (const auto& t : m.test_views) {
        j["test_views"].push_back({{"id", t.id},
                                   {"pose", detail::pose_to_json(t.pose)},
                                   {"hdr_gt", t.hdr_gt_path}});
    }
    auto f = open_out(path);
    f << j.dump(1) << "\n";
}

inline DatasetManifest read_manifest(const std::string& path) {
    auto f = open_in(path);
    nlohmann::json j;
    f >> j;
    if (j.value("format", "") != "evrad-dataset-v1")
        throw std::runtime_error("manifest: unrecognized format field in " + path);
    DatasetManifest m;
    const auto& jc = j.at("camera");
    m.camera = {jc.at("width").get<int>(), jc.at("height").get<int>(), jc.at("fx").get<double>(),
                jc.at("fy").get<double>(), jc.at("cx").get<double>(), jc.at("cy").get<double>()};
    m.camera.validate();
    m.near = j.at("near").get<double>();
    m.far = j.at("far").get<double>();
    if (!(m.near > 0 && m.far > m.near)) throw std::runtime_error("manifest: need 0 < near < far");
    if (j.contains("bounds")) {
        const auto lo = j["bounds"].at("lo").get<std::vector<double>>();
        const auto hi = j["bounds"].at("hi").get<std::vector<double>>();
        if (lo.size() != 3 || hi.size() != 3)
            throw std::runtime_error("manifest: bounds need lo/hi triples");
        m.bounds = {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
    }
    m.b_sim = j.at("b_sim").get<int>();
    m.theta_sim = j.at("theta_sim").get<double>();
    m.phi = j.at("phi").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const std::string bayer = j.value("bayer", "rggb");
    if (bayer == "rggb") m.bayer = BayerMode::rggb;
    else if (bayer == "none") m.bayer = BayerMode::none;
    else throw std::runtime_error("manifest: bayer must be rggb or none");
    m.novel_exposure_factors = j.value("novel_exposure_factors", std::vector<double>{});
    if (j.contains("crf_gt")) {
        m.crf_gt_path = j["crf_gt"].value("path", "");
        m.crf_lo = j["crf_gt"].value("lo", 0.0);
        m.crf_hi = j["crf_gt"].value("hi", 0.0);
    }
    for (const auto& jv : j.value("views", nlohmann::json::array())) {
        ViewRecord v;
        v.id = jv.at("id").get<int>();
        v.t_start = jv.at("t_start").get<double>();
        v.t_end = jv.at("t_end").get<double>();
        v.exposure_time = jv.at("exposure_time").get<double>();
        v.ldr_path = jv.at("ldr").get<std::string>();
        v.events_path = jv.at("events").get<std::string>();
        v.hdr_gt_path = jv.value("hdr_gt", "");
        if (jv.contains("ref_pose")) v.ref_pose = detail::pose_from_json(jv["ref_pose"]);
        for (const auto& jp : jv.at("poses")) v.poses.push_back(detail::pose_from_json(jp));
        if (int(v.poses.size()) != m.b_sim + 1)
            throw std::runtime_error("manifest: view must carry b_sim+1 poses");
        for (size_t i = 0; i < v.poses.size(); ++i) {
            if (v.poses[i].t < v.t_start - 1e-12 || v.poses[i].t > v.t_end + 1e-12)
                throw std::runtime_error("manifest: pose time outside exposure window");
            if (i > 0 && !(v.poses[i].t > v.poses[i - 1].t))
                throw std::runtime_error("manifest: pose times must be strictly increasing");
        }
        m.views.push_back(std::move(v));
    }
    for (const auto& jt : j.value("test_views", nlohmann::json::array())) {
        TestViewRecord t;
        t.id = jt.at("id").get<int>();
        t.pose = detail::pose_from_json(jt.at("pose"));
        t.hdr_gt_path = jt.at("hdr_gt").get<std::string>();
        m.test_views.push_back(std::move(t));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Dataset loading (manifest plus referenced files, LDR dequantized).

struct LoadedView {
    ViewRecord rec;
    Imagef ldr;    // [0,1], dequantized
    Imagef hdr_gt; // empty when not provided
    EventStream events;
};

struct LoadedTestView {
    TestViewRecord rec;
    Imagef hdr_gt;
};

struct Dataset {
    std::string root;
    DatasetManifest manifest;
    std::vector<LoadedView> views;
    std::vector<LoadedTestView> tests;
};

inline Dataset load_dataset(const std::string& manifest_path) {
    Dataset d;
    d.manifest = read_manifest(manifest_path);
    d.root = std::filesystem::path(manifest_path).parent_path().string();
    auto resolve = [&](const std::string& rel) {
        const auto p = std::filesystem::path(d.root) / rel;
        if (!std::filesystem::exists(p))
            throw std::runtime_error("dataset: missing referenced file " + p.string());
        return p.string();
    };
    const Camera& cam = d.manifest.camera;
    for (const auto& v : d.manifest.views) {
        LoadedView lv;
        lv.rec = v;
        lv.ldr = dequantize8(read_ppm(resolve(v.ldr_path)));
        if (lv.ldr.width != cam.width || lv.ldr.height != cam.height)
            throw std::runtime_error("dataset: LDR image size disagrees with manifest camera");
        lv.events = read_events_csv(resolve(v.events_path), cam.width, cam.height);
        if (!v.hdr_gt_path.empty()) lv.hdr_gt = read_pfm(resolve(v.hdr_gt_path));
        d.views.push_back(std::move(lv));
    }
    for (const auto& t : d.manifest.test_views) {
        LoadedTestView lt;
        lt.rec = t;
        lt.hdr_gt = read_pfm(resolve(t.hdr_gt_path));
        d.tests.push_back(std::move(lt));
    }
    return d;
}

} // namespace evrad
