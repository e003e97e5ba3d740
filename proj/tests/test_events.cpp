// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <evrad/events.hpp>

using namespace evrad;

TEST_CASE("floor toward zero", "[events]") {
    CHECK(floor_toward_zero(1.9) == 1);
    CHECK(floor_toward_zero(-1.9) == -1);
    CHECK(floor_toward_zero(2.0) == 2);
    CHECK(floor_toward_zero(-0.5) == 0);
    CHECK(floor_toward_zero(0.0) == 0);
}

TEST_CASE("ideal event count from a log radiance step", "[events]") {
    // ln L2 - ln L1 = 0.5 at threshold 0.2 crosses twice.
    CHECK(ideal_event_count(1.0, std::exp(0.5), 0.2) == 2);
    CHECK(ideal_event_count(std::exp(0.5), 1.0, 0.2) == -2);
    CHECK(ideal_event_count(1.0, 1.0, 0.2) == 0);
    CHECK(ideal_event_count(1.0, std::exp(0.19), 0.2) == 0);
    CHECK_THROWS_AS(ideal_event_count(0.0, 1.0, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(ideal_event_count(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("bayer channel map anchors red at the origin", "[events]") {
    CHECK(bayer_channel(0, 0) == 0);
    CHECK(bayer_channel(1, 0) == 1);
    CHECK(bayer_channel(0, 1) == 1);
    CHECK(bayer_channel(1, 1) == 2);
    CHECK(bayer_channel(2, 2) == 0);
    const double rgb[3] = {1.0, 2.0, 4.0};
    CHECK(sensor_plane_value(rgb, 0, 0, BayerMode::rggb) == 1.0);
    CHECK(sensor_plane_value(rgb, 1, 1, BayerMode::rggb) == 4.0);
    CHECK(sensor_plane_value(rgb, 0, 0, BayerMode::none) ==
          Catch::Approx(7.0 / 3.0).margin(1e-15));
}

TEST_CASE("equal count division splits ten events into 3 3 2 2", "[events]") {
    EventStream s;
    for (int i = 0; i < 10; ++i) s.events.push_back({0, 0, 1, 0.05 + 0.1 * i});
    const auto bounds = divide_events(s, 0.0, 1.0, 4);
    REQUIRE(bounds.size() == 5);
    CHECK(bounds.front() == 0.0);
    CHECK(bounds.back() == 1.0);
    // Boundaries fall at midpoints between the straddling events.
    CHECK(bounds[1] == Catch::Approx(0.5 * (0.25 + 0.35)).margin(1e-12));
    CHECK(bounds[2] == Catch::Approx(0.5 * (0.55 + 0.65)).margin(1e-12));
    CHECK(bounds[3] == Catch::Approx(0.5 * (0.75 + 0.85)).margin(1e-12));
    const BinGrid grid = build_bin_grid(s, bounds, 1, 1);
    CHECK(grid.at(0, 0, 0) == 3);
    CHECK(grid.at(1, 0, 0) == 3);
    CHECK(grid.at(2, 0, 0) == 2);
    CHECK(grid.at(3, 0, 0) == 2);
}

TEST_CASE("per-bin populations differ by at most one", "[events]") {
    Rng rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        EventStream s;
        const int n = 4 + int(rng.index(40));
        for (int i = 0; i < n; ++i) s.events.push_back({0, 0, 1, rng.uniform(0.0, 1.0)});
        const int b = 2 + int(rng.index(5));
        if (n < b) continue;
        const auto bounds = divide_events(s, 0.0, 1.0, b);
        // Count events by scanning the boundaries directly.
        std::vector<int> counts(b, 0);
        for (const auto& e : s.events)
            for (int i = 0; i < b; ++i)
                if (e.t >= bounds[i] && e.t < bounds[i + 1]) ++counts[i];
        int lo = counts[0], hi = counts[0], total = 0;
        for (int c : counts) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
            total += c;
        }
        CHECK(total == n);
        CHECK(hi - lo <= 1);
        // Earlier bins absorb the remainder.
        for (int i = 1; i < b; ++i) CHECK(counts[i] <= counts[i - 1]);
    }
}

TEST_CASE("sparse streams fall back to uniform boundaries", "[events]") {
    EventStream s;
    s.events.push_back({0, 0, 1, 0.37});
    const auto bounds = divide_events(s, 0.0, 1.0, 4);
    REQUIRE(bounds.size() == 5);
    for (int i = 0; i <= 4; ++i) CHECK(bounds[i] == Catch::Approx(0.25 * i).margin(1e-12));
    const auto empty_bounds = divide_events(EventStream{}, 2.0, 4.0, 2);
    CHECK(empty_bounds == std::vector<double>{2.0, 3.0, 4.0});
}

TEST_CASE("division ignores events outside the exposure", "[events]") {
    EventStream s;
    for (int i = 0; i < 6; ++i) s.events.push_back({0, 0, 1, 0.3 + 0.1 * i});
    s.events.push_back({0, 0, 1, 0.1});
    s.events.push_back({0, 0, 1, 1.5});
    const auto bounds = divide_events(s, 0.25, 1.0, 2);
    const BinGrid grid = build_bin_grid(s, bounds, 1, 1);
    CHECK(grid.at(0, 0, 0) + grid.at(1, 0, 0) == 6);
}

TEST_CASE("bin grid matches a brute force scan", "[events]") {
    Rng rng(808);
    EventStream s;
    const int w = 6, h = 5;
    for (int i = 0; i < 400; ++i)
        s.events.push_back({int(rng.index(w)), int(rng.index(h)), rng.uniform() < 0.4 ? -1 : 1,
                            rng.uniform(0.0, 1.0)});
    const std::vector<double> bounds{0.0, 0.21, 0.5, 0.77, 1.0};
    const BinGrid grid = build_bin_grid(s, bounds, w, h);
    for (int bin = 0; bin < 4; ++bin)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int sum = 0;
                for (const auto& e : s.events)
                    if (e.x == x && e.y == y && e.t >= bounds[bin] && e.t < bounds[bin + 1])
                        sum += e.p;
                CHECK(grid.at(bin, y, x) == sum);
            }
}

TEST_CASE("events at the exposure end are dropped", "[events]") {
    EventStream s;
    s.events.push_back({0, 0, 1, 1.0});
    const std::vector<double> bounds{0.0, 0.5, 1.0};
    const BinGrid grid = build_bin_grid(s, bounds, 1, 1);
    CHECK(grid.at(0, 0, 0) == 0);
    CHECK(grid.at(1, 0, 0) == 0);
}

TEST_CASE("interior boundaries assign events to the right-hand bin", "[events]") {
    EventStream s;
    s.events.push_back({0, 0, 1, 0.5});
    const std::vector<double> bounds{0.0, 0.5, 1.0};
    const BinGrid grid = build_bin_grid(s, bounds, 1, 1);
    CHECK(grid.at(0, 0, 0) == 0);
    CHECK(grid.at(1, 0, 0) == 1);
}

TEST_CASE("offsets vanish for a pixel without events", "[events]") {
    const std::vector<double> bounds{0.0, 1.0, 2.0};
    const auto h = calibration_offset(EventStream{}, bounds, 0, 0);
    CHECK(h == std::vector<double>{0.0, 0.0});
}

TEST_CASE("lone first-bin event contributes the half fallback", "[events]") {
    EventStream s;
    s.events.push_back({0, 0, 1, 0.5});
    const std::vector<double> bounds{0.0, 1.0, 2.0};
    const auto h = calibration_offset(s, bounds, 0, 0);
    REQUIRE(h.size() == 2);
    CHECK(h[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(h[1] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("adjacent bins cancel to a unit offset", "[events]") {
    // Last event of bin 0 at 0.9, first of bin 1 at 1.1 with opposite
    // polarity: the boundary sits exactly halfway, so each side contributes
    // half an event and the signs add.
    EventStream s;
    s.events.push_back({0, 0, 1, 0.9});
    s.events.push_back({0, 0, -1, 1.1});
    const std::vector<double> bounds{0.0, 1.0, 2.0};
    const auto h = calibration_offset(s, bounds, 0, 0);
    CHECK(h[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(h[1] == Catch::Approx(-0.5).margin(1e-12));
}

TEST_CASE("uneven straddle gives a fractional offset", "[events]") {
    EventStream s;
    s.events.push_back({0, 0, 1, 0.5});
    s.events.push_back({0, 0, 1, 7.0 / 6.0});
    const std::vector<double> bounds{0.0, 1.0, 2.0};
    const auto h = calibration_offset(s, bounds, 0, 0);
    // phi = (1 - 0.5) / (7/6 - 0.5) = 0.75.
    CHECK(h[0] == Catch::Approx(0.5 - 0.75).margin(1e-12));
    CHECK(h[1] == Catch::Approx(0.75).margin(1e-12));
}

TEST_CASE("offsets are bounded and telescope", "[events]") {
    Rng rng(99);
    const std::vector<double> bounds{0.0, 0.3, 0.55, 0.8, 1.0};
    for (int trial = 0; trial < 100; ++trial) {
        EventStream s;
        const int n = int(rng.index(25));
        for (int i = 0; i < n; ++i)
            s.events.push_back({0, 0, rng.uniform() < 0.5 ? -1 : 1, rng.uniform(0.0, 1.0)});
        sort_event_stream(s.events);
        const auto h = calibration_offset(s, bounds, 0, 0);
        double sum = 0;
        for (double v : h) {
            CHECK(std::fabs(v) <= 2.0);
            sum += v;
        }
        // Telescoping sum collapses to the first bin term.
        CHECK(std::fabs(sum) <= 1.0);
    }
}

TEST_CASE("offset grid agrees with the per-pixel path", "[events]") {
    Rng rng(55);
    EventStream s;
    const int w = 3, h = 3;
    for (int i = 0; i < 60; ++i)
        s.events.push_back({int(rng.index(w)), int(rng.index(h)), rng.uniform() < 0.5 ? -1 : 1,
                            rng.uniform(0.0, 1.0)});
    const std::vector<double> bounds{0.0, 0.5, 1.0};
    const OffsetGrid grid = compute_offset_grid(s, bounds, w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const auto hv = calibration_offset(s, bounds, x, y);
            for (int bin = 0; bin < 2; ++bin)
                CHECK(grid.at(bin, y, x) == Catch::Approx(hv[bin]).margin(1e-15));
        }
}

TEST_CASE("low pass follows the coefficient schedule", "[events]") {
    const std::vector<double> radiance{1.0, 2.0, 4.0};
    const std::vector<double> unity{1.0, 1.0, 1.0};
    CHECK(lowpass_sequence(radiance, unity) == radiance);
    const std::vector<double> half{0.5, 0.5, 0.5};
    const auto lp = lowpass_sequence(radiance, half);
    CHECK(lp[0] == 1.0);
    CHECK(lp[1] == Catch::Approx(1.5).margin(1e-15));
    CHECK(lp[2] == Catch::Approx(2.75).margin(1e-15));
    const std::vector<double> bad{0.0, 1.0, 1.0};
    CHECK_THROWS_AS(lowpass_sequence(radiance, bad), std::invalid_argument);
}

TEST_CASE("predicted counts floor toward zero in the forward pass", "[events]") {
    const std::vector<double> lp{1.0, std::exp(0.5)};
    const auto hard = predicted_counts(lp, 0.2, SoftCountMode::straight_through);
    CHECK(hard[0] == 2.0);
    const auto soft = predicted_counts(lp, 0.2, SoftCountMode::linear);
    CHECK(soft[0] == Catch::Approx(2.5).margin(1e-12));
    const std::vector<double> down{std::exp(0.5), 1.0};
    CHECK(predicted_counts(down, 0.2, SoftCountMode::straight_through)[0] == -2.0);
    const std::vector<double> bad{1.0, 0.0};
    CHECK_THROWS_AS(predicted_counts(bad, 0.2, SoftCountMode::linear), std::invalid_argument);
}

TEST_CASE("calibrated counts subtract the offsets", "[events]") {
    const std::vector<double> pred{2.0, -1.0};
    const std::vector<double> offs{0.5, -0.25};
    const auto cal = calibrated_counts(pred, offs);
    CHECK(cal[0] == Catch::Approx(1.5).margin(1e-15));
    CHECK(cal[1] == Catch::Approx(-0.75).margin(1e-15));
}

TEST_CASE("event validation rejects malformed records", "[events]") {
    CHECK_NOTHROW(validate_event({3, 2, 1, 0.5}, 4, 4));
    CHECK_THROWS_AS(validate_event({4, 0, 1, 0.5}, 4, 4), std::invalid_argument);
    CHECK_THROWS_AS(validate_event({0, -1, 1, 0.5}, 4, 4), std::invalid_argument);
    CHECK_THROWS_AS(validate_event({0, 0, 0, 0.5}, 4, 4), std::invalid_argument);
    CHECK_THROWS_AS(validate_event({0, 0, 2, 0.5}, 4, 4), std::invalid_argument);
    CHECK_THROWS_AS(validate_event({0, 0, 1, std::numeric_limits<double>::quiet_NaN()}, 4, 4),
                    std::invalid_argument);
}

TEST_CASE("stream sorting is stable over ties", "[events]") {
    EventStream s;
    s.events.push_back({1, 0, 1, 0.5});
    s.events.push_back({0, 0, -1, 0.5});
    s.events.push_back({0, 0, 1, 0.1});
    sort_event_stream(s.events);
    CHECK(s.events[0].t == 0.1);
    CHECK(s.events[1].x == 0);
    CHECK(s.events[2].x == 1);
}

TEST_CASE("mapping field validates its shape", "[events]") {
    CHECK_THROWS_AS(EventMappingField({2, 4, 1}, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(EventMappingField({1, 4, 1}, 0.0), std::invalid_argument);
    EventMappingField f({1, 4, 1}, 0.2);
    MlpWorkspace ws;
    const double eps = latency_coefficient(f, 1.5, ws);
    CHECK(eps > 0.0);
    CHECK(eps < 1.0);
    CHECK_THROWS_AS(latency_coefficient(f, -1.0, ws), std::invalid_argument);
}
