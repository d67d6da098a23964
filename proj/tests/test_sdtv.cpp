#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "evpipe/errors.hpp"
#include "evpipe/rng.hpp"
#include "evpipe/sdtv.hpp"

using namespace evpipe;
using namespace evpipe::mocap;

namespace {

// Events at one pixel from (polarity, timestamp) pairs.
std::vector<Event> pixel_events(std::uint16_t x, std::uint16_t y,
                                const std::vector<std::pair<std::int8_t, std::uint64_t>>& seq) {
    std::vector<Event> out;
    for (const auto& [p, t] : seq) out.push_back(Event{x, y, p, t});
    return out;
}

// Square-wave blink at one pixel: on-edge every period, off-edge on_us later.
std::vector<Event> blink_events(std::uint16_t x, std::uint16_t y, std::uint64_t t0,
                                std::uint64_t period_us, std::uint64_t on_us, int cycles) {
    std::vector<Event> out;
    for (int k = 0; k < cycles; ++k) {
        const std::uint64_t t_on = t0 + static_cast<std::uint64_t>(k) * period_us;
        out.push_back(Event{x, y, 1, t_on});
        out.push_back(Event{x, y, -1, t_on + on_us});
    }
    return out;
}

MarkerConfig table_markers() {
    MarkerConfig cfg;
    const double freqs[] = {1730, 1980, 2290, 2610, 2860};
    for (int i = 0; i < 5; ++i) {
        MarkerSpec m;
        m.id = i + 1;
        m.freq_hz = freqs[i];
        m.duty = 0.01;
        cfg.markers.push_back(m);
    }
    return cfg;
}

}  // namespace

TEST_CASE("stack stores signed deltas in arrival order") {
    Sdtv sdtv(8, 8, 4);
    sdtv.update(pixel_events(2, 3, {{1, 150}}));
    CHECK(sdtv.stack_in_order(2, 3) == std::vector<std::int16_t>{150});
    CHECK(sdtv.entry_count(2, 3) == 1);
    CHECK(sdtv.last_event_time(2, 3) == 150);

    sdtv.update(pixel_events(2, 3, {{-1, 170}}));
    CHECK(sdtv.stack_in_order(2, 3) == std::vector<std::int16_t>{150, -20});
    CHECK_FALSE(sdtv.full(2, 3));

    sdtv.update(pixel_events(2, 3, {{1, 200}, {-1, 210}}));
    CHECK(sdtv.full(2, 3));
    CHECK(sdtv.stack_in_order(2, 3) == std::vector<std::int16_t>{150, -20, 30, -10});

    // fifth event overwrites the oldest entry
    sdtv.update(pixel_events(2, 3, {{1, 300}}));
    CHECK(sdtv.stack_in_order(2, 3) == std::vector<std::int16_t>{-20, 30, -10, 90});
    CHECK(sdtv.entry_count(2, 3) == 4);
}

TEST_CASE("oversized gaps reset the stack and re-reference time") {
    Sdtv sdtv(4, 4, 4);
    sdtv.update(pixel_events(1, 1, {{1, 100}, {-1, 200}}));
    CHECK(sdtv.entry_count(1, 1) == 2);

    sdtv.update(pixel_events(1, 1, {{1, 200 + 32768}}));
    CHECK(sdtv.entry_count(1, 1) == 0);
    CHECK(sdtv.last_event_time(1, 1) == 200 + 32768);

    sdtv.update(pixel_events(1, 1, {{1, 200 + 32768 + 50}}));
    CHECK(sdtv.stack_in_order(1, 1) == std::vector<std::int16_t>{50});

    // exactly the signed-16-bit maximum still fits
    Sdtv edge(4, 4, 4);
    edge.update(pixel_events(0, 0, {{1, 32767}}));
    CHECK(edge.stack_in_order(0, 0) == std::vector<std::int16_t>{32767});
}

TEST_CASE("same-timestamp repeats at a pixel are dropped") {
    Sdtv sdtv(4, 4, 4);
    sdtv.update(pixel_events(1, 1, {{1, 100}, {-1, 100}, {1, 130}}));
    CHECK(sdtv.stack_in_order(1, 1) == std::vector<std::int16_t>{100, 30});
}

TEST_CASE("the last D events are exactly recoverable from stack plus last time") {
    Rng rng(77);
    const int depth = 8;
    for (int trial = 0; trial < 200; ++trial) {
        Sdtv sdtv(4, 4, depth);
        const int n = 5 + static_cast<int>(rng.next_below(36));
        std::vector<std::pair<std::int8_t, std::uint64_t>> seq;
        std::uint64_t t = 1 + rng.next_below(32767);
        for (int i = 0; i < n; ++i) {
            seq.push_back({rng.uniform() < 0.5 ? std::int8_t(1) : std::int8_t(-1), t});
            t += 1 + rng.next_below(32767);
        }
        sdtv.update(pixel_events(2, 2, seq));

        const auto stack = sdtv.stack_in_order(2, 2);
        const int kept = static_cast<int>(stack.size());
        CHECK(kept == std::min(n, depth));

        std::uint64_t t_rec = sdtv.last_event_time(2, 2);
        for (int i = kept - 1; i >= 0; --i) {
            const auto& [p, t_true] = seq[static_cast<std::size_t>(n - kept + i)];
            CHECK(t_rec == t_true);
            CHECK((stack[static_cast<std::size_t>(i)] > 0 ? 1 : -1) == p);
            t_rec -= static_cast<std::uint64_t>(std::abs(static_cast<int>(stack[static_cast<std::size_t>(i)])));
        }
    }
}

TEST_CASE("period estimation worked examples") {
    SUBCASE("steady square wave: period 300 us, duty 10%") {
        std::vector<std::int16_t> stack;
        for (int i = 0; i < 16; ++i) {
            stack.push_back(270);
            stack.push_back(-30);
        }
        const auto period = estimate_period_us(stack);
        REQUIRE(period.has_value());
        CHECK(*period == 300);
    }

    SUBCASE("one spurious negative mid-period leaves the median at 300") {
        const std::vector<std::int16_t> stack = {270, -30, 270,  -30, -100,
                                                 170, -30, 270, -30, 270};
        const auto period = estimate_period_us(stack);
        REQUIRE(period.has_value());
        CHECK(*period >= 285);
        CHECK(*period <= 315);
        CHECK(*period == 300);
    }

    SUBCASE("fewer than two complete periods yields nothing") {
        CHECK_FALSE(estimate_period_us(std::vector<std::int16_t>{}).has_value());
        CHECK_FALSE(estimate_period_us(std::vector<std::int16_t>{270, -30}).has_value());
        CHECK_FALSE(estimate_period_us(std::vector<std::int16_t>{270, -30, 270, -30, 270}).has_value());
        // seven entries is the minimum closing two periods
        CHECK(estimate_period_us(std::vector<std::int16_t>{270, -30, 270, -30, 270, -30, 270})
                  .has_value());
    }

    SUBCASE("all-positive stack has no transitions") {
        CHECK_FALSE(estimate_period_us(std::vector<std::int16_t>{10, 10, 10, 10, 10}).has_value());
    }

    SUBCASE("even period count takes the floor mean of the middle pair") {
        // periods 300, 300, 304, 304 -> (300 + 304) / 2 = 302
        const std::vector<std::int16_t> stack = {270, -30, 270, -30, 270,  -30,
                                                 274, -30, 274, -30, 270};
        const auto period = estimate_period_us(stack);
        REQUIRE(period.has_value());
        CHECK(*period == 302);
    }
}

TEST_CASE("period estimation is exact across the blink band") {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        // 1.7-2.9 kHz, duty 0.5-2%
        const std::uint64_t period = 345 + rng.next_below(244);
        std::uint64_t on = static_cast<std::uint64_t>(
            std::max(1.0, std::round(static_cast<double>(period) * rng.uniform(0.005, 0.02))));
        std::vector<std::int16_t> stack;
        const int cycles = 4 + static_cast<int>(rng.next_below(13));
        for (int i = 0; i < cycles; ++i) {
            stack.push_back(static_cast<std::int16_t>(period - on));
            stack.push_back(static_cast<std::int16_t>(-static_cast<std::int64_t>(on)));
        }
        const auto est = estimate_period_us(stack);
        REQUIRE(est.has_value());
        CHECK(*est == period);
    }
}

TEST_CASE("marker config validation") {
    MarkerConfig cfg = table_markers();
    CHECK_NOTHROW(cfg.validate());

    MarkerConfig three = cfg;
    three.markers.resize(3);
    CHECK_THROWS_AS(three.validate(), ConfigError);

    MarkerConfig dup_f = cfg;
    dup_f.markers[1].freq_hz = dup_f.markers[0].freq_hz;
    CHECK_THROWS_AS(dup_f.validate(), ConfigError);

    MarkerConfig dup_id = cfg;
    dup_id.markers[1].id = dup_id.markers[0].id;
    CHECK_THROWS_AS(dup_id.validate(), ConfigError);

    MarkerConfig wide = cfg;
    wide.markers[4].freq_hz = 2 * wide.markers[0].freq_hz;
    CHECK_THROWS_AS(wide.validate(), ConfigError);

    MarkerConfig duty = cfg;
    duty.markers[0].duty = 0.0;
    CHECK_THROWS_AS(duty.validate(), ConfigError);
    duty.markers[0].duty = 1.0;
    CHECK_THROWS_AS(duty.validate(), ConfigError);
}

TEST_CASE("detect_markers labels blinking pixels by nearest frequency") {
    const MarkerConfig cfg = table_markers();
    Sdtv sdtv(16, 16, 32);

    // 578 us ~ 1730.1 Hz -> marker 0; 437 us ~ 2288.3 Hz -> marker 2
    sdtv.update(blink_events(3, 4, 100, 578, 30, 20));
    sdtv.update(blink_events(10, 2, 100, 437, 20, 20));
    // 476 us ~ 2100.8 Hz, between bands -> unlabeled
    sdtv.update(blink_events(7, 7, 100, 476, 20, 20));
    // too few events for a full stack -> unlabeled
    sdtv.update(blink_events(1, 1, 100, 578, 30, 3));

    DetectOptions opts;
    const auto labels = detect_markers(sdtv, cfg, opts);
    CHECK(labels[4 * 16 + 3] == 0);
    CHECK(labels[2 * 16 + 10] == 2);
    CHECK(labels[7 * 16 + 7] == -1);
    CHECK(labels[1 * 16 + 1] == -1);
    CHECK(labels[0] == -1);  // never touched
}

TEST_CASE("every table frequency resolves to its own marker at 5% tolerance") {
    const MarkerConfig cfg = table_markers();
    Sdtv sdtv(8, 8, 32);
    const std::uint64_t periods[] = {578, 505, 437, 383, 350};  // ~ the five frequencies
    for (int i = 0; i < 5; ++i)
        sdtv.update(blink_events(static_cast<std::uint16_t>(i), 0, 100, periods[i], 20, 20));

    const auto labels = detect_markers(sdtv, cfg, DetectOptions{});
    for (int i = 0; i < 5; ++i) CHECK(labels[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("stale pixels are skipped when a staleness window is set") {
    const MarkerConfig cfg = table_markers();
    Sdtv sdtv(8, 8, 32);
    sdtv.update(blink_events(2, 2, 100, 578, 30, 20));
    const std::uint64_t last = sdtv.last_event_time(2, 2);

    DetectOptions fresh;
    fresh.now_us = last + 1000;
    fresh.max_staleness_us = 2000;
    CHECK(detect_markers(sdtv, cfg, fresh)[2 * 8 + 2] == 0);

    DetectOptions stale = fresh;
    stale.now_us = last + 2001;
    CHECK(detect_markers(sdtv, cfg, stale)[2 * 8 + 2] == -1);

    DetectOptions disabled;  // max_staleness 0 disables the filter
    disabled.now_us = last + 100000;
    CHECK(detect_markers(sdtv, cfg, disabled)[2 * 8 + 2] == 0);
}

TEST_CASE("overlapping tolerance bands are a configuration error") {
    MarkerConfig cfg;
    for (int i = 0; i < 4; ++i) {
        MarkerSpec m;
        m.id = i;
        m.freq_hz = 1000.0 + 300.0 * i;
        cfg.markers.push_back(m);
    }
    cfg.markers[1].freq_hz = 1040.0;  // 4% from 1000 Hz

    Sdtv sdtv(4, 4, 32);
    DetectOptions opts;
    CHECK_THROWS_AS(detect_markers(sdtv, cfg, opts), ConfigError);

    DetectOptions bad_tol;
    bad_tol.rel_tol = 0.0;
    CHECK_THROWS_AS(detect_markers(sdtv, table_markers(), bad_tol), ConfigError);
    bad_tol.rel_tol = 0.5;
    CHECK_THROWS_AS(detect_markers(sdtv, table_markers(), bad_tol), ConfigError);
}

TEST_CASE("clustering worked examples") {
    SUBCASE("a 3x3 block centred at (10,10)") {
        std::vector<std::int32_t> labels(20 * 20, -1);
        for (int y = 9; y <= 11; ++y)
            for (int x = 9; x <= 11; ++x) labels[static_cast<std::size_t>(y) * 20 + x] = 4;
        const auto dets = cluster_detections(labels, 20, 20, 777);
        REQUIRE(dets.size() == 1);
        CHECK(dets[0].marker_index == 4);
        CHECK(dets[0].u == doctest::Approx(10.0));
        CHECK(dets[0].v == doctest::Approx(10.0));
        CHECK(dets[0].support == 9);
        CHECK(dets[0].t_us == 777);
    }

    SUBCASE("largest component wins per label") {
        std::vector<std::int32_t> labels(20 * 20, -1);
        for (int y = 0; y <= 2; ++y)
            for (int x = 0; x <= 2; ++x) labels[static_cast<std::size_t>(y) * 20 + x] = 1;
        labels[15 * 20 + 15] = 1;
        labels[15 * 20 + 16] = 1;
        const auto dets = cluster_detections(labels, 20, 20, 0);
        REQUIRE(dets.size() == 1);
        CHECK(dets[0].support == 9);
        CHECK(dets[0].u == doctest::Approx(1.0));
    }

    SUBCASE("diagonal neighbours connect (8-connectivity)") {
        std::vector<std::int32_t> labels(8 * 8, -1);
        labels[1 * 8 + 1] = 0;
        labels[2 * 8 + 2] = 0;
        labels[3 * 8 + 3] = 0;
        const auto dets = cluster_detections(labels, 8, 8, 0);
        REQUIRE(dets.size() == 1);
        CHECK(dets[0].support == 3);
        CHECK(dets[0].u == doctest::Approx(2.0));
        CHECK(dets[0].v == doctest::Approx(2.0));
    }

    SUBCASE("no labels, no detections") {
        CHECK(cluster_detections(std::vector<std::int32_t>(16, -1), 4, 4, 0).empty());
    }
}

TEST_CASE("detections never outnumber configured markers") {
    Rng rng(131);
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint32_t w = 4 + static_cast<std::uint32_t>(rng.next_below(13));
        const std::uint32_t h = 4 + static_cast<std::uint32_t>(rng.next_below(13));
        const int n_markers = 1 + static_cast<int>(rng.next_below(6));
        std::vector<std::int32_t> labels(static_cast<std::size_t>(w) * h);
        std::set<std::int32_t> present;
        for (auto& l : labels) {
            l = static_cast<std::int32_t>(rng.next_below(static_cast<std::uint64_t>(n_markers) + 1)) - 1;
            if (l >= 0) present.insert(l);
        }
        const auto dets = cluster_detections(labels, w, h, trial);
        CHECK(dets.size() <= static_cast<std::size_t>(n_markers));
        CHECK(dets.size() == present.size());

        std::set<int> seen;
        for (const auto& d : dets) {
            CHECK(seen.insert(d.marker_index).second);  // one detection per label
            CHECK(d.support >= 1);
            CHECK(d.u >= 0.0);
            CHECK(d.u < w);
            CHECK(d.v >= 0.0);
            CHECK(d.v < h);
        }
    }
}
