#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "evpipe/tracking.hpp"

using namespace evpipe::mocap;

namespace {

Detection det(int marker, double u, double v, std::uint64_t t = 0) {
    Detection d;
    d.marker_index = marker;
    d.u = u;
    d.v = v;
    d.support = 9;
    d.t_us = t;
    return d;
}

}  // namespace

TEST_CASE("a filter initializes exactly at its first detection") {
    CentroidTracker tracker;
    CHECK_FALSE(tracker.estimate(0).has_value());
    CHECK(tracker.tracked_markers().empty());

    tracker.step(std::vector<Detection>{det(0, 12.25, 40.5)}, 0.01);
    const auto est = tracker.estimate(0);
    REQUIRE(est.has_value());
    CHECK(est->u == doctest::Approx(12.25).epsilon(1e-12));
    CHECK(est->v == doctest::Approx(40.5).epsilon(1e-12));
    CHECK(est->var_u == doctest::Approx(0.0));
    CHECK(est->steps_since_detection == 0);
    CHECK(tracker.tracked_markers() == std::vector<int>{0});
    CHECK_FALSE(tracker.estimate(1).has_value());
}

// particle-filter tuning rule: the process noise has to cover the target
// dynamics, otherwise the velocity marginal impoverishes (it is only ever
// observed through position)
TrackerParams covering_params() {
    TrackerParams p;
    p.process_accel = 400.0;
    p.init_vel_sigma = 150.0;
    return p;
}

TEST_CASE("a static target stays pinned under repeated detections") {
    CentroidTracker tracker(covering_params(), 1);
    for (int i = 0; i < 50; ++i) tracker.step(std::vector<Detection>{det(2, 100.0, 60.0)}, 0.005);
    const auto est = tracker.estimate(2);
    REQUIRE(est.has_value());
    CHECK(std::abs(est->u - 100.0) < 0.5);
    CHECK(std::abs(est->v - 60.0) < 0.5);
    CHECK(est->steps_since_detection == 0);
}

TEST_CASE("constant velocity coasts through a detection gap") {
    CentroidTracker tracker(covering_params(), 1);
    const double dt = 0.01;
    const double vel = 120.0;  // px/s along u
    for (int i = 0; i < 40; ++i)
        tracker.step(std::vector<Detection>{det(1, 10.0 + vel * dt * i, 30.0)}, dt);

    // three blind steps: prediction only
    for (int i = 0; i < 3; ++i) tracker.step({}, dt);

    const auto est = tracker.estimate(1);
    REQUIRE(est.has_value());
    const double expected_u = 10.0 + vel * dt * 42;
    CHECK(std::abs(est->u - expected_u) < 1.5);
    CHECK(std::abs(est->v - 30.0) < 1.5);
    CHECK(est->steps_since_detection == 3);
    CHECK(est->vu == doctest::Approx(vel).epsilon(0.15));
}

TEST_CASE("position variance grows while coasting") {
    CentroidTracker tracker;
    for (int i = 0; i < 20; ++i) tracker.step(std::vector<Detection>{det(0, 50.0, 50.0)}, 0.01);
    const double var0 = tracker.estimate(0)->var_u;
    for (int i = 0; i < 10; ++i) tracker.step({}, 0.01);
    const double var1 = tracker.estimate(0)->var_u;
    CHECK(var1 > var0);
}

TEST_CASE("identical seeds give identical trajectories") {
    CentroidTracker a(TrackerParams{}, 42);
    CentroidTracker b(TrackerParams{}, 42);
    CentroidTracker c(TrackerParams{}, 43);

    double last_a = 0.0, last_b = 0.0, last_c = 0.0;
    for (int i = 0; i < 30; ++i) {
        const auto d = det(0, 20.0 + 2.0 * i, 15.0 + 0.5 * i);
        const std::vector<Detection> dets =
            i % 4 == 3 ? std::vector<Detection>{} : std::vector<Detection>{d};
        a.step(dets, 0.01);
        b.step(dets, 0.01);
        c.step(dets, 0.01);
        last_a = a.estimate(0)->u;
        last_b = b.estimate(0)->u;
        last_c = c.estimate(0)->u;
    }
    CHECK(last_a == last_b);
    CHECK(a.estimate(0)->v == b.estimate(0)->v);
    CHECK(a.estimate(0)->vu == b.estimate(0)->vu);
    // different seed, different particle noise
    CHECK(last_a != last_c);
}

TEST_CASE("markers track independently") {
    CentroidTracker tracker(covering_params(), 1);
    for (int i = 0; i < 25; ++i) {
        std::vector<Detection> dets = {det(3, 10.0 + i, 10.0), det(7, 90.0, 80.0 - 0.5 * i)};
        tracker.step(dets, 0.01);
    }
    CHECK(tracker.tracked_markers() == std::vector<int>{3, 7});

    const auto m3 = tracker.estimate(3);
    const auto m7 = tracker.estimate(7);
    REQUIRE(m3.has_value());
    REQUIRE(m7.has_value());
    CHECK(std::abs(m3->u - 34.0) < 1.5);
    CHECK(std::abs(m7->v - 68.0) < 1.5);
    CHECK(m3->vu > 0.0);
    CHECK(m7->vv < 0.0);
}

TEST_CASE("steps without any detection still advance missing-step counters") {
    CentroidTracker tracker;
    tracker.step(std::vector<Detection>{det(0, 5.0, 5.0)}, 0.01);
    tracker.step({}, 0.01);
    tracker.step({}, 0.01);
    CHECK(tracker.estimate(0)->steps_since_detection == 2);
    tracker.step(std::vector<Detection>{det(0, 5.0, 5.0)}, 0.01);
    CHECK(tracker.estimate(0)->steps_since_detection == 0);
}
