// autotune.hpp - bias autotuning: event-ratio statistics, the asymmetric
// per-pixel cost, the aggregate objective over marker patches, and a bounded
// particle-swarm optimizer.
//
// The per-pixel ratio compares observed event counts against the t*f expected
// from an ideally firing blinker; the cost punishes missing events (alpha < 0)
// four times harder than surplus beyond the slack band [0, alpha0].

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "evpipe/events.hpp"

namespace evpipe::tune {

struct BiasVector {
    double diff_off = 225.0;
    double diff_on = 375.0;
    double bias_fo = 1725.0;
    double bias_hpf = 1500.0;
    double bias_pr = 1500.0;
    double bias_refr = 1500.0;

    double operator[](int i) const { return (&diff_off)[i]; }
    double& operator[](int i) { return (&diff_off)[i]; }
    static constexpr int size() { return 6; }
    static const char* name(int i);
};

struct BiasBound {
    double min = 0.0;
    double max = 0.0;
    double init = 0.0;  // default value shipped with the bounds file
};

struct BiasBounds {
    BiasBound diff_off{50, 600, 225};
    BiasBound diff_on{50, 1000, 375};
    BiasBound bias_fo{500, 3000, 1725};
    BiasBound bias_hpf{0, 3000, 1500};
    BiasBound bias_pr{0, 3000, 1500};
    BiasBound bias_refr{50, 3000, 1500};

    const BiasBound& at(int i) const { return (&diff_off)[i]; }
    BiasBound& at(int i) { return (&diff_off)[i]; }
    void validate() const;
    bool contains(const BiasVector& b) const;
    BiasVector defaults() const;
};

struct TuningScene {
    struct Marker {
        double cx = 0.0;  // px
        double cy = 0.0;
        double freq_hz = 0.0;
        double duty = 0.01;
    };
    std::vector<Marker> markers;
    double duration_s = 0.1;
    std::uint32_t width = 640;
    std::uint32_t height = 480;
    double spot_radius_px = 2.5;

    // K >= 1, positive duration, all 3x3 evaluation patches inside the image.
    void validate() const;
};

// (alpha+, alpha-) for one pixel: count/(t*f) - 1 per polarity.
std::pair<double, double> event_ratio(const EventStream& stream, std::uint16_t x, std::uint16_t y,
                                      double freq_hz, double duration_s);

double pixel_cost(double alpha, double alpha0 = 0.5);

// Sum of pixel costs over the 3x3 patch around every marker center.
double total_cost(const EventStream& stream, const TuningScene& scene, double alpha0 = 0.5);

struct PsoConfig {
    int particles = 100;
    int max_iters = 60;
    std::uint64_t seed = 1;
    double inertia = 0.729;
    double cognitive = 1.49445;
    double social = 1.49445;
    double velocity_clamp = 0.2;  // fraction of each bound's range
    std::optional<double> stop_when_leq;  // early exit once gbest <= this
};

struct PsoResult {
    std::vector<double> best_position;
    double best_cost = 0.0;
    std::vector<double> trace;  // global best after each iteration, non-increasing
    int iterations = 0;
    std::uint64_t seed = 0;
};

PsoResult pso_optimize(const std::function<double(std::span<const double>)>& objective,
                       std::span<const std::pair<double, double>> bounds, const PsoConfig& cfg);

}  // namespace evpipe::tune
