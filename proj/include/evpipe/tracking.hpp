// tracking.hpp - per-marker particle filters over detected centroids.
//
// Constant-velocity motion model with Gaussian measurement likelihood and
// systematic resampling. One filter per marker id, initialized exactly at the
// first detection; steps without a detection propagate the prediction only.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "evpipe/rng.hpp"
#include "evpipe/sdtv.hpp"

namespace evpipe::mocap {

struct TrackerParams {
    int particles = 200;
    double process_accel = 50.0;    // px/s^2, velocity random-walk intensity
    double meas_sigma_px = 1.0;
    double init_vel_sigma = 50.0;   // px/s spread at initialization
    double resample_frac = 0.5;     // resample when ESS < frac * N
};

struct TrackEstimate {
    double u = 0.0;
    double v = 0.0;
    double vu = 0.0;  // px/s
    double vv = 0.0;
    double var_u = 0.0;  // weighted position variance, px^2
    double var_v = 0.0;
    int steps_since_detection = 0;
};

class CentroidTracker {
public:
    explicit CentroidTracker(const TrackerParams& params = {}, std::uint64_t seed = 1);

    // Advances every live filter by dt and folds in this step's detections.
    void step(std::span<const Detection> detections, double dt_s);

    std::optional<TrackEstimate> estimate(int marker_index) const;
    std::vector<int> tracked_markers() const;

private:
    struct Filter {
        std::vector<double> u, v, vu, vv, w;
        Rng rng;
        int steps_since_detection = 0;
        explicit Filter(Rng r) : rng(r) {}
    };

    void predict(Filter& f, double dt_s);
    void correct(Filter& f, const Detection& det);
    void maybe_resample(Filter& f);

    TrackerParams params_;
    Rng master_;
    std::map<int, Filter> filters_;
};

}  // namespace evpipe::mocap
