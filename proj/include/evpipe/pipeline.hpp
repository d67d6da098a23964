#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "evpipe/camera.hpp"
#include "evpipe/events.hpp"
#include "evpipe/pnp.hpp"
#include "evpipe/sdtv.hpp"
#include "evpipe/tracking.hpp"
#include "evpipe/velocimetry.hpp"

// End-to-end wrappers: event stream -> sparse flow table, and
// event stream -> pose track.

namespace evpipe::pipe {

struct VelocimetryParams {
    velo::FlowGridConfig grid;
    std::uint32_t bin = 2;
};

struct FlowRow {
    std::uint64_t k = 0;  // 1-based frame index of the current frame
    int i = 0;            // patch grid coordinates
    int j = 0;
    double u_px = 0.0;
    double v_px = 0.0;
    double conf = 0.0;
    double vy_mps = 0.0;
    double vz_mps = 0.0;
};

struct VelocimetrySummary {
    std::size_t frames = 0;
    std::size_t fields = 0;  // frame pairs processed
    std::size_t rows = 0;
    double discard_frac = 0.0;
    double median_speed_px = 0.0;
    double median_speed_mps = 0.0;
};

struct VelocimetryResult {
    std::vector<FlowRow> rows;
    VelocimetrySummary summary;
};

VelocimetryResult run_velocimetry(const EventStream& stream, const VelocimetryParams& params);

struct MocapParams {
    std::uint64_t window_us = 2000;
    int stack_depth = 32;
    double rel_tol = 0.05;
    std::uint64_t max_staleness_us = 0;  // 0 = auto: twice the slowest blink period
    int max_misses = 5;                  // tracker coasting windows still fed to PnP
    mocap::TrackerParams tracker;
    std::uint64_t seed = 1;
};

struct PoseRow {
    std::uint64_t t_us = 0;
    mocap::Pose pose;
    double rmse_px = 0.0;
    int n_markers = 0;
};

struct MocapSummary {
    std::size_t windows = 0;
    std::size_t poses = 0;
    double mean_rmse_px = 0.0;
    std::vector<double> detection_rate;  // per configured marker
    double sigma_x = 0.0;                // pose scatter over the track (when >= 2 poses)
    double sigma_y = 0.0;
    double sigma_z = 0.0;
};

struct MocapResult {
    std::vector<PoseRow> rows;
    MocapSummary summary;
};

MocapResult run_mocap(const EventStream& stream, const mocap::MarkerConfig& markers,
                      const mocap::CameraModel& cam, const MocapParams& params);

}  // namespace evpipe::pipe
