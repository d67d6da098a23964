#include "evpipe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "evpipe/errors.hpp"

namespace evpipe::pipe {
namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

VelocimetryResult run_velocimetry(const EventStream& stream, const VelocimetryParams& params) {
    if (params.bin == 0) throw ConfigError("run_velocimetry: bin must be >= 1");
    VelocimetryResult out;

    const std::vector<EventFrame> frames = bin_and_frame(stream, params.grid.dt_us, params.bin);
    out.summary.frames = frames.size();
    if (frames.empty()) return out;

    const velo::FlowGridConfig& cfg = params.grid;
    cfg.validate(frames.front().width, frames.front().height);
    const std::size_t n = static_cast<std::size_t>(cfg.stack);
    if (frames.size() < n + 1) return out;

    std::size_t total_patches = 0;
    std::vector<double> speeds;
    velo::BlurredFrame prev =
        velo::stack_and_blur(std::span<const EventFrame>(frames.data(), n), cfg);
    for (std::size_t last = n; last < frames.size(); ++last) {
        velo::BlurredFrame curr = velo::stack_and_blur(
            std::span<const EventFrame>(frames.data() + (last + 1 - n), n), cfg);
        const velo::SparseFlowField field = velo::estimate_flow(curr, prev, cfg);
        out.summary.fields += 1;
        total_patches += static_cast<std::size_t>(cfg.patches) * cfg.patches;
        for (int j = 0; j < cfg.patches; ++j) {
            for (int i = 0; i < cfg.patches; ++i) {
                const velo::PatchFlow& p = field.at(i, j);
                if (!p.valid()) continue;
                FlowRow row;
                row.k = frames[last].k;
                row.i = i;
                row.j = j;
                row.u_px = p.u;
                row.v_px = p.v;
                row.conf = p.conf;
                row.vy_mps = velo::flow_px_to_mps(p.u, cfg);
                row.vz_mps = velo::flow_px_to_mps(p.v, cfg);
                out.rows.push_back(row);
                speeds.push_back(std::hypot(p.u, p.v));
            }
        }
        prev = std::move(curr);
    }

    out.summary.rows = out.rows.size();
    if (total_patches > 0)
        out.summary.discard_frac =
            1.0 - static_cast<double>(out.rows.size()) / static_cast<double>(total_patches);
    out.summary.median_speed_px = median(std::move(speeds));
    out.summary.median_speed_mps = velo::flow_px_to_mps(out.summary.median_speed_px, cfg);
    return out;
}

MocapResult run_mocap(const EventStream& stream, const mocap::MarkerConfig& markers,
                      const mocap::CameraModel& cam, const MocapParams& params) {
    markers.validate();
    cam.validate();
    if (params.window_us == 0) throw ConfigError("run_mocap: window must be positive");
    if (params.max_misses < 0) throw ConfigError("run_mocap: max_misses must be >= 0");

    MocapResult out;
    out.summary.detection_rate.assign(markers.markers.size(), 0.0);
    if (stream.events.empty()) return out;

    double slowest_period_us = 0.0;
    for (const auto& m : markers.markers)
        slowest_period_us = std::max(slowest_period_us, 1e6 / m.freq_hz);
    const std::uint64_t staleness =
        params.max_staleness_us > 0
            ? params.max_staleness_us
            : static_cast<std::uint64_t>(std::llround(2.0 * slowest_period_us));

    mocap::Sdtv sdtv(stream.width, stream.height, params.stack_depth);
    mocap::CentroidTracker tracker(params.tracker, params.seed);
    const std::size_t n_windows = stream.events.back().t / params.window_us + 1;
    out.summary.windows = n_windows;
    std::vector<std::size_t> hits(markers.markers.size(), 0);

    mocap::Pose last_pose;
    bool have_pose = false;
    double rmse_acc = 0.0;
    std::size_t cursor = 0;
    for (std::size_t win = 0; win < n_windows; ++win) {
        const std::uint64_t end_t = (win + 1) * params.window_us;
        std::size_t stop = cursor;
        while (stop < stream.events.size() && stream.events[stop].t < end_t) ++stop;
        sdtv.update(std::span<const Event>(stream.events.data() + cursor, stop - cursor));
        cursor = stop;

        mocap::DetectOptions opts;
        opts.rel_tol = params.rel_tol;
        opts.now_us = end_t;
        opts.max_staleness_us = staleness;
        const auto labels = mocap::detect_markers(sdtv, markers, opts);
        const auto detections =
            mocap::cluster_detections(labels, stream.width, stream.height, end_t);
        for (const auto& d : detections) hits[static_cast<std::size_t>(d.marker_index)] += 1;
        tracker.step(detections, static_cast<double>(params.window_us) * 1e-6);

        std::vector<mocap::Correspondence> corr;
        for (std::size_t mi = 0; mi < markers.markers.size(); ++mi) {
            const auto est = tracker.estimate(static_cast<int>(mi));
            if (!est || est->steps_since_detection > params.max_misses) continue;
            mocap::Correspondence c;
            c.object = Eigen::Vector3d(markers.markers[mi].xyz_m[0], markers.markers[mi].xyz_m[1],
                                       markers.markers[mi].xyz_m[2]);
            c.image = Eigen::Vector2d(est->u, est->v);
            corr.push_back(c);
        }
        if (corr.size() < 4) continue;

        try {
            const mocap::PnpResult res =
                mocap::solve_pnp(corr, cam, have_pose ? &last_pose : nullptr);
            last_pose = res.pose;
            have_pose = true;
            out.rows.push_back(PoseRow{end_t, res.pose, res.rmse_px, static_cast<int>(corr.size())});
            rmse_acc += res.rmse_px;
        } catch (const EstimationError&) {
            // Degenerate window (collinear estimates or divergent refinement): skip.
        }
    }

    out.summary.poses = out.rows.size();
    if (!out.rows.empty()) out.summary.mean_rmse_px = rmse_acc / static_cast<double>(out.rows.size());
    for (std::size_t mi = 0; mi < hits.size(); ++mi)
        out.summary.detection_rate[mi] =
            static_cast<double>(hits[mi]) / static_cast<double>(n_windows);

    if (out.rows.size() >= 2) {
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (const auto& r : out.rows) mean += r.pose.t;
        mean /= static_cast<double>(out.rows.size());
        Eigen::Vector3d acc = Eigen::Vector3d::Zero();
        for (const auto& r : out.rows) acc += (r.pose.t - mean).cwiseAbs2();
        acc /= static_cast<double>(out.rows.size() - 1);
        out.summary.sigma_x = std::sqrt(acc.x());
        out.summary.sigma_y = std::sqrt(acc.y());
        out.summary.sigma_z = std::sqrt(acc.z());
    }
    return out;
}

}  // namespace evpipe::pipe
