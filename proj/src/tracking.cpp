#include "evpipe/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evpipe/errors.hpp"

namespace evpipe::mocap {

CentroidTracker::CentroidTracker(const TrackerParams& params, std::uint64_t seed)
    : params_(params), master_(seed) {
    if (params.particles < 2) throw ConfigError("tracker: need at least 2 particles");
    if (params.meas_sigma_px <= 0.0) throw ConfigError("tracker: measurement sigma must be positive");
}

void CentroidTracker::predict(Filter& f, double dt_s) {
    const double sigma_v = params_.process_accel * dt_s;
    const double sigma_p = 0.5 * params_.process_accel * dt_s * dt_s;
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] += f.vu[i] * dt_s + sigma_p * f.rng.normal();
        f.v[i] += f.vv[i] * dt_s + sigma_p * f.rng.normal();
        f.vu[i] += sigma_v * f.rng.normal();
        f.vv[i] += sigma_v * f.rng.normal();
    }
}

void CentroidTracker::correct(Filter& f, const Detection& det) {
    const double inv_2s2 = 0.5 / (params_.meas_sigma_px * params_.meas_sigma_px);
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logw(f.u.size());
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        const double du = f.u[i] - det.u;
        const double dv = f.v[i] - det.v;
        logw[i] = std::log(f.w[i]) - (du * du + dv * dv) * inv_2s2;
        max_log = std::max(max_log, logw[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.w[i] = std::exp(logw[i] - max_log);
        sum += f.w[i];
    }
    for (double& w : f.w) w /= sum;
}

void CentroidTracker::maybe_resample(Filter& f) {
    double ess_denom = 0.0;
    for (const double w : f.w) ess_denom += w * w;
    const double ess = 1.0 / ess_denom;
    if (ess >= params_.resample_frac * static_cast<double>(f.w.size())) return;

    // Systematic resampling: one uniform offset, evenly spaced pointers.
    const std::size_t n = f.w.size();
    std::vector<double> nu(n), nv(n), nvu(n), nvv(n);
    const double step = 1.0 / static_cast<double>(n);
    double pointer = f.rng.uniform() * step;
    double cum = f.w[0];
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (cum < pointer && j + 1 < n) cum += f.w[++j];
        nu[i] = f.u[j];
        nv[i] = f.v[j];
        nvu[i] = f.vu[j];
        nvv[i] = f.vv[j];
        pointer += step;
    }
    f.u = std::move(nu);
    f.v = std::move(nv);
    f.vu = std::move(nvu);
    f.vv = std::move(nvv);
    std::fill(f.w.begin(), f.w.end(), step);
}

void CentroidTracker::step(std::span<const Detection> detections, double dt_s) {
    if (dt_s <= 0.0) throw ConfigError("tracker: dt must be positive");

    for (auto& [id, f] : filters_) {
        predict(f, dt_s);
        f.steps_since_detection += 1;
    }
    for (const Detection& det : detections) {
        auto it = filters_.find(det.marker_index);
        if (it == filters_.end()) {
            // First sighting: all particles at the detection, velocity spread
            // only.
            Filter f(master_.fork(static_cast<std::uint64_t>(det.marker_index) + 1));
            const std::size_t n = static_cast<std::size_t>(params_.particles);
            f.u.assign(n, det.u);
            f.v.assign(n, det.v);
            f.vu.resize(n);
            f.vv.resize(n);
            f.w.assign(n, 1.0 / static_cast<double>(n));
            for (std::size_t i = 0; i < n; ++i) {
                f.vu[i] = params_.init_vel_sigma * f.rng.normal();
                f.vv[i] = params_.init_vel_sigma * f.rng.normal();
            }
            f.steps_since_detection = 0;
            filters_.emplace(det.marker_index, std::move(f));
            continue;
        }
        Filter& f = it->second;
        correct(f, det);
        maybe_resample(f);
        f.steps_since_detection = 0;
    }
}

std::optional<TrackEstimate> CentroidTracker::estimate(int marker_index) const {
    const auto it = filters_.find(marker_index);
    if (it == filters_.end()) return std::nullopt;
    const Filter& f = it->second;

    TrackEstimate est;
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        est.u += f.w[i] * f.u[i];
        est.v += f.w[i] * f.v[i];
        est.vu += f.w[i] * f.vu[i];
        est.vv += f.w[i] * f.vv[i];
    }
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        est.var_u += f.w[i] * (f.u[i] - est.u) * (f.u[i] - est.u);
        est.var_v += f.w[i] * (f.v[i] - est.v) * (f.v[i] - est.v);
    }
    est.steps_since_detection = f.steps_since_detection;
    return est;
}

std::vector<int> CentroidTracker::tracked_markers() const {
    std::vector<int> ids;
    ids.reserve(filters_.size());
    for (const auto& [id, f] : filters_) ids.push_back(id);
    return ids;
}

}  // namespace evpipe::mocap
