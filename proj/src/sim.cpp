#include "evpipe/sim.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "evpipe/errors.hpp"
#include "evpipe/rng.hpp"

namespace evpipe::synth {
namespace {

// Sorts candidates into stream order, drops same-timestamp repeats per pixel
// and applies the refractory period.
EventStream finalize_stream(std::vector<Event> events, std::uint32_t width, std::uint32_t height,
                            double refractory_us) {
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.y != b.y) return a.y < b.y;
        if (a.x != b.x) return a.x < b.x;
        return a.p < b.p;
    });

    EventStream stream;
    stream.width = width;
    stream.height = height;
    stream.events.reserve(events.size());
    std::vector<std::int64_t> last(static_cast<std::size_t>(width) * height, -1);
    for (const Event& e : events) {
        const std::size_t pix = static_cast<std::size_t>(e.y) * width + e.x;
        const std::int64_t t = static_cast<std::int64_t>(e.t);
        if (last[pix] >= 0) {
            if (t <= last[pix]) continue;
            if (static_cast<double>(t - last[pix]) < refractory_us) continue;
        }
        last[pix] = t;
        stream.events.push_back(e);
    }
    return stream;
}

struct PixelRect {
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive; empty when x1 < x0

    bool empty() const { return x1 < x0 || y1 < y0; }
};

PixelRect blob_rect(double cx_px, double cy_px, double sigma_px, int width, int height) {
    const double r = 3.5 * sigma_px;
    PixelRect rect;
    rect.x0 = std::max(0, static_cast<int>(std::ceil(cx_px - r)));
    rect.x1 = std::min(width - 1, static_cast<int>(std::floor(cx_px + r)));
    rect.y0 = std::max(0, static_cast<int>(std::ceil(cy_px - r)));
    rect.y1 = std::min(height - 1, static_cast<int>(std::floor(cy_px + r)));
    return rect;
}

}  // namespace

void CameraBehavior::validate() const {
    if (threshold_on <= 0.0 || threshold_off <= 0.0)
        throw ConfigError("camera behavior: thresholds must be positive");
    if (refractory_us < 0.0 || double_prob < 0.0 || double_prob > 1.0 || noise_rate_hz < 0.0 ||
        lowpass_cutoff_hz < 0.0)
        throw ConfigError("camera behavior: derived quantity out of range");
}

double CameraBehavior::attenuation(double freq_hz) const {
    if (lowpass_cutoff_hz <= 0.0) return 1.0;
    const double ratio = freq_hz / lowpass_cutoff_hz;
    return 1.0 / std::sqrt(1.0 + ratio * ratio);
}

double CameraBehavior::fire_probability(double threshold, double freq_hz) const {
    const double effective = kLedContrast * attenuation(freq_hz);
    return std::clamp(1.0 - (threshold - effective) / 0.5, 0.0, 1.0);
}

CameraBehavior CameraBehavior::ideal() {
    return CameraBehavior{};  // thresholds well below contrast, everything else off
}

CameraBehavior CameraBehavior::from_bias(const tune::BiasVector& bias) {
    CameraBehavior b;
    b.threshold_on = bias.diff_on / 250.0;
    b.threshold_off = bias.diff_off / 250.0;
    b.lowpass_cutoff_hz = bias.bias_fo + bias.bias_pr;
    b.refractory_us = bias.bias_refr / 500.0;
    b.double_prob = 0.35 * std::exp(-bias.bias_refr / 600.0);
    b.noise_rate_hz = std::max(0.0, 400.0 * (1.0 - bias.bias_hpf / 3000.0)) * std::exp(-bias.diff_on / 1000.0);
    b.validate();
    return b;
}

EventStream simulate_led_events(const tune::TuningScene& scene, const SimCamera& camera,
                                std::uint64_t seed) {
    scene.validate();
    camera.behavior.validate();
    if (scene.width != camera.width || scene.height != camera.height)
        throw ConfigError("simulate_led_events: scene and camera dimensions differ");

    const double duration = scene.duration_s;
    const std::uint64_t duration_us = static_cast<std::uint64_t>(std::llround(duration * 1e6));
    const Rng master(seed);
    std::vector<Event> candidates;

    for (std::size_t mi = 0; mi < scene.markers.size(); ++mi) {
        const auto& m = scene.markers[mi];
        const double p_on = camera.behavior.fire_probability(camera.behavior.threshold_on, m.freq_hz);
        const double p_off = camera.behavior.fire_probability(camera.behavior.threshold_off, m.freq_hz);
        const double noise_ring = scene.spot_radius_px + 3.0;

        const int x_lo = std::max(0, static_cast<int>(std::ceil(m.cx - noise_ring)));
        const int x_hi = std::min(static_cast<int>(scene.width) - 1, static_cast<int>(std::floor(m.cx + noise_ring)));
        const int y_lo = std::max(0, static_cast<int>(std::ceil(m.cy - noise_ring)));
        const int y_hi = std::min(static_cast<int>(scene.height) - 1, static_cast<int>(std::floor(m.cy + noise_ring)));

        for (int y = y_lo; y <= y_hi; ++y) {
            for (int x = x_lo; x <= x_hi; ++x) {
                const double d2 = (x - m.cx) * (x - m.cx) + (y - m.cy) * (y - m.cy);
                if (d2 > noise_ring * noise_ring) continue;
                const std::size_t pix = static_cast<std::size_t>(y) * scene.width + x;
                Rng rng = master.fork(mi * static_cast<std::uint64_t>(scene.width) * scene.height + pix);
                const bool lit = d2 <= scene.spot_radius_px * scene.spot_radius_px;

                if (lit) {
                    // Quarter-period phase keeps the first event away from t=0.
                    for (std::uint64_t k = 0;; ++k) {
                        const double t_on = (static_cast<double>(k) + 0.25) / m.freq_hz;
                        if (t_on >= duration) break;
                        const double t_off = t_on + m.duty / m.freq_hz;
                        for (const auto& [t_edge, pol, p_fire] :
                             {std::tuple{t_on, std::int8_t(1), p_on}, std::tuple{t_off, std::int8_t(-1), p_off}}) {
                            if (t_edge >= duration) continue;
                            if (rng.uniform() >= p_fire) continue;
                            const std::uint64_t t_us = static_cast<std::uint64_t>(std::llround(t_edge * 1e6));
                            candidates.push_back(Event{static_cast<std::uint16_t>(x),
                                                       static_cast<std::uint16_t>(y), pol, t_us});
                            if (camera.behavior.double_prob > 0.0 &&
                                rng.uniform() < camera.behavior.double_prob) {
                                const std::uint64_t dt =
                                    static_cast<std::uint64_t>(std::llround(5.0 + 10.0 * rng.uniform()));
                                if (t_us + dt < duration_us)
                                    candidates.push_back(Event{static_cast<std::uint16_t>(x),
                                                               static_cast<std::uint16_t>(y), pol, t_us + dt});
                            }
                        }
                    }
                }
                if (camera.behavior.noise_rate_hz > 0.0) {
                    const std::uint64_t n = rng.poisson(camera.behavior.noise_rate_hz * duration);
                    for (std::uint64_t i = 0; i < n; ++i) {
                        const std::uint64_t t_us =
                            static_cast<std::uint64_t>(rng.uniform() * static_cast<double>(duration_us));
                        const std::int8_t pol = rng.uniform() < 0.5 ? std::int8_t(1) : std::int8_t(-1);
                        candidates.push_back(Event{static_cast<std::uint16_t>(x),
                                                   static_cast<std::uint16_t>(y), pol,
                                                   std::min(t_us, duration_us - 1)});
                    }
                }
            }
        }
    }
    return finalize_stream(std::move(candidates), camera.width, camera.height,
                           camera.behavior.refractory_us);
}

void FlowFieldSpec::validate(double domain_radius_m) const {
    double vmax = 0.0;
    switch (kind) {
        case Kind::Uniform:
            vmax = std::hypot(vy_mps, vz_mps);
            break;
        case Kind::Vortex:
            vmax = std::abs(omega_rad_s) *
                   (domain_radius_m + std::hypot(center_y_m, center_z_m));
            break;
        case Kind::DualVortex:
            if (left_core_m <= 0.0 || right_core_m <= 0.0 || spacing_m <= 0.0)
                throw ConfigError("flow field: vortex cores and spacing must be positive");
            vmax = strength_mps;
            break;
    }
    if (vmax < 0.0 || vmax > 6.0)
        throw ConfigError("flow field: speeds must stay within [0, 6] m/s over the domain");
}

std::pair<double, double> sample_flow(const FlowFieldSpec& flow, double y_m, double z_m, double t_s) {
    (void)t_s;  // presets are steady fields
    switch (flow.kind) {
        case FlowFieldSpec::Kind::Uniform:
            return {flow.vy_mps, flow.vz_mps};
        case FlowFieldSpec::Kind::Vortex: {
            // Rigid rotation; clockwise in the (y right, z up) plane means
            // +vy above the center.
            const double ry = y_m - flow.center_y_m;
            const double rz = z_m - flow.center_z_m;
            const double s = flow.clockwise ? 1.0 : -1.0;
            return {s * flow.omega_rad_s * rz, -s * flow.omega_rad_s * ry};
        }
        case FlowFieldSpec::Kind::DualVortex: {
            // Two counter-rotating Gaussian-envelope cores straddling y = 0.
            double vy = 0.0, vz = 0.0;
            const double centers[2] = {-0.5 * flow.spacing_m, 0.5 * flow.spacing_m};
            const double cores[2] = {flow.left_core_m, flow.right_core_m};
            const double senses[2] = {-1.0, 1.0};  // left CCW, right CW: upward jet between
            for (int i = 0; i < 2; ++i) {
                const double ry = y_m - centers[i];
                const double rz = z_m - flow.center_z_m;
                const double d = std::hypot(ry, rz);
                const double core = cores[i];
                const double tangential =
                    flow.strength_mps * (d / core) * std::exp(-0.5 * (d / core) * (d / core));
                if (d < 1e-12) continue;
                vy += senses[i] * tangential * (rz / d);
                vz += -senses[i] * tangential * (ry / d);
            }
            return {vy, vz};
        }
    }
    return {0.0, 0.0};
}

void SmokeSceneSpec::validate() const {
    if (blob_count < 1) throw ConfigError("smoke scene: need at least one blob");
    if (blob_sigma_min_px <= 0.0 || blob_sigma_max_px < blob_sigma_min_px)
        throw ConfigError("smoke scene: bad blob radius distribution");
    if (blob_intensity <= 0.0) throw ConfigError("smoke scene: blob intensity must be positive");
    if (seeding_rate_hz < 0.0) throw ConfigError("smoke scene: seeding rate must be non-negative");
    if (fade_ramp_s <= 0.0) throw ConfigError("smoke scene: fade ramp must be positive");
    if (spawn_margin_px < 0.0) throw ConfigError("smoke scene: spawn margin must be >= 0");
    if (duration_s <= 0.0) throw ConfigError("smoke scene: duration must be positive");
    if (width == 0 || height == 0) throw ConfigError("smoke scene: zero dimensions");
    if (px_per_mm <= 0.0) throw ConfigError("smoke scene: px_per_mm must be positive");
    if (tick_us == 0 || frame_dt_us == 0) throw ConfigError("smoke scene: zero cadence");
}

double SmokeSceneSpec::domain_radius_m() const {
    return 0.5 * static_cast<double>(std::min(width, height)) / (px_per_mm * 1000.0);
}

SmokeResult simulate_smoke_events(const FlowFieldSpec& flow, const SmokeSceneSpec& scene,
                                  const CameraBehavior& behavior, std::uint64_t seed) {
    scene.validate();
    behavior.validate();
    flow.validate(scene.domain_radius_m());

    const int w = static_cast<int>(scene.width);
    const int h = static_cast<int>(scene.height);
    const double px_per_m = scene.px_per_mm * 1000.0;
    const double tick_s = scene.tick_us * 1e-6;
    const std::uint64_t n_ticks = static_cast<std::uint64_t>(std::llround(scene.duration_s * 1e6)) / scene.tick_us;
    const double mean_life =
        scene.seeding_rate_hz > 0.0 ? static_cast<double>(scene.blob_count) / scene.seeding_rate_hz
                                    : std::numeric_limits<double>::infinity();

    struct Blob {
        double y_m, z_m;  // physical position
        double sigma_px;
        double birth_s, death_s;
    };

    Rng rng(seed);
    const double margin = scene.spawn_margin_px;
    auto spawn = [&](double now_s, bool initial) {
        Blob b;
        const double px = rng.uniform(-margin, w + margin);
        const double py = rng.uniform(-margin, h + margin);
        b.y_m = (px - 0.5 * w) / px_per_m;
        b.z_m = (py - 0.5 * h) / px_per_m;
        b.sigma_px = rng.uniform(scene.blob_sigma_min_px, scene.blob_sigma_max_px);
        // Only blobs appearing inside the frame need to fade in; an off-screen pop is invisible.
        const double reach = 3.5 * b.sigma_px;
        const bool visible = px + reach > 0.0 && px - reach < w && py + reach > 0.0 && py - reach < h;
        b.birth_s = (initial || !visible) ? now_s - scene.fade_ramp_s : now_s;
        b.death_s = std::isinf(mean_life) ? mean_life
                                          : now_s + 2.0 * scene.fade_ramp_s + rng.exponential(mean_life);
        return b;
    };

    std::vector<Blob> blobs;
    blobs.reserve(static_cast<std::size_t>(scene.blob_count));
    for (int i = 0; i < scene.blob_count; ++i) blobs.push_back(spawn(0.0, true));

    const std::size_t npx = static_cast<std::size_t>(w) * h;
    const std::uint64_t duration_us = n_ticks * static_cast<std::uint64_t>(scene.tick_us);
    std::vector<double> scratch(npx, 0.0), l_prev(npx, 0.0), l_ref(npx, 0.0);
    std::vector<std::uint32_t> stamp_a(npx, 0), stamp_b(npx, 0);
    std::vector<PixelRect> rects_prev, rects_curr;
    std::vector<Event> candidates;

    auto to_px = [&](const Blob& b) {
        return std::pair<double, double>{0.5 * w + b.y_m * px_per_m, 0.5 * h + b.z_m * px_per_m};
    };
    auto envelope = [&](const Blob& b, double t_s) {
        const double up = (t_s - b.birth_s) / scene.fade_ramp_s;
        const double down = std::isinf(b.death_s) ? 1.0 : (b.death_s - t_s) / scene.fade_ramp_s;
        return std::clamp(std::min(up, down), 0.0, 1.0);
    };

    // Seed the reference luminance with the scene as it stands at t = 0.
    for (const Blob& b : blobs) {
        const auto [cx, cy] = to_px(b);
        const PixelRect rect = blob_rect(cx, cy, b.sigma_px, w, h);
        rects_prev.push_back(rect);
        const double amp = scene.blob_intensity * envelope(b, 0.0);
        if (amp <= 0.0 || rect.empty()) continue;
        const double inv_2s2 = 0.5 / (b.sigma_px * b.sigma_px);
        for (int y = rect.y0; y <= rect.y1; ++y) {
            for (int x = rect.x0; x <= rect.x1; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * w + x;
                const double dx = x - cx;
                const double dy = y - cy;
                l_prev[pix] += amp * std::exp(-(dx * dx + dy * dy) * inv_2s2);
            }
        }
    }
    l_ref = l_prev;

    for (std::uint32_t tick = 1; tick <= n_ticks; ++tick) {
        const double t_now = tick * tick_s;
        const double t_before = (tick - 1) * tick_s;
        const std::uint64_t t_before_us = static_cast<std::uint64_t>(tick - 1) * scene.tick_us;

        rects_curr.clear();
        for (Blob& b : blobs) {
            const auto [vy, vz] = sample_flow(flow, b.y_m, b.z_m, t_before);
            b.y_m += vy * tick_s;
            b.z_m += vz * tick_s;
            if (t_now >= b.death_s) b = spawn(t_now, false);
            auto [cx, cy] = to_px(b);
            const double reach = 3.5 * b.sigma_px;
            if (cx + reach < -margin || cx - reach > w + margin || cy + reach < -margin ||
                cy - reach > h + margin) {
                // Left the simulated domain: re-seed and fade the newcomer in.
                b = spawn(t_now, false);
                std::tie(cx, cy) = to_px(b);
            }
            const PixelRect rect = blob_rect(cx, cy, b.sigma_px, w, h);
            rects_curr.push_back(rect);

            // Accumulate this blob's brightness.
            const double amp = scene.blob_intensity * envelope(b, t_now);
            if (amp <= 0.0 || rect.empty()) continue;
            const double inv_2s2 = 0.5 / (b.sigma_px * b.sigma_px);
            for (int y = rect.y0; y <= rect.y1; ++y) {
                for (int x = rect.x0; x <= rect.x1; ++x) {
                    const std::size_t pix = static_cast<std::size_t>(y) * w + x;
                    if (stamp_a[pix] != tick) {
                        stamp_a[pix] = tick;
                        scratch[pix] = 0.0;
                    }
                    const double dx = x - cx;
                    const double dy = y - cy;
                    scratch[pix] += amp * std::exp(-(dx * dx + dy * dy) * inv_2s2);
                }
            }
        }

        // Threshold crossings over every pixel brightness could have changed.
        auto process_rect = [&](const PixelRect& rect) {
            for (int y = rect.y0; y <= rect.y1; ++y) {
                for (int x = rect.x0; x <= rect.x1; ++x) {
                    const std::size_t pix = static_cast<std::size_t>(y) * w + x;
                    if (stamp_b[pix] == tick) continue;
                    stamp_b[pix] = tick;
                    const double b_val = stamp_a[pix] == tick ? scratch[pix] : 0.0;
                    const double a_val = l_prev[pix];
                    double ref = l_ref[pix];
                    if (b_val > a_val) {
                        while (b_val - ref >= behavior.threshold_on) {
                            ref += behavior.threshold_on;
                            const double frac = (ref - a_val) / (b_val - a_val);
                            std::uint64_t t_us =
                                t_before_us + static_cast<std::uint64_t>(std::llround(frac * scene.tick_us));
                            if (t_us >= duration_us) t_us = duration_us - 1;
                            candidates.push_back(Event{static_cast<std::uint16_t>(x),
                                                       static_cast<std::uint16_t>(y), 1, t_us});
                        }
                    } else if (b_val < a_val) {
                        while (ref - b_val >= behavior.threshold_off) {
                            ref -= behavior.threshold_off;
                            const double frac = (a_val - ref) / (a_val - b_val);
                            std::uint64_t t_us =
                                t_before_us + static_cast<std::uint64_t>(std::llround(frac * scene.tick_us));
                            if (t_us >= duration_us) t_us = duration_us - 1;
                            candidates.push_back(Event{static_cast<std::uint16_t>(x),
                                                       static_cast<std::uint16_t>(y), -1, t_us});
                        }
                    }
                    l_ref[pix] = ref;
                    l_prev[pix] = b_val;
                }
            }
        };
        for (const PixelRect& r : rects_prev) process_rect(r);
        for (const PixelRect& r : rects_curr) process_rect(r);
        rects_prev = rects_curr;
    }

    if (behavior.noise_rate_hz > 0.0) {
        Rng noise_rng = rng.fork(0x6e6f697365ull);
        const double total = behavior.noise_rate_hz * scene.duration_s * static_cast<double>(npx);
        const std::uint64_t n = noise_rng.poisson(total);
        for (std::uint64_t i = 0; i < n; ++i) {
            Event e;
            e.x = static_cast<std::uint16_t>(noise_rng.next_below(scene.width));
            e.y = static_cast<std::uint16_t>(noise_rng.next_below(scene.height));
            e.p = noise_rng.uniform() < 0.5 ? 1 : -1;
            e.t = noise_rng.next_below(duration_us);
            candidates.push_back(e);
        }
    }

    SmokeResult result;
    result.stream = finalize_stream(std::move(candidates), scene.width, scene.height,
                                    behavior.refractory_us);
    result.flow = flow;
    result.scene = scene;
    return result;
}

void TrajectoryScene::validate() const {
    markers.validate();
    if (poses.empty()) throw ConfigError("trajectory: need at least one pose");
    for (std::size_t i = 1; i < poses.size(); ++i)
        if (poses[i].first <= poses[i - 1].first)
            throw ConfigError("trajectory: pose timestamps must increase");
    if (spot_radius_px <= 0.0) throw ConfigError("trajectory: spot radius must be positive");
    for (const int id : active_ids) {
        bool found = false;
        for (const auto& m : markers.markers) found = found || m.id == id;
        if (!found) throw ConfigError("trajectory: active id " + std::to_string(id) + " not in marker map");
    }
}

mocap::Pose interpolate_pose(const std::vector<std::pair<std::uint64_t, mocap::Pose>>& poses,
                             std::uint64_t t_us) {
    if (poses.empty()) throw ConfigError("interpolate_pose: empty sequence");
    if (t_us <= poses.front().first) return poses.front().second;
    if (t_us >= poses.back().first) return poses.back().second;
    std::size_t hi = 1;
    while (poses[hi].first < t_us) ++hi;
    const auto& [t0, p0] = poses[hi - 1];
    const auto& [t1, p1] = poses[hi];
    const double f = static_cast<double>(t_us - t0) / static_cast<double>(t1 - t0);

    mocap::Pose out;
    out.t = (1.0 - f) * p0.t + f * p1.t;
    const Eigen::Quaterniond q0(p0.R), q1(p1.R);
    out.R = q0.slerp(f, q1).toRotationMatrix();
    return out;
}

TrajectoryResult simulate_trajectory(const TrajectoryScene& scene, const mocap::CameraModel& cam,
                                     const SimCamera& camera, std::uint64_t seed) {
    scene.validate();
    cam.validate();
    camera.behavior.validate();

    const std::uint64_t duration_us = scene.poses.back().first;
    const double duration_s = duration_us * 1e-6;
    const double r = scene.spot_radius_px;
    const Rng master(seed);
    std::vector<Event> candidates;

    double path_x0 = 1e30, path_x1 = -1e30, path_y0 = 1e30, path_y1 = -1e30;

    for (std::size_t mi = 0; mi < scene.markers.markers.size(); ++mi) {
        const auto& m = scene.markers.markers[mi];
        if (!scene.active_ids.empty() &&
            std::find(scene.active_ids.begin(), scene.active_ids.end(), m.id) == scene.active_ids.end())
            continue;
        const double p_on = camera.behavior.fire_probability(camera.behavior.threshold_on, m.freq_hz);
        const double p_off = camera.behavior.fire_probability(camera.behavior.threshold_off, m.freq_hz);
        const Eigen::Vector3d body(m.xyz_m[0], m.xyz_m[1], m.xyz_m[2]);

        std::uint64_t edge_index = 0;
        for (std::uint64_t k = 0;; ++k) {
            const double t_on = (static_cast<double>(k) + 0.25) / m.freq_hz;
            if (t_on >= duration_s) break;
            const double t_off = t_on + m.duty / m.freq_hz;
            for (const auto& [t_edge, pol, p_fire] :
                 {std::tuple{t_on, std::int8_t(1), p_on}, std::tuple{t_off, std::int8_t(-1), p_off}}) {
                if (t_edge >= duration_s) continue;
                const std::uint64_t t_us = static_cast<std::uint64_t>(std::llround(t_edge * 1e6));
                const mocap::Pose pose = interpolate_pose(scene.poses, t_us);
                const auto uv = mocap::project(cam, pose.apply(body));
                if (!uv)
                    throw EstimationError("simulate_trajectory: marker " + std::to_string(m.id) +
                                          " unprojectable at t=" + std::to_string(t_us) + "us");
                const double cx = uv->x();
                const double cy = uv->y();
                if (cx - r < 0.0 || cy - r < 0.0 || cx + r > camera.width - 1.0 ||
                    cy + r > camera.height - 1.0)
                    throw EstimationError("simulate_trajectory: marker " + std::to_string(m.id) +
                                          " leaves the frame at t=" + std::to_string(t_us) + "us");
                path_x0 = std::min(path_x0, cx);
                path_x1 = std::max(path_x1, cx);
                path_y0 = std::min(path_y0, cy);
                path_y1 = std::max(path_y1, cy);

                Rng rng = master.fork((mi << 40) ^ ++edge_index);
                for (int y = static_cast<int>(std::ceil(cy - r)); y <= static_cast<int>(std::floor(cy + r)); ++y) {
                    for (int x = static_cast<int>(std::ceil(cx - r)); x <= static_cast<int>(std::floor(cx + r)); ++x) {
                        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                        if (d2 > r * r) continue;
                        if (rng.uniform() >= p_fire) continue;
                        candidates.push_back(Event{static_cast<std::uint16_t>(x),
                                                   static_cast<std::uint16_t>(y), pol, t_us});
                        if (camera.behavior.double_prob > 0.0 && rng.uniform() < camera.behavior.double_prob) {
                            const std::uint64_t dt =
                                static_cast<std::uint64_t>(std::llround(5.0 + 10.0 * rng.uniform()));
                            if (t_us + dt < duration_us)
                                candidates.push_back(Event{static_cast<std::uint16_t>(x),
                                                           static_cast<std::uint16_t>(y), pol, t_us + dt});
                        }
                    }
                }
            }
        }
    }

    if (camera.behavior.noise_rate_hz > 0.0 && path_x1 >= path_x0) {
        // Spurious events over the swept region plus a margin.
        Rng rng = master.fork(0x6e6f697365ull);
        const int x_lo = std::max(0, static_cast<int>(path_x0 - r - 3.0));
        const int x_hi = std::min(static_cast<int>(camera.width) - 1, static_cast<int>(path_x1 + r + 3.0));
        const int y_lo = std::max(0, static_cast<int>(path_y0 - r - 3.0));
        const int y_hi = std::min(static_cast<int>(camera.height) - 1, static_cast<int>(path_y1 + r + 3.0));
        const double area = static_cast<double>(x_hi - x_lo + 1) * (y_hi - y_lo + 1);
        const std::uint64_t n = rng.poisson(camera.behavior.noise_rate_hz * duration_s * area);
        for (std::uint64_t i = 0; i < n; ++i) {
            Event e;
            e.x = static_cast<std::uint16_t>(x_lo + rng.next_below(static_cast<std::uint64_t>(x_hi - x_lo + 1)));
            e.y = static_cast<std::uint16_t>(y_lo + rng.next_below(static_cast<std::uint64_t>(y_hi - y_lo + 1)));
            e.p = rng.uniform() < 0.5 ? 1 : -1;
            e.t = rng.next_below(duration_us);
            candidates.push_back(e);
        }
    }

    TrajectoryResult result;
    result.stream = finalize_stream(std::move(candidates), camera.width, camera.height,
                                    camera.behavior.refractory_us);
    result.truth = scene.poses;
    return result;
}

}  // namespace evpipe::synth
