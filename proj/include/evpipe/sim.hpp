// sim.hpp - synthetic event-camera and scene generation.
//
// A SimCamera turns brightness transitions into events through a small
// behavior model: log-contrast thresholds, a first-order low-pass that
// attenuates fast blinkers, a refractory period, double-event probability and
// a spurious noise rate. The bias->behavior mapping is an invented but fixed,
// documented, monotone model (the real camera treats biases as a black box):
//
//   threshold_on      = diff_on  / 250      (log-contrast units)
//   threshold_off     = diff_off / 250
//   lowpass_cutoff_hz = bias_fo + bias_pr
//   refractory_us     = bias_refr / 500
//   double_prob       = 0.35 * exp(-bias_refr / 600)
//   noise_rate_hz     = 400 * (1 - bias_hpf / 3000) * exp(-diff_on / 1000)
//
// An LED's effective log-contrast is kLedContrast attenuated by the low-pass
// at the blink frequency; a transition fires with probability 1 while the
// threshold stays at or below the effective contrast and rolls off linearly
// above it. Raising diff_on therefore strictly reduces expected positive
// counts (threshold ramp and noise factor both decrease), and a camera whose
// thresholds sit below the attenuated contrast of the fastest LED reproduces
// every transition: the autotune objective has an exact-zero region.

#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "evpipe/autotune.hpp"
#include "evpipe/camera.hpp"
#include "evpipe/events.hpp"
#include "evpipe/pnp.hpp"
#include "evpipe/sdtv.hpp"

namespace evpipe::synth {

// Log-contrast of an unattenuated LED square wave as seen by the sensor.
inline constexpr double kLedContrast = 1.8;

struct CameraBehavior {
    double threshold_on = 0.2;   // log-contrast step per positive event
    double threshold_off = 0.2;
    double refractory_us = 0.0;
    double lowpass_cutoff_hz = 0.0;  // 0 = no attenuation (ideal front-end)
    double double_prob = 0.0;
    double noise_rate_hz = 0.0;  // spurious events per second per active pixel

    void validate() const;

    // First-order low-pass gain at the given frequency.
    double attenuation(double freq_hz) const;
    // Probability that a blink transition crosses the given threshold.
    double fire_probability(double threshold, double freq_hz) const;

    static CameraBehavior ideal();
    static CameraBehavior from_bias(const tune::BiasVector& bias);
};

struct SimCamera {
    std::uint32_t width = 640;
    std::uint32_t height = 480;
    CameraBehavior behavior;
};

// Blinking LED spots at fixed image positions (the autotune fixture).
EventStream simulate_led_events(const tune::TuningScene& scene, const SimCamera& camera,
                                std::uint64_t seed);

// Planar flow presets in lightsheet coordinates: y along image columns,
// z along image rows (z renders downward), both in meters.
struct FlowFieldSpec {
    enum class Kind { Uniform, Vortex, DualVortex };

    Kind kind = Kind::Uniform;
    // uniform
    double vy_mps = 0.0;
    double vz_mps = 0.0;
    // vortex: rigid rotation about a center
    double center_y_m = 0.0;
    double center_z_m = 0.0;
    double omega_rad_s = 0.0;
    bool clockwise = true;
    // dual vortex: mirrored counter-rotating cores at +/- spacing/2 about y=0
    double left_core_m = 0.05;
    double right_core_m = 0.05;
    double spacing_m = 0.12;
    double strength_mps = 1.0;

    // Speeds must stay within [0, 6] m/s over a disk of the given radius.
    void validate(double domain_radius_m) const;
};

// Ground-truth velocity (vy, vz) in m/s at a point and time.
std::pair<double, double> sample_flow(const FlowFieldSpec& flow, double y_m, double z_m, double t_s);

struct SmokeSceneSpec {
    int blob_count = 80;
    double blob_sigma_min_px = 4.0;   // Gaussian radius at sensor resolution
    double blob_sigma_max_px = 9.0;
    double blob_intensity = 2.0;      // peak log-brightness
    double seeding_rate_hz = 40.0;    // blob replacements per second (mean lifetime = count/rate)
    double fade_ramp_s = 0.003;       // envelope ramp at birth/death
    double spawn_margin_px = 0.0;     // blobs also live this far outside the frame
    double duration_s = 0.06;
    std::uint32_t width = 384;
    std::uint32_t height = 384;
    double px_per_mm = 1.6;           // sensor resolution in the lightsheet plane
    std::uint32_t frame_dt_us = 2000; // advisory downstream framing cadence
    std::uint32_t tick_us = 100;      // simulation step

    void validate() const;
    double domain_radius_m() const;   // half the smaller image side, in meters
};

struct SmokeResult {
    EventStream stream;
    FlowFieldSpec flow;
    SmokeSceneSpec scene;
};

SmokeResult simulate_smoke_events(const FlowFieldSpec& flow, const SmokeSceneSpec& scene,
                                  const CameraBehavior& behavior, std::uint64_t seed);

// Blinking markers moving along an interpolated pose trajectory.
struct TrajectoryScene {
    mocap::MarkerConfig markers;
    std::vector<std::pair<std::uint64_t, mocap::Pose>> poses;  // (t_us, body->camera pose)
    double spot_radius_px = 2.5;
    std::vector<int> active_ids;  // markers that actually emit; empty = all

    void validate() const;
};

struct TrajectoryResult {
    EventStream stream;
    std::vector<std::pair<std::uint64_t, mocap::Pose>> truth;
};

TrajectoryResult simulate_trajectory(const TrajectoryScene& scene, const mocap::CameraModel& cam,
                                     const SimCamera& camera, std::uint64_t seed);

// Interpolated pose at an arbitrary time (linear translation, slerp rotation).
mocap::Pose interpolate_pose(const std::vector<std::pair<std::uint64_t, mocap::Pose>>& poses,
                             std::uint64_t t_us);

}  // namespace evpipe::synth
