#pragma once

#include <filesystem>
#include <json.hpp>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "evpipe/autotune.hpp"
#include "evpipe/camera.hpp"
#include "evpipe/disturbance_map.hpp"
#include "evpipe/pipeline.hpp"
#include "evpipe/sdtv.hpp"
#include "evpipe/sim.hpp"
#include "evpipe/spectrum.hpp"

// JSON/CSV codecs for every on-disk format except the event files
// (those live in events.hpp).

namespace evpipe::io {

inline constexpr int kSchemaVersion = 1;

// Parses a JSON file; failures surface as ConfigError naming the path.
nlohmann::json load_json_file(const std::filesystem::path& path);

// Writes via a sibling temp file and renames into place.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

// --- camera: {model, fx, fy, cx, cy, xi, alpha, width, height} ---
mocap::CameraModel camera_from_json(const nlohmann::json& j);
nlohmann::json camera_to_json(const mocap::CameraModel& cam);

// --- marker map: [{id, xyz_m, freq_hz, duty}] ---
mocap::MarkerConfig markers_from_json(const nlohmann::json& j);
nlohmann::json markers_to_json(const mocap::MarkerConfig& cfg);

// --- bias bounds: {param: {min, max, default}} ---
tune::BiasBounds bounds_from_json(const nlohmann::json& j);
nlohmann::json bounds_to_json(const tune::BiasBounds& bounds);

// --- tuning report: {schema_version, theta_star, j_star, iterations, trace, seed} ---
nlohmann::json tuning_report_to_json(const tune::PsoResult& result);

// --- AR model: {order, coeffs, sigma2} ---
noise::ARModel ar_from_json(const nlohmann::json& j);
nlohmann::json ar_to_json(const noise::ARModel& model);

// --- disturbance map: {basis, radius_m, center_z_m, lambda, coeffs per channel} ---
noise::DisturbanceMap map_from_json(const nlohmann::json& j);
nlohmann::json map_to_json(const noise::DisturbanceMap& map);

// --- camera behavior (accepts explicit fields or a "bias" block) ---
synth::CameraBehavior behavior_from_json(const nlohmann::json& j);
nlohmann::json behavior_to_json(const synth::CameraBehavior& behavior);

// --- scene specs, discriminated by "type" ---
struct SceneFile {
    enum class Type { Led, Smoke, Trajectory };

    Type type = Type::Led;
    synth::SimCamera camera;  // dimensions + behavior for the simulated sensor

    tune::TuningScene led;

    synth::FlowFieldSpec flow;
    synth::SmokeSceneSpec smoke;

    synth::TrajectoryScene trajectory;
    mocap::CameraModel trajectory_camera;
};

SceneFile scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneFile& scene);

// Ground-truth sidecar matching cmd_synth's output stream.
nlohmann::json scene_truth_json(const SceneFile& scene);

// --- flow rows: (k, i, j, u_px, v_px, conf, vy_mps, vz_mps) ---
void write_flow_csv(std::ostream& os, std::span<const pipe::FlowRow> rows);
nlohmann::json flow_to_json(const pipe::VelocimetryResult& result);
nlohmann::json velocimetry_summary_json(const pipe::VelocimetrySummary& summary);

// --- pose rows: (t_us, x, y, z, qw, qx, qy, qz, rmse_px, n_markers) ---
void write_pose_csv(std::ostream& os, std::span<const pipe::PoseRow> rows);
nlohmann::json poses_to_json(const pipe::MocapResult& result);
nlohmann::json mocap_summary_json(const pipe::MocapSummary& summary);

// --- wrench samples CSV: y_m, z_m, fy_N, fz_N, taux_Nm ---
std::vector<noise::WrenchSample> read_wrench_csv(const std::filesystem::path& path);
void write_wrench_csv(std::ostream& os, std::span<const noise::WrenchSample> samples);

// --- scalar series CSV: single "value" column ---
std::vector<double> read_signal_csv(const std::filesystem::path& path);
void write_signal_csv(std::ostream& os, std::span<const double> values);

}  // namespace evpipe::io
