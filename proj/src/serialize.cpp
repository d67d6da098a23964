#include "evpipe/serialize.hpp"

#include <Eigen/Geometry>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evpipe/errors.hpp"

namespace evpipe::io {
namespace {

using nlohmann::json;

const json& require(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigError(std::string("missing field '") + key + "'");
    return *it;
}

double num(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

double num_or(const json& j, const char* key, double fallback) {
    const auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
    return it->get<double>();
}

std::int64_t int_or(const json& j, const char* key, std::int64_t fallback) {
    const auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number_integer()) throw ConfigError(std::string("field '") + key + "' must be an integer");
    return it->get<std::int64_t>();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

json quat_wxyz(const Eigen::Matrix3d& R) {
    Eigen::Quaterniond q(R);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    return json::array({q.w(), q.x(), q.y(), q.z()});
}

}  // namespace

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write to " + tmp.string());
        out << content;
        if (!out) throw ConfigError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

mocap::CameraModel camera_from_json(const json& j) {
    mocap::CameraModel cam;
    const std::string model = require(j, "model").get<std::string>();
    if (model == "pinhole")
        cam.kind = mocap::CameraModel::Kind::Pinhole;
    else if (model == "double_sphere")
        cam.kind = mocap::CameraModel::Kind::DoubleSphere;
    else
        throw ConfigError("camera model must be 'pinhole' or 'double_sphere', got '" + model + "'");
    cam.fx = num(j, "fx");
    cam.fy = num(j, "fy");
    cam.cx = num(j, "cx");
    cam.cy = num(j, "cy");
    cam.xi = num_or(j, "xi", 0.0);
    cam.alpha = num_or(j, "alpha", 0.0);
    cam.width = static_cast<int>(int_or(j, "width", 0));
    cam.height = static_cast<int>(int_or(j, "height", 0));
    cam.validate();
    return cam;
}

json camera_to_json(const mocap::CameraModel& cam) {
    return json{{"model", cam.kind == mocap::CameraModel::Kind::Pinhole ? "pinhole" : "double_sphere"},
                {"fx", cam.fx},   {"fy", cam.fy},       {"cx", cam.cx},
                {"cy", cam.cy},   {"xi", cam.xi},       {"alpha", cam.alpha},
                {"width", cam.width}, {"height", cam.height}};
}

mocap::MarkerConfig markers_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("marker map must be a JSON array");
    mocap::MarkerConfig cfg;
    for (const json& mj : j) {
        mocap::MarkerSpec m;
        m.id = static_cast<int>(require(mj, "id").get<std::int64_t>());
        const json& xyz = require(mj, "xyz_m");
        if (!xyz.is_array() || xyz.size() != 3)
            throw ConfigError("marker xyz_m must be a 3-element array");
        for (int i = 0; i < 3; ++i) m.xyz_m[i] = xyz[static_cast<std::size_t>(i)].get<double>();
        m.freq_hz = num(mj, "freq_hz");
        m.duty = num_or(mj, "duty", 0.01);
        cfg.markers.push_back(m);
    }
    cfg.validate();
    return cfg;
}

json markers_to_json(const mocap::MarkerConfig& cfg) {
    json arr = json::array();
    for (const auto& m : cfg.markers)
        arr.push_back(json{{"id", m.id},
                           {"xyz_m", {m.xyz_m[0], m.xyz_m[1], m.xyz_m[2]}},
                           {"freq_hz", m.freq_hz},
                           {"duty", m.duty}});
    return arr;
}

tune::BiasBounds bounds_from_json(const json& j) {
    tune::BiasBounds bounds;
    for (int i = 0; i < tune::BiasVector::size(); ++i) {
        const json& bj = require(j, tune::BiasVector::name(i));
        tune::BiasBound& b = bounds.at(i);
        b.min = num(bj, "min");
        b.max = num(bj, "max");
        b.init = num_or(bj, "default", 0.5 * (b.min + b.max));
    }
    bounds.validate();
    return bounds;
}

json bounds_to_json(const tune::BiasBounds& bounds) {
    json j;
    for (int i = 0; i < tune::BiasVector::size(); ++i) {
        const tune::BiasBound& b = bounds.at(i);
        j[tune::BiasVector::name(i)] = json{{"min", b.min}, {"max", b.max}, {"default", b.init}};
    }
    return j;
}

json tuning_report_to_json(const tune::PsoResult& result) {
    json theta;
    for (int i = 0; i < tune::BiasVector::size(); ++i)
        theta[tune::BiasVector::name(i)] = result.best_position[static_cast<std::size_t>(i)];
    return json{{"schema_version", kSchemaVersion}, {"theta_star", theta},
                {"j_star", result.best_cost},       {"iterations", result.iterations},
                {"trace", result.trace},            {"seed", result.seed}};
}

noise::ARModel ar_from_json(const json& j) {
    noise::ARModel model;
    const auto order = require(j, "order").get<std::int64_t>();
    model.coeffs = require(j, "coeffs").get<std::vector<double>>();
    model.sigma2 = num(j, "sigma2");
    if (order < 0 || model.coeffs.size() != static_cast<std::size_t>(order))
        throw ConfigError("AR model: coeffs length must equal order");
    if (model.sigma2 <= 0.0) throw ConfigError("AR model: sigma2 must be positive");
    return model;
}

json ar_to_json(const noise::ARModel& model) {
    return json{{"order", model.order()}, {"coeffs", model.coeffs}, {"sigma2", model.sigma2}};
}

noise::DisturbanceMap map_from_json(const json& j) {
    noise::DisturbanceMap map;
    const json& bj = require(j, "basis");
    const std::string kind = require(bj, "kind").get<std::string>();
    if (kind == "polynomial") {
        map.basis.kind = noise::MapBasis::Kind::Polynomial;
        map.basis.degree = static_cast<int>(int_or(bj, "degree", 4));
    } else if (kind == "rbf") {
        map.basis.kind = noise::MapBasis::Kind::Rbf;
        map.basis.grid = static_cast<int>(int_or(bj, "grid", 5));
        map.basis.sigma_m = num_or(bj, "sigma_m", 0.08);
    } else {
        throw ConfigError("map basis kind must be 'polynomial' or 'rbf'");
    }
    map.basis.validate();
    map.radius_m = num_or(j, "radius_m", 0.19);
    map.center_z_m = num_or(j, "center_z_m", 0.0);
    map.lambda = num_or(j, "lambda", 0.0);
    const json& cj = require(j, "coeffs");
    map.coeff_fy = require(cj, "fy").get<std::vector<double>>();
    map.coeff_fz = require(cj, "fz").get<std::vector<double>>();
    map.coeff_taux = require(cj, "taux").get<std::vector<double>>();
    const std::size_t m = map.basis.size();
    if (map.coeff_fy.size() != m || map.coeff_fz.size() != m || map.coeff_taux.size() != m)
        throw ConfigError("map coefficients do not match the basis size");
    return map;
}

json map_to_json(const noise::DisturbanceMap& map) {
    json basis;
    if (map.basis.kind == noise::MapBasis::Kind::Polynomial)
        basis = json{{"kind", "polynomial"}, {"degree", map.basis.degree}};
    else
        basis = json{{"kind", "rbf"}, {"grid", map.basis.grid}, {"sigma_m", map.basis.sigma_m}};
    return json{{"schema_version", kSchemaVersion},
                {"basis", basis},
                {"radius_m", map.radius_m},
                {"center_z_m", map.center_z_m},
                {"lambda", map.lambda},
                {"coeffs", json{{"fy", map.coeff_fy}, {"fz", map.coeff_fz}, {"taux", map.coeff_taux}}}};
}

synth::CameraBehavior behavior_from_json(const json& j) {
    if (j.contains("bias")) {
        if (j.size() != 1)
            throw ConfigError("behavior: give either a 'bias' block or explicit fields, not both");
        const json& bj = j["bias"];
        tune::BiasVector bias;
        for (int i = 0; i < tune::BiasVector::size(); ++i)
            bias[i] = num_or(bj, tune::BiasVector::name(i), bias[i]);
        return synth::CameraBehavior::from_bias(bias);
    }
    synth::CameraBehavior b;
    b.threshold_on = num_or(j, "threshold_on", b.threshold_on);
    b.threshold_off = num_or(j, "threshold_off", b.threshold_off);
    b.refractory_us = num_or(j, "refractory_us", b.refractory_us);
    b.lowpass_cutoff_hz = num_or(j, "lowpass_cutoff_hz", b.lowpass_cutoff_hz);
    b.double_prob = num_or(j, "double_prob", b.double_prob);
    b.noise_rate_hz = num_or(j, "noise_rate_hz", b.noise_rate_hz);
    b.validate();
    return b;
}

json behavior_to_json(const synth::CameraBehavior& b) {
    return json{{"threshold_on", b.threshold_on},     {"threshold_off", b.threshold_off},
                {"refractory_us", b.refractory_us},   {"lowpass_cutoff_hz", b.lowpass_cutoff_hz},
                {"double_prob", b.double_prob},       {"noise_rate_hz", b.noise_rate_hz}};
}

SceneFile scene_from_json(const json& j) {
    SceneFile scene;
    const std::string type = require(j, "type").get<std::string>();
    if (j.contains("behavior")) scene.camera.behavior = behavior_from_json(j["behavior"]);

    if (type == "led") {
        scene.type = SceneFile::Type::Led;
        tune::TuningScene& s = scene.led;
        s.duration_s = num_or(j, "duration_s", s.duration_s);
        s.width = static_cast<std::uint32_t>(int_or(j, "width", s.width));
        s.height = static_cast<std::uint32_t>(int_or(j, "height", s.height));
        s.spot_radius_px = num_or(j, "spot_radius_px", s.spot_radius_px);
        for (const json& mj : require(j, "markers")) {
            tune::TuningScene::Marker m;
            m.cx = num(mj, "cx");
            m.cy = num(mj, "cy");
            m.freq_hz = num(mj, "freq_hz");
            m.duty = num_or(mj, "duty", m.duty);
            s.markers.push_back(m);
        }
        s.validate();
        scene.camera.width = s.width;
        scene.camera.height = s.height;
    } else if (type == "smoke") {
        scene.type = SceneFile::Type::Smoke;
        const json& fj = require(j, "flow");
        const std::string kind = require(fj, "kind").get<std::string>();
        synth::FlowFieldSpec& f = scene.flow;
        if (kind == "uniform") {
            f.kind = synth::FlowFieldSpec::Kind::Uniform;
            f.vy_mps = num_or(fj, "vy_mps", 0.0);
            f.vz_mps = num_or(fj, "vz_mps", 0.0);
        } else if (kind == "vortex") {
            f.kind = synth::FlowFieldSpec::Kind::Vortex;
            f.center_y_m = num_or(fj, "center_y_m", 0.0);
            f.center_z_m = num_or(fj, "center_z_m", 0.0);
            f.omega_rad_s = num(fj, "omega_rad_s");
            f.clockwise = fj.value("clockwise", true);
        } else if (kind == "dual_vortex") {
            f.kind = synth::FlowFieldSpec::Kind::DualVortex;
            f.left_core_m = num_or(fj, "left_core_m", f.left_core_m);
            f.right_core_m = num_or(fj, "right_core_m", f.right_core_m);
            f.spacing_m = num_or(fj, "spacing_m", f.spacing_m);
            f.strength_mps = num_or(fj, "strength_mps", f.strength_mps);
            f.center_z_m = num_or(fj, "center_z_m", 0.0);
        } else {
            throw ConfigError("flow kind must be 'uniform', 'vortex' or 'dual_vortex'");
        }
        synth::SmokeSceneSpec& s = scene.smoke;
        s.blob_count = static_cast<int>(int_or(j, "blob_count", s.blob_count));
        s.blob_sigma_min_px = num_or(j, "blob_sigma_min_px", s.blob_sigma_min_px);
        s.blob_sigma_max_px = num_or(j, "blob_sigma_max_px", s.blob_sigma_max_px);
        s.blob_intensity = num_or(j, "blob_intensity", s.blob_intensity);
        s.seeding_rate_hz = num_or(j, "seeding_rate_hz", s.seeding_rate_hz);
        s.fade_ramp_s = num_or(j, "fade_ramp_s", s.fade_ramp_s);
        s.spawn_margin_px = num_or(j, "spawn_margin_px", s.spawn_margin_px);
        s.duration_s = num_or(j, "duration_s", s.duration_s);
        s.width = static_cast<std::uint32_t>(int_or(j, "width", s.width));
        s.height = static_cast<std::uint32_t>(int_or(j, "height", s.height));
        s.px_per_mm = num_or(j, "px_per_mm", s.px_per_mm);
        s.frame_dt_us = static_cast<std::uint32_t>(int_or(j, "frame_dt_us", s.frame_dt_us));
        s.tick_us = static_cast<std::uint32_t>(int_or(j, "tick_us", s.tick_us));
        s.validate();
        f.validate(s.domain_radius_m());
        scene.camera.width = s.width;
        scene.camera.height = s.height;
    } else if (type == "trajectory") {
        scene.type = SceneFile::Type::Trajectory;
        scene.trajectory.markers = markers_from_json(require(j, "markers"));
        scene.trajectory_camera = camera_from_json(require(j, "camera"));
        if (scene.trajectory_camera.width <= 0 || scene.trajectory_camera.height <= 0)
            throw ConfigError("trajectory camera needs width and height");
        scene.trajectory.spot_radius_px = num_or(j, "spot_radius_px", scene.trajectory.spot_radius_px);
        if (j.contains("active_ids"))
            scene.trajectory.active_ids = j["active_ids"].get<std::vector<int>>();
        for (const json& pj : require(j, "poses")) {
            mocap::Pose pose;
            const json& xyz = require(pj, "xyz");
            const json& q = require(pj, "quat_wxyz");
            if (!xyz.is_array() || xyz.size() != 3 || !q.is_array() || q.size() != 4)
                throw ConfigError("pose needs xyz[3] and quat_wxyz[4]");
            pose.t = Eigen::Vector3d(xyz[0].get<double>(), xyz[1].get<double>(), xyz[2].get<double>());
            Eigen::Quaterniond quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                    q[3].get<double>());
            if (quat.norm() < 1e-9) throw ConfigError("pose quaternion must be non-zero");
            pose.R = quat.normalized().toRotationMatrix();
            scene.trajectory.poses.emplace_back(require(pj, "t_us").get<std::uint64_t>(), pose);
        }
        scene.trajectory.validate();
        scene.camera.width = static_cast<std::uint32_t>(scene.trajectory_camera.width);
        scene.camera.height = static_cast<std::uint32_t>(scene.trajectory_camera.height);
    } else {
        throw ConfigError("scene type must be 'led', 'smoke' or 'trajectory'");
    }
    return scene;
}

json scene_to_json(const SceneFile& scene) {
    json j;
    j["behavior"] = behavior_to_json(scene.camera.behavior);
    switch (scene.type) {
        case SceneFile::Type::Led: {
            j["type"] = "led";
            j["duration_s"] = scene.led.duration_s;
            j["width"] = scene.led.width;
            j["height"] = scene.led.height;
            j["spot_radius_px"] = scene.led.spot_radius_px;
            json arr = json::array();
            for (const auto& m : scene.led.markers)
                arr.push_back(json{{"cx", m.cx}, {"cy", m.cy}, {"freq_hz", m.freq_hz}, {"duty", m.duty}});
            j["markers"] = arr;
            break;
        }
        case SceneFile::Type::Smoke: {
            j["type"] = "smoke";
            json fj;
            switch (scene.flow.kind) {
                case synth::FlowFieldSpec::Kind::Uniform:
                    fj = json{{"kind", "uniform"},
                              {"vy_mps", scene.flow.vy_mps},
                              {"vz_mps", scene.flow.vz_mps}};
                    break;
                case synth::FlowFieldSpec::Kind::Vortex:
                    fj = json{{"kind", "vortex"},
                              {"center_y_m", scene.flow.center_y_m},
                              {"center_z_m", scene.flow.center_z_m},
                              {"omega_rad_s", scene.flow.omega_rad_s},
                              {"clockwise", scene.flow.clockwise}};
                    break;
                case synth::FlowFieldSpec::Kind::DualVortex:
                    fj = json{{"kind", "dual_vortex"},
                              {"left_core_m", scene.flow.left_core_m},
                              {"right_core_m", scene.flow.right_core_m},
                              {"spacing_m", scene.flow.spacing_m},
                              {"strength_mps", scene.flow.strength_mps},
                              {"center_z_m", scene.flow.center_z_m}};
                    break;
            }
            j["flow"] = fj;
            j["blob_count"] = scene.smoke.blob_count;
            j["blob_sigma_min_px"] = scene.smoke.blob_sigma_min_px;
            j["blob_sigma_max_px"] = scene.smoke.blob_sigma_max_px;
            j["blob_intensity"] = scene.smoke.blob_intensity;
            j["seeding_rate_hz"] = scene.smoke.seeding_rate_hz;
            j["fade_ramp_s"] = scene.smoke.fade_ramp_s;
            j["spawn_margin_px"] = scene.smoke.spawn_margin_px;
            j["duration_s"] = scene.smoke.duration_s;
            j["width"] = scene.smoke.width;
            j["height"] = scene.smoke.height;
            j["px_per_mm"] = scene.smoke.px_per_mm;
            j["frame_dt_us"] = scene.smoke.frame_dt_us;
            j["tick_us"] = scene.smoke.tick_us;
            break;
        }
        case SceneFile::Type::Trajectory: {
            j["type"] = "trajectory";
            j["markers"] = markers_to_json(scene.trajectory.markers);
            j["camera"] = camera_to_json(scene.trajectory_camera);
            j["spot_radius_px"] = scene.trajectory.spot_radius_px;
            if (!scene.trajectory.active_ids.empty()) j["active_ids"] = scene.trajectory.active_ids;
            json arr = json::array();
            for (const auto& [t_us, pose] : scene.trajectory.poses)
                arr.push_back(json{{"t_us", t_us},
                                   {"xyz", {pose.t.x(), pose.t.y(), pose.t.z()}},
                                   {"quat_wxyz", quat_wxyz(pose.R)}});
            j["poses"] = arr;
            break;
        }
    }
    return j;
}

json scene_truth_json(const SceneFile& scene) {
    json j{{"schema_version", kSchemaVersion}};
    switch (scene.type) {
        case SceneFile::Type::Led: {
            j["type"] = "led";
            json arr = json::array();
            for (const auto& m : scene.led.markers)
                arr.push_back(json{{"cx", m.cx}, {"cy", m.cy}, {"freq_hz", m.freq_hz}, {"duty", m.duty}});
            j["markers"] = arr;
            j["duration_s"] = scene.led.duration_s;
            break;
        }
        case SceneFile::Type::Smoke:
            j["type"] = "smoke";
            j["flow"] = scene_to_json(scene)["flow"];
            j["px_per_mm"] = scene.smoke.px_per_mm;
            j["frame_dt_us"] = scene.smoke.frame_dt_us;
            break;
        case SceneFile::Type::Trajectory: {
            j["type"] = "trajectory";
            json arr = json::array();
            for (const auto& [t_us, pose] : scene.trajectory.poses)
                arr.push_back(json{{"t_us", t_us},
                                   {"xyz", {pose.t.x(), pose.t.y(), pose.t.z()}},
                                   {"quat_wxyz", quat_wxyz(pose.R)}});
            j["poses"] = arr;
            break;
        }
    }
    return j;
}

void write_flow_csv(std::ostream& os, std::span<const pipe::FlowRow> rows) {
    os << "k,i,j,u_px,v_px,conf,vy_mps,vz_mps\n";
    for (const auto& r : rows)
        os << r.k << ',' << r.i << ',' << r.j << ',' << fmt(r.u_px) << ',' << fmt(r.v_px) << ','
           << fmt(r.conf) << ',' << fmt(r.vy_mps) << ',' << fmt(r.vz_mps) << '\n';
}

json flow_to_json(const pipe::VelocimetryResult& result) {
    json rows = json::array();
    for (const auto& r : result.rows)
        rows.push_back(json{{"k", r.k},         {"i", r.i},           {"j", r.j},
                            {"u_px", r.u_px},   {"v_px", r.v_px},     {"conf", r.conf},
                            {"vy_mps", r.vy_mps}, {"vz_mps", r.vz_mps}});
    return json{{"schema_version", kSchemaVersion},
                {"rows", rows},
                {"summary", velocimetry_summary_json(result.summary)}};
}

json velocimetry_summary_json(const pipe::VelocimetrySummary& s) {
    return json{{"schema_version", kSchemaVersion},
                {"frames", s.frames},
                {"fields", s.fields},
                {"rows", s.rows},
                {"discard_frac", s.discard_frac},
                {"median_speed_px", s.median_speed_px},
                {"median_speed_mps", s.median_speed_mps}};
}

void write_pose_csv(std::ostream& os, std::span<const pipe::PoseRow> rows) {
    os << "t_us,x,y,z,qw,qx,qy,qz,rmse_px,n_markers\n";
    for (const auto& r : rows) {
        Eigen::Quaterniond q(r.pose.R);
        q.normalize();
        if (q.w() < 0.0) q.coeffs() = -q.coeffs();
        os << r.t_us << ',' << fmt(r.pose.t.x()) << ',' << fmt(r.pose.t.y()) << ','
           << fmt(r.pose.t.z()) << ',' << fmt(q.w()) << ',' << fmt(q.x()) << ',' << fmt(q.y())
           << ',' << fmt(q.z()) << ',' << fmt(r.rmse_px) << ',' << r.n_markers << '\n';
    }
}

json poses_to_json(const pipe::MocapResult& result) {
    json rows = json::array();
    for (const auto& r : result.rows) {
        Eigen::Quaterniond q(r.pose.R);
        q.normalize();
        if (q.w() < 0.0) q.coeffs() = -q.coeffs();
        rows.push_back(json{{"t_us", r.t_us},
                            {"xyz", {r.pose.t.x(), r.pose.t.y(), r.pose.t.z()}},
                            {"quat_wxyz", {q.w(), q.x(), q.y(), q.z()}},
                            {"rmse_px", r.rmse_px},
                            {"n_markers", r.n_markers}});
    }
    return json{{"schema_version", kSchemaVersion},
                {"rows", rows},
                {"summary", mocap_summary_json(result.summary)}};
}

json mocap_summary_json(const pipe::MocapSummary& s) {
    return json{{"schema_version", kSchemaVersion},
                {"windows", s.windows},
                {"poses", s.poses},
                {"mean_rmse_px", s.mean_rmse_px},
                {"detection_rate", s.detection_rate},
                {"sigma_x", s.sigma_x},
                {"sigma_y", s.sigma_y},
                {"sigma_z", s.sigma_z}};
}

std::vector<noise::WrenchSample> read_wrench_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    std::uint64_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty wrench CSV", ParseError::Where::Line, 1);
    ++lineno;
    if (line.ends_with('\r')) line.pop_back();
    if (line != "y_m,z_m,fy_N,fz_N,taux_Nm")
        throw ParseError("wrench CSV header must be 'y_m,z_m,fy_N,fz_N,taux_Nm'",
                         ParseError::Where::Line, lineno);
    std::vector<noise::WrenchSample> samples;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.ends_with('\r')) line.pop_back();
        if (line.empty()) continue;
        noise::WrenchSample s;
        char trailing;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf %c", &s.y_m, &s.z_m, &s.fy_N, &s.fz_N,
                        &s.taux_Nm, &trailing) != 5)
            throw ParseError("malformed wrench row", ParseError::Where::Line, lineno);
        samples.push_back(s);
    }
    return samples;
}

void write_wrench_csv(std::ostream& os, std::span<const noise::WrenchSample> samples) {
    os << "y_m,z_m,fy_N,fz_N,taux_Nm\n";
    for (const auto& s : samples)
        os << fmt(s.y_m) << ',' << fmt(s.z_m) << ',' << fmt(s.fy_N) << ',' << fmt(s.fz_N) << ','
           << fmt(s.taux_Nm) << '\n';
}

std::vector<double> read_signal_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    std::uint64_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty signal CSV", ParseError::Where::Line, 1);
    ++lineno;
    if (line.ends_with('\r')) line.pop_back();
    if (line != "value")
        throw ParseError("signal CSV header must be 'value'", ParseError::Where::Line, lineno);
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.ends_with('\r')) line.pop_back();
        if (line.empty()) continue;
        char trailing;
        double v;
        if (std::sscanf(line.c_str(), "%lf %c", &v, &trailing) != 1)
            throw ParseError("malformed signal row", ParseError::Where::Line, lineno);
        values.push_back(v);
    }
    return values;
}

void write_signal_csv(std::ostream& os, std::span<const double> values) {
    os << "value\n";
    for (const double v : values) os << fmt(v) << '\n';
}

}  // namespace evpipe::io
