#include <CLI11.hpp>
#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "evpipe/autotune.hpp"
#include "evpipe/errors.hpp"
#include "evpipe/events.hpp"
#include "evpipe/pipeline.hpp"
#include "evpipe/pnp.hpp"
#include "evpipe/serialize.hpp"
#include "evpipe/sim.hpp"
#include "evpipe/spectrum.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace evpipe;

namespace {

struct Args {
    std::string config;
    std::string input;
    std::string output;
    std::string format = "csv";
    std::string suite;
    std::uint64_t seed = 1;
};

EventFormat format_by_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".csv" ? EventFormat::Csv : EventFormat::Binary;
}

void require_flag(const std::string& value, const char* flag) {
    if (value.empty()) throw ConfigError(std::string("missing required flag ") + flag);
}

void check_report_format(const std::string& format) {
    if (format != "csv" && format != "json")
        throw ConfigError("--format must be 'csv' or 'json', got '" + format + "'");
}

// Resolves a path found inside a config file relative to that file.
fs::path resolve_near(const fs::path& config_path, const std::string& ref) {
    const fs::path p(ref);
    if (p.is_absolute()) return p;
    return config_path.parent_path() / p;
}

void write_events_atomic(const EventStream& stream, const fs::path& path) {
    const fs::path tmp = path.string() + ".tmp";
    write_events(stream, tmp, EventFormat::Binary);
    fs::rename(tmp, path);
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

// ---------------------------------------------------------------------------
// velocimetry
// ---------------------------------------------------------------------------

void cmd_velocimetry(const Args& args) {
    require_flag(args.input, "--input");
    require_flag(args.output, "--output");
    check_report_format(args.format);

    pipe::VelocimetryParams params;
    if (!args.config.empty()) {
        const json j = io::load_json_file(args.config);
        if (j.contains("grid")) {
            const json& g = j["grid"];
            velo::FlowGridConfig& c = params.grid;
            c.patches = static_cast<int>(int_or(g, "patches", c.patches));
            c.window = static_cast<int>(int_or(g, "window", c.window));
            c.step = static_cast<int>(int_or(g, "step", c.step));
            c.u_max = static_cast<int>(int_or(g, "u_max", c.u_max));
            c.v_max = static_cast<int>(int_or(g, "v_max", c.v_max));
            c.stack = static_cast<int>(int_or(g, "stack", c.stack));
            c.sigma_blur = num_or(g, "sigma_blur", c.sigma_blur);
            c.blur_kernel = static_cast<int>(int_or(g, "blur_kernel", c.blur_kernel));
            c.origin_x = static_cast<int>(int_or(g, "origin_x", c.origin_x));
            c.origin_y = static_cast<int>(int_or(g, "origin_y", c.origin_y));
            c.dt_us = static_cast<std::uint32_t>(int_or(g, "dt_us", c.dt_us));
            c.px_per_mm = num_or(g, "px_per_mm", c.px_per_mm);
        }
        params.bin = static_cast<std::uint32_t>(int_or(j, "bin", params.bin));
    }

    const EventStream stream = read_events(args.input, format_by_extension(args.input));
    const pipe::VelocimetryResult result = pipe::run_velocimetry(stream, params);

    if (args.format == "csv") {
        std::ostringstream os;
        io::write_flow_csv(os, result.rows);
        io::atomic_write_text(args.output, os.str());
    } else {
        io::atomic_write_text(args.output, io::flow_to_json(result).dump(2) + "\n");
    }
    std::cout << io::velocimetry_summary_json(result.summary).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// mocap
// ---------------------------------------------------------------------------

void cmd_mocap(const Args& args) {
    require_flag(args.config, "--config");
    require_flag(args.input, "--input");
    require_flag(args.output, "--output");
    check_report_format(args.format);

    const json j = io::load_json_file(args.config);
    const json& cj = j.contains("camera") ? j["camera"] : throw ConfigError("missing field 'camera'");
    const mocap::CameraModel cam = cj.is_string()
        ? io::camera_from_json(io::load_json_file(resolve_near(args.config, cj.get<std::string>())))
        : io::camera_from_json(cj);
    const json& mj = j.contains("markers") ? j["markers"] : throw ConfigError("missing field 'markers'");
    const mocap::MarkerConfig markers = mj.is_string()
        ? io::markers_from_json(io::load_json_file(resolve_near(args.config, mj.get<std::string>())))
        : io::markers_from_json(mj);

    pipe::MocapParams params;
    params.window_us = static_cast<std::uint64_t>(int_or(j, "window_us", static_cast<std::int64_t>(params.window_us)));
    params.stack_depth = static_cast<int>(int_or(j, "stack_depth", params.stack_depth));
    params.rel_tol = num_or(j, "rel_tol", params.rel_tol);
    params.max_staleness_us = static_cast<std::uint64_t>(int_or(j, "max_staleness_us", 0));
    params.max_misses = static_cast<int>(int_or(j, "max_misses", params.max_misses));
    params.seed = args.seed;

    const EventStream stream = read_events(args.input, format_by_extension(args.input));
    const pipe::MocapResult result = pipe::run_mocap(stream, markers, cam, params);

    if (args.format == "csv") {
        std::ostringstream os;
        io::write_pose_csv(os, result.rows);
        io::atomic_write_text(args.output, os.str());
    } else {
        io::atomic_write_text(args.output, io::poses_to_json(result).dump(2) + "\n");
    }
    std::cout << io::mocap_summary_json(result.summary).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

void cmd_synth(const Args& args) {
    require_flag(args.config, "--config");
    require_flag(args.output, "--output");

    const io::SceneFile scene = io::scene_from_json(io::load_json_file(args.config));
    EventStream stream;
    switch (scene.type) {
        case io::SceneFile::Type::Led:
            stream = synth::simulate_led_events(scene.led, scene.camera, args.seed);
            break;
        case io::SceneFile::Type::Smoke:
            stream = synth::simulate_smoke_events(scene.flow, scene.smoke, scene.camera.behavior,
                                                  args.seed)
                         .stream;
            break;
        case io::SceneFile::Type::Trajectory:
            stream = synth::simulate_trajectory(scene.trajectory, scene.trajectory_camera,
                                                scene.camera, args.seed)
                         .stream;
            break;
    }
    write_events_atomic(stream, args.output);
    io::atomic_write_text(args.output + ".truth.json", io::scene_truth_json(scene).dump(2) + "\n");

    std::cout << json{{"schema_version", io::kSchemaVersion},
                      {"events", stream.events.size()},
                      {"width", stream.width},
                      {"height", stream.height},
                      {"duration_us", stream.duration_us()}}
                     .dump(2)
              << "\n";
}

// ---------------------------------------------------------------------------
// autotune
// ---------------------------------------------------------------------------

void cmd_autotune(const Args& args) {
    require_flag(args.config, "--config");
    require_flag(args.output, "--output");

    const json j = io::load_json_file(args.config);
    const json& sj = j.contains("scene") ? j["scene"] : throw ConfigError("missing field 'scene'");
    tune::TuningScene scene;
    scene.duration_s = num_or(sj, "duration_s", scene.duration_s);
    scene.width = static_cast<std::uint32_t>(int_or(sj, "width", scene.width));
    scene.height = static_cast<std::uint32_t>(int_or(sj, "height", scene.height));
    scene.spot_radius_px = num_or(sj, "spot_radius_px", scene.spot_radius_px);
    if (!sj.contains("markers")) throw ConfigError("missing field 'markers'");
    for (const json& mj : sj["markers"]) {
        tune::TuningScene::Marker m;
        m.cx = num_or(mj, "cx", -1.0);
        m.cy = num_or(mj, "cy", -1.0);
        m.freq_hz = num_or(mj, "freq_hz", 0.0);
        m.duty = num_or(mj, "duty", m.duty);
        scene.markers.push_back(m);
    }
    scene.validate();

    const tune::BiasBounds bounds =
        j.contains("bounds") ? io::bounds_from_json(j["bounds"]) : tune::BiasBounds{};
    const double alpha0 = num_or(j, "alpha0", 0.5);

    tune::PsoConfig cfg;
    cfg.seed = args.seed;
    cfg.stop_when_leq = 0.0;
    if (j.contains("pso")) {
        const json& pj = j["pso"];
        cfg.particles = static_cast<int>(int_or(pj, "particles", cfg.particles));
        cfg.max_iters = static_cast<int>(int_or(pj, "max_iters", cfg.max_iters));
        cfg.inertia = num_or(pj, "inertia", cfg.inertia);
        cfg.cognitive = num_or(pj, "cognitive", cfg.cognitive);
        cfg.social = num_or(pj, "social", cfg.social);
        cfg.velocity_clamp = num_or(pj, "velocity_clamp", cfg.velocity_clamp);
        if (pj.contains("stop_when_leq")) {
            if (pj["stop_when_leq"].is_null())
                cfg.stop_when_leq.reset();
            else
                cfg.stop_when_leq = pj["stop_when_leq"].get<double>();
        }
    }

    std::vector<std::pair<double, double>> box;
    for (int i = 0; i < tune::BiasVector::size(); ++i)
        box.emplace_back(bounds.at(i).min, bounds.at(i).max);

    const std::uint64_t stream_seed = args.seed ^ 0x9e3779b97f4a7c15ull;
    const auto objective = [&](std::span<const double> position) {
        tune::BiasVector bias;
        for (int i = 0; i < tune::BiasVector::size(); ++i) bias[i] = position[static_cast<std::size_t>(i)];
        synth::SimCamera cam;
        cam.width = scene.width;
        cam.height = scene.height;
        cam.behavior = synth::CameraBehavior::from_bias(bias);
        const EventStream stream = synth::simulate_led_events(scene, cam, stream_seed);
        return tune::total_cost(stream, scene, alpha0);
    };

    const tune::PsoResult result = tune::pso_optimize(objective, box, cfg);
    const std::string report = io::tuning_report_to_json(result).dump(2) + "\n";
    io::atomic_write_text(args.output, report);
    std::cout << report;
}

// ---------------------------------------------------------------------------
// disturbance
// ---------------------------------------------------------------------------

void cmd_disturbance(const Args& args) {
    require_flag(args.config, "--config");
    require_flag(args.output, "--output");

    const json j = io::load_json_file(args.config);
    const std::string task =
        j.contains("task") ? j["task"].get<std::string>() : throw ConfigError("missing field 'task'");

    if (task == "fit_ar") {
        require_flag(args.input, "--input");
        const int order = static_cast<int>(int_or(j, "order", 8));
        const std::vector<double> signal = io::read_signal_csv(args.input);
        const noise::ARModel model = noise::yule_walker_fit(signal, order);
        json out = io::ar_to_json(model);
        out["schema_version"] = io::kSchemaVersion;
        io::atomic_write_text(args.output, out.dump(2) + "\n");
        std::cout << out.dump(2) << "\n";
    } else if (task == "fit_map") {
        require_flag(args.input, "--input");
        noise::MapBasis basis;
        if (j.contains("basis")) {
            const json& bj = j["basis"];
            const std::string kind = bj.contains("kind") ? bj["kind"].get<std::string>() : "polynomial";
            if (kind == "polynomial") {
                basis.kind = noise::MapBasis::Kind::Polynomial;
                basis.degree = static_cast<int>(int_or(bj, "degree", basis.degree));
            } else if (kind == "rbf") {
                basis.kind = noise::MapBasis::Kind::Rbf;
                basis.grid = static_cast<int>(int_or(bj, "grid", basis.grid));
                basis.sigma_m = num_or(bj, "sigma_m", basis.sigma_m);
            } else {
                throw ConfigError("map basis kind must be 'polynomial' or 'rbf'");
            }
        }
        const double lambda = num_or(j, "lambda", 0.0);
        const double radius = num_or(j, "radius_m", 0.19);
        const double center_z = num_or(j, "center_z_m", 0.0);
        const std::vector<noise::WrenchSample> samples = io::read_wrench_csv(args.input);
        const noise::MapFit fit = noise::fit_disturbance_map(samples, basis, lambda, radius, center_z);
        json out = io::map_to_json(fit.map);
        out["rmse"] = json{{"fy", fit.rmse_fy}, {"fz", fit.rmse_fz}, {"taux", fit.rmse_taux}};
        io::atomic_write_text(args.output, out.dump(2) + "\n");
        std::cout << out["rmse"].dump(2) << "\n";
    } else if (task == "generate") {
        require_flag(args.input, "--input");
        const noise::ARModel model = io::ar_from_json(io::load_json_file(args.input));
        const std::size_t n = static_cast<std::size_t>(int_or(j, "n", 100000));
        const std::size_t burn_in = static_cast<std::size_t>(
            int_or(j, "burn_in", 10 * static_cast<std::int64_t>(model.order())));
        const std::vector<double> signal = noise::ar_generate(model, n, args.seed, burn_in);
        std::ostringstream os;
        io::write_signal_csv(os, signal);
        io::atomic_write_text(args.output, os.str());
        std::cout << json{{"schema_version", io::kSchemaVersion}, {"samples", signal.size()}}.dump(2)
                  << "\n";
    } else {
        throw ConfigError("task must be 'fit_ar', 'fit_map' or 'generate', got '" + task + "'");
    }
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchRow {
    std::string suite;
    std::string stage;
    std::size_t size = 0;
    int reps = 0;
    double median_us = 0.0;
    double p95_us = 0.0;
    double events_per_s = 0.0;
};

template <typename F>
double time_us(F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::micro>(t1 - t0).count();
}

BenchRow summarize(std::string suite, std::string stage, std::size_t size,
                   std::vector<double> times) {
    std::sort(times.begin(), times.end());
    BenchRow row;
    row.suite = std::move(suite);
    row.stage = std::move(stage);
    row.size = size;
    row.reps = static_cast<int>(times.size());
    row.median_us = times[times.size() / 2];
    row.p95_us = times[std::min(times.size() - 1,
                                static_cast<std::size_t>(0.95 * static_cast<double>(times.size())))];
    return row;
}

volatile double g_bench_sink = 0.0;

std::vector<BenchRow> bench_velocimetry(int reps) {
    Rng rng(7);
    velo::FlowGridConfig cfg;
    const std::uint32_t w = 640, h = 360;
    std::vector<EventFrame> frames(4);
    for (std::size_t k = 0; k < frames.size(); ++k) {
        frames[k].k = static_cast<std::uint32_t>(k + 1);
        frames[k].dt_us = cfg.dt_us;
        frames[k].bin = 1;
        frames[k].width = w;
        frames[k].height = h;
        frames[k].sums.assign(static_cast<std::size_t>(w) * h, 0);
        for (int i = 0; i < 40000; ++i) {
            const std::size_t px = rng.next_below(static_cast<std::uint64_t>(w) * h);
            frames[k].sums[px] += rng.uniform() < 0.5 ? 1 : -1;
        }
    }
    const auto span3 = [&](std::size_t first) {
        return std::span<const EventFrame>(frames.data() + first, 3);
    };

    std::vector<BenchRow> rows;
    std::vector<double> times;

    for (int r = 0; r < reps; ++r)
        times.push_back(time_us([&] {
            const velo::BlurredFrame b = velo::stack_and_blur(span3(1), cfg);
            g_bench_sink = g_bench_sink + b.px[0];
        }));
    rows.push_back(summarize("velocimetry", "stack_blur", static_cast<std::size_t>(w) * h, times));
    times.clear();

    const velo::BlurredFrame prev = velo::stack_and_blur(span3(0), cfg);
    const velo::BlurredFrame curr = velo::stack_and_blur(span3(1), cfg);
    const std::size_t n_patches = static_cast<std::size_t>(cfg.patches) * cfg.patches;
    for (int r = 0; r < reps; ++r)
        times.push_back(time_us([&] {
            const velo::EnergyTable prev_energy(prev);
            for (int j = 0; j < cfg.patches; ++j)
                for (int i = 0; i < cfg.patches; ++i) {
                    const auto surface = velo::cost_surface(curr, prev, prev_energy,
                                                            cfg.patch_x0(i), cfg.patch_y0(j), cfg);
                    if (surface) g_bench_sink = g_bench_sink + velo::match_patch(*surface).u;
                }
        }));
    rows.push_back(summarize("velocimetry", "cost_grid", n_patches, times));
    times.clear();

    std::vector<std::pair<velo::CostSurface, velo::GridMin>> matched;
    for (int j = 0; j < cfg.patches; ++j)
        for (int i = 0; i < cfg.patches; ++i) {
            auto surface = velo::cost_surface(curr, prev, cfg.patch_x0(i), cfg.patch_y0(j), cfg);
            if (surface) matched.emplace_back(*surface, velo::match_patch(*surface));
        }
    for (int r = 0; r < reps; ++r)
        times.push_back(time_us([&] {
            for (const auto& [surface, m] : matched) {
                const auto fit = velo::quadratic_refine(surface, m);
                if (fit) g_bench_sink = g_bench_sink + fit->du;
            }
        }));
    rows.push_back(summarize("velocimetry", "refine", matched.size(), times));
    return rows;
}

std::vector<BenchRow> bench_sdtv(int reps) {
    std::vector<BenchRow> rows;
    const std::uint32_t w = 640, h = 480;
    for (const std::size_t n : {std::size_t(1000000), std::size_t(2000000)}) {
        Rng rng(11);
        std::vector<Event> events(n);
        const std::uint64_t span_us = 100000;
        for (std::size_t i = 0; i < n; ++i) {
            events[i].x = static_cast<std::uint16_t>(rng.next_below(w));
            events[i].y = static_cast<std::uint16_t>(rng.next_below(h));
            events[i].p = rng.uniform() < 0.5 ? 1 : -1;
            events[i].t = i * span_us / n;
        }
        mocap::Sdtv sdtv(w, h, 32);
        std::vector<double> times;
        for (int r = 0; r < reps; ++r) {
            times.push_back(time_us([&] { sdtv.update(events); }));
            for (auto& e : events) e.t += span_us;  // keep timestamps advancing across reps
        }
        BenchRow row = summarize("sdtv", "update", n, std::move(times));
        row.events_per_s = static_cast<double>(n) / (row.median_us * 1e-6);
        rows.push_back(row);
    }
    return rows;
}

std::vector<BenchRow> bench_pnp(int reps) {
    mocap::CameraModel cam;
    cam.kind = mocap::CameraModel::Kind::Pinhole;
    cam.fx = cam.fy = 800.0;
    cam.cx = 320.0;
    cam.cy = 240.0;
    cam.width = 640;
    cam.height = 480;

    const Eigen::Vector3d object[5] = {{0.0, 0.0, 0.0},
                                       {0.06, 0.0, 0.0},
                                       {-0.06, 0.01, 0.0},
                                       {0.0, 0.05, 0.01},
                                       {0.01, -0.05, 0.0}};
    mocap::Pose truth;
    truth.t = Eigen::Vector3d(0.02, -0.01, 1.0);
    truth.R = Eigen::AngleAxis<double>(0.2, Eigen::Vector3d(0.1, 0.9, 0.2).normalized()).toRotationMatrix();

    std::vector<mocap::Correspondence> corr;
    for (const auto& p : object) {
        const auto uv = mocap::project(cam, truth.apply(p));
        corr.push_back(mocap::Correspondence{p, *uv});
    }

    std::vector<double> times;
    for (int r = 0; r < reps; ++r)
        times.push_back(time_us([&] {
            const mocap::PnpResult res = mocap::solve_pnp(corr, cam);
            g_bench_sink = g_bench_sink + res.pose.t.z();
        }));
    std::vector<BenchRow> rows;
    rows.push_back(summarize("pnp", "solve", corr.size(), std::move(times)));
    return rows;
}

void cmd_bench(const Args& args) {
    if (args.suite != "velocimetry" && args.suite != "sdtv" && args.suite != "pnp")
        throw ConfigError("unknown bench suite '" + args.suite +
                          "' (expected velocimetry, sdtv or pnp)");
    int reps = 100;
    if (!args.config.empty()) {
        const json j = io::load_json_file(args.config);
        reps = static_cast<int>(int_or(j, "reps", reps));
        if (reps < 1) throw ConfigError("bench reps must be >= 1");
    }

    std::vector<BenchRow> rows;
    if (args.suite == "velocimetry")
        rows = bench_velocimetry(reps);
    else if (args.suite == "sdtv")
        rows = bench_sdtv(reps);
    else
        rows = bench_pnp(reps);

    std::ostringstream os;
    os << "suite,stage,size,reps,median_us,p95_us,events_per_s\n";
    for (const auto& r : rows) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.3f,%.3f,%.6g", r.median_us, r.p95_us, r.events_per_s);
        os << r.suite << ',' << r.stage << ',' << r.size << ',' << r.reps << ',' << buf << '\n';
    }
    if (args.output.empty())
        std::cout << os.str();
    else {
        io::atomic_write_text(args.output, os.str());
        std::cout << os.str();
    }
}

void add_common(CLI::App* cmd, Args& args) {
    cmd->add_option("--config,-c", args.config, "config file (JSON)");
    cmd->add_option("--input,-i", args.input, "input data file");
    cmd->add_option("--output,-o", args.output, "output data file");
    cmd->add_option("--seed,-s", args.seed, "random seed");
    cmd->add_option("--format,-f", args.format, "report format: csv or json");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-camera velocimetry / mocap toolkit"};
    app.require_subcommand(1);
    Args args;

    CLI::App* velocimetry = app.add_subcommand("velocimetry", "sparse flow from an event file");
    CLI::App* mocap_cmd = app.add_subcommand("mocap", "pose track from a blinking-marker event file");
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic event stream");
    CLI::App* autotune = app.add_subcommand("autotune", "swarm-tune camera biases on a scene");
    CLI::App* disturbance = app.add_subcommand("disturbance", "fit AR noise models and wrench maps");
    CLI::App* bench = app.add_subcommand("bench", "timing suites");
    for (CLI::App* cmd : {velocimetry, mocap_cmd, synth_cmd, autotune, disturbance, bench})
        add_common(cmd, args);
    bench->add_option("suite", args.suite, "one of: velocimetry, sdtv, pnp");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // bad invocation is a configuration error
    }

    try {
        if (app.got_subcommand(velocimetry))
            cmd_velocimetry(args);
        else if (app.got_subcommand(mocap_cmd))
            cmd_mocap(args);
        else if (app.got_subcommand(synth_cmd))
            cmd_synth(args);
        else if (app.got_subcommand(autotune))
            cmd_autotune(args);
        else if (app.got_subcommand(disturbance))
            cmd_disturbance(args);
        else
            cmd_bench(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
