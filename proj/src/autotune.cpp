#include "evpipe/autotune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "evpipe/errors.hpp"
#include "evpipe/rng.hpp"

namespace evpipe::tune {

const char* BiasVector::name(int i) {
    static const char* names[6] = {"diff_off", "diff_on", "bias_fo", "bias_hpf", "bias_pr", "bias_refr"};
    return names[i];
}

void BiasBounds::validate() const {
    for (int i = 0; i < BiasVector::size(); ++i) {
        const BiasBound& b = at(i);
        if (!(b.min < b.max))
            throw ConfigError(std::string("bias bounds: degenerate range for ") + BiasVector::name(i));
        if (b.init < b.min || b.init > b.max)
            throw ConfigError(std::string("bias bounds: default outside range for ") + BiasVector::name(i));
    }
}

bool BiasBounds::contains(const BiasVector& v) const {
    for (int i = 0; i < BiasVector::size(); ++i)
        if (v[i] < at(i).min || v[i] > at(i).max) return false;
    return true;
}

BiasVector BiasBounds::defaults() const {
    BiasVector v;
    for (int i = 0; i < BiasVector::size(); ++i) v[i] = at(i).init;
    return v;
}

void TuningScene::validate() const {
    if (markers.empty()) throw ConfigError("tuning scene: need at least one marker");
    if (duration_s <= 0.0) throw ConfigError("tuning scene: duration must be positive");
    if (spot_radius_px <= 0.0) throw ConfigError("tuning scene: spot radius must be positive");
    for (const auto& m : markers) {
        if (m.freq_hz <= 0.0) throw ConfigError("tuning scene: frequencies must be positive");
        if (!(m.duty > 0.0) || m.duty >= 1.0) throw ConfigError("tuning scene: duty must be in (0, 1)");
        // The 3x3 evaluation patch sits on the rounded center.
        const long cx = std::lround(m.cx);
        const long cy = std::lround(m.cy);
        if (cx < 1 || cy < 1 || cx + 1 >= static_cast<long>(width) || cy + 1 >= static_cast<long>(height))
            throw ConfigError("tuning scene: 3x3 patch leaves the image");
    }
}

std::pair<double, double> event_ratio(const EventStream& stream, std::uint16_t x, std::uint16_t y,
                                      double freq_hz, double duration_s) {
    if (freq_hz <= 0.0 || duration_s <= 0.0)
        throw ConfigError("event_ratio: frequency and duration must be positive");
    std::uint64_t pos = 0, neg = 0;
    for (const Event& e : stream.events) {
        if (e.x != x || e.y != y) continue;
        (e.p > 0 ? pos : neg) += 1;
    }
    const double expected = duration_s * freq_hz;
    return {static_cast<double>(pos) / expected - 1.0, static_cast<double>(neg) / expected - 1.0};
}

double pixel_cost(double alpha, double alpha0) {
    if (alpha < 0.0) return 4.0 * alpha * alpha;
    if (alpha <= alpha0) return 0.0;
    return (alpha - alpha0) * (alpha - alpha0);
}

double total_cost(const EventStream& stream, const TuningScene& scene, double alpha0) {
    scene.validate();

    // One counting pass over the stream instead of per-pixel scans.
    const std::size_t npx = static_cast<std::size_t>(scene.width) * scene.height;
    std::vector<std::uint32_t> pos(npx, 0), neg(npx, 0);
    for (const Event& e : stream.events) {
        if (e.x >= scene.width || e.y >= scene.height) continue;
        const std::size_t i = static_cast<std::size_t>(e.y) * scene.width + e.x;
        (e.p > 0 ? pos[i] : neg[i]) += 1;
    }

    double j = 0.0;
    for (const auto& m : scene.markers) {
        const long cx = std::lround(m.cx);
        const long cy = std::lround(m.cy);
        const double expected = scene.duration_s * m.freq_hz;
        for (long dy = -1; dy <= 1; ++dy) {
            for (long dx = -1; dx <= 1; ++dx) {
                const std::size_t i =
                    static_cast<std::size_t>(cy + dy) * scene.width + static_cast<std::size_t>(cx + dx);
                j += pixel_cost(static_cast<double>(pos[i]) / expected - 1.0, alpha0);
                j += pixel_cost(static_cast<double>(neg[i]) / expected - 1.0, alpha0);
            }
        }
    }
    return j;
}

PsoResult pso_optimize(const std::function<double(std::span<const double>)>& objective,
                       std::span<const std::pair<double, double>> bounds, const PsoConfig& cfg) {
    if (cfg.max_iters <= 0) throw ConfigError("pso: max_iters must be positive");
    if (cfg.particles < 2) throw ConfigError("pso: need at least 2 particles");
    const int dim = static_cast<int>(bounds.size());
    if (dim == 0) throw ConfigError("pso: empty bounds");
    for (const auto& [lo, hi] : bounds)
        if (!(lo < hi)) throw ConfigError("pso: degenerate bounds");

    Rng rng(cfg.seed);
    const int n = cfg.particles;
    std::vector<double> x(static_cast<std::size_t>(n) * dim);
    std::vector<double> vel(static_cast<std::size_t>(n) * dim);
    std::vector<double> pbest_x(x.size());
    std::vector<double> pbest_c(static_cast<std::size_t>(n));
    std::vector<double> vmax(static_cast<std::size_t>(dim));

    for (int d = 0; d < dim; ++d) vmax[d] = cfg.velocity_clamp * (bounds[d].second - bounds[d].first);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < dim; ++d) {
            x[i * dim + d] = rng.uniform(bounds[d].first, bounds[d].second);
            vel[i * dim + d] = rng.uniform(-vmax[d], vmax[d]);
        }
    }

    PsoResult result;
    result.seed = cfg.seed;
    result.best_cost = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        for (int i = 0; i < n; ++i) {
            if (iter > 0) {
                for (int d = 0; d < dim; ++d) {
                    const double r1 = rng.uniform();
                    const double r2 = rng.uniform();
                    double& v = vel[i * dim + d];
                    double& px = x[i * dim + d];
                    v = cfg.inertia * v + cfg.cognitive * r1 * (pbest_x[i * dim + d] - px) +
                        cfg.social * r2 * (result.best_position[d] - px);
                    v = std::clamp(v, -vmax[d], vmax[d]);
                    px = std::clamp(px + v, bounds[d].first, bounds[d].second);
                }
            }
            const double c = objective(std::span<const double>(x.data() + i * dim, dim));
            if (iter == 0 || c < pbest_c[i]) {
                pbest_c[i] = c;
                std::copy_n(x.data() + i * dim, dim, pbest_x.data() + i * dim);
            }
            if (c < result.best_cost) {
                result.best_cost = c;
                result.best_position.assign(x.data() + i * dim, x.data() + (i + 1) * dim);
            }
        }
        result.trace.push_back(result.best_cost);
        result.iterations = iter + 1;
        if (cfg.stop_when_leq && result.best_cost <= *cfg.stop_when_leq) break;
    }
    return result;
}

}  // namespace evpipe::tune
