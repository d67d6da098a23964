#include "evpipe/velocimetry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "evpipe/errors.hpp"

namespace evpipe::velo {
namespace {

constexpr double kEnergyEps = 1e-12;

// Mirror-at-edge reflection: -1 -> 0, -2 -> 1, n -> n-1.
int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(size);
    const int r = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        k[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

}  // namespace

void FlowGridConfig::validate(std::uint32_t frame_width, std::uint32_t frame_height) const {
    auto fail = [](const std::string& msg) { throw ConfigError("flow config: " + msg); };
    if (patches <= 0) fail("P must be positive");
    if (window <= 0) fail("window must be positive");
    if (step <= 0) fail("step must be positive");
    if (u_max < 1 || v_max < 1) fail("search radius must be at least 1");
    if (stack < 1) fail("stacking length must be at least 1");
    if (sigma_blur <= 0.0) fail("sigma_blur must be positive");
    if (blur_kernel < 1 || blur_kernel % 2 == 0) fail("blur kernel must be odd and positive");
    if (dt_us == 0) fail("dt must be positive");
    if (px_per_mm <= 0.0) fail("px_per_mm must be positive");
    if (origin_x < u_max || origin_y < v_max) fail("grid origin closer to the border than the search radius");
    const long need_x = origin_x + static_cast<long>(patches - 1) * step + window + u_max;
    const long need_y = origin_y + static_cast<long>(patches - 1) * step + window + v_max;
    if (need_x > static_cast<long>(frame_width) || need_y > static_cast<long>(frame_height))
        fail("patch grid plus search range exceeds frame size " + std::to_string(frame_width) + "x" +
             std::to_string(frame_height));
}

BlurredFrame stack_and_blur(std::span<const EventFrame> frames, const FlowGridConfig& cfg) {
    if (frames.size() < static_cast<std::size_t>(cfg.stack))
        throw InsufficientDataError("stack_and_blur: need " + std::to_string(cfg.stack) + " frames, got " +
                                    std::to_string(frames.size()));
    const auto& last = frames.back();
    const int w = static_cast<int>(last.width);
    const int h = static_cast<int>(last.height);

    std::vector<double> acc(static_cast<std::size_t>(w) * h, 0.0);
    for (std::size_t f = frames.size() - cfg.stack; f < frames.size(); ++f) {
        const auto& fr = frames[f];
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += fr.sums[i];
    }

    // Separable convolution; reflection keeps total mass when content hugs
    // the border.
    const std::vector<double> kernel = gaussian_kernel(cfg.blur_kernel, cfg.sigma_blur);
    const int r = cfg.blur_kernel / 2;
    std::vector<double> tmp(acc.size());
    for (int y = 0; y < h; ++y) {
        const double* row = acc.data() + static_cast<std::size_t>(y) * w;
        double* out = tmp.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += kernel[i + r] * row[reflect(x + i, w)];
            out[x] = s;
        }
    }
    BlurredFrame result;
    result.k = last.k;
    result.width = last.width;
    result.height = last.height;
    result.px.resize(acc.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i)
                s += kernel[i + r] * tmp[static_cast<std::size_t>(reflect(y + i, h)) * w + x];
            result.px[static_cast<std::size_t>(y) * w + x] = s;
        }
    }
    return result;
}

namespace {

double window_energy_direct(const BlurredFrame& f, int x0, int y0, int w) {
    const int stride = static_cast<int>(f.width);
    double r = 0.0;
    for (int y = 0; y < w; ++y) {
        const double* p = f.px.data() + static_cast<std::size_t>(y0 + y) * stride + x0;
        double row = 0.0;
        for (int x = 0; x < w; ++x) row += p[x] * p[x];
        r += row;
    }
    return r;
}

// Below this the prefix-sum cancellation noise could matter, so the energy is
// recomputed directly before the infinity decision.
constexpr double kEnergyRecheck = 1e-4;

}  // namespace

EnergyTable::EnergyTable(const BlurredFrame& frame) {
    stride_ = frame.width + 1;
    sat_.assign(stride_ * (frame.height + 1), 0.0);
    for (std::uint32_t y = 0; y < frame.height; ++y) {
        const double* src = frame.px.data() + static_cast<std::size_t>(y) * frame.width;
        const double* above = sat_.data() + static_cast<std::size_t>(y) * stride_;
        double* row = sat_.data() + static_cast<std::size_t>(y + 1) * stride_;
        double run = 0.0;
        for (std::uint32_t x = 0; x < frame.width; ++x) {
            run += src[x] * src[x];
            row[x + 1] = run + above[x + 1];
        }
    }
}

double EnergyTable::window_energy(int x0, int y0, int w) const {
    const double* top = sat_.data() + static_cast<std::size_t>(y0) * stride_ + x0;
    const double* bot = sat_.data() + static_cast<std::size_t>(y0 + w) * stride_ + x0;
    return bot[w] - bot[0] - top[w] + top[0];
}

std::optional<CostSurface> cost_surface(const BlurredFrame& curr, const BlurredFrame& prev,
                                        const EnergyTable& prev_energy, int x0, int y0,
                                        const FlowGridConfig& cfg) {
    const int w = cfg.window;
    const int stride = static_cast<int>(curr.width);

    const double r_curr = window_energy_direct(curr, x0, y0, w);
    if (r_curr < kEnergyEps) return std::nullopt;

    CostSurface surface;
    surface.u_max = cfg.u_max;
    surface.v_max = cfg.v_max;
    surface.j.resize(static_cast<std::size_t>(2 * cfg.u_max + 1) * (2 * cfg.v_max + 1));

    // J(u,v) compares curr(x,y) with prev(x-u, y-v): flow is the displacement
    // of content from the previous to the current frame.
    for (int v = -cfg.v_max; v <= cfg.v_max; ++v) {
        for (int u = -cfg.u_max; u <= cfg.u_max; ++u) {
            double d = 0.0;
            for (int y = 0; y < w; ++y) {
                const double* c = curr.px.data() + static_cast<std::size_t>(y0 + y) * stride + x0;
                const double* p = prev.px.data() + static_cast<std::size_t>(y0 + y - v) * stride + (x0 - u);
                double d_row = 0.0;
                for (int x = 0; x < w; ++x) {
                    const double diff = c[x] - p[x];
                    d_row += diff * diff;
                }
                d += d_row;
            }
            double r_prev = prev_energy.window_energy(x0 - u, y0 - v, w);
            if (r_prev < kEnergyRecheck) r_prev = window_energy_direct(prev, x0 - u, y0 - v, w);
            surface.at(u, v) = r_prev < kEnergyEps
                                   ? std::numeric_limits<double>::infinity()
                                   : d / std::sqrt(r_curr * r_prev);
        }
    }
    return surface;
}

std::optional<CostSurface> cost_surface(const BlurredFrame& curr, const BlurredFrame& prev,
                                        int x0, int y0, const FlowGridConfig& cfg) {
    return cost_surface(curr, prev, EnergyTable(prev), x0, y0, cfg);
}

GridMin match_patch(const CostSurface& surface) {
    GridMin best{0, 0};
    double best_j = std::numeric_limits<double>::infinity();
    for (int v = -surface.v_max; v <= surface.v_max; ++v) {
        for (int u = -surface.u_max; u <= surface.u_max; ++u) {
            const double j = surface.at(u, v);
            if (j < best_j) {
                best_j = j;
                best = {u, v};
            } else if (j == best_j) {
                const int cand = std::abs(u) + std::abs(v);
                const int have = std::abs(best.u) + std::abs(best.v);
                if (cand < have || (cand == have && (u < best.u || (u == best.u && v < best.v))))
                    best = {u, v};
            }
        }
    }
    return best;
}

std::optional<SubpixelFit> quadratic_refine(const CostSurface& surface, GridMin m) {
    if (std::abs(m.u) + 1 > surface.u_max || std::abs(m.v) + 1 > surface.v_max)
        return std::nullopt;  // boundary argmin, no 3x3 neighborhood

    Eigen::Matrix<double, 9, 6> design;
    Eigen::Matrix<double, 9, 1> rhs;
    int row = 0;
    for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du, ++row) {
            const double j = surface.at(m.u + du, m.v + dv);
            if (!std::isfinite(j)) return std::nullopt;
            design(row, 0) = 1.0;
            design(row, 1) = du;
            design(row, 2) = dv;
            design(row, 3) = du * dv;
            design(row, 4) = du * du;
            design(row, 5) = dv * dv;
            rhs(row) = j;
        }
    }
    const Eigen::Matrix<double, 6, 1> a = design.colPivHouseholderQr().solve(rhs);

    // Stationary point of the fitted quadratic: A * offset = b.
    const double det_a = 4.0 * a(4) * a(5) - a(3) * a(3);
    if (det_a <= 0.0) return std::nullopt;
    const double du = (-a(1) * 2.0 * a(5) - a(3) * -a(2)) / det_a;
    const double dv = (2.0 * a(4) * -a(2) - -a(1) * a(3)) / det_a;
    if (std::abs(du) > 1.0 || std::abs(dv) > 1.0) return std::nullopt;

    SubpixelFit fit;
    fit.du = du;
    fit.dv = dv;
    fit.conf = std::sqrt(det_a);
    return fit;
}

SparseFlowField estimate_flow(const BlurredFrame& curr, const BlurredFrame& prev,
                              const FlowGridConfig& cfg) {
    cfg.validate(curr.width, curr.height);
    if (prev.width != curr.width || prev.height != curr.height)
        throw ConfigError("estimate_flow: frame dimensions differ");

    SparseFlowField field;
    field.k = curr.k;
    field.patches = cfg.patches;
    field.grid.assign(static_cast<std::size_t>(cfg.patches) * cfg.patches, PatchFlow{});

    const EnergyTable prev_energy(prev);
    for (int j = 0; j < cfg.patches; ++j) {
        for (int i = 0; i < cfg.patches; ++i) {
            const auto surface =
                cost_surface(curr, prev, prev_energy, cfg.patch_x0(i), cfg.patch_y0(j), cfg);
            if (!surface) continue;
            const GridMin m = match_patch(*surface);
            if (!std::isfinite(surface->at(m.u, m.v))) continue;
            const auto fit = quadratic_refine(*surface, m);
            if (!fit) continue;
            field.at(i, j) = PatchFlow{m.u + fit->du, m.v + fit->dv, fit->conf};
        }
    }
    return field;
}

double flow_px_to_mps(double px_per_frame, const FlowGridConfig& cfg) {
    const double mm_per_frame = px_per_frame / cfg.px_per_mm;
    return mm_per_frame / (cfg.dt_us * 1e-6) * 1e-3;
}

std::vector<VelocityVector> flow_to_velocity(const SparseFlowField& field, const FlowGridConfig& cfg) {
    std::vector<VelocityVector> out(field.grid.size());
    for (std::size_t i = 0; i < field.grid.size(); ++i) {
        out[i].vy_mps = flow_px_to_mps(field.grid[i].u, cfg);
        out[i].vz_mps = flow_px_to_mps(field.grid[i].v, cfg);
    }
    return out;
}

double tracking_timescale(double sheet_thickness_m, double out_of_plane_speed_mps) {
    if (sheet_thickness_m <= 0.0) throw ConfigError("sheet thickness must be positive");
    if (out_of_plane_speed_mps == 0.0) return std::numeric_limits<double>::infinity();
    return 0.5 * sheet_thickness_m / out_of_plane_speed_mps;
}

}  // namespace evpipe::velo
