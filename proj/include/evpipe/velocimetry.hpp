// velocimetry.hpp - sparse optical flow on event frames.
//
// Pipeline per frame k: stack the last n polarity frames, blur with a
// normalized Gaussian, then for each patch of a regular grid match against
// the previous stacked frame by normalized SSD over a +/-u_max displacement
// grid and refine the integer argmin with a least-squares quadratic fit.
// Confidence is sqrt(det A) of the fitted curvature; estimates with
// non-positive-definite fits, offsets beyond 1 px, or boundary argmins are
// discarded.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "evpipe/events.hpp"

namespace evpipe::velo {

struct FlowGridConfig {
    int patches = 11;        // P, patches per side
    int window = 32;         // w, patch side in px
    int step = 24;           // delta, grid pitch in px
    int u_max = 8;           // max displacement searched, px
    int v_max = 8;
    int stack = 3;           // n, frames accumulated per stacked image
    double sigma_blur = 1.75;
    int blur_kernel = 7;     // odd side length
    int origin_x = 8;        // i0
    int origin_y = 8;        // j0
    std::uint32_t dt_us = 2000;
    double px_per_mm = 0.8;  // at the binned working resolution

    // Throws ConfigError unless the patch grid plus search range fits the
    // given frame dimensions and all parameters are admissible.
    void validate(std::uint32_t frame_width, std::uint32_t frame_height) const;

    int patch_x0(int i) const { return origin_x + i * step; }
    int patch_y0(int j) const { return origin_y + j * step; }
};

struct BlurredFrame {
    std::uint32_t k = 0;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<double> px;

    double at(std::uint32_t x, std::uint32_t y) const { return px[y * width + x]; }
};

BlurredFrame stack_and_blur(std::span<const EventFrame> frames, const FlowGridConfig& cfg);

// Normalized SSD values over the displacement grid. Cells whose displaced
// previous patch has (near) zero energy are +inf; a surface is only produced
// when the current patch itself has energy.
struct CostSurface {
    int u_max = 0;
    int v_max = 0;
    std::vector<double> j;

    double at(int u, int v) const { return j[(v + v_max) * (2 * u_max + 1) + (u + u_max)]; }
    double& at(int u, int v) { return j[(v + v_max) * (2 * u_max + 1) + (u + u_max)]; }
};

// Prefix sums of squared pixel values, so any window's energy is an O(1)
// read when the same frame is matched against many displacements.
class EnergyTable {
public:
    explicit EnergyTable(const BlurredFrame& frame);
    double window_energy(int x0, int y0, int w) const;

private:
    std::size_t stride_ = 0;
    std::vector<double> sat_;
};

std::optional<CostSurface> cost_surface(const BlurredFrame& curr, const BlurredFrame& prev,
                                        int x0, int y0, const FlowGridConfig& cfg);

// Same result, but the displaced-window energies come from a precomputed
// table for `prev` (near-zero reads are re-derived exactly, so the inf cells
// match the direct path bit for bit).
std::optional<CostSurface> cost_surface(const BlurredFrame& curr, const BlurredFrame& prev,
                                        const EnergyTable& prev_energy, int x0, int y0,
                                        const FlowGridConfig& cfg);

struct GridMin {
    int u = 0;
    int v = 0;
};

// Grid argmin with deterministic tie-breaking: smallest |u|+|v| first, then
// lexicographic (u, v).
GridMin match_patch(const CostSurface& surface);

struct SubpixelFit {
    double du = 0.0;
    double dv = 0.0;
    double conf = 0.0;  // sqrt(det A) of the fitted 2x2 curvature system
};

std::optional<SubpixelFit> quadratic_refine(const CostSurface& surface, GridMin m);

struct PatchFlow {
    double u = 0.0;   // px/frame
    double v = 0.0;
    double conf = 0.0;

    bool valid() const { return conf > 0.0; }
};

struct SparseFlowField {
    std::uint32_t k = 0;
    int patches = 0;  // per side
    std::vector<PatchFlow> grid;

    const PatchFlow& at(int i, int j) const { return grid[j * patches + i]; }
    PatchFlow& at(int i, int j) { return grid[j * patches + i]; }
};

SparseFlowField estimate_flow(const BlurredFrame& curr, const BlurredFrame& prev,
                              const FlowGridConfig& cfg);

// px/frame -> m/s using the configured lightsheet resolution and frame period.
double flow_px_to_mps(double px_per_frame, const FlowGridConfig& cfg);

struct VelocityVector {
    double vy_mps = 0.0;  // along image x
    double vz_mps = 0.0;  // along image y
};

std::vector<VelocityVector> flow_to_velocity(const SparseFlowField& field, const FlowGridConfig& cfg);

// Half the sheet-crossing time: how long an out-of-plane tracer stays
// trackable inside the lightsheet.
double tracking_timescale(double sheet_thickness_m, double out_of_plane_speed_mps);

}  // namespace evpipe::velo
