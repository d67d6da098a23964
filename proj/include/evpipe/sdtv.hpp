// sdtv.hpp - signed delta-time volume and blinking-marker identification.
//
// The SDTV keeps, per pixel, a cyclic stack of the D most recent inter-event
// time deltas in microseconds, with the sign bit repurposed for polarity
// (positive delta = positive event). Blink periods are recovered per pixel by
// summing |delta| runs between negative->positive transitions; markers are
// identified by matching 1/period against the configured LED frequencies.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "evpipe/events.hpp"

namespace evpipe::mocap {

class Sdtv {
public:
    Sdtv(std::uint32_t width, std::uint32_t height, int depth = 32, std::uint64_t init_time = 0);

    std::uint32_t width() const { return width_; }
    std::uint32_t height() const { return height_; }
    int depth() const { return depth_; }

    // Events must be time-ordered. Deltas whose magnitude exceeds the signed
    // 16-bit range reset the pixel's stack (such a pixel is not watching a
    // fast blinker). Same-timestamp repeats at one pixel are unrepresentable
    // in a delta encoding and are dropped.
    void update(std::span<const Event> events);

    // Entries oldest -> newest; size = min(events seen since reset, depth).
    std::vector<std::int16_t> stack_in_order(std::uint32_t x, std::uint32_t y) const;

    bool full(std::uint32_t x, std::uint32_t y) const { return count_[idx(x, y)] == depth_; }
    int entry_count(std::uint32_t x, std::uint32_t y) const { return count_[idx(x, y)]; }
    std::uint64_t last_event_time(std::uint32_t x, std::uint32_t y) const { return last_t_[idx(x, y)]; }

private:
    std::size_t idx(std::uint32_t x, std::uint32_t y) const {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    std::uint32_t width_;
    std::uint32_t height_;
    int depth_;
    std::vector<std::int16_t> deltas_;   // W*H*D, depth-contiguous per pixel
    std::vector<std::uint8_t> cursor_;   // next write slot
    std::vector<std::uint8_t> count_;    // entries currently held
    std::vector<std::uint64_t> last_t_;
};

// Median blink period from one pixel's ordered stack, or nullopt when fewer
// than two complete periods survive the leading discard.
std::optional<std::uint64_t> estimate_period_us(std::span<const std::int16_t> stack);

struct MarkerSpec {
    int id = 0;
    double xyz_m[3] = {0, 0, 0};  // body frame
    double freq_hz = 0.0;
    double duty = 0.01;
};

struct MarkerConfig {
    std::vector<MarkerSpec> markers;

    // >= 4 markers, distinct frequencies, max/min ratio < 2.
    void validate() const;
};

// Per-pixel marker labels: -1 unlabeled, otherwise the index into
// cfg.markers. Only full-stack pixels are considered; a pixel gets the
// nearest configured frequency by relative error when within rel_tol.
// Pixels whose last event is older than max_staleness_us (relative to `now`)
// are skipped so trails left by moving markers decay; pass 0 to disable.
struct DetectOptions {
    double rel_tol = 0.05;
    std::uint64_t now_us = 0;
    std::uint64_t max_staleness_us = 0;
};

std::vector<std::int32_t> detect_markers(const Sdtv& sdtv, const MarkerConfig& cfg,
                                         const DetectOptions& opts);

struct Detection {
    int marker_index = -1;  // index into MarkerConfig::markers
    double u = 0.0;         // centroid, px
    double v = 0.0;
    int support = 0;        // component pixel count
    std::uint64_t t_us = 0;
};

// Largest 8-connected component per label; centroid is the mean pixel
// coordinate of that component.
std::vector<Detection> cluster_detections(const std::vector<std::int32_t>& labels,
                                          std::uint32_t width, std::uint32_t height,
                                          std::uint64_t time_us);

}  // namespace evpipe::mocap
