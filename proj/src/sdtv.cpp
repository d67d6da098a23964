#include "evpipe/sdtv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "evpipe/errors.hpp"

namespace evpipe::mocap {

Sdtv::Sdtv(std::uint32_t width, std::uint32_t height, int depth, std::uint64_t init_time)
    : width_(width), height_(height), depth_(depth) {
    if (width == 0 || height == 0) throw ConfigError("sdtv: zero dimensions");
    if (depth < 2 || depth > 255) throw ConfigError("sdtv: depth must be in [2, 255]");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    deltas_.assign(n * static_cast<std::size_t>(depth), 0);
    cursor_.assign(n, 0);
    count_.assign(n, 0);
    last_t_.assign(n, init_time);
}

void Sdtv::update(std::span<const Event> events) {
    for (const Event& e : events) {
        const std::size_t pix = idx(e.x, e.y);
        const std::uint64_t delta = e.t - last_t_[pix];
        last_t_[pix] = e.t;
        if (delta > 32767) {
            // Saturating gap: reset the stack, the new timestamp becomes the
            // reference for the next delta.
            cursor_[pix] = 0;
            count_[pix] = 0;
            continue;
        }
        if (delta == 0 && count_[pix] > 0) continue;  // sub-microsecond repeat, unrepresentable
        const std::int16_t stored = e.p >= 0 ? static_cast<std::int16_t>(delta)
                                             : static_cast<std::int16_t>(-static_cast<std::int64_t>(delta));
        deltas_[pix * depth_ + cursor_[pix]] = stored;
        cursor_[pix] = static_cast<std::uint8_t>((cursor_[pix] + 1) % depth_);
        if (count_[pix] < depth_) ++count_[pix];
    }
}

std::vector<std::int16_t> Sdtv::stack_in_order(std::uint32_t x, std::uint32_t y) const {
    const std::size_t pix = idx(x, y);
    const int n = count_[pix];
    std::vector<std::int16_t> out(static_cast<std::size_t>(n));
    // Oldest entry sits at the cursor once the buffer has wrapped, at 0 before.
    const int start = n < depth_ ? 0 : cursor_[pix];
    for (int i = 0; i < n; ++i) out[i] = deltas_[pix * depth_ + (start + i) % depth_];
    return out;
}

std::optional<std::uint64_t> estimate_period_us(std::span<const std::int16_t> stack) {
    // Discard everything through the first positive->negative transition; the
    // scan then starts inside a known off-phase.
    std::size_t i = 1;
    while (i < stack.size() && !(stack[i - 1] > 0 && stack[i] < 0)) ++i;
    if (i >= stack.size()) return std::nullopt;

    std::vector<std::uint64_t> periods;
    std::uint64_t acc = 0;
    bool open = false;
    bool prev_negative = true;  // stack[i] is the discarded transition's negative entry
    for (std::size_t j = i + 1; j < stack.size(); ++j) {
        const std::int16_t d = stack[j];
        acc += static_cast<std::uint64_t>(std::abs(static_cast<int>(d)));
        if (d > 0 && prev_negative) {
            // Negative->positive transition: the on-edge closes one period,
            // its own delta included.
            if (open) periods.push_back(acc);
            open = true;
            acc = 0;
        }
        prev_negative = d < 0;
    }
    if (periods.size() < 2) return std::nullopt;

    std::sort(periods.begin(), periods.end());
    const std::size_t n = periods.size();
    return n % 2 == 1 ? periods[n / 2] : (periods[n / 2 - 1] + periods[n / 2]) / 2;
}

void MarkerConfig::validate() const {
    if (markers.size() < 4) throw ConfigError("marker map: need at least 4 markers");
    double fmin = markers.front().freq_hz;
    double fmax = fmin;
    for (const auto& m : markers) {
        if (m.freq_hz <= 0.0) throw ConfigError("marker map: frequencies must be positive");
        if (!(m.duty > 0.0) || m.duty >= 1.0) throw ConfigError("marker map: duty must be in (0, 1)");
        fmin = std::min(fmin, m.freq_hz);
        fmax = std::max(fmax, m.freq_hz);
    }
    for (std::size_t a = 0; a < markers.size(); ++a)
        for (std::size_t b = a + 1; b < markers.size(); ++b) {
            if (markers[a].freq_hz == markers[b].freq_hz)
                throw ConfigError("marker map: duplicate frequency " + std::to_string(markers[a].freq_hz));
            if (markers[a].id == markers[b].id)
                throw ConfigError("marker map: duplicate id " + std::to_string(markers[a].id));
        }
    if (fmax / fmin >= 2.0)
        throw ConfigError("marker map: max/min frequency ratio must stay below 2");
}

std::vector<std::int32_t> detect_markers(const Sdtv& sdtv, const MarkerConfig& cfg,
                                         const DetectOptions& opts) {
    cfg.validate();
    if (opts.rel_tol <= 0.0 || opts.rel_tol >= 0.5)
        throw ConfigError("detect_markers: rel_tol must lie in (0, 0.5)");
    // Every configured frequency must sit outside every other frequency's
    // tolerance band, otherwise identification is ambiguous near nominals.
    // Inside the bands, pixels resolve to the nearest frequency by relative
    // error, so mid-band overlap is harmless.
    for (std::size_t a = 0; a < cfg.markers.size(); ++a)
        for (std::size_t b = 0; b < cfg.markers.size(); ++b) {
            if (a == b) continue;
            const double fa = cfg.markers[a].freq_hz;
            const double fb = cfg.markers[b].freq_hz;
            if (std::abs(fa - fb) / fb <= opts.rel_tol)
                throw ConfigError("detect_markers: tolerance bands overlap for configured frequencies");
        }

    std::vector<std::int32_t> labels(static_cast<std::size_t>(sdtv.width()) * sdtv.height(), -1);
    for (std::uint32_t y = 0; y < sdtv.height(); ++y) {
        for (std::uint32_t x = 0; x < sdtv.width(); ++x) {
            if (!sdtv.full(x, y)) continue;
            if (opts.max_staleness_us > 0) {
                const std::uint64_t last = sdtv.last_event_time(x, y);
                if (last + opts.max_staleness_us < opts.now_us) continue;
            }
            const auto stack = sdtv.stack_in_order(x, y);
            const auto period = estimate_period_us(stack);
            if (!period || *period == 0) continue;
            const double freq = 1e6 / static_cast<double>(*period);

            int best = -1;
            double best_err = opts.rel_tol;
            for (std::size_t k = 0; k < cfg.markers.size(); ++k) {
                const double err = std::abs(freq - cfg.markers[k].freq_hz) / cfg.markers[k].freq_hz;
                if (err <= best_err) {
                    best_err = err;
                    best = static_cast<int>(k);
                }
            }
            labels[static_cast<std::size_t>(y) * sdtv.width() + x] = best;
        }
    }
    return labels;
}

std::vector<Detection> cluster_detections(const std::vector<std::int32_t>& labels,
                                          std::uint32_t width, std::uint32_t height,
                                          std::uint64_t time_us) {
    // Union-find over labeled pixels; 8-connectivity.
    std::vector<std::int32_t> parent(labels.size(), -1);
    auto find = [&](std::int32_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };

    for (std::uint32_t y = 0; y < height; ++y) {
        for (std::uint32_t x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            if (labels[i] < 0) continue;
            parent[i] = static_cast<std::int32_t>(i);
            // Merge with already-visited neighbours carrying the same label.
            const int dx_lo = x > 0 ? -1 : 0;
            const int dx_hi = x + 1 < width ? 1 : 0;
            if (y > 0) {
                for (int dx = dx_lo; dx <= dx_hi; ++dx) {
                    const std::size_t n = i - width + dx;
                    if (labels[n] == labels[i]) parent[find(static_cast<std::int32_t>(i))] = find(static_cast<std::int32_t>(n));
                }
            }
            if (x > 0 && labels[i - 1] == labels[i])
                parent[find(static_cast<std::int32_t>(i))] = find(static_cast<std::int32_t>(i - 1));
        }
    }

    struct Component {
        std::int64_t sum_x = 0;
        std::int64_t sum_y = 0;
        int size = 0;
        std::int32_t label = -1;
    };
    std::vector<Component> comps(labels.size());
    for (std::uint32_t y = 0; y < height; ++y) {
        for (std::uint32_t x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            if (labels[i] < 0) continue;
            Component& c = comps[static_cast<std::size_t>(find(static_cast<std::int32_t>(i)))];
            c.sum_x += x;
            c.sum_y += y;
            c.size += 1;
            c.label = labels[i];
        }
    }

    std::int32_t max_label = -1;
    for (const auto l : labels) max_label = std::max(max_label, l);
    std::vector<const Component*> best(static_cast<std::size_t>(max_label + 1), nullptr);
    for (const auto& c : comps) {
        if (c.size == 0) continue;
        const Component*& slot = best[static_cast<std::size_t>(c.label)];
        if (!slot || c.size > slot->size) slot = &c;
    }

    std::vector<Detection> out;
    for (std::int32_t k = 0; k <= max_label; ++k) {
        const Component* c = best[static_cast<std::size_t>(k)];
        if (!c) continue;
        Detection d;
        d.marker_index = k;
        d.u = static_cast<double>(c->sum_x) / c->size;
        d.v = static_cast<double>(c->sum_y) / c->size;
        d.support = c->size;
        d.t_us = time_us;
        out.push_back(d);
    }
    return out;
}

}  // namespace evpipe::mocap
