// events.hpp - event stream types, file I/O, validation and frame accumulation.
//
// Binary container layout (little-endian):
//   magic "EVS1" | width u32 | height u32 | event_count u64      (20-byte header)
//   per event: x u16 | y u16 | p i8 | 3 pad bytes | t u64        (16-byte record)
//
// CSV layout: header line "x,y,t,p", one event per line, t in microseconds,
// p in {-1, +1}.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace evpipe {

struct Event {
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t p = 1;      // polarity, -1 or +1
    std::uint64_t t = 0;    // microseconds, non-decreasing within a stream
};

inline bool operator==(const Event& a, const Event& b) {
    return a.x == b.x && a.y == b.y && a.p == b.p && a.t == b.t;
}

struct EventStream {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<Event> events;

    std::uint64_t duration_us() const { return events.empty() ? 0 : events.back().t; }
};

enum class EventFormat { Binary, Csv };

EventStream read_events(const std::filesystem::path& path, EventFormat format);
void write_events(const EventStream& stream, const std::filesystem::path& path, EventFormat format);

// Sanity report over a stream; ok() means the stream satisfies the contract
// assumed by every downstream consumer.
struct ValidationReport {
    std::uint64_t count = 0;
    std::uint64_t out_of_bounds = 0;      // x >= width or y >= height
    std::uint64_t bad_polarity = 0;       // p not in {-1, +1}
    std::uint64_t time_regressions = 0;   // t decreases between neighbours
    std::uint64_t first_t = 0;
    std::uint64_t last_t = 0;

    bool ok() const { return out_of_bounds == 0 && bad_polarity == 0 && time_regressions == 0; }
};

ValidationReport validate_stream(const EventStream& stream);

// Polarity-summed frame over one time window. Pixel (x, y) of the source
// falls into cell (x / bin, y / bin); cell dimensions round up so border
// pixels are kept.
struct EventFrame {
    std::uint32_t k = 0;        // 1-based window index, covers [(k-1)*dt, k*dt)
    std::uint32_t dt_us = 0;
    std::uint32_t bin = 1;
    std::uint32_t width = 0;    // binned
    std::uint32_t height = 0;   // binned
    std::vector<std::int32_t> sums;

    std::int32_t at(std::uint32_t x, std::uint32_t y) const { return sums[y * width + x]; }
    std::int32_t& at(std::uint32_t x, std::uint32_t y) { return sums[y * width + x]; }
};

// Partitions the stream into K = floor(t_last / dt) + 1 consecutive windows
// (zero windows for an empty stream). Quiet windows still produce all-zero
// frames so frame indices stay aligned with wall time.
std::vector<EventFrame> bin_and_frame(const EventStream& stream, std::uint32_t dt_us, std::uint32_t bin);

}  // namespace evpipe
