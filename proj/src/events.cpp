#include "evpipe/events.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string_view>

#include "evpipe/errors.hpp"

namespace evpipe {
namespace {

constexpr char kMagic[4] = {'E', 'V', 'S', '1'};
constexpr std::size_t kHeaderSize = 20;
constexpr std::size_t kRecordSize = 16;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw ParseError("cannot open '" + path.string() + "'");
    return f;
}

std::uint16_t load_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t load_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t load_u64(const unsigned char* p) {
    return static_cast<std::uint64_t>(load_u32(p)) | (static_cast<std::uint64_t>(load_u32(p + 4)) << 32);
}

void store_u16(unsigned char* p, std::uint16_t v) {
    p[0] = static_cast<unsigned char>(v);
    p[1] = static_cast<unsigned char>(v >> 8);
}

void store_u32(unsigned char* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

void store_u64(unsigned char* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

EventStream read_binary(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    unsigned char header[kHeaderSize];
    if (std::fread(header, 1, kHeaderSize, f.get()) != kHeaderSize)
        throw ParseError("truncated header", ParseError::Where::ByteOffset, 0);
    if (std::memcmp(header, kMagic, 4) != 0)
        throw ParseError("bad magic, expected EVS1", ParseError::Where::ByteOffset, 0);

    EventStream stream;
    stream.width = load_u32(header + 4);
    stream.height = load_u32(header + 8);
    const std::uint64_t count = load_u64(header + 12);
    stream.events.resize(count);

    std::vector<unsigned char> buf(kRecordSize * 4096);
    std::uint64_t loaded = 0;
    while (loaded < count) {
        const std::uint64_t want = std::min<std::uint64_t>(4096, count - loaded);
        const std::size_t got = std::fread(buf.data(), kRecordSize, want, f.get());
        if (got != want)
            throw ParseError("truncated event record", ParseError::Where::ByteOffset,
                             kHeaderSize + (loaded + got) * kRecordSize);
        for (std::size_t i = 0; i < got; ++i) {
            const unsigned char* r = buf.data() + i * kRecordSize;
            Event& e = stream.events[loaded + i];
            e.x = load_u16(r);
            e.y = load_u16(r + 2);
            e.p = static_cast<std::int8_t>(r[4]);
            e.t = load_u64(r + 8);
            if (loaded + i > 0 && e.t < stream.events[loaded + i - 1].t)
                throw ParseError("non-monotonic timestamp", ParseError::Where::ByteOffset,
                                 kHeaderSize + (loaded + i) * kRecordSize);
        }
        loaded += got;
    }
    return stream;
}

void write_binary(const EventStream& stream, const std::filesystem::path& path) {
    FilePtr f = open_file(path, "wb");
    unsigned char header[kHeaderSize];
    std::memcpy(header, kMagic, 4);
    store_u32(header + 4, stream.width);
    store_u32(header + 8, stream.height);
    store_u64(header + 12, stream.events.size());
    if (std::fwrite(header, 1, kHeaderSize, f.get()) != kHeaderSize)
        throw ParseError("short write on '" + path.string() + "'");

    std::vector<unsigned char> buf(kRecordSize * 4096);
    std::size_t pending = 0;
    for (const Event& e : stream.events) {
        unsigned char* r = buf.data() + pending * kRecordSize;
        store_u16(r, e.x);
        store_u16(r + 2, e.y);
        r[4] = static_cast<unsigned char>(e.p);
        r[5] = r[6] = r[7] = 0;
        store_u64(r + 8, e.t);
        if (++pending == 4096) {
            if (std::fwrite(buf.data(), kRecordSize, pending, f.get()) != pending)
                throw ParseError("short write on '" + path.string() + "'");
            pending = 0;
        }
    }
    if (pending && std::fwrite(buf.data(), kRecordSize, pending, f.get()) != pending)
        throw ParseError("short write on '" + path.string() + "'");
}

// CSV events carry no sensor geometry, so width/height are inferred as the
// tightest bound containing every event.
EventStream read_csv(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    std::string content;
    {
        std::array<char, 65536> chunk;
        std::size_t got;
        while ((got = std::fread(chunk.data(), 1, chunk.size(), f.get())) > 0)
            content.append(chunk.data(), got);
    }

    EventStream stream;
    std::uint64_t line_no = 0;
    std::size_t pos = 0;
    const std::size_t size = content.size();
    bool saw_header = false;
    while (pos < size) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = size;
        std::string_view line(content.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        pos = eol + 1;
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != "x,y,t,p")
                throw ParseError("expected header 'x,y,t,p'", ParseError::Where::Line, line_no);
            saw_header = true;
            continue;
        }

        std::int64_t fields[4];
        const char* cur = line.data();
        const char* end = line.data() + line.size();
        for (int i = 0; i < 4; ++i) {
            auto [next, ec] = std::from_chars(cur, end, fields[i]);
            if (ec != std::errc())
                throw ParseError("bad integer field", ParseError::Where::Line, line_no);
            cur = next;
            if (i < 3) {
                if (cur == end || *cur != ',')
                    throw ParseError("expected 4 comma-separated fields", ParseError::Where::Line, line_no);
                ++cur;
            }
        }
        if (cur != end)
            throw ParseError("trailing characters", ParseError::Where::Line, line_no);
        if (fields[0] < 0 || fields[0] > 0xffff || fields[1] < 0 || fields[1] > 0xffff)
            throw ParseError("coordinate out of range", ParseError::Where::Line, line_no);
        if (fields[2] < 0)
            throw ParseError("negative timestamp", ParseError::Where::Line, line_no);
        if (fields[3] != 1 && fields[3] != -1)
            throw ParseError("polarity must be -1 or 1", ParseError::Where::Line, line_no);

        Event e;
        e.x = static_cast<std::uint16_t>(fields[0]);
        e.y = static_cast<std::uint16_t>(fields[1]);
        e.t = static_cast<std::uint64_t>(fields[2]);
        e.p = static_cast<std::int8_t>(fields[3]);
        if (!stream.events.empty() && e.t < stream.events.back().t)
            throw ParseError("non-monotonic timestamp", ParseError::Where::Line, line_no);
        stream.events.push_back(e);
        if (e.x >= stream.width) stream.width = e.x + 1u;
        if (e.y >= stream.height) stream.height = e.y + 1u;
    }
    if (!saw_header) throw ParseError("missing header 'x,y,t,p'", ParseError::Where::Line, 1);
    return stream;
}

void write_csv(const EventStream& stream, const std::filesystem::path& path) {
    FilePtr f = open_file(path, "wb");
    std::string out = "x,y,t,p\n";
    out.reserve(stream.events.size() * 24 + 8);
    char buf[64];
    for (const Event& e : stream.events) {
        const int n = std::snprintf(buf, sizeof buf, "%u,%u,%llu,%d\n", unsigned(e.x), unsigned(e.y),
                                    static_cast<unsigned long long>(e.t), int(e.p));
        out.append(buf, static_cast<std::size_t>(n));
    }
    if (std::fwrite(out.data(), 1, out.size(), f.get()) != out.size())
        throw ParseError("short write on '" + path.string() + "'");
}

}  // namespace

EventStream read_events(const std::filesystem::path& path, EventFormat format) {
    return format == EventFormat::Binary ? read_binary(path) : read_csv(path);
}

void write_events(const EventStream& stream, const std::filesystem::path& path, EventFormat format) {
    if (format == EventFormat::Binary)
        write_binary(stream, path);
    else
        write_csv(stream, path);
}

ValidationReport validate_stream(const EventStream& stream) {
    ValidationReport report;
    report.count = stream.events.size();
    if (!stream.events.empty()) {
        report.first_t = stream.events.front().t;
        report.last_t = stream.events.back().t;
    }
    std::uint64_t prev_t = 0;
    bool first = true;
    for (const Event& e : stream.events) {
        if (e.x >= stream.width || e.y >= stream.height) ++report.out_of_bounds;
        if (e.p != 1 && e.p != -1) ++report.bad_polarity;
        if (!first && e.t < prev_t) ++report.time_regressions;
        prev_t = e.t;
        first = false;
    }
    return report;
}

std::vector<EventFrame> bin_and_frame(const EventStream& stream, std::uint32_t dt_us, std::uint32_t bin) {
    if (dt_us == 0) throw ConfigError("frame window dt must be positive");
    if (bin == 0) throw ConfigError("bin factor must be positive");
    if (stream.width == 0 || stream.height == 0)
        throw ConfigError("stream has zero sensor dimensions");

    std::vector<EventFrame> frames;
    if (stream.events.empty()) return frames;

    const std::uint32_t bw = (stream.width + bin - 1) / bin;
    const std::uint32_t bh = (stream.height + bin - 1) / bin;
    const std::uint64_t n_frames = stream.events.back().t / dt_us + 1;
    frames.resize(n_frames);
    for (std::uint64_t k = 0; k < n_frames; ++k) {
        EventFrame& fr = frames[k];
        fr.k = static_cast<std::uint32_t>(k + 1);
        fr.dt_us = dt_us;
        fr.bin = bin;
        fr.width = bw;
        fr.height = bh;
        fr.sums.assign(static_cast<std::size_t>(bw) * bh, 0);
    }
    for (const Event& e : stream.events) {
        EventFrame& fr = frames[e.t / dt_us];
        fr.sums[(e.y / bin) * bw + (e.x / bin)] += e.p;
    }
    return frames;
}

}  // namespace evpipe
