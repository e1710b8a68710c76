#include "npx/events.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "npx/rng.hpp"

namespace npx::events {

namespace {

constexpr char kBinaryMagic[4] = {'N', 'P', 'X', '1'};
constexpr uint32_t kMaxBinaryTimestamp = (1u << 24) - 1;  // u24 field

[[noreturn]] void fail_line(int line, const std::string& msg) {
    throw ParseError("line " + std::to_string(line) + ": " + msg);
}

[[noreturn]] void fail_offset(size_t offset, const std::string& msg) {
    throw ParseError("offset " + std::to_string(offset) + ": " + msg);
}

// Strict unsigned field: digits only, bounded. CSV timestamps may not be
// negative, so a leading '-' is reported as such.
uint64_t parse_field(const std::string& tok, int line, const char* what, uint64_t max) {
    if (tok.empty())
        fail_line(line, std::string("empty ") + what + " field");
    size_t pos = 0;
    bool negative = tok[0] == '-';
    if (negative)
        pos = 1;
    uint64_t v = 0;
    if (pos == tok.size())
        fail_line(line, std::string("malformed ") + what + " field '" + tok + "'");
    for (; pos < tok.size(); ++pos) {
        char c = tok[pos];
        if (c < '0' || c > '9')
            fail_line(line, std::string("malformed ") + what + " field '" + tok + "'");
        v = v * 10 + static_cast<uint64_t>(c - '0');
        if (v > max && !negative)
            fail_line(line, std::string(what) + " out of range: '" + tok + "'");
    }
    if (negative) {
        if (v == 0)
            return 0;
        fail_line(line, std::string("negative ") + what + ": '" + tok + "'");
    }
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

void validate_event(const DvsEvent& e, int width, int height, uint32_t duration,
                    int line, size_t offset, bool csv) {
    auto fail = [&](const std::string& msg) {
        if (csv)
            fail_line(line, msg);
        else
            fail_offset(offset, msg);
    };
    if (e.x >= width)
        fail("x coordinate " + std::to_string(e.x) + " out of bounds (width " + std::to_string(width) + ")");
    if (e.y >= height)
        fail("y coordinate " + std::to_string(e.y) + " out of bounds (height " + std::to_string(height) + ")");
    if (e.t_us > duration)
        fail("timestamp " + std::to_string(e.t_us) + " exceeds declared duration " + std::to_string(duration));
}

EventStream parse_csv(const std::string& source) {
    std::istringstream in(source);
    std::string line;
    int lineno = 0;
    EventStream stream;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        bool blank = true;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
        if (blank)
            continue;
        auto fields = split_csv(line);
        if (!have_header) {
            if (fields.size() != 3)
                fail_line(lineno, "header must be 'width,height,duration_us'");
            stream.width = static_cast<int>(parse_field(fields[0], lineno, "width", 0xffff));
            stream.height = static_cast<int>(parse_field(fields[1], lineno, "height", 0xffff));
            stream.duration_us = static_cast<uint32_t>(parse_field(fields[2], lineno, "duration", 0xffffffffu));
            if (stream.width <= 0 || stream.height <= 0)
                fail_line(lineno, "sensor dimensions must be positive");
            have_header = true;
            continue;
        }
        if (fields.size() != 4)
            fail_line(lineno, "event record must be 'x,y,t_us,polarity'");
        DvsEvent e;
        e.x = static_cast<uint16_t>(parse_field(fields[0], lineno, "x", 0xffff));
        e.y = static_cast<uint16_t>(parse_field(fields[1], lineno, "y", 0xffff));
        e.t_us = static_cast<uint32_t>(parse_field(fields[2], lineno, "timestamp", 0xffffffffu));
        uint64_t pol = parse_field(fields[3], lineno, "polarity", 1);
        e.polarity = pol ? Polarity::On : Polarity::Off;
        validate_event(e, stream.width, stream.height, stream.duration_us, lineno, 0, true);
        stream.events.push_back(e);
    }
    if (!have_header)
        throw ParseError("empty input: missing header line");
    return stream;
}

uint32_t read_u32le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

EventStream parse_binary(const std::string& source) {
    const auto* p = reinterpret_cast<const unsigned char*>(source.data());
    if (source.size() < 16)
        fail_offset(0, "truncated header (need 16 bytes)");
    if (std::memcmp(p, kBinaryMagic, 4) != 0)
        fail_offset(0, "bad magic (expected NPX1)");
    EventStream stream;
    stream.width = static_cast<int>(read_u32le(p + 4));
    stream.height = static_cast<int>(read_u32le(p + 8));
    stream.duration_us = read_u32le(p + 12);
    if (stream.width <= 0 || stream.width > 0xffff || stream.height <= 0 || stream.height > 0xffff)
        fail_offset(4, "sensor dimensions out of range");
    size_t body = source.size() - 16;
    if (body % 8 != 0)
        fail_offset(16 + (body / 8) * 8, "truncated event record");
    stream.events.reserve(body / 8);
    for (size_t off = 16; off < source.size(); off += 8) {
        const unsigned char* r = p + off;
        DvsEvent e;
        e.x = static_cast<uint16_t>(r[0] | (r[1] << 8));
        e.y = static_cast<uint16_t>(r[2] | (r[3] << 8));
        e.t_us = static_cast<uint32_t>(r[4]) | (static_cast<uint32_t>(r[5]) << 8) |
                 (static_cast<uint32_t>(r[6]) << 16);
        if (r[7] > 1)
            fail_offset(off, "polarity byte must be 0 or 1");
        e.polarity = r[7] ? Polarity::On : Polarity::Off;
        validate_event(e, stream.width, stream.height, stream.duration_us, 0, off, false);
        stream.events.push_back(e);
    }
    return stream;
}

}  // namespace

EventStream parse_event_stream(const std::string& source, StreamFormat format) {
    EventStream stream =
        format == StreamFormat::Csv ? parse_csv(source) : parse_binary(source);
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const DvsEvent& a, const DvsEvent& b) { return a.t_us < b.t_us; });
    return stream;
}

std::string serialize_event_stream(const EventStream& stream, StreamFormat format) {
    if (format == StreamFormat::Csv) {
        std::string out;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%d,%d,%u\n", stream.width, stream.height, stream.duration_us);
        out += buf;
        for (const DvsEvent& e : stream.events) {
            std::snprintf(buf, sizeof buf, "%u,%u,%u,%u\n", e.x, e.y, e.t_us,
                          static_cast<unsigned>(e.polarity));
            out += buf;
        }
        return out;
    }
    std::string out;
    out.reserve(16 + stream.events.size() * 8);
    out.append(kBinaryMagic, 4);
    auto put_u32 = [&out](uint32_t v) {
        out.push_back(static_cast<char>(v & 0xff));
        out.push_back(static_cast<char>((v >> 8) & 0xff));
        out.push_back(static_cast<char>((v >> 16) & 0xff));
        out.push_back(static_cast<char>((v >> 24) & 0xff));
    };
    put_u32(static_cast<uint32_t>(stream.width));
    put_u32(static_cast<uint32_t>(stream.height));
    put_u32(stream.duration_us);
    for (const DvsEvent& e : stream.events) {
        if (e.t_us > kMaxBinaryTimestamp)
            throw ParseError("timestamp " + std::to_string(e.t_us) +
                             " does not fit the packed binary u24 field");
        out.push_back(static_cast<char>(e.x & 0xff));
        out.push_back(static_cast<char>(e.x >> 8));
        out.push_back(static_cast<char>(e.y & 0xff));
        out.push_back(static_cast<char>(e.y >> 8));
        out.push_back(static_cast<char>(e.t_us & 0xff));
        out.push_back(static_cast<char>((e.t_us >> 8) & 0xff));
        out.push_back(static_cast<char>((e.t_us >> 16) & 0xff));
        out.push_back(static_cast<char>(e.polarity == Polarity::On ? 1 : 0));
    }
    return out;
}

EventStream load_event_stream(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open event file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string data = buf.str();
    StreamFormat fmt = data.size() >= 4 && std::memcmp(data.data(), kBinaryMagic, 4) == 0
                           ? StreamFormat::PackedBinary
                           : StreamFormat::Csv;
    return parse_event_stream(data, fmt);
}

void save_event_stream(const EventStream& stream, const std::string& path, StreamFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ParseError("cannot write event file: " + path);
    std::string data = serialize_event_stream(stream, format);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

WindowedCounts window_events(const EventStream& stream, uint32_t window_length_us) {
    if (window_length_us == 0)
        throw std::invalid_argument("window length must be positive");
    WindowedCounts wc;
    wc.window_length_us = window_length_us;
    wc.width = stream.width;
    wc.height = stream.height;
    size_t n_windows =
        (static_cast<uint64_t>(stream.duration_us) + window_length_us - 1) / window_length_us;
    // An event stamped exactly at the stream duration still needs a window:
    // conservation of counts takes precedence over the ceil(duration/L) count.
    if (!stream.events.empty()) {
        size_t last = stream.events.back().t_us / window_length_us;
        n_windows = std::max(n_windows, last + 1);
    }
    wc.windows.assign(n_windows,
                      std::vector<uint32_t>(static_cast<size_t>(stream.width) * stream.height * 2, 0));
    for (const DvsEvent& e : stream.events) {
        size_t w = e.t_us / window_length_us;
        wc.windows[w][WindowedCounts::index(stream.width, e.x, e.y, e.polarity)]++;
    }
    return wc;
}

EventStream synth_events(int width, int height, uint32_t duration_us,
                         double mean_rate_per_pixel_per_ms, uint64_t seed) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("sensor dimensions must be positive");
    if (mean_rate_per_pixel_per_ms < 0)
        throw std::invalid_argument("mean rate must be non-negative");
    EventStream stream;
    stream.width = width;
    stream.height = height;
    stream.duration_us = duration_us;
    const double lambda = mean_rate_per_pixel_per_ms * (duration_us / 1000.0);
    if (lambda <= 0 || duration_us == 0)
        return stream;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            Rng rng = Rng::derive(seed, {kRngTagSynth, static_cast<uint64_t>(y),
                                         static_cast<uint64_t>(x)});
            // Knuth's product method in chunks of at most 16 (Poisson sums),
            // keeping exp(-chunk) comfortably away from underflow.
            uint32_t count = 0;
            double remaining = lambda;
            while (remaining > 0) {
                double chunk = remaining > 16.0 ? 16.0 : remaining;
                remaining -= chunk;
                double limit = std::exp(-chunk);
                double prod = 1.0;
                for (;;) {
                    prod *= rng.next_double();
                    if (prod <= limit)
                        break;
                    ++count;
                }
            }
            for (uint32_t i = 0; i < count; ++i) {
                DvsEvent e;
                e.x = static_cast<uint16_t>(x);
                e.y = static_cast<uint16_t>(y);
                e.t_us = rng.next_below(duration_us);
                e.polarity = rng.next_bool() ? Polarity::On : Polarity::Off;
                stream.events.push_back(e);
            }
        }
    }
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const DvsEvent& a, const DvsEvent& b) { return a.t_us < b.t_us; });
    return stream;
}

}  // namespace npx::events
