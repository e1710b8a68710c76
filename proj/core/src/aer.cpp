#include "npx/aer.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace npx::aer {

namespace {

constexpr char kDumpMagic[4] = {'N', 'P', 'X', 'A'};

int bits_for(int dim) {
    int bits = 0;
    while ((1 << bits) < dim)
        ++bits;
    return std::max(bits, 1);
}

}  // namespace

AerGeometry AerGeometry::make(int out_width, int out_height, int channels, int sensor_width,
                              int sensor_height) {
    if (out_width < 1 || out_height < 1 || channels < 1)
        throw std::invalid_argument("map dimensions must be positive");
    AerGeometry g;
    g.out_width = out_width;
    g.out_height = out_height;
    g.channels = channels;
    g.sensor_width = sensor_width;
    g.sensor_height = sensor_height;
    g.x_bits = bits_for(out_width);
    g.y_bits = bits_for(out_height);
    g.per_event_bits = g.x_bits + g.y_bits;
    g.channel_bits = bits_for(channels);
    g.baseline_bits = bits_for(sensor_width) + bits_for(sensor_height) + 1;
    return g;
}

const char* signal_name(Signal s) {
    switch (s) {
        case Signal::RowReqUp: return "RR+";
        case Signal::RowAckUp: return "RA+";
        case Signal::ColReqUp: return "CR+";
        case Signal::ColAckUp: return "CA+";
        case Signal::RowReqDown: return "RR-";
        case Signal::RowAckDown: return "RA-";
        case Signal::ColReqDown: return "CR-";
        case Signal::ColAckDown: return "CA-";
    }
    return "??";
}

std::optional<Signal> signal_from_name(const std::string& name) {
    for (int i = 0; i < 8; ++i) {
        Signal s = static_cast<Signal>(i);
        if (name == signal_name(s))
            return s;
    }
    return std::nullopt;
}

EncodedWindow encode_window(const array::ActivationMap& map, const AerGeometry& geometry) {
    if (map.out_width != geometry.out_width || map.out_height != geometry.out_height ||
        map.channels != geometry.channels)
        throw std::invalid_argument("activation map does not match the AER geometry");
    EncodedWindow out;
    out.trace.window_index = map.window_index;
    out.trace.channels = geometry.channels;
    uint64_t tick = 0;
    for (int c = 0; c < geometry.channels; ++c) {
        ChannelTrace seg;
        seg.channel = c;
        for (int y = 0; y < geometry.out_height; ++y) {
            // Row-parallel latch: one row transaction services every spike
            // in the row before releasing.
            bool any = false;
            for (int x = 0; x < geometry.out_width && !any; ++x)
                any = map.at(x, y, c);
            if (!any)
                continue;
            seg.events.push_back({tick++, Signal::RowReqUp, y});
            seg.events.push_back({tick++, Signal::RowAckUp, y});
            for (int x = 0; x < geometry.out_width; ++x) {
                if (!map.at(x, y, c))
                    continue;
                seg.events.push_back({tick++, Signal::ColReqUp, x});
                seg.events.push_back({tick++, Signal::ColAckUp, x});
                AerWord w;
                w.channel = c;
                w.x = x;
                w.y = y;
                w.packed = (static_cast<uint32_t>(y) << geometry.x_bits) | static_cast<uint32_t>(x);
                out.words.push_back(w);
                seg.events.push_back({tick++, Signal::ColReqDown, x});
                seg.events.push_back({tick++, Signal::ColAckDown, x});
            }
            seg.events.push_back({tick++, Signal::RowReqDown, y});
            seg.events.push_back({tick++, Signal::RowAckDown, y});
        }
        out.trace.segments.push_back(std::move(seg));
    }
    return out;
}

std::pair<int, int> decode_word(uint32_t packed, const AerGeometry& geometry) {
    if (packed >> geometry.per_event_bits)
        throw std::out_of_range("packed address wider than per_event_bits");
    uint32_t x = packed & ((1u << geometry.x_bits) - 1);
    uint32_t y = packed >> geometry.x_bits;
    if (x >= static_cast<uint32_t>(geometry.out_width))
        throw std::out_of_range("decoded x " + std::to_string(x) + " out of map bounds");
    if (y >= static_cast<uint32_t>(geometry.out_height))
        throw std::out_of_range("decoded y " + std::to_string(y) + " out of map bounds");
    return {static_cast<int>(x), static_cast<int>(y)};
}

BitsReport bits_saved(const AerGeometry& geometry) {
    return {geometry.per_event_bits, geometry.baseline_bits,
            geometry.baseline_bits - geometry.per_event_bits};
}

array::ActivationMap replay_trace(const WindowTrace& trace, const AerGeometry& geometry) {
    array::ActivationMap map;
    map.window_index = trace.window_index;
    map.out_width = geometry.out_width;
    map.out_height = geometry.out_height;
    map.channels = geometry.channels;
    map.spikes.assign(static_cast<size_t>(geometry.out_width) * geometry.out_height *
                          geometry.channels,
                      0);
    if (trace.channels != geometry.channels)
        throw ProtocolError(0, "trace channel count does not match geometry");

    uint64_t last_tick = 0;
    bool first_edge = true;
    int expected_channel = 0;
    for (const ChannelTrace& seg : trace.segments) {
        if (seg.channel != expected_channel)
            throw ProtocolError(seg.events.empty() ? last_tick : seg.events.front().tick,
                                "channel scan out of order: expected " +
                                    std::to_string(expected_channel) + ", got " +
                                    std::to_string(seg.channel));
        ++expected_channel;

        // Row transaction state machine.
        enum class RowPhase { Idle, Requested, Latched, Releasing };
        RowPhase row_phase = RowPhase::Idle;
        int row = -1;
        enum class ColPhase { Idle, Requested, Serviced, Releasing };
        ColPhase col_phase = ColPhase::Idle;
        int col = -1;
        std::vector<uint8_t> serviced_rows(geometry.out_height, 0);
        std::vector<uint8_t> serviced_cols;

        for (const HandshakeEvent& e : seg.events) {
            if (!first_edge && e.tick <= last_tick)
                throw ProtocolError(e.tick, "ticks must be strictly increasing");
            first_edge = false;
            last_tick = e.tick;
            switch (e.signal) {
                case Signal::RowReqUp:
                    if (row_phase != RowPhase::Idle)
                        throw ProtocolError(e.tick, "row request while a row is in flight");
                    if (e.index < 0 || e.index >= geometry.out_height)
                        throw ProtocolError(e.tick, "row index out of bounds");
                    if (serviced_rows[e.index])
                        throw ProtocolError(e.tick, "row " + std::to_string(e.index) +
                                                        " serviced twice in one channel scan");
                    row = e.index;
                    row_phase = RowPhase::Requested;
                    break;
                case Signal::RowAckUp:
                    if (row_phase != RowPhase::Requested || e.index != row)
                        throw ProtocolError(e.tick, "row acknowledge without matching request");
                    row_phase = RowPhase::Latched;
                    serviced_cols.assign(geometry.out_width, 0);
                    break;
                case Signal::ColReqUp:
                    if (row_phase != RowPhase::Latched)
                        throw ProtocolError(e.tick, "column request outside a latched row");
                    if (col_phase != ColPhase::Idle)
                        throw ProtocolError(e.tick, "column request while a column is in flight");
                    if (e.index < 0 || e.index >= geometry.out_width)
                        throw ProtocolError(e.tick, "column index out of bounds");
                    if (serviced_cols[e.index])
                        throw ProtocolError(e.tick, "site (" + std::to_string(row) + ", " +
                                                        std::to_string(e.index) +
                                                        ") serviced twice in one channel scan");
                    col = e.index;
                    col_phase = ColPhase::Requested;
                    break;
                case Signal::ColAckUp: {
                    if (col_phase != ColPhase::Requested || e.index != col)
                        throw ProtocolError(e.tick, "column acknowledge without matching request");
                    col_phase = ColPhase::Serviced;
                    serviced_cols[col] = 1;
                    size_t idx = (static_cast<size_t>(row) * geometry.out_width + col) *
                                     geometry.channels +
                                 seg.channel;
                    map.spikes[idx] = 1;
                    break;
                }
                case Signal::ColReqDown:
                    if (col_phase != ColPhase::Serviced || e.index != col)
                        throw ProtocolError(e.tick, "column release before acknowledge");
                    col_phase = ColPhase::Releasing;
                    break;
                case Signal::ColAckDown:
                    if (col_phase != ColPhase::Releasing || e.index != col)
                        throw ProtocolError(e.tick, "column acknowledge release out of order");
                    col_phase = ColPhase::Idle;
                    col = -1;
                    break;
                case Signal::RowReqDown:
                    if (row_phase != RowPhase::Latched || e.index != row)
                        throw ProtocolError(e.tick, "row release outside a latched row");
                    if (col_phase != ColPhase::Idle)
                        throw ProtocolError(e.tick, "row release with a column still in flight");
                    row_phase = RowPhase::Releasing;
                    break;
                case Signal::RowAckDown:
                    if (row_phase != RowPhase::Releasing || e.index != row)
                        throw ProtocolError(e.tick, "row acknowledge release out of order");
                    serviced_rows[row] = 1;
                    row_phase = RowPhase::Idle;
                    row = -1;
                    break;
            }
        }
        if (row_phase != RowPhase::Idle || col_phase != ColPhase::Idle)
            throw ProtocolError(last_tick, "missing release at end of channel scan");
    }
    if (expected_channel != geometry.channels)
        throw ProtocolError(last_tick, "trace covers " + std::to_string(expected_channel) +
                                           " of " + std::to_string(geometry.channels) +
                                           " channels");
    return map;
}

namespace {

class BitWriter {
public:
    void put(uint32_t value, int bits) {
        for (int i = 0; i < bits; ++i) {
            if (bit_ == 0)
                bytes_.push_back(0);
            if (value & (1u << i))
                bytes_.back() |= static_cast<char>(1 << bit_);
            bit_ = (bit_ + 1) % 8;
        }
    }
    std::string take() {
        bit_ = 0;
        return std::move(bytes_);
    }

private:
    std::string bytes_;
    int bit_ = 0;
};

class BitReader {
public:
    BitReader(const char* data, size_t size) : data_(data), size_(size) {}
    uint32_t get(int bits) {
        uint32_t v = 0;
        for (int i = 0; i < bits; ++i) {
            size_t byte = pos_ / 8;
            if (byte >= size_)
                throw std::runtime_error("aer dump: bit blob truncated");
            if (data_[byte] & (1 << (pos_ % 8)))
                v |= 1u << i;
            ++pos_;
        }
        return v;
    }

private:
    const char* data_;
    size_t size_;
    size_t pos_ = 0;
};

void put_u16(std::ostream& out, uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

void put_u32(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

uint16_t get_u16(std::istream& in) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2))
        throw std::runtime_error("aer dump: truncated");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("aer dump: truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_aer_dump(const std::string& path, const AerGeometry& geometry,
                    const std::vector<EncodedWindow>& windows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write aer dump: " + path);
    out.write(kDumpMagic, 4);
    put_u16(out, 1);
    put_u16(out, static_cast<uint16_t>(geometry.out_width));
    put_u16(out, static_cast<uint16_t>(geometry.out_height));
    put_u16(out, static_cast<uint16_t>(geometry.channels));
    put_u32(out, static_cast<uint32_t>(windows.size()));
    for (const EncodedWindow& w : windows) {
        put_u32(out, w.trace.window_index);
        size_t cursor = 0;
        for (int c = 0; c < geometry.channels; ++c) {
            size_t begin = cursor;
            while (cursor < w.words.size() && w.words[cursor].channel == c)
                ++cursor;
            put_u32(out, static_cast<uint32_t>(cursor - begin));
            BitWriter bw;
            bw.put(static_cast<uint32_t>(c), geometry.channel_bits);
            for (size_t i = begin; i < cursor; ++i)
                bw.put(w.words[i].packed, geometry.per_event_bits);
            std::string blob = bw.take();
            out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        }
    }
}

AerDump read_aer_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open aer dump: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kDumpMagic, 4) != 0)
        throw std::runtime_error("aer dump: bad magic (expected NPXA)");
    uint16_t version = get_u16(in);
    if (version != 1)
        throw std::runtime_error("aer dump: unsupported version " + std::to_string(version));
    int out_w = get_u16(in);
    int out_h = get_u16(in);
    int channels = get_u16(in);
    uint32_t n_windows = get_u32(in);
    AerDump dump;
    dump.geometry = AerGeometry::make(out_w, out_h, channels, out_w, out_h);
    for (uint32_t wi = 0; wi < n_windows; ++wi) {
        uint32_t index = get_u32(in);
        std::vector<AerWord> words;
        for (int c = 0; c < channels; ++c) {
            uint32_t count = get_u32(in);
            size_t bits = static_cast<size_t>(dump.geometry.channel_bits) +
                          static_cast<size_t>(count) * dump.geometry.per_event_bits;
            std::string blob((bits + 7) / 8, '\0');
            if (!in.read(blob.data(), static_cast<std::streamsize>(blob.size())))
                throw std::runtime_error("aer dump: truncated channel blob");
            BitReader br(blob.data(), blob.size());
            uint32_t header = br.get(dump.geometry.channel_bits);
            if (header != static_cast<uint32_t>(c))
                throw std::runtime_error("aer dump: channel header mismatch");
            for (uint32_t i = 0; i < count; ++i) {
                AerWord w;
                w.channel = c;
                w.packed = br.get(dump.geometry.per_event_bits);
                auto [x, y] = decode_word(w.packed, dump.geometry);
                w.x = x;
                w.y = y;
                words.push_back(w);
            }
        }
        dump.windows.emplace_back(index, std::move(words));
    }
    return dump;
}

std::string format_trace(const WindowTrace& trace) {
    std::string out = "npixsim-aer-trace v1\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "window %u channels %d\n", trace.window_index, trace.channels);
    out += buf;
    for (const ChannelTrace& seg : trace.segments) {
        std::snprintf(buf, sizeof buf, "channel %d\n", seg.channel);
        out += buf;
        for (const HandshakeEvent& e : seg.events) {
            std::snprintf(buf, sizeof buf, "%llu %s %d\n", static_cast<unsigned long long>(e.tick),
                          signal_name(e.signal), e.index);
            out += buf;
        }
    }
    out += "end\n";
    return out;
}

WindowTrace parse_trace(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "npixsim-aer-trace v1")
        throw std::runtime_error("trace: unrecognized header");
    WindowTrace trace;
    bool have_window = false;
    ChannelTrace* seg = nullptr;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        if (line == "end")
            break;
        std::istringstream ls(line);
        std::string first;
        ls >> first;
        if (first == "window") {
            std::string kw;
            if (!(ls >> trace.window_index >> kw >> trace.channels) || kw != "channels")
                throw std::runtime_error("trace line " + std::to_string(lineno) +
                                         ": malformed window header");
            have_window = true;
        } else if (first == "channel") {
            int c;
            if (!(ls >> c))
                throw std::runtime_error("trace line " + std::to_string(lineno) +
                                         ": malformed channel header");
            trace.segments.push_back({c, {}});
            seg = &trace.segments.back();
        } else {
            if (!have_window || !seg)
                throw std::runtime_error("trace line " + std::to_string(lineno) +
                                         ": edge before window/channel header");
            HandshakeEvent e;
            unsigned long long tick;
            std::string sig;
            int index;
            std::istringstream es(line);
            if (!(es >> tick >> sig >> index))
                throw std::runtime_error("trace line " + std::to_string(lineno) +
                                         ": expected 'tick signal index'");
            auto s = signal_from_name(sig);
            if (!s)
                throw std::runtime_error("trace line " + std::to_string(lineno) +
                                         ": unknown signal '" + sig + "'");
            e.tick = tick;
            e.signal = *s;
            e.index = index;
            seg->events.push_back(e);
        }
    }
    return trace;
}

}  // namespace npx::aer
