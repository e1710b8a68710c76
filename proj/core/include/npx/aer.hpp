#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "npx/array.hpp"

namespace npx::aer {

// Address geometry of the readout. Output addresses drop the polarity bit
// and shrink with the reduced map, which is where the off-chip bit savings
// over a raw sensor readout come from.
struct AerGeometry {
    int out_width = 0;
    int out_height = 0;
    int channels = 0;
    int sensor_width = 0;
    int sensor_height = 0;
    int x_bits = 0;
    int y_bits = 0;
    int per_event_bits = 0;  // x_bits + y_bits, >= 2
    int channel_bits = 0;    // one channel-header word per channel per window
    int baseline_bits = 0;   // sensor address + polarity bit

    static AerGeometry make(int out_width, int out_height, int channels, int sensor_width,
                            int sensor_height);
};

struct AerWord {
    int channel = 0;
    int x = 0;
    int y = 0;
    uint32_t packed = 0;  // (y << x_bits) | x
};

// Four-phase handshake edges. Row request/acknowledge are shared along
// rows, column request/acknowledge along columns.
enum class Signal : uint8_t {
    RowReqUp,
    RowAckUp,
    ColReqUp,
    ColAckUp,
    RowReqDown,
    RowAckDown,
    ColReqDown,
    ColAckDown,
};

const char* signal_name(Signal s);                       // "RR+", "RA+", ...
std::optional<Signal> signal_from_name(const std::string& name);

struct HandshakeEvent {
    uint64_t tick = 0;
    Signal signal = Signal::RowReqUp;
    int index = 0;  // row or column index
};

// The channel scan is driven by the kernel-select lines, so the active
// channel is global context rather than a handshake signal; the trace keeps
// one segment per channel in scan order (empty channels included).
struct ChannelTrace {
    int channel = 0;
    std::vector<HandshakeEvent> events;
};

struct WindowTrace {
    uint32_t window_index = 0;
    int channels = 0;
    std::vector<ChannelTrace> segments;
};

struct EncodedWindow {
    std::vector<AerWord> words;
    WindowTrace trace;
};

// Sequential scan over channels; within a channel, requesting rows are
// serviced in ascending index order, the row's events latched and emitted
// left to right. Every spike yields exactly one word.
EncodedWindow encode_window(const array::ActivationMap& map, const AerGeometry& geometry);

std::pair<int, int> decode_word(uint32_t packed, const AerGeometry& geometry);  // -> (x, y)

struct BitsReport {
    int per_event_bits = 0;
    int baseline_bits = 0;
    int savings = 0;
};
BitsReport bits_saved(const AerGeometry& geometry);

struct ProtocolError : std::runtime_error {
    uint64_t tick;
    ProtocolError(uint64_t t, const std::string& msg)
        : std::runtime_error("tick " + std::to_string(t) + ": " + msg), tick(t) {}
};

// Protocol verifier: replays a handshake trace through a four-phase state
// machine and reconstructs the activation map it services. Throws
// ProtocolError on ordering violations, double service, or missing releases.
array::ActivationMap replay_trace(const WindowTrace& trace, const AerGeometry& geometry);

// Binary AER dump. 16-byte header: magic "NPXA", u16 version, u16 out_width,
// u16 out_height, u16 channels, u32 window_count (little-endian). Per window:
// u32 window_index, then per channel in scan order a u32 word count followed
// by a byte-aligned LSB-first bit blob holding the channel-header word
// (channel_bits) and the packed event words (per_event_bits each).
struct AerDump {
    AerGeometry geometry;
    std::vector<std::pair<uint32_t, std::vector<AerWord>>> windows;
};
void write_aer_dump(const std::string& path, const AerGeometry& geometry,
                    const std::vector<EncodedWindow>& windows);
AerDump read_aer_dump(const std::string& path);

// Text trace: `npixsim-aer-trace v1`, `window N channels C`, `channel K`
// lines opening each segment, then one `tick signal index` line per edge.
std::string format_trace(const WindowTrace& trace);
WindowTrace parse_trace(const std::string& text);

}  // namespace npx::aer
