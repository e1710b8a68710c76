#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace npx::events {

// Polarity index convention used everywhere (count grids, weight tensors,
// wire formats): 0 = OFF, 1 = ON.
enum class Polarity : uint8_t { Off = 0, On = 1 };

struct DvsEvent {
    uint16_t x = 0;
    uint16_t y = 0;
    uint32_t t_us = 0;
    Polarity polarity = Polarity::Off;
};

struct EventStream {
    int width = 0;
    int height = 0;
    uint32_t duration_us = 0;
    std::vector<DvsEvent> events;  // sorted by t_us (stable)
};

// Per-window, per-pixel, per-polarity event counts.
struct WindowedCounts {
    uint32_t window_length_us = 0;
    int width = 0;
    int height = 0;
    // Each grid is height*width*2 counts, index (y*width + x)*2 + polarity.
    std::vector<std::vector<uint32_t>> windows;

    static size_t index(int width, int x, int y, Polarity p) {
        return (static_cast<size_t>(y) * width + x) * 2 + static_cast<size_t>(p);
    }
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class StreamFormat { Csv, PackedBinary };

// CSV: header `width,height,duration_us`, then `x,y,t_us,polarity` per line.
// Packed binary: 16-byte header (magic "NPX1", u32 width, u32 height,
// u32 duration_us, little-endian) followed by 8-byte records
// (u16 x, u16 y, u24 t_us, u8 polarity, little-endian).
EventStream parse_event_stream(const std::string& source, StreamFormat format);
std::string serialize_event_stream(const EventStream& stream, StreamFormat format);

// File helpers; load() sniffs the format from the leading bytes.
EventStream load_event_stream(const std::string& path);
void save_event_stream(const EventStream& stream, const std::string& path, StreamFormat format);

WindowedCounts window_events(const EventStream& stream, uint32_t window_length_us);

// Poisson event counts per pixel at mean_rate events/pixel/ms, uniform
// timestamps in [0, duration), fair-coin polarity. Deterministic per seed.
EventStream synth_events(int width, int height, uint32_t duration_us,
                         double mean_rate_per_pixel_per_ms, uint64_t seed);

}  // namespace npx::events
