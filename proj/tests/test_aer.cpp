#include <doctest.h>

#include <map>
#include <set>
#include <stdexcept>

#include "npx/aer.hpp"
#include "npx/rng.hpp"

using namespace npx::aer;
using npx::array::ActivationMap;

namespace {

ActivationMap random_map(int w, int h, int c, double density, npx::Rng& rng) {
    ActivationMap m;
    m.out_width = w;
    m.out_height = h;
    m.channels = c;
    m.spikes.resize(static_cast<size_t>(w) * h * c);
    for (auto& s : m.spikes)
        s = rng.next_double() < density ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("geometry bit widths and savings") {
    AerGeometry g = AerGeometry::make(63, 63, 32, 128, 128);
    CHECK(g.x_bits == 6);
    CHECK(g.y_bits == 6);
    CHECK(g.per_event_bits == 12);
    CHECK(g.baseline_bits == 15);
    BitsReport r = bits_saved(g);
    CHECK(r.per_event_bits == 12);
    CHECK(r.baseline_bits == 15);
    CHECK(r.savings == 3);

    AerGeometry tiny = AerGeometry::make(1, 1, 1, 4, 4);
    CHECK(tiny.per_event_bits == 2);  // minimum clamp
}

TEST_CASE("per-event bits beat the baseline for any stride-2 geometry on >= 8x8 sensors") {
    for (int sensor = 8; sensor <= 64; ++sensor) {
        for (int k = 1; k <= 3; ++k) {
            if (k > sensor)
                continue;
            int out = (sensor - k) / 2 + 1;
            AerGeometry g = AerGeometry::make(out, out, 4, sensor, sensor);
            CHECK(g.per_event_bits < g.baseline_bits);
        }
    }
}

TEST_CASE("encode: empty map, single spike packing, full map") {
    AerGeometry g = AerGeometry::make(63, 63, 32, 128, 128);
    ActivationMap empty;
    empty.out_width = empty.out_height = 63;
    empty.channels = 32;
    empty.spikes.assign(63 * 63 * 32, 0);
    EncodedWindow enc = encode_window(empty, g);
    CHECK(enc.words.empty());
    for (const auto& seg : enc.trace.segments)
        CHECK(seg.events.empty());

    ActivationMap one = empty;
    one.spikes[(static_cast<size_t>(7) * 63 + 5) * 32 + 3] = 1;
    EncodedWindow e1 = encode_window(one, g);
    REQUIRE(e1.words.size() == 1);
    CHECK(e1.words[0].channel == 3);
    CHECK(e1.words[0].x == 5);
    CHECK(e1.words[0].y == 7);
    CHECK(e1.words[0].packed == 453);  // (7 << 6) | 5

    ActivationMap full;
    full.out_width = full.out_height = 9;
    full.channels = 3;
    full.spikes.assign(9 * 9 * 3, 1);
    AerGeometry g9 = AerGeometry::make(9, 9, 3, 32, 32);
    EncodedWindow ef = encode_window(full, g9);
    CHECK(ef.words.size() == 9u * 9 * 3);
    std::set<std::pair<int, uint32_t>> distinct;
    for (const auto& w : ef.words)
        distinct.insert({w.channel, w.packed});
    CHECK(distinct.size() == ef.words.size());
}

TEST_CASE("decode: zero, inverse of packing, bounds error") {
    AerGeometry g = AerGeometry::make(63, 63, 32, 128, 128);
    CHECK(decode_word(0, g) == std::pair<int, int>{0, 0});
    CHECK(decode_word(453, g) == std::pair<int, int>{5, 7});
    CHECK_THROWS_AS(decode_word((63u << 6) | 0, g), std::out_of_range);
}

TEST_CASE("exactly-once: decoded words equal the spiking sites") {
    npx::Rng rng(77);
    for (int it = 0; it < 20; ++it) {
        int w = 2 + static_cast<int>(rng.next_below(14));
        int h = 2 + static_cast<int>(rng.next_below(14));
        int c = 1 + static_cast<int>(rng.next_below(6));
        ActivationMap m = random_map(w, h, c, 0.3, rng);
        AerGeometry g = AerGeometry::make(w, h, c, 2 * w, 2 * h);
        EncodedWindow enc = encode_window(m, g);
        std::set<std::tuple<int, int, int>> decoded;
        for (const auto& word : enc.words) {
            auto [x, y] = decode_word(word.packed, g);
            CHECK(x == word.x);
            CHECK(y == word.y);
            decoded.insert({word.channel, x, y});
        }
        CHECK(decoded.size() == enc.words.size());
        CHECK(decoded.size() == m.spike_count());
        for (const auto& [ch, x, y] : decoded)
            CHECK(m.at(x, y, ch));
    }
}

TEST_CASE("encode then replay reconstructs the map") {
    npx::Rng rng(101);
    for (int it = 0; it < 50; ++it) {
        int w = 1 + static_cast<int>(rng.next_below(12));
        int h = 1 + static_cast<int>(rng.next_below(12));
        int c = 1 + static_cast<int>(rng.next_below(8));
        ActivationMap m = random_map(w, h, c, rng.next_double(), rng);
        AerGeometry g = AerGeometry::make(w, h, c, 2 * w, 2 * h);
        EncodedWindow enc = encode_window(m, g);
        ActivationMap back = replay_trace(enc.trace, g);
        CHECK(back.spikes == m.spikes);
    }
}

TEST_CASE("protocol violations are rejected with the offending tick") {
    AerGeometry g = AerGeometry::make(4, 4, 2, 8, 8);

    // acknowledge without request
    WindowTrace t;
    t.channels = 2;
    t.segments.push_back({0, {{0, Signal::ColAckUp, 1}}});
    t.segments.push_back({1, {}});
    CHECK_THROWS_AS(replay_trace(t, g), ProtocolError);

    // CA+ before CR+ inside a latched row
    WindowTrace t2;
    t2.channels = 2;
    t2.segments.push_back(
        {0,
         {{0, Signal::RowReqUp, 1}, {1, Signal::RowAckUp, 1}, {2, Signal::ColAckUp, 2}}});
    t2.segments.push_back({1, {}});
    try {
        replay_trace(t2, g);
        FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
        CHECK(e.tick == 2);
    }

    // double service of the same site in one channel scan
    WindowTrace t3;
    t3.channels = 2;
    t3.segments.push_back({0,
                           {{0, Signal::RowReqUp, 1},
                            {1, Signal::RowAckUp, 1},
                            {2, Signal::ColReqUp, 2},
                            {3, Signal::ColAckUp, 2},
                            {4, Signal::ColReqDown, 2},
                            {5, Signal::ColAckDown, 2},
                            {6, Signal::ColReqUp, 2},
                            {7, Signal::ColAckUp, 2}}});
    t3.segments.push_back({1, {}});
    CHECK_THROWS_WITH_AS(replay_trace(t3, g), doctest::Contains("serviced twice"), ProtocolError);

    // missing release at the end of a scan
    WindowTrace t4;
    t4.channels = 2;
    t4.segments.push_back({0, {{0, Signal::RowReqUp, 1}, {1, Signal::RowAckUp, 1}}});
    t4.segments.push_back({1, {}});
    CHECK_THROWS_WITH_AS(replay_trace(t4, g), doctest::Contains("missing release"), ProtocolError);
}

TEST_CASE("fuzz: single-edge mutations of a valid trace are rejected") {
    npx::Rng rng(202);
    ActivationMap m = random_map(6, 6, 3, 0.4, rng);
    AerGeometry g = AerGeometry::make(6, 6, 3, 12, 12);
    EncodedWindow enc = encode_window(m, g);
    ActivationMap base = replay_trace(enc.trace, g);
    REQUIRE(base.spikes == m.spikes);

    int rejected = 0, total = 0;
    for (size_t seg = 0; seg < enc.trace.segments.size(); ++seg) {
        for (size_t i = 0; i < enc.trace.segments[seg].events.size(); ++i) {
            // mutate the signal
            for (int alt = 0; alt < 8; ++alt) {
                WindowTrace t = enc.trace;
                auto& e = t.segments[seg].events[i];
                if (static_cast<Signal>(alt) == e.signal)
                    continue;
                e.signal = static_cast<Signal>(alt);
                ++total;
                try {
                    ActivationMap out = replay_trace(t, g);
                    // a mutation that somehow replays must not reproduce the map
                    CHECK(out.spikes != m.spikes);
                } catch (const ProtocolError&) {
                    ++rejected;
                }
            }
            // mutate the index
            {
                WindowTrace t = enc.trace;
                t.segments[seg].events[i].index += 1;
                ++total;
                try {
                    ActivationMap out = replay_trace(t, g);
                    CHECK(out.spikes != m.spikes);
                } catch (const ProtocolError&) {
                    ++rejected;
                }
            }
            // delete the edge
            {
                WindowTrace t = enc.trace;
                auto& ev = t.segments[seg].events;
                ev.erase(ev.begin() + static_cast<ptrdiff_t>(i));
                ++total;
                try {
                    ActivationMap out = replay_trace(t, g);
                    CHECK(out.spikes != m.spikes);
                } catch (const ProtocolError&) {
                    ++rejected;
                }
            }
            // duplicate the edge (tick collision)
            {
                WindowTrace t = enc.trace;
                auto& ev = t.segments[seg].events;
                ev.insert(ev.begin() + static_cast<ptrdiff_t>(i), ev[i]);
                ++total;
                CHECK_THROWS_AS(replay_trace(t, g), ProtocolError);
                ++rejected;
            }
        }
    }
    // the state machine rejects the overwhelming majority outright
    CHECK(total > 500);
    CHECK(rejected > total * 9 / 10);
}

TEST_CASE("trace text format round-trips") {
    npx::Rng rng(55);
    ActivationMap m = random_map(5, 4, 2, 0.5, rng);
    AerGeometry g = AerGeometry::make(5, 4, 2, 10, 8);
    EncodedWindow enc = encode_window(m, g);
    enc.trace.window_index = 9;
    std::string text = format_trace(enc.trace);
    WindowTrace back = parse_trace(text);
    CHECK(back.window_index == 9);
    CHECK(back.channels == 2);
    REQUIRE(back.segments.size() == enc.trace.segments.size());
    for (size_t s = 0; s < back.segments.size(); ++s) {
        CHECK(back.segments[s].channel == enc.trace.segments[s].channel);
        REQUIRE(back.segments[s].events.size() == enc.trace.segments[s].events.size());
        for (size_t i = 0; i < back.segments[s].events.size(); ++i) {
            CHECK(back.segments[s].events[i].tick == enc.trace.segments[s].events[i].tick);
            CHECK(back.segments[s].events[i].signal == enc.trace.segments[s].events[i].signal);
            CHECK(back.segments[s].events[i].index == enc.trace.segments[s].events[i].index);
        }
    }
    ActivationMap replayed = replay_trace(back, g);
    CHECK(replayed.spikes == m.spikes);
}

TEST_CASE("aer dump file round-trips words per window and channel") {
    npx::Rng rng(303);
    AerGeometry g = AerGeometry::make(11, 7, 5, 22, 14);
    std::vector<EncodedWindow> windows;
    for (uint32_t w = 0; w < 4; ++w) {
        ActivationMap m = random_map(11, 7, 5, 0.25, rng);
        m.window_index = w;
        windows.push_back(encode_window(m, g));
    }
    std::string path = "/tmp/npx_aer_dump_test.npxa";
    write_aer_dump(path, g, windows);
    AerDump dump = read_aer_dump(path);
    REQUIRE(dump.windows.size() == 4);
    for (size_t w = 0; w < 4; ++w) {
        CHECK(dump.windows[w].first == w);
        REQUIRE(dump.windows[w].second.size() == windows[w].words.size());
        for (size_t i = 0; i < windows[w].words.size(); ++i) {
            CHECK(dump.windows[w].second[i].channel == windows[w].words[i].channel);
            CHECK(dump.windows[w].second[i].packed == windows[w].words[i].packed);
            CHECK(dump.windows[w].second[i].x == windows[w].words[i].x);
            CHECK(dump.windows[w].second[i].y == windows[w].words[i].y);
        }
    }
}

TEST_CASE("rows are serviced in ascending order, columns left to right") {
    ActivationMap m;
    m.out_width = 4;
    m.out_height = 4;
    m.channels = 1;
    m.spikes.assign(16, 0);
    m.spikes[(3 * 4 + 2) * 1] = 1;  // (x=2, y=3)
    m.spikes[(0 * 4 + 1) * 1] = 1;  // (x=1, y=0)
    m.spikes[(0 * 4 + 3) * 1] = 1;  // (x=3, y=0)
    AerGeometry g = AerGeometry::make(4, 4, 1, 8, 8);
    EncodedWindow enc = encode_window(m, g);
    REQUIRE(enc.words.size() == 3);
    CHECK(enc.words[0].y == 0);
    CHECK(enc.words[0].x == 1);
    CHECK(enc.words[1].y == 0);
    CHECK(enc.words[1].x == 3);
    CHECK(enc.words[2].y == 3);
    CHECK(enc.words[2].x == 2);
}
