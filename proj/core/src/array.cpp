#include "npx/array.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "npx/config.hpp"

namespace npx::array {

using events::DvsEvent;
using events::Polarity;

namespace {

constexpr char kWeightsMagic[4] = {'N', 'P', 'X', 'W'};

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

double KernelSpec::weight_magnitude_sum(int c) const {
    double s = 0;
    for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx)
            for (int pol = 0; pol < 2; ++pol)
                s += std::fabs(weight(c, ky, kx, static_cast<Polarity>(pol)));
    return s;
}

void KernelSpec::validate(double vdd) const {
    if (k < 1)
        throw std::invalid_argument("kernel side must be >= 1");
    if (stride < 1)
        throw std::invalid_argument("stride must be >= 1");
    if (channels < 1)
        throw std::invalid_argument("channel count must be >= 1");
    if (!(v_th > 0 && v_th < vdd))
        throw std::invalid_argument("v_th must lie strictly inside (0, vdd)");
    size_t expected = static_cast<size_t>(channels) * k * k * 2;
    if (weights.size() != expected)
        throw std::invalid_argument("weight tensor has " + std::to_string(weights.size()) +
                                    " entries, expected " + std::to_string(expected));
    for (double w : weights)
        if (!(std::fabs(w) <= 1.0))
            throw std::invalid_argument("normalized weights must lie in [-1, 1]");
}

double AreaBudget::per_site_area_um2(int stride) const {
    double pitch = pixel_pitch_um * stride;
    return pitch * pitch * stacking_factor;
}

double AreaBudget::per_channel_area_um2(int k) const {
    return 2.0 * k * k * weight_area_um2 + cap_area_um2 + comparator_area_um2;
}

int max_channels(int k, int stride, const AreaBudget& budget) {
    if (k < 1 || stride < 1)
        throw std::invalid_argument("kernel side and stride must be >= 1");
    return static_cast<int>(budget.per_site_area_um2(stride) / budget.per_channel_area_um2(k));
}

PixelArray build_array(int sensor_width, int sensor_height, KernelSpec spec, AreaBudget budget) {
    if (sensor_width < 1 || sensor_height < 1)
        throw std::invalid_argument("sensor dimensions must be positive");
    if (spec.k > sensor_width || spec.k > sensor_height)
        throw std::invalid_argument("kernel larger than sensor");
    int cap = max_channels(spec.k, spec.stride, budget);
    if (spec.channels > cap)
        throw AreaError("area budget violated: " + std::to_string(spec.channels) +
                        " channels requested, at most " + std::to_string(cap) +
                        " fit for k=" + std::to_string(spec.k) +
                        " stride=" + std::to_string(spec.stride));
    PixelArray a;
    a.sensor_width = sensor_width;
    a.sensor_height = sensor_height;
    a.spec = std::move(spec);
    a.budget = budget;
    a.out_width = (sensor_width - a.spec.k) / a.spec.stride + 1;
    a.out_height = (sensor_height - a.spec.k) / a.spec.stride + 1;
    return a;
}

uint64_t ActivationMap::spike_count() const {
    uint64_t n = 0;
    for (uint8_t s : spikes)
        n += s;
    return n;
}

KernelState make_state(const PixelArray& array) {
    KernelState st;
    st.out_width = array.out_width;
    st.out_height = array.out_height;
    st.channels = array.spec.channels;
    st.v.assign(array.site_channels(), 0.0);
    return st;
}

void reset_phase(KernelState& state, const device::DeviceParams& p) {
    std::fill(state.v.begin(), state.v.end(), p.v_reset());
}

namespace {

// Output sites whose receptive field contains input coordinate `px`:
// ox*stride <= px <= ox*stride + k - 1.
struct SiteRange {
    int lo, hi;  // inclusive
};

SiteRange sites_covering(int px, int k, int stride, int out_dim) {
    int lo = (px - k + 1 + stride - 1) / stride;  // ceil for non-negative result
    if (px - k + 1 <= 0)
        lo = 0;
    int hi = std::min(px / stride, out_dim - 1);
    return {std::max(lo, 0), hi};
}

// Per (site, channel) gaussian stream for process variation.
std::vector<Rng> make_site_streams(const PixelArray& array, const Variation& var, uint64_t tag) {
    std::vector<Rng> streams;
    streams.reserve(array.site_channels());
    for (size_t i = 0; i < array.site_channels(); ++i)
        streams.push_back(Rng::derive(var.seed, {tag, var.window, static_cast<uint64_t>(i)}));
    return streams;
}

void apply_leak(const PixelArray& array, const device::DeviceParams& p, KernelState& state,
                uint32_t window_length_us) {
    if (p.leak_rate_max <= 0 || window_length_us == 0)
        return;
    const double max_sum = 2.0 * array.spec.k * array.spec.k;
    const double sign = p.leak_downward ? -1.0 : 1.0;
    std::vector<double> drift(array.spec.channels);
    for (int c = 0; c < array.spec.channels; ++c)
        drift[c] = sign * device::leak_drift(array.spec.weight_magnitude_sum(c), max_sum,
                                             window_length_us, p);
    for (size_t site = 0; site < array.sites(); ++site)
        for (int c = 0; c < array.spec.channels; ++c) {
            double& v = state.v[site * array.spec.channels + c];
            v = clamp(v + drift[c], 0.0, p.vdd);
        }
}

}  // namespace

void convolve_window_transient(const PixelArray& array, const std::vector<DvsEvent>& window_events,
                               const device::DeviceParams& p, KernelState& state,
                               const Variation* variation, uint32_t window_length_us) {
    const KernelSpec& spec = array.spec;
    std::vector<Rng> streams;
    if (variation && p.sigma_frac > 0)
        streams = make_site_streams(array, *variation, kRngTagTransient);
    for (const DvsEvent& e : window_events) {
        if (e.x >= array.sensor_width || e.y >= array.sensor_height)
            throw std::out_of_range("event outside sensor bounds");
        SiteRange xr = sites_covering(e.x, spec.k, spec.stride, array.out_width);
        SiteRange yr = sites_covering(e.y, spec.k, spec.stride, array.out_height);
        for (int oy = yr.lo; oy <= yr.hi; ++oy) {
            for (int ox = xr.lo; ox <= xr.hi; ++ox) {
                int ky = e.y - oy * spec.stride;
                int kx = e.x - ox * spec.stride;
                size_t base = (static_cast<size_t>(oy) * array.out_width + ox) * spec.channels;
                for (int c = 0; c < spec.channels; ++c) {
                    double w = spec.weight(c, ky, kx, e.polarity);
                    double& v = state.v[base + c];
                    double step = device::nonlinear_step(w, v, p);
                    if (!streams.empty()) {
                        double g = streams[base + c].next_gaussian() * p.sigma_frac;
                        g = clamp(g, -3.0 * p.sigma_frac, 3.0 * p.sigma_frac);
                        step *= 1.0 + g;
                    }
                    v = clamp(v + step, 0.0, p.vdd);
                }
            }
        }
    }
    apply_leak(array, p, state, window_length_us);
}

void convolve_window_fitted(const PixelArray& array, const std::vector<uint32_t>& counts,
                            const device::DeviceParams& p, const device::ResponseModel& m,
                            KernelState& state, const Variation* variation) {
    const KernelSpec& spec = array.spec;
    if (counts.size() != static_cast<size_t>(array.sensor_width) * array.sensor_height * 2)
        throw std::invalid_argument("count grid does not match sensor dimensions");
    std::vector<Rng> streams;
    if (variation)
        streams = make_site_streams(array, *variation, kRngTagFitted);
    for (int oy = 0; oy < array.out_height; ++oy) {
        for (int ox = 0; ox < array.out_width; ++ox) {
            size_t base = (static_cast<size_t>(oy) * array.out_width + ox) * spec.channels;
            for (int c = 0; c < spec.channels; ++c) {
                Rng* rng = streams.empty() ? nullptr : &streams[base + c];
                double v = p.v_reset();
                for (int ky = 0; ky < spec.k; ++ky) {
                    int py = oy * spec.stride + ky;
                    for (int kx = 0; kx < spec.k; ++kx) {
                        int px = ox * spec.stride + kx;
                        size_t ci = (static_cast<size_t>(py) * array.sensor_width + px) * 2;
                        for (int pol = 0; pol < 2; ++pol) {
                            uint32_t n = counts[ci + pol];
                            if (n == 0)
                                continue;
                            double w = spec.weight(c, ky, kx, static_cast<Polarity>(pol));
                            v += device::eval_response(m, w, n, rng);
                        }
                    }
                }
                state.v[base + c] = clamp(v, 0.0, p.vdd);
            }
        }
    }
}

ActivationMap threshold_phase(const KernelState& state, const KernelSpec& spec) {
    ActivationMap map;
    map.out_width = state.out_width;
    map.out_height = state.out_height;
    map.channels = state.channels;
    map.spikes.resize(state.v.size());
    for (size_t i = 0; i < state.v.size(); ++i)
        map.spikes[i] = spec.inclusive_threshold ? (state.v[i] >= spec.v_th ? 1 : 0)
                                                 : (state.v[i] > spec.v_th ? 1 : 0);
    return map;
}

RunResult run_stream(const PixelArray& array, const events::EventStream& stream, RunMode mode,
                     uint32_t window_length_us, const device::DeviceParams& p,
                     const device::ResponseModel* model, std::optional<uint64_t> seed) {
    if (window_length_us == 0)
        throw std::invalid_argument("window length must be positive");
    if (mode == RunMode::Fitted && !model)
        throw std::invalid_argument("fitted mode requires a response model");
    if (stream.width != array.sensor_width || stream.height != array.sensor_height)
        throw std::invalid_argument("stream dimensions do not match the array");

    size_t n_windows =
        (static_cast<uint64_t>(stream.duration_us) + window_length_us - 1) / window_length_us;
    if (!stream.events.empty())
        n_windows = std::max(n_windows,
                             static_cast<size_t>(stream.events.back().t_us / window_length_us) + 1);

    RunResult result;
    result.input_events = stream.events.size();
    result.maps.reserve(n_windows);
    result.window_spikes.reserve(n_windows);

    KernelState state = make_state(array);
    size_t cursor = 0;
    for (size_t w = 0; w < n_windows; ++w) {
        uint64_t window_end = static_cast<uint64_t>(w + 1) * window_length_us;
        size_t begin = cursor;
        while (cursor < stream.events.size() && stream.events[cursor].t_us < window_end)
            ++cursor;

        reset_phase(state, p);
        Variation var{seed.value_or(0), static_cast<uint32_t>(w)};
        const Variation* vp = seed ? &var : nullptr;
        if (mode == RunMode::Transient) {
            std::vector<DvsEvent> slice(stream.events.begin() + begin,
                                        stream.events.begin() + cursor);
            convolve_window_transient(array, slice, p, state, vp, window_length_us);
        } else {
            std::vector<uint32_t> counts(
                static_cast<size_t>(array.sensor_width) * array.sensor_height * 2, 0);
            for (size_t i = begin; i < cursor; ++i) {
                const DvsEvent& e = stream.events[i];
                counts[events::WindowedCounts::index(array.sensor_width, e.x, e.y, e.polarity)]++;
            }
            convolve_window_fitted(array, counts, p, *model, state, vp);
        }
        ActivationMap map = threshold_phase(state, array.spec);
        map.window_index = static_cast<uint32_t>(w);
        uint64_t spikes = map.spike_count();
        result.window_spikes.push_back(spikes);
        result.total_spikes += spikes;
        result.maps.push_back(std::move(map));
    }
    return result;
}

void save_weights(const std::string& path, const KernelSpec& spec) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write weights file: " + path);
    auto put_u32 = [&out](uint32_t v) {
        char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
        out.write(b, 4);
    };
    out.write(kWeightsMagic, 4);
    put_u32(static_cast<uint32_t>(spec.channels));
    put_u32(static_cast<uint32_t>(spec.k));
    put_u32(static_cast<uint32_t>(spec.k));
    put_u32(2);
    put_u32(0);
    put_u32(0);
    put_u32(0);
    for (double w : spec.weights) {
        float f = static_cast<float>(w);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(bits);
    }
}

std::vector<double> load_weights(const std::string& path, int channels, int k) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open weights file: " + path);
    char header[32];
    if (!in.read(header, 32))
        throw std::runtime_error("weights file: truncated header");
    if (std::memcmp(header, kWeightsMagic, 4) != 0)
        throw std::runtime_error("weights file: bad magic (expected NPXW)");
    auto u32 = [&header](int i) {
        const auto* p = reinterpret_cast<const unsigned char*>(header + 4 * i);
        return static_cast<uint32_t>(p[0]) | (p[1] << 8) | (p[2] << 16) |
               (static_cast<uint32_t>(p[3]) << 24);
    };
    if (u32(1) != static_cast<uint32_t>(channels) || u32(2) != static_cast<uint32_t>(k) ||
        u32(3) != static_cast<uint32_t>(k) || u32(4) != 2)
        throw std::runtime_error("weights file: dimensions do not match the kernel config");
    size_t n = static_cast<size_t>(channels) * k * k * 2;
    std::vector<double> weights(n);
    for (size_t i = 0; i < n; ++i) {
        char b[4];
        if (!in.read(b, 4))
            throw std::runtime_error("weights file: truncated tensor");
        float f;
        std::memcpy(&f, b, 4);
        weights[i] = f;
    }
    return weights;
}

void save_activation_dump(const std::string& path, const std::vector<ActivationMap>& maps) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write activation dump: " + path);
    auto put_u16 = [&out](uint16_t v) {
        char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
        out.write(b, 2);
    };
    auto put_u32 = [&out](uint32_t v) {
        char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
        out.write(b, 4);
    };
    out.write("NPXM", 4);
    put_u16(1);
    int out_w = maps.empty() ? 0 : maps.front().out_width;
    int out_h = maps.empty() ? 0 : maps.front().out_height;
    int channels = maps.empty() ? 0 : maps.front().channels;
    put_u16(static_cast<uint16_t>(out_w));
    put_u16(static_cast<uint16_t>(out_h));
    put_u16(static_cast<uint16_t>(channels));
    put_u32(static_cast<uint32_t>(maps.size()));
    for (const ActivationMap& m : maps) {
        if (m.out_width != out_w || m.out_height != out_h || m.channels != channels)
            throw std::invalid_argument("activation maps in a dump must share dimensions");
        put_u32(m.window_index);
        put_u32(static_cast<uint32_t>(m.spike_count()));
        std::string bits((m.spikes.size() + 7) / 8, '\0');
        for (size_t i = 0; i < m.spikes.size(); ++i)
            if (m.spikes[i])
                bits[i / 8] |= static_cast<char>(1 << (i % 8));
        out.write(bits.data(), static_cast<std::streamsize>(bits.size()));
    }
}

std::vector<ActivationMap> load_activation_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open activation dump: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "NPXM", 4) != 0)
        throw std::runtime_error("activation dump: bad magic (expected NPXM)");
    auto get_u16 = [&in]() {
        unsigned char b[2];
        if (!in.read(reinterpret_cast<char*>(b), 2))
            throw std::runtime_error("activation dump: truncated");
        return static_cast<uint16_t>(b[0] | (b[1] << 8));
    };
    auto get_u32 = [&in]() {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4))
            throw std::runtime_error("activation dump: truncated");
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    };
    uint16_t version = get_u16();
    if (version != 1)
        throw std::runtime_error("activation dump: unsupported version");
    int out_w = get_u16();
    int out_h = get_u16();
    int channels = get_u16();
    uint32_t count = get_u32();
    std::vector<ActivationMap> maps;
    maps.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        ActivationMap m;
        m.out_width = out_w;
        m.out_height = out_h;
        m.channels = channels;
        m.window_index = get_u32();
        uint32_t spikes = get_u32();
        size_t n = static_cast<size_t>(out_w) * out_h * channels;
        std::string bits((n + 7) / 8, '\0');
        if (!in.read(bits.data(), static_cast<std::streamsize>(bits.size())))
            throw std::runtime_error("activation dump: truncated window");
        m.spikes.resize(n);
        for (size_t j = 0; j < n; ++j)
            m.spikes[j] = (bits[j / 8] >> (j % 8)) & 1;
        if (m.spike_count() != spikes)
            throw std::runtime_error("activation dump: spike count mismatch");
        maps.push_back(std::move(m));
    }
    return maps;
}

KernelSpec load_kernel_spec(const npx::Config& cfg) {
    KernelSpec spec;
    spec.k = static_cast<int>(cfg.get_int("kernel.k"));
    spec.stride = static_cast<int>(cfg.get_int("kernel.stride"));
    spec.channels = static_cast<int>(cfg.get_int("kernel.channels"));
    spec.v_th = cfg.get_double("kernel.v_th");
    spec.inclusive_threshold = cfg.get_bool("kernel.inclusive_threshold", false);
    std::string file = cfg.resolve_path(cfg.get_string("kernel.weights_file"));
    spec.weights = load_weights(file, spec.channels, spec.k);
    return spec;
}

}  // namespace npx::array
