#include "npx/oracle.hpp"

#include <algorithm>
#include <cstdio>

#include "npx/rng.hpp"

namespace npx::oracle {

using events::Polarity;

array::ActivationMap ideal_conv_threshold(int width, int height,
                                          const std::vector<uint32_t>& counts,
                                          const OracleConfig& cfg) {
    if (counts.size() != static_cast<size_t>(width) * height * 2)
        throw std::invalid_argument("count grid does not match the given dimensions");
    const int out_w = (width - cfg.k) / cfg.stride + 1;
    const int out_h = (height - cfg.k) / cfg.stride + 1;
    if (out_w < 1 || out_h < 1)
        throw std::invalid_argument("kernel larger than the count grid");
    array::ActivationMap map;
    map.out_width = out_w;
    map.out_height = out_h;
    map.channels = cfg.channels;
    map.spikes.assign(static_cast<size_t>(out_w) * out_h * cfg.channels, 0);
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            for (int c = 0; c < cfg.channels; ++c) {
                // Direct nested summation, independent of the array pipeline:
                // weighted counts accumulated per sign, then scaled once.
                double pos = 0, neg = 0;
                for (int ky = 0; ky < cfg.k; ++ky) {
                    for (int kx = 0; kx < cfg.k; ++kx) {
                        int px = ox * cfg.stride + kx;
                        int py = oy * cfg.stride + ky;
                        size_t ci = (static_cast<size_t>(py) * width + px) * 2;
                        for (int pol = 0; pol < 2; ++pol) {
                            double w =
                                cfg.weights[((static_cast<size_t>(c) * cfg.k + ky) * cfg.k + kx) *
                                                2 +
                                            pol];
                            double wn = w * static_cast<double>(counts[ci + pol]);
                            if (w >= 0)
                                pos += wn;
                            else
                                neg += wn;
                        }
                    }
                }
                double v = cfg.v_reset + cfg.step * pos + cfg.step * cfg.asym * neg;
                v = std::min(std::max(v, 0.0), cfg.vdd);
                bool spike = cfg.inclusive_threshold ? v >= cfg.v_th : v > cfg.v_th;
                map.spikes[(static_cast<size_t>(oy) * out_w + ox) * cfg.channels + c] =
                    spike ? 1 : 0;
            }
        }
    }
    return map;
}

namespace {

// Linear, deterministic device: roll-off pushed below any reachable
// headroom, no asymmetry, no variation, no leakage, and a step small enough
// that no trajectory can reach a rail at the test count bounds.
device::DeviceParams linear_device() {
    device::DeviceParams p;
    p.vdd = 0.8;
    p.max_step = 0.002;
    p.knee = 1e-9;
    p.asym = 1.0;
    p.sigma_frac = 0.0;
    p.leak_rate_max = 0.0;
    return p;
}

device::ResponseModel linear_model(uint32_t max_count) {
    device::DeviceParams p = linear_device();
    std::vector<double> weights = {-1.0, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1.0};
    std::vector<uint32_t> counts;
    for (uint32_t n = 0; n <= max_count; ++n)
        counts.push_back(n);
    return device::fit_response_poly(device::sample_device_grid(p, weights, counts, 1, 1));
}

}  // namespace

EquivalenceReport equivalence_report(const EquivalenceOptions& opts) {
    EquivalenceReport report;
    if (opts.seed_count == 0)
        return report;  // vacuous pass
    const device::DeviceParams p = linear_device();
    const device::ResponseModel model = linear_model(opts.max_count);
    constexpr uint32_t kWindowUs = 1000;

    for (uint64_t s = 0; s < opts.seed_count; ++s) {
        const uint64_t seed = opts.seed_begin + s;
        Rng rng = Rng::derive(seed, {kRngTagVerify});
        const int k = 1 + static_cast<int>(rng.next_below(3));
        const int stride = 1 + static_cast<int>(rng.next_below(2));
        const int width = k + static_cast<int>(rng.next_below(
                                  static_cast<uint32_t>(std::max(1, opts.max_dim - k + 1))));
        const int height = k + static_cast<int>(rng.next_below(
                                   static_cast<uint32_t>(std::max(1, opts.max_dim - k + 1))));
        const int channels = 1 + static_cast<int>(rng.next_below(
                                     static_cast<uint32_t>(opts.max_channels)));
        const int n_windows = 1 + static_cast<int>(rng.next_below(2));

        array::KernelSpec spec;
        spec.k = k;
        spec.stride = stride;
        spec.channels = channels;
        spec.weights.resize(static_cast<size_t>(channels) * k * k * 2);
        for (double& w : spec.weights)
            w = 2.0 * rng.next_double() - 1.0;
        spec.v_th = p.v_reset() + (2.0 * rng.next_double() - 1.0) * 0.02;

        OracleConfig ocfg;
        ocfg.k = k;
        ocfg.stride = stride;
        ocfg.channels = channels;
        ocfg.weights = spec.weights;
        ocfg.step = p.max_step;
        ocfg.asym = p.asym;
        ocfg.v_reset = p.v_reset();
        ocfg.v_th = spec.v_th;
        ocfg.vdd = p.vdd;

        spec.v_th += opts.sim_v_th_offset;

        // Sparse-ish random counts per window, then an event stream laid out
        // so each window reproduces its count grid.
        events::EventStream stream;
        stream.width = width;
        stream.height = height;
        stream.duration_us = kWindowUs * static_cast<uint32_t>(n_windows);
        std::vector<std::vector<uint32_t>> window_counts(
            n_windows, std::vector<uint32_t>(static_cast<size_t>(width) * height * 2, 0));
        for (int w = 0; w < n_windows; ++w) {
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    for (int pol = 0; pol < 2; ++pol) {
                        if (rng.next_double() < 0.5)
                            continue;  // keep the grid sparse
                        uint32_t n = rng.next_below(opts.max_count + 1);
                        window_counts[w][events::WindowedCounts::index(
                            width, x, y, static_cast<Polarity>(pol))] = n;
                        for (uint32_t i = 0; i < n; ++i) {
                            events::DvsEvent e;
                            e.x = static_cast<uint16_t>(x);
                            e.y = static_cast<uint16_t>(y);
                            e.t_us = static_cast<uint32_t>(w) * kWindowUs + rng.next_below(kWindowUs);
                            e.polarity = static_cast<Polarity>(pol);
                            stream.events.push_back(e);
                        }
                    }
                }
            }
        }
        std::stable_sort(
            stream.events.begin(), stream.events.end(),
            [](const events::DvsEvent& a, const events::DvsEvent& b) { return a.t_us < b.t_us; });

        array::PixelArray arr = array::build_array(width, height, spec);
        array::RunResult transient = array::run_stream(arr, stream, array::RunMode::Transient,
                                                       kWindowUs, p, nullptr, std::nullopt);
        array::RunResult fitted = array::run_stream(arr, stream, array::RunMode::Fitted, kWindowUs,
                                                    p, &model, std::nullopt);

        for (int w = 0; w < n_windows; ++w) {
            array::ActivationMap expect =
                ideal_conv_threshold(width, height, window_counts[w], ocfg);
            for (int y = 0; y < expect.out_height && report.pass; ++y)
                for (int x = 0; x < expect.out_width && report.pass; ++x)
                    for (int c = 0; c < channels && report.pass; ++c) {
                        if (transient.maps[w].at(x, y, c) != expect.at(x, y, c)) {
                            report.pass = false;
                            report.first_failure = {seed, x, y, c, "transient"};
                        } else if (fitted.maps[w].at(x, y, c) != expect.at(x, y, c)) {
                            report.pass = false;
                            report.first_failure = {seed, x, y, c, "fitted"};
                        }
                    }
            if (!report.pass)
                break;
        }
        ++report.seeds_run;
        if (!report.pass)
            break;
    }
    return report;
}

std::string format_equivalence_report(const EquivalenceReport& report) {
    char buf[160];
    if (report.pass) {
        std::snprintf(buf, sizeof buf, "equivalence: PASS (%llu seeds, oracle == transient == fitted)",
                      static_cast<unsigned long long>(report.seeds_run));
        return buf;
    }
    const Counterexample& cx = *report.first_failure;
    std::snprintf(buf, sizeof buf,
                  "equivalence: FAIL at seed %llu, site (%d, %d), channel %d, mode %s",
                  static_cast<unsigned long long>(cx.seed), cx.x, cx.y, cx.channel,
                  cx.mode.c_str());
    return buf;
}

}  // namespace npx::oracle
