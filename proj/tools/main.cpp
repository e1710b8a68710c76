// Command-line front end: synth, calibrate, simulate, energy, verify,
// aer-trace. Every command is reproducible from (config, seed); reruns
// produce byte-identical artifacts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "npx/aer.hpp"
#include "npx/array.hpp"
#include "npx/config.hpp"
#include "npx/device.hpp"
#include "npx/energy.hpp"
#include "npx/events.hpp"
#include "npx/oracle.hpp"

namespace {

namespace fs = std::filesystem;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write: " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

npx::device::DeviceParams device_from_config(const npx::Config& cfg) {
    npx::device::DeviceParams p;
    p.vdd = cfg.get_double("device.vdd", p.vdd);
    p.max_step = cfg.get_double("device.max_step", p.max_step);
    p.knee = cfg.get_double("device.knee", p.knee);
    p.asym = cfg.get_double("device.asym", p.asym);
    p.sigma_frac = cfg.get_double("device.sigma_frac", p.sigma_frac);
    p.leak_rate_max = cfg.get_double("device.leak_rate_max", p.leak_rate_max);
    p.leak_downward = cfg.get_bool("device.leak_downward", p.leak_downward);
    p.validate();
    return p;
}

struct SynthArgs {
    int width = 128, height = 128;
    uint32_t duration_us = 100000;
    double rate = 1.0;
    uint64_t seed = 0;
    std::string format = "csv";
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    auto stream = npx::events::synth_events(a.width, a.height, a.duration_us, a.rate, a.seed);
    npx::events::StreamFormat fmt = a.format == "binary"
                                        ? npx::events::StreamFormat::PackedBinary
                                        : npx::events::StreamFormat::Csv;
    npx::events::save_event_stream(stream, a.out, fmt);
    std::printf("synth: %zu events over %u us on %dx%d -> %s\n", stream.events.size(),
                a.duration_us, a.width, a.height, a.out.c_str());
    return 0;
}

struct CalibrateArgs {
    std::string config;
    std::string out;
    uint64_t seed = 0;
    int trials = 1000;
    uint32_t window_us = 100;
};

int cmd_calibrate(const CalibrateArgs& a) {
    npx::Config cfg = npx::Config::load(a.config);
    npx::device::DeviceParams p = device_from_config(cfg);
    std::vector<double> weights = cfg.get_double_list("calib.weights");
    std::vector<uint32_t> counts;
    for (double c : cfg.get_double_list("calib.counts"))
        counts.push_back(static_cast<uint32_t>(c));
    int trials = static_cast<int>(cfg.get_int("calib.trials", a.trials));
    auto grid = npx::device::sample_device_grid(p, weights, counts, trials, a.seed);
    auto model = npx::device::fit_response_poly(grid);
    npx::device::save_model(a.out, p, model, a.window_us);
    std::printf("calibrate: %zu grid points, %d trials/point\n", grid.points.size(), trials);
    std::printf("fit_rmse = %.6f (fraction of vdd)\n", model.fit_rmse);
    std::printf("u_range = [%.4f, %.4f]\n", model.u_min, model.u_max);
    std::printf("model -> %s\n", a.out.c_str());
    return 0;
}

struct SimulateArgs {
    std::string stream_path;
    std::string kernel_config;
    std::string model_path;
    std::string mode = "fitted";
    uint32_t window_us = 1000;
    std::optional<uint64_t> seed;
    std::string out_dir;
};

int cmd_simulate(const SimulateArgs& a) {
    npx::events::EventStream stream = npx::events::load_event_stream(a.stream_path);
    npx::Config kcfg = npx::Config::load(a.kernel_config);
    npx::array::KernelSpec spec = npx::array::load_kernel_spec(kcfg);
    npx::device::ModelFile mf = npx::device::load_model(a.model_path);
    spec.validate(mf.params.vdd);

    npx::array::AreaBudget budget;  // defaults; overridable through the kernel config
    budget.pixel_pitch_um = kcfg.get_double("area.pixel_pitch_um", budget.pixel_pitch_um);
    budget.cu2cu_pitch_um = kcfg.get_double("area.cu2cu_pitch_um", budget.cu2cu_pitch_um);
    budget.stacking_factor = kcfg.get_double("area.stacking_factor", budget.stacking_factor);
    budget.weight_area_um2 = kcfg.get_double("area.weight_um2", budget.weight_area_um2);
    budget.cap_area_um2 = kcfg.get_double("area.cap_um2", budget.cap_area_um2);
    budget.comparator_area_um2 =
        kcfg.get_double("area.comparator_um2", budget.comparator_area_um2);

    npx::array::PixelArray arr =
        npx::array::build_array(stream.width, stream.height, spec, budget);
    npx::array::RunMode mode = a.mode == "transient" ? npx::array::RunMode::Transient
                                                     : npx::array::RunMode::Fitted;
    npx::array::RunResult result =
        npx::array::run_stream(arr, stream, mode, a.window_us, mf.params, &mf.model, a.seed);

    fs::create_directories(a.out_dir);
    npx::array::save_activation_dump((fs::path(a.out_dir) / "activations.npxm").string(),
                                     result.maps);

    npx::aer::AerGeometry geom = npx::aer::AerGeometry::make(
        arr.out_width, arr.out_height, spec.channels, stream.width, stream.height);
    std::vector<npx::aer::EncodedWindow> encoded;
    encoded.reserve(result.maps.size());
    for (const auto& map : result.maps)
        encoded.push_back(npx::aer::encode_window(map, geom));
    npx::aer::write_aer_dump((fs::path(a.out_dir) / "aer.npxa").string(), geom, encoded);

    char buf[128];
    std::string stats = "# npixsim-stats v1\n";
    auto kv = [&](const char* key, const char* fmt, auto v) {
        std::snprintf(buf, sizeof buf, "%s = ", key);
        stats += buf;
        std::snprintf(buf, sizeof buf, fmt, v);
        stats += buf;
        stats += '\n';
    };
    kv("sensor_width", "%d", stream.width);
    kv("sensor_height", "%d", stream.height);
    kv("out_width", "%d", arr.out_width);
    kv("out_height", "%d", arr.out_height);
    kv("channels", "%d", spec.channels);
    kv("window_length_us", "%u", a.window_us);
    kv("windows", "%zu", result.maps.size());
    kv("input_events", "%llu", static_cast<unsigned long long>(result.input_events));
    kv("output_spikes", "%llu", static_cast<unsigned long long>(result.total_spikes));
    double denom = static_cast<double>(arr.sites()) * spec.channels *
                   static_cast<double>(result.maps.size());
    kv("sparsity", "%.17g", denom > 0 ? static_cast<double>(result.total_spikes) / denom : 0.0);
    for (size_t w = 0; w < result.window_spikes.size(); ++w) {
        std::snprintf(buf, sizeof buf, "window.%zu.spikes = %llu\n", w,
                      static_cast<unsigned long long>(result.window_spikes[w]));
        stats += buf;
    }
    write_text((fs::path(a.out_dir) / "stats.txt").string(), stats);

    std::printf("simulate: %zu windows, %llu input events, %llu output spikes -> %s\n",
                result.maps.size(), static_cast<unsigned long long>(result.input_events),
                static_cast<unsigned long long>(result.total_spikes), a.out_dir.c_str());
    return 0;
}

struct EnergyArgs {
    std::string config;
    std::string stats_path;
    std::string out;
};

int cmd_energy(const EnergyArgs& a) {
    npx::Config cfg = npx::Config::load(a.config);
    npx::energy::EnergyConsts consts = npx::energy::load_energy_consts(cfg);
    std::vector<npx::energy::LayerShape> network = npx::energy::load_network(cfg);

    npx::energy::StreamStats stats;
    int sensor_w, sensor_h, out_w, out_h, channels;
    if (!a.stats_path.empty()) {
        npx::Config s = npx::Config::load(a.stats_path);
        stats.n_event_in = static_cast<uint64_t>(s.get_int("input_events"));
        stats.n_event_out = static_cast<uint64_t>(s.get_int("output_spikes"));
        stats.time_steps = static_cast<uint64_t>(s.get_int("windows"));
        sensor_w = static_cast<int>(s.get_int("sensor_width"));
        sensor_h = static_cast<int>(s.get_int("sensor_height"));
        out_w = static_cast<int>(s.get_int("out_width"));
        out_h = static_cast<int>(s.get_int("out_height"));
        channels = static_cast<int>(s.get_int("channels"));
        // Measured first-layer sparsity supersedes the configured assumption.
        double measured = s.get_double("sparsity");
        for (auto& l : network)
            if (l.is_first_layer)
                l.sparsity = measured;
    } else {
        stats.n_event_in = static_cast<uint64_t>(cfg.get_int("energy.n_event_in"));
        stats.n_event_out =
            static_cast<uint64_t>(cfg.get_int("energy.n_event_out", stats.n_event_in));
        stats.time_steps = static_cast<uint64_t>(cfg.get_int("energy.time_steps", 1));
        sensor_w = static_cast<int>(cfg.get_int("energy.sensor_width"));
        sensor_h = static_cast<int>(cfg.get_int("energy.sensor_height"));
        out_w = static_cast<int>(cfg.get_int("energy.out_width"));
        out_h = static_cast<int>(cfg.get_int("energy.out_height"));
        channels = static_cast<int>(cfg.get_int("energy.channels"));
    }
    npx::aer::AerGeometry geom =
        npx::aer::AerGeometry::make(out_w, out_h, channels, sensor_w, sensor_h);
    npx::energy::Comparison cmp = npx::energy::compare(network, stats, geom, consts);
    std::fputs(npx::energy::format_report(cmp).c_str(), stdout);
    if (!a.out.empty())
        write_text(a.out, npx::energy::format_report_kv(cmp));
    return 0;
}

struct VerifyArgs {
    uint64_t seeds = 200;
    uint64_t seed_begin = 0;
    int max_dim = 16;
    int max_channels = 8;
    uint32_t max_count = 8;
    double vth_skew = 0.0;
};

int cmd_verify(const VerifyArgs& a) {
    npx::oracle::EquivalenceOptions opts;
    opts.seed_begin = a.seed_begin;
    opts.seed_count = a.seeds;
    opts.max_dim = a.max_dim;
    opts.max_channels = a.max_channels;
    opts.max_count = a.max_count;
    opts.sim_v_th_offset = a.vth_skew;
    npx::oracle::EquivalenceReport report = npx::oracle::equivalence_report(opts);
    std::printf("%s\n", npx::oracle::format_equivalence_report(report).c_str());
    return report.pass ? 0 : 1;
}

struct AerTraceArgs {
    std::string activations;
    uint32_t window = 0;
    std::string out;
    int sensor_width = 0, sensor_height = 0;
    bool check = false;
};

int cmd_aer_trace(const AerTraceArgs& a) {
    auto maps = npx::array::load_activation_dump(a.activations);
    const npx::array::ActivationMap* map = nullptr;
    for (const auto& m : maps)
        if (m.window_index == a.window)
            map = &m;
    if (!map)
        throw std::runtime_error("window " + std::to_string(a.window) + " not in dump");
    int sw = a.sensor_width > 0 ? a.sensor_width : map->out_width;
    int sh = a.sensor_height > 0 ? a.sensor_height : map->out_height;
    npx::aer::AerGeometry geom =
        npx::aer::AerGeometry::make(map->out_width, map->out_height, map->channels, sw, sh);
    npx::aer::EncodedWindow enc = npx::aer::encode_window(*map, geom);
    write_text(a.out, npx::aer::format_trace(enc.trace));
    std::printf("aer-trace: window %u, %zu words -> %s\n", a.window, enc.words.size(),
                a.out.c_str());
    if (a.check) {
        npx::array::ActivationMap replayed = npx::aer::replay_trace(enc.trace, geom);
        bool ok = replayed.spikes == map->spikes;
        std::printf("replay check: %s\n", ok ? "ok" : "MISMATCH");
        if (!ok)
            return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic simulator for in-pixel analog convolution on DVS event streams"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic Poisson event stream");
    s->add_option("--width", synth.width);
    s->add_option("--height", synth.height);
    s->add_option("--duration-us", synth.duration_us);
    s->add_option("--rate", synth.rate, "events/pixel/ms");
    s->add_option("--seed", synth.seed);
    s->add_option("--format", synth.format)->check(CLI::IsMember({"csv", "binary"}));
    s->add_option("--out", synth.out)->required();

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate", "Fit the cubic response model from Monte-Carlo");
    c->add_option("--config", cal.config)->required();
    c->add_option("--seed", cal.seed);
    c->add_option("--trials", cal.trials);
    c->add_option("--window-us", cal.window_us, "calibration window, recorded in the model file");
    c->add_option("--out", cal.out)->required();

    SimulateArgs sim;
    auto* m = app.add_subcommand("simulate", "Run the reset/convolve/threshold pipeline");
    m->add_option("--stream", sim.stream_path)->required();
    m->add_option("--kernel-config", sim.kernel_config)->required();
    m->add_option("--model", sim.model_path)->required();
    m->add_option("--mode", sim.mode)->check(CLI::IsMember({"fitted", "transient"}));
    m->add_option("--window-us", sim.window_us);
    uint64_t sim_seed = 0;
    auto* seed_opt = m->add_option("--seed", sim_seed, "enable process variation");
    m->add_option("--out", sim.out_dir)->required();

    EnergyArgs en;
    auto* e = app.add_subcommand("energy", "Frontend/backend energy comparison");
    e->add_option("--config", en.config)->required();
    e->add_option("--stats", en.stats_path, "stats.txt from a simulate run");
    e->add_option("--out", en.out, "write machine-readable key-value report");

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "Oracle equivalence check (linear settings)");
    v->add_option("--seeds", ver.seeds);
    v->add_option("--seed-begin", ver.seed_begin);
    v->add_option("--max-dim", ver.max_dim);
    v->add_option("--max-channels", ver.max_channels);
    v->add_option("--max-count", ver.max_count);
    v->add_option("--vth-skew", ver.vth_skew, "fault injection: skew the simulator threshold");

    AerTraceArgs tr;
    auto* t = app.add_subcommand("aer-trace", "Emit the handshake trace for one window");
    t->add_option("--activations", tr.activations)->required();
    t->add_option("--window", tr.window);
    t->add_option("--out", tr.out)->required();
    t->add_option("--sensor-width", tr.sensor_width);
    t->add_option("--sensor-height", tr.sensor_height);
    t->add_flag("--check", tr.check, "replay the trace and compare against the map");

    CLI11_PARSE(app, argc, argv);

    try {
        if (s->parsed())
            return cmd_synth(synth);
        if (c->parsed())
            return cmd_calibrate(cal);
        if (m->parsed()) {
            if (seed_opt->count())
                sim.seed = sim_seed;
            return cmd_simulate(sim);
        }
        if (e->parsed())
            return cmd_energy(en);
        if (v->parsed())
            return cmd_verify(ver);
        if (t->parsed())
            return cmd_aer_trace(tr);
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}
