#include "npx/energy.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "npx/config.hpp"

namespace npx::energy {

uint64_t n_ac(const LayerShape& l) {
    if (l.h_o < 1 || l.w_o < 1 || l.c_i < 1 || l.c_o < 1 || l.k < 1)
        throw std::invalid_argument("layer dimensions must be >= 1");
    return static_cast<uint64_t>(l.h_o) * l.w_o * l.k * l.k * l.c_i * l.c_o;
}

uint64_t n_read(const LayerShape& l) {
    if (l.c_i < 1 || l.c_o < 1 || l.k < 1)
        throw std::invalid_argument("layer dimensions must be >= 1");
    return static_cast<uint64_t>(l.k) * l.k * l.c_i * l.c_o;
}

namespace {

double sensing_energy(const EnergyConsts& c, Mode mode, uint64_t n_event) {
    const std::optional<double>& lumped =
        mode == Mode::P2m ? c.e_sens_p2m : c.e_sens_base;
    if (lumped)
        return *lumped;
    return c.e_event * static_cast<double>(n_event) + c.e_bias;
}

}  // namespace

double frontend_energy(uint64_t n_event, const aer::AerGeometry& geometry, const EnergyConsts& c,
                       Mode mode) {
    int bits = mode == Mode::P2m ? geometry.per_event_bits : geometry.baseline_bits;
    return sensing_energy(c, mode, n_event) +
           c.e_comm() * static_cast<double>(n_event) * static_cast<double>(bits);
}

BackendReport backend_energy(const std::vector<LayerShape>& layers, uint64_t time_steps,
                             const EnergyConsts& c, Mode mode) {
    BackendReport report;
    for (const LayerShape& l : layers) {
        if (l.sparsity < 0 || l.sparsity > 1)
            throw std::invalid_argument("layer sparsity must lie in [0, 1]");
        double e = 0;
        if (l.is_first_layer && mode == Mode::P2m) {
            // Computed in-pixel: no backend accumulates and no parameter
            // reads for this layer.
        } else if (l.is_first_layer) {
            // Multi-bit inputs: full MACs at s = 1.
            e = c.e_mac * static_cast<double>(n_ac(l)) * static_cast<double>(time_steps) +
                c.e_read * static_cast<double>(n_read(l));
        } else {
            e = c.e_ac * static_cast<double>(n_ac(l)) * l.sparsity *
                    static_cast<double>(time_steps) +
                c.e_read * static_cast<double>(n_read(l));
        }
        report.per_layer.push_back(e);
        if (l.is_first_layer)
            report.first_layer += e;
        report.total += e;
    }
    return report;
}

Comparison compare(const std::vector<LayerShape>& network, const StreamStats& stats,
                   const aer::AerGeometry& geometry, const EnergyConsts& c) {
    Comparison cmp;
    cmp.frontend_baseline = frontend_energy(stats.n_event_in, geometry, c, Mode::Baseline);
    cmp.frontend_p2m = frontend_energy(stats.n_event_out, geometry, c, Mode::P2m);
    cmp.backend_baseline_layers = backend_energy(network, stats.time_steps, c, Mode::Baseline);
    cmp.backend_p2m_layers = backend_energy(network, stats.time_steps, c, Mode::P2m);
    cmp.backend_baseline = cmp.backend_baseline_layers.total;
    cmp.backend_p2m = cmp.backend_p2m_layers.total;
    cmp.frontend_ratio =
        cmp.frontend_baseline > 0 ? cmp.frontend_p2m / cmp.frontend_baseline : 0;
    cmp.backend_ratio = cmp.backend_p2m > 0 ? cmp.backend_baseline / cmp.backend_p2m : 0;
    double sens_base = sensing_energy(c, Mode::Baseline, stats.n_event_in);
    double sens_p2m = sensing_energy(c, Mode::P2m, stats.n_event_out);
    cmp.sensing_ratio = sens_base > 0 ? sens_p2m / sens_base : 0;
    cmp.first_layer_share = cmp.backend_baseline > 0
                                ? cmp.backend_baseline_layers.first_layer / cmp.backend_baseline
                                : 0;
    cmp.first_layer_dominates = cmp.first_layer_share > 0.5;
    cmp.mac_ac_ratio = c.e_ac > 0 ? c.e_mac / c.e_ac : 0;
    return cmp;
}

EnergyConsts load_energy_consts(const npx::Config& cfg) {
    EnergyConsts c;
    c.e_event = cfg.get_double("energy.e_event", c.e_event);
    c.e_bias = cfg.get_double("energy.e_bias", c.e_bias);
    c.e_sens_to_tx = cfg.get_double("energy.e_sens_to_tx", c.e_sens_to_tx);
    c.e_tx = cfg.get_double("energy.e_tx", c.e_tx);
    c.e_mac = cfg.get_double("energy.e_mac", c.e_mac);
    c.e_ac = cfg.get_double("energy.e_ac", c.e_ac);
    c.e_read = cfg.get_double("energy.e_read", c.e_read);
    if (cfg.has("energy.e_sens_p2m"))
        c.e_sens_p2m = cfg.get_double("energy.e_sens_p2m");
    if (cfg.has("energy.e_sens_base"))
        c.e_sens_base = cfg.get_double("energy.e_sens_base");
    return c;
}

std::vector<LayerShape> load_network(const npx::Config& cfg) {
    std::vector<LayerShape> layers;
    for (const std::string& line : cfg.get_all("layer")) {
        std::istringstream in(line);
        LayerShape l;
        std::string kind;
        if (!(in >> l.h_o >> l.w_o >> l.k >> l.c_i >> l.c_o >> l.sparsity >> kind))
            throw ConfigError("layer entry must be 'h_o w_o k c_i c_o sparsity first|rest': '" +
                              line + "'");
        if (kind == "first")
            l.is_first_layer = true;
        else if (kind != "rest")
            throw ConfigError("layer kind must be 'first' or 'rest', got '" + kind + "'");
        layers.push_back(l);
    }
    if (layers.empty())
        throw ConfigError("network config has no 'layer' entries");
    return layers;
}

std::string format_report(const Comparison& cmp) {
    char buf[256];
    std::string out;
    auto line = [&](const char* fmt, auto... args) {
        std::snprintf(buf, sizeof buf, fmt, args...);
        out += buf;
        out += '\n';
    };
    line("%s", "energy comparison (J)");
    line("  %-22s %14s %14s", "", "baseline", "in-pixel");
    line("  %-22s %14.6e %14.6e", "frontend", cmp.frontend_baseline, cmp.frontend_p2m);
    line("  %-22s %14.6e %14.6e", "backend", cmp.backend_baseline, cmp.backend_p2m);
    line("  frontend ratio (p2m/base)  %.4f", cmp.frontend_ratio);
    line("  sensing ratio  (p2m/base)  %.4f", cmp.sensing_ratio);
    line("  backend ratio  (base/p2m)  %.4f", cmp.backend_ratio);
    line("  first-layer share of baseline backend  %.1f%%%s", 100.0 * cmp.first_layer_share,
         cmp.first_layer_dominates ? "  (> 50%)" : "");
    line("  e_mac/e_ac  %.1f  (32-bit fixed-point reference ~%.0fx)", cmp.mac_ac_ratio,
         cmp.mac_ac_ratio_fixed_point_ref);
    return out;
}

std::string format_report_kv(const Comparison& cmp) {
    char buf[128];
    std::string out = "# npixsim-energy v1\n";
    auto kv = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
        out += buf;
    };
    kv("frontend.baseline", cmp.frontend_baseline);
    kv("frontend.p2m", cmp.frontend_p2m);
    kv("backend.baseline", cmp.backend_baseline);
    kv("backend.p2m", cmp.backend_p2m);
    kv("frontend.ratio", cmp.frontend_ratio);
    kv("sensing.ratio", cmp.sensing_ratio);
    kv("backend.ratio", cmp.backend_ratio);
    kv("first_layer.share", cmp.first_layer_share);
    out += std::string("first_layer.dominates = ") + (cmp.first_layer_dominates ? "1" : "0") + "\n";
    kv("mac_ac.ratio", cmp.mac_ac_ratio);
    kv("mac_ac.fixed_point_ref", cmp.mac_ac_ratio_fixed_point_ref);
    for (size_t i = 0; i < cmp.backend_baseline_layers.per_layer.size(); ++i) {
        std::snprintf(buf, sizeof buf, "layer.%zu.baseline = %.17g\n", i + 1,
                      cmp.backend_baseline_layers.per_layer[i]);
        out += buf;
        std::snprintf(buf, sizeof buf, "layer.%zu.p2m = %.17g\n", i + 1,
                      cmp.backend_p2m_layers.per_layer[i]);
        out += buf;
    }
    return out;
}

}  // namespace npx::energy
