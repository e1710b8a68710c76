#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "npx/aer.hpp"

namespace npx {
class Config;
}

namespace npx::energy {

// Per-operation energy constants. Communication is accounted per bit; the
// sens-to-tx / tx split is not observable in any result (only the sum
// enters the model), so the default splits the measured 4.1 pJ/bit evenly.
struct EnergyConsts {
    double e_event = 0;            // J per sensed event
    double e_bias = 0;             // J, array biasing over the stream duration
    double e_sens_to_tx = 2.05e-12;  // J/bit, sensor to transmitter
    double e_tx = 2.05e-12;          // J/bit, wireless transmit
    double e_mac = 1.568e-12;        // J per multiply-accumulate
    double e_ac = 0.03e-12;          // J per accumulate
    double e_read = 2.5e-12;         // J per parameter read
    // Lumped per-dataset sensing energies; when set they take precedence
    // over the analytic e_event*N + E_bias decomposition.
    std::optional<double> e_sens_p2m = 26.588e-3;
    std::optional<double> e_sens_base = 26.032e-3;

    double e_comm() const { return e_sens_to_tx + e_tx; }
};

// Reference ratio of a 32-bit fixed-point MAC to an add, quoted alongside
// the measured e_mac/e_ac when reporting.
inline constexpr double kFixedPointMacAcRatio = 32.0;

struct LayerShape {
    int h_o = 1;
    int w_o = 1;
    int c_i = 1;
    int c_o = 1;
    int k = 1;
    double sparsity = 1.0;
    bool is_first_layer = false;
};

uint64_t n_ac(const LayerShape& layer);
uint64_t n_read(const LayerShape& layer);

enum class Mode { Baseline, P2m };

// Sensing plus per-bit communication. Baseline events carry full sensor
// addresses and a polarity bit; in-pixel outputs carry reduced addresses.
double frontend_energy(uint64_t n_event, const aer::AerGeometry& geometry,
                       const EnergyConsts& c, Mode mode);

struct BackendReport {
    double total = 0;
    std::vector<double> per_layer;
    double first_layer = 0;
};

// Baseline computes the first layer with MACs at s = 1; the in-pixel mode
// drops that layer entirely (it is computed during sensing).
BackendReport backend_energy(const std::vector<LayerShape>& layers, uint64_t time_steps,
                             const EnergyConsts& c, Mode mode);

struct StreamStats {
    uint64_t n_event_in = 0;   // DVS events off the sensor (baseline traffic)
    uint64_t n_event_out = 0;  // first-layer activation spikes (in-pixel traffic)
    uint64_t time_steps = 1;
};

struct Comparison {
    double frontend_baseline = 0;
    double frontend_p2m = 0;
    double backend_baseline = 0;
    double backend_p2m = 0;
    BackendReport backend_baseline_layers;
    BackendReport backend_p2m_layers;
    double frontend_ratio = 0;           // p2m / baseline
    double backend_ratio = 0;            // baseline / p2m
    double sensing_ratio = 0;            // lumped or analytic sensing, p2m / baseline
    double first_layer_share = 0;        // of baseline backend
    bool first_layer_dominates = false;  // share > 50%
    double mac_ac_ratio = 0;
    double mac_ac_ratio_fixed_point_ref = kFixedPointMacAcRatio;
};

Comparison compare(const std::vector<LayerShape>& network, const StreamStats& stats,
                   const aer::AerGeometry& geometry, const EnergyConsts& c);

// Config loading: energy.* scalar keys plus repeated `layer` entries of the
// form `h_o w_o k c_i c_o sparsity first|rest`.
EnergyConsts load_energy_consts(const npx::Config& cfg);
std::vector<LayerShape> load_network(const npx::Config& cfg);

std::string format_report(const Comparison& cmp);     // human-readable table
std::string format_report_kv(const Comparison& cmp);  // machine-readable key-value

}  // namespace npx::energy
