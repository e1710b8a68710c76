#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "npx/device.hpp"
#include "npx/events.hpp"

namespace npx {
class Config;
}

namespace npx::array {

// First-layer kernel mapped onto the pixel array. Weights are normalized
// transistor strengths in [-1, 1], laid out [channel][ky][kx][polarity]
// with polarity 0 = OFF, 1 = ON.
struct KernelSpec {
    int k = 3;
    int stride = 2;
    int channels = 1;
    double v_th = 0.45;
    // Comparator convention at exact equality; default is strict `>`.
    bool inclusive_threshold = false;
    std::vector<double> weights;

    double weight(int c, int ky, int kx, events::Polarity pol) const {
        return weights[((static_cast<size_t>(c) * k + ky) * k + kx) * 2 +
                       static_cast<size_t>(pol)];
    }
    double weight_magnitude_sum(int c) const;
    void validate(double vdd) const;
};

// Bottom-die area model. Constants are calibrated so the published channel
// capacities for a 3x3 kernel (128 at stride 2, 32 at stride 1) come out of
// the budget arithmetic exactly; the individual element areas beyond that
// are declared approximations.
struct AreaBudget {
    double pixel_pitch_um = 40.0;
    double cu2cu_pitch_um = 1.0;    // two interconnects per pixel (ON/OFF)
    double stacking_factor = 1.0;   // bottom-die area per unit top-die area
    double weight_area_um2 = 1.0;   // one weight transistor
    double cap_area_um2 = 23.5;     // accumulation capacitor (~47% of a channel)
    double comparator_area_um2 = 8.5;

    double per_site_area_um2(int stride) const;
    double per_channel_area_um2(int k) const;
};

int max_channels(int k, int stride, const AreaBudget& budget = {});

struct PixelArray {
    int sensor_width = 0;
    int sensor_height = 0;
    KernelSpec spec;
    AreaBudget budget;
    int out_width = 0;
    int out_height = 0;

    size_t sites() const { return static_cast<size_t>(out_width) * out_height; }
    size_t site_channels() const { return sites() * spec.channels; }
};

struct AreaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

PixelArray build_array(int sensor_width, int sensor_height, KernelSpec spec,
                       AreaBudget budget = {});

// Per (output site, channel) capacitor voltages, index (y*out_w + x)*C + c.
struct KernelState {
    int out_width = 0;
    int out_height = 0;
    int channels = 0;
    std::vector<double> v;

    double& at(int x, int y, int c) {
        return v[(static_cast<size_t>(y) * out_width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return v[(static_cast<size_t>(y) * out_width + x) * channels + c];
    }
};

struct ActivationMap {
    uint32_t window_index = 0;
    int out_width = 0;
    int out_height = 0;
    int channels = 0;
    std::vector<uint8_t> spikes;  // 0/1, index (y*out_w + x)*C + c

    bool at(int x, int y, int c) const {
        return spikes[(static_cast<size_t>(y) * out_width + x) * channels + c] != 0;
    }
    uint64_t spike_count() const;
};

KernelState make_state(const PixelArray& array);

// Precharge every kernel capacitor to 0.5*vdd. Idempotent.
void reset_phase(KernelState& state, const device::DeviceParams& p);

// Per-step process variation for transient mode: independent per-site
// gaussian streams derived from (seed, window, site, channel).
struct Variation {
    uint64_t seed = 0;
    uint32_t window = 0;
};

// Apply a window's events in timestamp order through the voltage-dependent
// step model; end-of-window residual leakage per channel. Expects a freshly
// reset state.
void convolve_window_transient(const PixelArray& array,
                               const std::vector<events::DvsEvent>& window_events,
                               const device::DeviceParams& p, KernelState& state,
                               const Variation* variation = nullptr,
                               uint32_t window_length_us = 0);

// Per-window surrogate evaluation: one response-model lookup per kernel tap
// from the window's count grid, summed per (site, channel).
void convolve_window_fitted(const PixelArray& array, const std::vector<uint32_t>& counts,
                            const device::DeviceParams& p, const device::ResponseModel& m,
                            KernelState& state, const Variation* variation = nullptr);

ActivationMap threshold_phase(const KernelState& state, const KernelSpec& spec);

enum class RunMode { Transient, Fitted };

struct RunResult {
    std::vector<ActivationMap> maps;
    std::vector<uint64_t> window_spikes;
    uint64_t total_spikes = 0;
    uint64_t input_events = 0;
};

// Full pipeline: reset -> convolve -> threshold per window; no state carries
// across windows. `seed` enables process variation; nullopt is deterministic.
RunResult run_stream(const PixelArray& array, const events::EventStream& stream, RunMode mode,
                     uint32_t window_length_us, const device::DeviceParams& p,
                     const device::ResponseModel* model, std::optional<uint64_t> seed);

// Weight tensor file: 32-byte header of eight little-endian u32 values
// (magic "NPXW", channels, k_h, k_w, polarities, three reserved zeros),
// then float32 weights in [channel][ky][kx][polarity] order.
void save_weights(const std::string& path, const KernelSpec& spec);
std::vector<double> load_weights(const std::string& path, int channels, int k);

// Activation dump: 16-byte header (magic "NPXM", u16 version, u16 out_width,
// u16 out_height, u16 channels, u32 window_count, little-endian), then per
// window a u32 index, u32 spike count, and ceil(H*W*C/8) bytes of LSB-first
// site bits in (y, x, channel) order.
void save_activation_dump(const std::string& path, const std::vector<ActivationMap>& maps);
std::vector<ActivationMap> load_activation_dump(const std::string& path);

// Kernel config keys: kernel.k, kernel.stride, kernel.channels, kernel.v_th,
// kernel.weights_file, kernel.inclusive_threshold.
KernelSpec load_kernel_spec(const npx::Config& cfg);

}  // namespace npx::array
