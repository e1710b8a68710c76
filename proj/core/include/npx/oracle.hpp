#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "npx/array.hpp"

namespace npx::oracle {

// Ideal-device reference configuration. Mirrors the kernel layout but the
// evaluation below shares no code with the array pipeline.
struct OracleConfig {
    int k = 3;
    int stride = 2;
    int channels = 1;
    std::vector<double> weights;  // [channel][ky][kx][polarity], 0=OFF 1=ON
    double step = 0.025;          // volts per unit weight per event
    double asym = 1.0;
    double v_reset = 0.4;
    double v_th = 0.45;
    double vdd = 0.8;
    bool inclusive_threshold = false;
};

// Brute-force windowed convolution + threshold by direct nested summation
// over counts. Order-free and state-free.
array::ActivationMap ideal_conv_threshold(int width, int height,
                                          const std::vector<uint32_t>& counts,
                                          const OracleConfig& cfg);

struct EquivalenceOptions {
    uint64_t seed_begin = 0;
    uint64_t seed_count = 100;
    int max_dim = 16;        // sensor side bound
    int max_channels = 8;
    uint32_t max_count = 8;  // per pixel per polarity per window
    // Fault-injection hook: offset applied to the simulator's threshold
    // only, so oracle and simulator disagree when nonzero.
    double sim_v_th_offset = 0.0;
};

struct Counterexample {
    uint64_t seed = 0;
    int x = 0;
    int y = 0;
    int channel = 0;
    std::string mode;  // "transient" or "fitted"
};

struct EquivalenceReport {
    bool pass = true;
    uint64_t seeds_run = 0;
    std::optional<Counterexample> first_failure;
};

// Randomized cross-validation of both simulator modes against the oracle
// under linear, deterministic device settings. Stops at the first mismatch.
EquivalenceReport equivalence_report(const EquivalenceOptions& opts);

std::string format_equivalence_report(const EquivalenceReport& report);

}  // namespace npx::oracle
