#include <doctest.h>

#include <stdexcept>

#include "npx/oracle.hpp"
#include "npx/rng.hpp"

using namespace npx::oracle;
using npx::events::Polarity;

namespace {

OracleConfig simple_config(int k, int stride, int channels) {
    OracleConfig cfg;
    cfg.k = k;
    cfg.stride = stride;
    cfg.channels = channels;
    cfg.weights.assign(static_cast<size_t>(channels) * k * k * 2, 0.0);
    cfg.step = 0.01;
    cfg.v_reset = 0.4;
    cfg.v_th = 0.45;
    cfg.vdd = 0.8;
    return cfg;
}

}  // namespace

TEST_CASE("zero counts produce an all-zero map when v_th > v_reset") {
    OracleConfig cfg = simple_config(3, 2, 2);
    std::vector<uint32_t> counts(8 * 8 * 2, 0);
    auto map = ideal_conv_threshold(8, 8, counts, cfg);
    CHECK(map.spike_count() == 0);
    CHECK(map.out_width == 3);
    CHECK(map.out_height == 3);
}

TEST_CASE("a single tap pushing past threshold spikes exactly one site") {
    OracleConfig cfg = simple_config(3, 3, 1);
    cfg.weights[((0 * 3 + 0) * 3 + 0) * 2 + 1] = 1.0;  // (ky=0, kx=0, ON)
    std::vector<uint32_t> counts(3 * 3 * 2, 0);
    counts[npx::events::WindowedCounts::index(3, 0, 0, Polarity::On)] = 6;  // +60 mV
    auto map = ideal_conv_threshold(3, 3, counts, cfg);
    CHECK(map.spike_count() == 1);
    CHECK(map.at(0, 0, 0));

    counts[npx::events::WindowedCounts::index(3, 0, 0, Polarity::On)] = 4;  // +40 mV, at v_th
    auto none = ideal_conv_threshold(3, 3, counts, cfg);
    CHECK(none.spike_count() == 0);  // strict threshold, 0.44 < 0.45
}

TEST_CASE("shape mismatch is rejected") {
    OracleConfig cfg = simple_config(3, 1, 1);
    std::vector<uint32_t> counts(7, 0);
    CHECK_THROWS_AS(ideal_conv_threshold(8, 8, counts, cfg), std::invalid_argument);
}

TEST_CASE("oracle clamps to the rails before thresholding") {
    OracleConfig cfg = simple_config(1, 1, 1);
    cfg.weights[1] = 1.0;  // ON tap
    cfg.step = 0.05;
    cfg.v_th = 0.79;
    std::vector<uint32_t> counts(2, 0);
    counts[1] = 100;  // would reach 5.4 V unclamped
    auto map = ideal_conv_threshold(1, 1, counts, cfg);
    CHECK(map.at(0, 0, 0));  // clamped to vdd = 0.8 > 0.79
}

TEST_CASE("equivalence over 100 random instances under linear settings") {
    EquivalenceOptions opts;
    opts.seed_count = 100;
    EquivalenceReport report = equivalence_report(opts);
    CHECK(report.pass);
    CHECK(report.seeds_run == 100);
    CHECK_FALSE(report.first_failure.has_value());
}

TEST_CASE("an injected threshold skew is caught with a counterexample") {
    EquivalenceOptions opts;
    opts.seed_count = 50;
    opts.sim_v_th_offset = 0.015;
    EquivalenceReport report = equivalence_report(opts);
    CHECK_FALSE(report.pass);
    REQUIRE(report.first_failure.has_value());
    CHECK(report.first_failure->seed >= 0);
    CHECK(!report.first_failure->mode.empty());
}

TEST_CASE("zero seeds is a vacuous pass") {
    EquivalenceOptions opts;
    opts.seed_count = 0;
    EquivalenceReport report = equivalence_report(opts);
    CHECK(report.pass);
    CHECK(report.seeds_run == 0);
}
