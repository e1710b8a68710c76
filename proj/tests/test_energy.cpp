#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "npx/config.hpp"
#include "npx/energy.hpp"

using namespace npx::energy;

namespace {

LayerShape first_layer() {
    LayerShape l;
    l.h_o = 63;
    l.w_o = 63;
    l.k = 3;
    l.c_i = 2;
    l.c_o = 32;
    l.sparsity = 1.0;
    l.is_first_layer = true;
    return l;
}

npx::aer::AerGeometry gesture_geometry() {
    return npx::aer::AerGeometry::make(63, 63, 32, 128, 128);
}

}  // namespace

TEST_CASE("n_ac: unit shape, gesture first layer, linear in c_o") {
    LayerShape unit;
    CHECK(n_ac(unit) == 1);
    CHECK(n_ac(first_layer()) == 2286144);
    LayerShape twice = first_layer();
    twice.c_o *= 2;
    CHECK(n_ac(twice) == 2 * n_ac(first_layer()));
}

TEST_CASE("n_read: depends only on k, c_i, c_o") {
    LayerShape unit;
    CHECK(n_read(unit) == 1);
    CHECK(n_read(first_layer()) == 576);
    LayerShape wide = first_layer();
    wide.h_o = 1;
    wide.w_o = 1;
    CHECK(n_read(wide) == 576);
}

TEST_CASE("frontend: zero events leaves only sensing energy") {
    EnergyConsts c;
    CHECK(frontend_energy(0, gesture_geometry(), c, Mode::P2m) == doctest::Approx(26.588e-3));
    CHECK(frontend_energy(0, gesture_geometry(), c, Mode::Baseline) ==
          doctest::Approx(26.032e-3));
}

TEST_CASE("frontend: communication term scales with the address width (15 vs 12 bits)") {
    EnergyConsts c;
    auto g = gesture_geometry();
    uint64_t n = 1000000;
    double base_comm = frontend_energy(n, g, c, Mode::Baseline) - 26.032e-3;
    double p2m_comm = frontend_energy(n, g, c, Mode::P2m) - 26.588e-3;
    CHECK(base_comm / p2m_comm == doctest::Approx(15.0 / 12.0));
    CHECK(base_comm == doctest::Approx(4.1e-12 * 1e6 * 15));
}

TEST_CASE("frontend: analytic sensing path when no lumped value is configured") {
    EnergyConsts c;
    c.e_sens_base.reset();
    c.e_event = 2e-9;
    c.e_bias = 1e-3;
    auto g = gesture_geometry();
    double e = frontend_energy(500, g, c, Mode::Baseline);
    CHECK(e == doctest::Approx(2e-9 * 500 + 1e-3 + 4.1e-12 * 500 * 15));
}

TEST_CASE("backend: baseline first layer uses MACs at s=1; in-pixel drops it") {
    EnergyConsts c;
    std::vector<LayerShape> net = {first_layer()};
    BackendReport base = backend_energy(net, 1, c, Mode::Baseline);
    double expect = 2286144.0 * 1.568e-12 + 576 * c.e_read;
    CHECK(base.total == doctest::Approx(expect));
    CHECK(base.total == doctest::Approx(3.585e-6 + 576 * c.e_read).epsilon(1e-3));

    BackendReport p2m = backend_energy(net, 1, c, Mode::P2m);
    CHECK(p2m.total == 0.0);
    CHECK(p2m.per_layer[0] == 0.0);
}

TEST_CASE("backend: later layers scale with sparsity and T; reads do not") {
    EnergyConsts c;
    LayerShape l;
    l.h_o = l.w_o = 10;
    l.k = 3;
    l.c_i = 8;
    l.c_o = 16;
    l.sparsity = 0.25;
    std::vector<LayerShape> net = {l};
    BackendReport t1 = backend_energy(net, 1, c, Mode::Baseline);
    BackendReport t4 = backend_energy(net, 4, c, Mode::Baseline);
    double read = c.e_read * static_cast<double>(n_read(l));
    CHECK(t4.total - read == doctest::Approx(4.0 * (t1.total - read)));
    CHECK(t1.total ==
          doctest::Approx(c.e_ac * n_ac(l) * 0.25 + read));
}

TEST_CASE("mac/ac ratio as reported") {
    EnergyConsts c;
    CHECK(c.e_mac / c.e_ac == doctest::Approx(52.2667).epsilon(1e-4));
    CHECK(kFixedPointMacAcRatio == 32.0);
}

TEST_CASE("compare: sensing ratio and first-layer share on a dominated network") {
    EnergyConsts c;
    std::vector<LayerShape> net = {first_layer()};
    LayerShape rest;
    rest.h_o = rest.w_o = 31;
    rest.k = 3;
    rest.c_i = 32;
    rest.c_o = 32;
    rest.sparsity = 0.25;
    net.push_back(rest);

    StreamStats stats;
    stats.n_event_in = 100000;
    stats.n_event_out = 40000;
    stats.time_steps = 16;
    Comparison cmp = compare(net, stats, gesture_geometry(), c);
    CHECK(cmp.sensing_ratio == doctest::Approx(26.588 / 26.032));
    CHECK(cmp.sensing_ratio == doctest::Approx(1.021).epsilon(5e-3));
    CHECK(cmp.first_layer_share > 0.5);
    CHECK(cmp.first_layer_dominates);
    CHECK(cmp.backend_baseline > cmp.backend_p2m);
    CHECK(cmp.mac_ac_ratio == doctest::Approx(52.2667).epsilon(1e-4));
}

TEST_CASE("compare: zero-event stream reduces the frontend ratio to the sensing ratio") {
    EnergyConsts c;
    std::vector<LayerShape> net = {first_layer()};
    StreamStats stats;
    stats.n_event_in = 0;
    stats.n_event_out = 0;
    stats.time_steps = 1;
    Comparison cmp = compare(net, stats, gesture_geometry(), c);
    CHECK(cmp.frontend_ratio == doctest::Approx(26.588 / 26.032));
}

TEST_CASE("structural inequality: in-pixel backend is lower whenever a first layer exists") {
    EnergyConsts c;
    npx::Rng* unused = nullptr;
    (void)unused;
    for (int i = 1; i <= 5; ++i) {
        std::vector<LayerShape> net = {first_layer()};
        LayerShape rest;
        rest.h_o = rest.w_o = 8 * i;
        rest.k = 3;
        rest.c_i = 16;
        rest.c_o = 16;
        rest.sparsity = 0.1 * i;
        net.push_back(rest);
        BackendReport base = backend_energy(net, 8, c, Mode::Baseline);
        BackendReport p2m = backend_energy(net, 8, c, Mode::P2m);
        CHECK(p2m.total < base.total);
    }
}

TEST_CASE("homogeneity: scaling all constants scales every total") {
    EnergyConsts c;
    EnergyConsts scaled = c;
    const double alpha = 3.5;
    scaled.e_event *= alpha;
    scaled.e_bias *= alpha;
    scaled.e_sens_to_tx *= alpha;
    scaled.e_tx *= alpha;
    scaled.e_mac *= alpha;
    scaled.e_ac *= alpha;
    scaled.e_read *= alpha;
    scaled.e_sens_p2m = *c.e_sens_p2m * alpha;
    scaled.e_sens_base = *c.e_sens_base * alpha;

    std::vector<LayerShape> net = {first_layer()};
    LayerShape rest;
    rest.h_o = rest.w_o = 16;
    rest.k = 3;
    rest.c_i = 32;
    rest.c_o = 64;
    rest.sparsity = 0.3;
    net.push_back(rest);
    StreamStats stats;
    stats.n_event_in = 12345;
    stats.n_event_out = 6789;
    stats.time_steps = 7;

    Comparison a = compare(net, stats, gesture_geometry(), c);
    Comparison b = compare(net, stats, gesture_geometry(), scaled);
    CHECK(b.frontend_baseline == doctest::Approx(alpha * a.frontend_baseline));
    CHECK(b.frontend_p2m == doctest::Approx(alpha * a.frontend_p2m));
    CHECK(b.backend_baseline == doctest::Approx(alpha * a.backend_baseline));
    CHECK(b.backend_p2m == doctest::Approx(alpha * a.backend_p2m));
    CHECK(b.backend_ratio == doctest::Approx(a.backend_ratio));
}

TEST_CASE("ratio mechanism: first-layer MAC energy >= other terms implies ratio >= 2") {
    EnergyConsts c;
    for (double s : {0.1, 0.3, 0.5}) {
        std::vector<LayerShape> net = {first_layer()};
        LayerShape rest;
        rest.h_o = rest.w_o = 20;
        rest.k = 3;
        rest.c_i = 32;
        rest.c_o = 32;
        rest.sparsity = s;
        net.push_back(rest);
        BackendReport base = backend_energy(net, 10, c, Mode::Baseline);
        BackendReport p2m = backend_energy(net, 10, c, Mode::P2m);
        if (base.first_layer >= base.total - base.first_layer)
            CHECK(base.total / p2m.total >= 2.0);
    }
}

TEST_CASE("network config parsing") {
    npx::Config cfg = npx::Config::from_string(
        "layer = 63 63 3 2 32 1.0 first\n"
        "layer = 31 31 3 32 64 0.4 rest\n");
    auto net = load_network(cfg);
    REQUIRE(net.size() == 2);
    CHECK(net[0].is_first_layer);
    CHECK_FALSE(net[1].is_first_layer);
    CHECK(net[1].c_o == 64);
    CHECK(net[1].sparsity == doctest::Approx(0.4));
    CHECK_THROWS_AS(load_network(npx::Config::from_string("layer = 1 2 3\n")),
                    npx::ConfigError);
    CHECK_THROWS_AS(load_network(npx::Config::from_string("x = 1\n")), npx::ConfigError);
}

TEST_CASE("invalid shapes and sparsities are rejected") {
    LayerShape bad;
    bad.h_o = 0;
    CHECK_THROWS_AS(n_ac(bad), std::invalid_argument);
    LayerShape l;
    l.sparsity = 1.5;
    EnergyConsts c;
    CHECK_THROWS_AS(backend_energy({l}, 1, c, Mode::Baseline), std::invalid_argument);
}
