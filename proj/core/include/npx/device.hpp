#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "npx/rng.hpp"

namespace npx::device {

// Analog accumulation element: weight transistor pair driving a kernel
// capacitor between the rails. All voltages in volts, rates in V/ms.
struct DeviceParams {
    double vdd = 0.8;
    double max_step = 0.025;      // step at |w| = 1, full headroom
    double knee = 0.1;            // headroom below which the step rolls off
    double asym = 0.9;            // negative-step magnitude relative to positive
    double sigma_frac = 0.05;     // per-step sigma as fraction of the step (3-sigma corner)
    double leak_rate_max = 0.022; // residual drift, worst-case kernel, V per ms
    bool leak_downward = true;

    double v_reset() const { return 0.5 * vdd; }
    void validate() const;
};

// Ideal (voltage-independent) step.
double ideal_step(double w, const DeviceParams& p);

// Voltage-dependent step: the ideal step scaled by min(1, headroom/knee)
// where headroom is the distance to the rail the step is pushing toward,
// then clamped so the capacitor never leaves [0, vdd].
double nonlinear_step(double w, double v, const DeviceParams& p);

// Residual drift magnitude after nulling, linear in the kernel's weight
// magnitude sum and in time. Direction is p.leak_downward.
double leak_drift(double kernel_weight_sum, double max_weight_sum,
                  uint32_t duration_us, const DeviceParams& p);

struct DeviceSampleGrid {
    struct Point {
        double weight = 0;
        uint32_t n_events = 0;
        std::vector<double> delta_v;  // one total per trial
        double mean() const;
        double stddev() const;  // sample standard deviation
    };
    std::vector<Point> points;
    int trials = 0;
    double vdd = 0;
};

// Monte-Carlo transient sampling over a (weight x event-count) grid: each
// trial applies n sequential nonlinear steps from v_reset, each multiplied
// by (1 + g), g ~ N(0, sigma_frac) clipped to +-3 sigma. Deterministic per
// seed; trial streams are independent.
DeviceSampleGrid sample_device_grid(const DeviceParams& p, const std::vector<double>& weights,
                                    const std::vector<uint32_t>& event_counts, int trials,
                                    uint64_t seed);

// Cubic response surrogate in the single variable u = weight * event count.
struct ResponseModel {
    std::array<double, 4> mean_coeffs{};  // constant term first
    std::array<double, 4> std_coeffs{};
    double fit_rmse = 0;  // mean |fit - empirical mean| / vdd over grid points
    double u_min = 0;
    double u_max = 0;

    double mean_at(double u) const;
    double std_at(double u) const;  // clamped >= 0
    bool in_range(double u) const;
};

// Least-squares cubic fits of per-point means and standard deviations over
// u. Requires >= 8 distinct u values spanning negative and positive u.
ResponseModel fit_response_poly(const DeviceSampleGrid& grid);

// Surrogate evaluation at u = w*n. With an rng, draws Gaussian(mean, std)
// truncated to [mean - std, mean + std]; without, returns the mean.
// u outside the fitted range is an error, not an extrapolation.
double eval_response(const ResponseModel& m, double w, uint32_t n, Rng* rng);

// Model file: versioned human-readable key-value carrying the device
// parameters and the fitted response model together.
void save_model(const std::string& path, const DeviceParams& p, const ResponseModel& m,
                uint32_t calib_window_us);
struct ModelFile {
    DeviceParams params;
    ResponseModel model;
    uint32_t calib_window_us = 0;
};
ModelFile load_model(const std::string& path);

}  // namespace npx::device
