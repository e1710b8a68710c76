#include "npx/device.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace npx::device {

namespace {

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

double poly3(const std::array<double, 4>& c, double u) {
    return c[0] + u * (c[1] + u * (c[2] + u * c[3]));
}

// Least-squares cubic via 4x4 normal equations, partial-pivot elimination.
std::array<double, 4> cubic_lsq(const std::vector<double>& u, const std::vector<double>& y) {
    double a[4][5] = {};
    for (size_t i = 0; i < u.size(); ++i) {
        double powers[7];
        powers[0] = 1;
        for (int k = 1; k < 7; ++k)
            powers[k] = powers[k - 1] * u[i];
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c)
                a[r][c] += powers[r + c];
            a[r][4] += powers[r] * y[i];
        }
    }
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col]))
                pivot = r;
        if (std::fabs(a[pivot][col]) < 1e-12)
            throw std::runtime_error("degenerate sample grid: rank-deficient cubic fit");
        if (pivot != col)
            for (int c = 0; c < 5; ++c)
                std::swap(a[col][c], a[pivot][c]);
        for (int r = 0; r < 4; ++r) {
            if (r == col)
                continue;
            double f = a[r][col] / a[col][col];
            for (int c = col; c < 5; ++c)
                a[r][c] -= f * a[col][c];
        }
    }
    return {a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]};
}

}  // namespace

void DeviceParams::validate() const {
    if (!(vdd > 0))
        throw std::invalid_argument("vdd must be positive");
    if (!(max_step > 0 && max_step < 0.5 * vdd))
        throw std::invalid_argument("max_step must lie in (0, 0.5*vdd)");
    if (!(knee > 0 && knee < 0.5 * vdd))
        throw std::invalid_argument("knee must lie in (0, 0.5*vdd)");
    if (!(asym > 0 && asym <= 1))
        throw std::invalid_argument("asym must lie in (0, 1]");
    if (sigma_frac < 0)
        throw std::invalid_argument("sigma_frac must be non-negative");
    if (leak_rate_max < 0)
        throw std::invalid_argument("leak_rate_max must be non-negative");
}

double ideal_step(double w, const DeviceParams& p) {
    if (std::fabs(w) > 1.0)
        throw std::invalid_argument("normalized weight out of [-1, 1]");
    return w * p.max_step * (w >= 0 ? 1.0 : p.asym);
}

double nonlinear_step(double w, double v, const DeviceParams& p) {
    if (v < 0 || v > p.vdd)
        throw std::invalid_argument("capacitor voltage outside the rails");
    if (w == 0)
        return 0.0;
    double headroom = w > 0 ? p.vdd - v : v;
    double roll = std::min(1.0, headroom / p.knee);
    double dv = ideal_step(w, p) * roll;
    return clamp(v + dv, 0.0, p.vdd) - v;
}

double leak_drift(double kernel_weight_sum, double max_weight_sum, uint32_t duration_us,
                  const DeviceParams& p) {
    if (kernel_weight_sum < 0 || max_weight_sum <= 0 || kernel_weight_sum > max_weight_sum)
        throw std::invalid_argument("kernel weight sum must lie in [0, max_weight_sum]");
    return p.leak_rate_max * (kernel_weight_sum / max_weight_sum) * (duration_us / 1000.0);
}

double DeviceSampleGrid::Point::mean() const {
    double s = 0;
    for (double v : delta_v)
        s += v;
    return delta_v.empty() ? 0.0 : s / static_cast<double>(delta_v.size());
}

double DeviceSampleGrid::Point::stddev() const {
    if (delta_v.size() < 2)
        return 0.0;
    double m = mean();
    double s = 0;
    for (double v : delta_v)
        s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(delta_v.size() - 1));
}

DeviceSampleGrid sample_device_grid(const DeviceParams& p, const std::vector<double>& weights,
                                    const std::vector<uint32_t>& event_counts, int trials,
                                    uint64_t seed) {
    p.validate();
    if (trials < 1)
        throw std::invalid_argument("trials must be >= 1");
    DeviceSampleGrid grid;
    grid.trials = trials;
    grid.vdd = p.vdd;
    uint64_t point_idx = 0;
    for (double w : weights) {
        for (uint32_t n : event_counts) {
            DeviceSampleGrid::Point pt;
            pt.weight = w;
            pt.n_events = n;
            pt.delta_v.reserve(static_cast<size_t>(trials));
            for (int t = 0; t < trials; ++t) {
                Rng rng = Rng::derive(seed, {kRngTagGrid, point_idx, static_cast<uint64_t>(t)});
                double v = p.v_reset();
                for (uint32_t i = 0; i < n; ++i) {
                    double step = nonlinear_step(w, v, p);
                    if (p.sigma_frac > 0) {
                        double g = clamp(rng.next_gaussian() * p.sigma_frac,
                                         -3.0 * p.sigma_frac, 3.0 * p.sigma_frac);
                        step *= 1.0 + g;
                    }
                    v = clamp(v + step, 0.0, p.vdd);
                }
                pt.delta_v.push_back(v - p.v_reset());
            }
            grid.points.push_back(std::move(pt));
            ++point_idx;
        }
    }
    return grid;
}

ResponseModel fit_response_poly(const DeviceSampleGrid& grid) {
    std::vector<double> u, mean, sd;
    std::set<double> distinct;
    bool has_neg = false, has_pos = false;
    for (const auto& pt : grid.points) {
        double ui = pt.weight * static_cast<double>(pt.n_events);
        u.push_back(ui);
        mean.push_back(pt.mean());
        sd.push_back(pt.stddev());
        distinct.insert(ui);
        has_neg = has_neg || ui < 0;
        has_pos = has_pos || ui > 0;
    }
    if (distinct.size() < 8 || !has_neg || !has_pos)
        throw std::invalid_argument(
            "sample grid needs >= 8 distinct u values spanning negative and positive u");
    ResponseModel m;
    m.mean_coeffs = cubic_lsq(u, mean);
    m.std_coeffs = cubic_lsq(u, sd);
    m.u_min = *std::min_element(u.begin(), u.end());
    m.u_max = *std::max_element(u.begin(), u.end());
    double err = 0;
    for (size_t i = 0; i < u.size(); ++i)
        err += std::fabs(poly3(m.mean_coeffs, u[i]) - mean[i]);
    m.fit_rmse = err / (static_cast<double>(u.size()) * grid.vdd);
    return m;
}

double ResponseModel::mean_at(double u) const { return poly3(mean_coeffs, u); }

double ResponseModel::std_at(double u) const { return std::max(0.0, poly3(std_coeffs, u)); }

bool ResponseModel::in_range(double u) const {
    const double slack = 1e-9;
    return u >= u_min - slack && u <= u_max + slack;
}

double eval_response(const ResponseModel& m, double w, uint32_t n, Rng* rng) {
    double u = w * static_cast<double>(n);
    if (!m.in_range(u)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "u = %.6g outside the fitted range [%.6g, %.6g]", u,
                      m.u_min, m.u_max);
        throw std::out_of_range(buf);
    }
    double mean = m.mean_at(u);
    if (!rng)
        return mean;
    double sd = m.std_at(u);
    if (sd <= 0)
        return mean;
    // Truncated to one sigma by rejection; acceptance ~0.68 per draw.
    for (int i = 0; i < 64; ++i) {
        double g = rng->next_gaussian();
        if (g >= -1.0 && g <= 1.0)
            return mean + g * sd;
    }
    return mean;
}

void save_model(const std::string& path, const DeviceParams& p, const ResponseModel& m,
                uint32_t calib_window_us) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write model file: " + path);
    char buf[512];
    auto line = [&](const char* fmt, auto... args) {
        std::snprintf(buf, sizeof buf, fmt, args...);
        out << buf << '\n';
    };
    out << "npixsim-model v1\n";
    line("vdd = %.17g", p.vdd);
    line("max_step = %.17g", p.max_step);
    line("knee = %.17g", p.knee);
    line("asym = %.17g", p.asym);
    line("sigma_frac = %.17g", p.sigma_frac);
    line("leak_rate_max = %.17g", p.leak_rate_max);
    line("leak_downward = %d", p.leak_downward ? 1 : 0);
    line("calib_window_us = %u", calib_window_us);
    line("mean_coeffs = %.17g %.17g %.17g %.17g", m.mean_coeffs[0], m.mean_coeffs[1],
         m.mean_coeffs[2], m.mean_coeffs[3]);
    line("std_coeffs = %.17g %.17g %.17g %.17g", m.std_coeffs[0], m.std_coeffs[1],
         m.std_coeffs[2], m.std_coeffs[3]);
    line("fit_rmse = %.17g", m.fit_rmse);
    line("u_min = %.17g", m.u_min);
    line("u_max = %.17g", m.u_max);
}

ModelFile load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open model file: " + path);
    std::string header;
    std::getline(in, header);
    if (header != "npixsim-model v1")
        throw std::runtime_error("unrecognized model file header: '" + header + "'");
    ModelFile mf;
    std::string line;
    auto coeffs = [&](const std::string& text, std::array<double, 4>& dst) {
        std::istringstream s(text);
        for (double& c : dst)
            if (!(s >> c))
                throw std::runtime_error("model file: malformed coefficient list");
    };
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos)
            continue;
        std::string key = line.substr(0, eq);
        while (!key.empty() && key.back() == ' ')
            key.pop_back();
        std::string value = line.substr(eq + 1);
        if (key == "vdd") mf.params.vdd = std::stod(value);
        else if (key == "max_step") mf.params.max_step = std::stod(value);
        else if (key == "knee") mf.params.knee = std::stod(value);
        else if (key == "asym") mf.params.asym = std::stod(value);
        else if (key == "sigma_frac") mf.params.sigma_frac = std::stod(value);
        else if (key == "leak_rate_max") mf.params.leak_rate_max = std::stod(value);
        else if (key == "leak_downward") mf.params.leak_downward = std::stoi(value) != 0;
        else if (key == "calib_window_us") mf.calib_window_us = static_cast<uint32_t>(std::stoul(value));
        else if (key == "mean_coeffs") coeffs(value, mf.model.mean_coeffs);
        else if (key == "std_coeffs") coeffs(value, mf.model.std_coeffs);
        else if (key == "fit_rmse") mf.model.fit_rmse = std::stod(value);
        else if (key == "u_min") mf.model.u_min = std::stod(value);
        else if (key == "u_max") mf.model.u_max = std::stod(value);
        else throw std::runtime_error("model file: unknown key '" + key + "'");
    }
    mf.params.validate();
    return mf;
}

}  // namespace npx::device
