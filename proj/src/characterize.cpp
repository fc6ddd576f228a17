#include "kitsim/characterize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace kitsim::characterize {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// ============================================================================
// Scaling currents
// ============================================================================

void PhaseBiasTrace::validate() const {
    require(bias.size() == phase.size(), "phase trace: array length mismatch");
    require(bias.size() >= 8, "phase trace: need at least 8 bias points");
    require(probe_omega > 0, "phase trace: probe frequency must be positive");
    require(traversal_time > 0, "phase trace: traversal time must be positive");
    // monotone ramp away from the zero-bias anchor, either polarity
    bool up = true, down = true;
    for (std::size_t i = 1; i < bias.size(); ++i) {
        up = up && bias[i] >= bias[i - 1];
        down = down && bias[i] <= bias[i - 1];
    }
    require(up || down, "phase trace: bias must ramp monotonically");
}

ScalingCurrentFit fit_scaling_currents(const PhaseBiasTrace& trace) {
    trace.validate();
    const double theta_r = trace.theta_r();
    const double theta0 = trace.theta0();

    std::vector<double> current, y;
    for (std::size_t i = 0; i < trace.bias.size(); ++i) {
        current.push_back(trace.bias[i]);
        y.push_back((trace.phase[i] - theta0) / theta_r);
    }
    const double y_sum = std::accumulate(y.begin(), y.end(), 0.0);
    if (y_sum > 0)
        throw std::invalid_argument("fit_scaling_currents: positive phase shift, "
                                    "wrong sign convention");

    // Linear weighted LS in a = 1/I*2^2, b = 1/I*4^4 on y = -a I^2 - b I^4.
    // Weights 1/|y| match multiplicative measurement noise; columns scaled by
    // the max bias powers so the QR stays well conditioned.
    double y_scale = 0.0, i_scale = 0.0;
    for (double v : y) y_scale = std::max(y_scale, std::abs(v));
    for (double v : current) i_scale = std::max(i_scale, std::abs(v));
    if (y_scale <= 0 || i_scale <= 0)
        throw std::runtime_error("fit_scaling_currents: under-determined, "
                                 "no phase shift in trace");
    // Anchor points with no measurable shift carry no information and would
    // otherwise dominate the 1/|y| weighting.
    std::vector<std::size_t> used;
    for (std::size_t k = 0; k < y.size(); ++k)
        if (std::abs(y[k]) > 1e-6 * y_scale) used.push_back(k);
    if (used.size() < 5)
        throw std::runtime_error("fit_scaling_currents: under-determined, too few "
                                 "bias points with measurable phase shift");
    const double s2 = i_scale * i_scale, s4 = s2 * s2;
    const Eigen::Index m = static_cast<Eigen::Index>(used.size());
    Eigen::MatrixXd design(m, 2);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::size_t k = used[static_cast<std::size_t>(i)];
        const double i2 = current[k] * current[k];
        const double w = 1.0 / std::abs(y[k]);
        design(i, 0) = -(i2 / s2) * w;
        design(i, 1) = -(i2 * i2 / s4) * w;
        rhs(i) = y[k] * w;
    }
    Eigen::Vector2d ab = design.colPivHouseholderQr().solve(rhs);
    ab(0) /= s2;
    ab(1) /= s4;
    if (!ab.allFinite() || ab(0) <= 0)
        throw std::runtime_error("fit_scaling_currents: fit did not converge to a "
                                 "physical quadratic term");

    ScalingCurrentFit out;
    out.i_star2 = 1.0 / std::sqrt(ab(0));
    const double i_max = current.back();
    if (ab(1) <= 0 || ab(1) * i_max * i_max < 0.01 * ab(0)) {
        out.quartic_unconstrained = true;
        out.i_star4 = ab(1) > 0 ? std::pow(ab(1), -0.25)
                                : std::numeric_limits<double>::infinity();
    } else {
        out.i_star4 = std::pow(ab(1), -0.25);
    }

    double ss = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double i2 = current[i] * current[i];
        const double model = -ab(0) * i2 - std::max(ab(1), 0.0) * i2 * i2;
        if (std::abs(y[i]) > 1e-6 * y_scale) {
            const double rel = (y[i] - model) / y[i];
            ss += rel * rel;
            ++count;
        }
    }
    out.rms_relative_residual = count ? std::sqrt(ss / count) : 0.0;
    return out;
}

// ============================================================================
// Critical current
// ============================================================================

double critical_current(const TransmissionBiasSweep& sweep, double drop_db) {
    require(sweep.bias.size() == sweep.s21_db.size(), "ic sweep: array length mismatch");
    require(sweep.bias.size() >= 5, "ic sweep: need at least 5 points");
    require(drop_db > 0, "ic sweep: drop threshold must be positive");
    for (std::size_t i = 1; i < sweep.bias.size(); ++i)
        require(sweep.bias[i] > sweep.bias[i - 1], "ic sweep: bias must be increasing");

    const std::size_t n_base = std::max<std::size_t>(3, sweep.bias.size() / 10);
    const double baseline = median_of({sweep.s21_db.begin(),
                                       sweep.s21_db.begin() + static_cast<long>(n_base)});
    for (std::size_t i = 0; i < sweep.bias.size(); ++i) {
        if (sweep.s21_db[i] < baseline - drop_db) return sweep.bias[i];
    }
    throw std::runtime_error("critical_current: no transmission drop found");
}

// ============================================================================
// TDR
// ============================================================================

double reflection_to_impedance(double rho, double z_ref) {
    if (std::abs(rho) >= 1.0)
        throw std::domain_error("tdr: |rho| >= 1, impedance transform singular");
    return z_ref * (1.0 + rho) / (1.0 - rho);
}

double impedance_to_reflection(double z, double z_ref) {
    return (z - z_ref) / (z + z_ref);
}

TdrProfile tdr_impedance_profile(const TdrTrace& trace, double deviation_threshold) {
    require(trace.time.size() == trace.rho.size(), "tdr trace: array length mismatch");
    require(!trace.time.empty(), "tdr trace: empty");
    require(trace.z_ref > 0, "tdr trace: reference impedance must be positive");

    TdrProfile out;
    out.time = trace.time;
    out.impedance.reserve(trace.rho.size());
    for (double rho : trace.rho) {
        if (std::abs(rho) > 0.999) out.near_singular = true;
        out.impedance.push_back(reflection_to_impedance(rho, trace.z_ref));
    }

    std::optional<std::size_t> first, last;
    for (std::size_t i = 0; i < out.impedance.size(); ++i) {
        if (std::abs(out.impedance[i] - trace.z_ref) > deviation_threshold) {
            if (!first) first = i;
            last = i;
        }
    }
    if (first) {
        out.device_start = out.time[*first];
        out.device_end = out.time[*last];
        double acc = 0.0;
        for (std::size_t i = *first; i <= *last; ++i) acc += out.impedance[i];
        out.mean_device_impedance = acc / static_cast<double>(*last - *first + 1);
    }
    return out;
}

// ============================================================================
// Two-tone compression
// ============================================================================

void TwoToneSweep::validate() const {
    require(input_power_dbm.size() == fund1_dbm.size() &&
                input_power_dbm.size() == fund2_dbm.size() &&
                input_power_dbm.size() == imd_dbm.size(),
            "two-tone sweep: array length mismatch");
    require(input_power_dbm.size() >= 8, "two-tone sweep: need at least 8 points");
    for (std::size_t i = 1; i < input_power_dbm.size(); ++i)
        require(input_power_dbm[i] > input_power_dbm[i - 1],
                "two-tone sweep: input power must be increasing");
}

namespace {

struct LineWindow {
    double slope = 0.0;       // free-slope diagnostic
    double intercept = 0.0;   // of the anchored fixed-slope line
    double rms_residual = 0.0;
    int points = 0;
};

// Low-power window anchored on the quietest points: grow from the bottom of
// the sweep while each new point stays on the fixed-slope prediction. A
// cumulative-slope gate alone degrades too slowly and lets compressed points
// drag the intercept.
LineWindow detect_window(const std::vector<double>& x, const std::vector<double>& y,
                         double target_slope, double slope_tol, double resid_tol) {
    const std::size_t n = x.size();
    LineWindow best;
    if (n < 5) return best;

    auto anchored_intercept = [&](std::size_t m) {
        double c = 0.0;
        for (std::size_t i = 0; i < m; ++i) c += y[i] - target_slope * x[i];
        return c / static_cast<double>(m);
    };

    std::size_t m = 5;
    double intercept = anchored_intercept(m);
    while (m < n) {
        const double predicted = target_slope * x[m] + intercept;
        if (std::abs(y[m] - predicted) > resid_tol) break;
        ++m;
        intercept = anchored_intercept(m);
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0, ss = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        const double r = y[i] - (target_slope * x[i] + intercept);
        ss += r * r;
    }
    const double denom = m * sxx - sx * sx;
    if (denom <= 0) return best;
    const double slope = (m * sxy - sx * sy) / denom;
    if (std::abs(slope - target_slope) > slope_tol) return best;
    best.slope = slope;
    best.intercept = intercept;
    best.rms_residual = std::sqrt(ss / static_cast<double>(m));
    best.points = static_cast<int>(m);
    return best;
}

}  // namespace

CompressionResult extract_compression(const TwoToneSweep& sweep, double noise_floor_dbm,
                                      double compression_db) {
    sweep.validate();
    const double resid_tol = 0.05;  // dB gate for the anchored-line windows

    const auto& x = sweep.input_power_dbm;
    LineWindow fund = detect_window(x, sweep.fund1_dbm, 1.0, 0.1, resid_tol);
    if (fund.points < 5)
        throw std::runtime_error("extract_compression: no slope-1 region in fundamental");

    std::vector<double> x_imd, y_imd;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (sweep.imd_dbm[i] > noise_floor_dbm) {
            x_imd.push_back(x[i]);
            y_imd.push_back(sweep.imd_dbm[i]);
        }
    }
    if (x_imd.size() < 5)
        throw std::runtime_error("extract_compression: IMD product buried below the "
                                 "noise floor");
    LineWindow imd = detect_window(x_imd, y_imd, 3.0, 0.3, 3.0 * resid_tol);
    if (imd.points < 5)
        throw std::runtime_error("extract_compression: no slope-3 region in IMD product");

    CompressionResult out;
    out.fundamental_slope = fund.slope;
    out.imd_slope = imd.slope;
    out.fundamental_intercept_dbm = fund.intercept;
    out.imd_intercept_dbm = imd.intercept;
    out.fundamental_rms_residual_db = fund.rms_residual;
    out.imd_rms_residual_db = imd.rms_residual;
    out.fundamental_window_points = fund.points;
    out.imd_window_points = imd.points;

    // Intersection of y = x + c1 and y = 3x + c3.
    out.iip3_dbm = 0.5 * (fund.intercept - imd.intercept);

    // First crossing of the stated deviation below the slope-1 line.
    double prev_dev = fund.intercept + x[0] - sweep.fund1_dbm[0];
    bool found = false;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double dev = fund.intercept + x[i] - sweep.fund1_dbm[i];
        if (prev_dev < compression_db && dev >= compression_db) {
            const double f = (compression_db - prev_dev) / (dev - prev_dev);
            out.iip1_dbm = x[i - 1] + f * (x[i] - x[i - 1]);
            found = true;
            break;
        }
        prev_dev = dev;
    }
    if (!found)
        throw std::runtime_error("extract_compression: fundamental never compresses by "
                                 "the stated deviation");
    return out;
}

}  // namespace kitsim::characterize
