#include "kitsim/noisecal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "kitsim/constants.hpp"

namespace kitsim::noisecal {

namespace {

using constants::boltzmann;
using constants::electron_charge;
using constants::hbar;

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// x*coth(x/a) for a = 2*kB*T, even in x, with the a -> 0 and x -> 0 limits
// handled analytically.
double x_coth(double x, double a) {
    if (a <= 0.0) return std::abs(x);
    const double u = x / a;
    const double au = std::abs(u);
    if (au < 1e-4) {
        // a*u*coth(u) = a*(1 + u^2/3 - u^4/45 + ...)
        return a * (1.0 + u * u / 3.0 - u * u * u * u / 45.0);
    }
    if (au > 350.0) return std::abs(x);
    return x / std::tanh(u);
}

double convention_factor(PhotonConvention convention) {
    return convention == PhotonConvention::ev_per_hbar_omega ? 2.0 : 1.0;
}

}  // namespace

// ============================================================================
// PSD models
// ============================================================================

double sntj_psd(double voltage, double omega, double electron_temperature,
                PhotonConvention convention) {
    require(omega > 0, "sntj_psd: omega must be positive");
    require(electron_temperature >= 0, "sntj_psd: temperature must be nonnegative");
    const double ev = electron_charge * voltage;
    const double hw = hbar * omega;
    const double a = 2.0 * boltzmann * electron_temperature;
    const double n = (x_coth(ev + hw, a) + x_coth(ev - hw, a)) / (4.0 * hw);
    return convention_factor(convention) * n;
}

double sntj_psd_asymptotic(double voltage, double omega, PhotonConvention convention) {
    require(omega > 0, "sntj_psd_asymptotic: omega must be positive");
    return convention_factor(convention) * electron_charge * std::abs(voltage) /
           (2.0 * hbar * omega);
}

double thermal_occupancy(double temperature, double omega) {
    require(omega > 0, "thermal_occupancy: omega must be positive");
    require(temperature >= 0, "thermal_occupancy: temperature must be nonnegative");
    if (temperature == 0.0) return 0.5;
    const double u = hbar * omega / (2.0 * boltzmann * temperature);
    if (u > 350.0) return 0.5;
    return 0.5 / std::tanh(u);
}

// ============================================================================
// System-noise fit
// ============================================================================

void SntjTrace::validate() const {
    require(voltage.size() == noise_out.size(), "sntj trace: array length mismatch");
    require(voltage.size() >= 5, "sntj trace: need at least 5 samples");
    require(omega > 0, "sntj trace: analysis frequency must be positive");
    require(electron_temperature >= 0, "sntj trace: temperature must be nonnegative");
    for (double v : voltage)
        require(v >= 0, "sntj trace: only the V >= 0 half-ramp is captured");
}

NoiseFitResult fit_system_noise(const SntjTrace& trace, const NoiseFitOptions& options) {
    trace.validate();
    require(options.eta0 > 0 && options.eta0 <= 1, "noise fit: eta0 must be in (0, 1]");
    require(options.eta1 > 0 && options.eta1 <= 1, "noise fit: eta1 must be in (0, 1]");
    require(options.gain_asymmetry >= 0, "noise fit: gain asymmetry must be nonnegative");

    const double omega_i = options.omega_idler > 0 ? options.omega_idler : trace.omega;
    const double cutoff =
        options.bias_cutoff_factor *
        std::max(hbar * std::max(trace.omega, omega_i),
                 boltzmann * trace.electron_temperature) /
        electron_charge;

    std::vector<double> model_in, observed;
    for (std::size_t i = 0; i < trace.voltage.size(); ++i) {
        if (trace.voltage[i] < cutoff) continue;
        const double n_s = sntj_psd(trace.voltage[i], trace.omega,
                                    trace.electron_temperature, options.convention);
        const double n_i = sntj_psd(trace.voltage[i], omega_i,
                                    trace.electron_temperature, options.convention);
        model_in.push_back(options.eta0 * options.eta1 *
                           (n_s + options.gain_asymmetry * n_i));
        observed.push_back(trace.noise_out[i]);
    }
    if (model_in.size() < 5)
        throw std::runtime_error("fit_system_noise: insufficient linear span, trace does "
                                 "not reach the asymptotic high-bias regime");

    // N_out = a*x + b with a = G_sys and b = G_sys*N_ex. Weighted by 1/N_out,
    // matching the multiplicative noise of spectrum-analyzer power readings.
    const Eigen::Index m = static_cast<Eigen::Index>(model_in.size());
    Eigen::MatrixXd basis(m, 2);
    Eigen::VectorXd rhs(m);
    double obs_scale = 0.0;
    for (double v : observed) obs_scale = std::max(obs_scale, std::abs(v));
    if (obs_scale <= 0)
        throw std::runtime_error("fit_system_noise: output trace is identically zero");
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const double w = 1.0 / std::max(std::abs(observed[k]), 1e-6 * obs_scale);
        basis(i, 0) = model_in[k] * w;
        basis(i, 1) = w;
        rhs(i) = observed[k] * w;
    }
    const Eigen::Vector2d coeff = basis.colPivHouseholderQr().solve(rhs);
    if (!coeff.allFinite() || coeff(0) <= 0)
        throw std::runtime_error("fit_system_noise: fit produced nonpositive system gain");

    NoiseFitResult out;
    out.system_gain = coeff(0);
    out.points_used = static_cast<int>(m);
    const double n_ex = coeff(1) / coeff(0) - options.second_stage_noise_over_gain;
    if (n_ex < 0) {
        out.excess_noise = 0.0;
        out.excess_clamped = true;
    } else {
        out.excess_noise = n_ex;
    }

    const Eigen::VectorXd residual = rhs - basis * coeff;
    const double dof = std::max<double>(1.0, static_cast<double>(m - 2));
    const double sigma2 = residual.squaredNorm() / dof;
    const Eigen::Matrix2d cov = sigma2 * (basis.transpose() * basis).inverse();
    // Propagate (a, b) covariance to (G_sys, N_ex = b/a).
    const double a = coeff(0), b = coeff(1);
    Eigen::Matrix2d jac;
    jac << 1.0, 0.0, -b / (a * a), 1.0 / a;
    const Eigen::Matrix2d cov_out = jac * cov * jac.transpose();
    out.covariance = {{{cov_out(0, 0), cov_out(0, 1)}, {cov_out(1, 0), cov_out(1, 1)}}};
    return out;
}

// ============================================================================
// Transmittivity chains
// ============================================================================

double chain_transmittivity(const TransmittivityChain& chain) {
    double sum_db = 0.0;
    for (const auto& comp : chain.components) {
        if (comp.insertion_loss_db > 0.0)
            throw std::invalid_argument("chain_transmittivity: component '" + comp.name +
                                        "' has positive insertion loss");
        sum_db += comp.insertion_loss_db;
    }
    const double divisor = chain.convention == DbConvention::amplitude ? 20.0 : 10.0;
    return std::pow(10.0, sum_db / divisor);
}

// ============================================================================
// Reference-plane transform
// ============================================================================

double transform_reference_plane(double n_ex_signal, double n_ex_idler,
                                 double eta1_signal, double eta1_idler,
                                 double gain_asymmetry, double thermal) {
    require(eta1_signal > 0 && eta1_signal <= 1,
            "transform_reference_plane: eta1 (signal) must be in (0, 1]");
    require(eta1_idler > 0 && eta1_idler <= 1,
            "transform_reference_plane: eta1 (idler) must be in (0, 1]");
    require(thermal >= 0, "transform_reference_plane: thermal occupancy must be nonnegative");
    require(gain_asymmetry >= 0, "transform_reference_plane: gain asymmetry must be nonnegative");
    const double eta1 = eta1_signal;
    return ((1.0 - eta1_signal) * thermal + n_ex_signal) / eta1 +
           gain_asymmetry * ((1.0 - eta1_idler) * thermal + n_ex_idler) / eta1;
}

double transform_reference_plane_even_split(double n_ex_total, double eta1,
                                            double gain_asymmetry, double thermal) {
    return transform_reference_plane(0.5 * n_ex_total, 0.5 * n_ex_total, eta1, eta1,
                                     gain_asymmetry, thermal);
}

// ============================================================================
// Noise bandwidth
// ============================================================================

double noise_bandwidth(const ExcessSpectrum& spectrum, double floor, double factor) {
    require(spectrum.frequencies.size() == spectrum.excess.size(),
            "noise_bandwidth: array length mismatch");
    require(spectrum.frequencies.size() >= 2, "noise_bandwidth: spectrum too short");
    require(floor >= 0, "noise_bandwidth: floor must be nonnegative");
    require(factor > 0, "noise_bandwidth: factor must be positive");
    for (std::size_t i = 1; i < spectrum.frequencies.size(); ++i)
        require(spectrum.frequencies[i] > spectrum.frequencies[i - 1],
                "noise_bandwidth: frequencies must be increasing");

    const double threshold = factor * floor;
    const auto& f = spectrum.frequencies;
    const auto& n = spectrum.excess;
    const std::size_t count = f.size();

    double best = -1.0;
    std::size_t i = 0;
    while (i < count) {
        if (n[i] <= threshold) {
            std::size_t j = i;
            while (j + 1 < count && n[j + 1] <= threshold) ++j;
            double lo = f[i], hi = f[j];
            // interpolate the crossings into the neighboring above-threshold samples
            if (i > 0 && std::isfinite(threshold) && n[i - 1] > threshold) {
                const double frac = (n[i - 1] - threshold) / (n[i - 1] - n[i]);
                lo = f[i - 1] + frac * (f[i] - f[i - 1]);
            }
            if (j + 1 < count && std::isfinite(threshold) && n[j + 1] > threshold) {
                const double frac = (n[j + 1] - threshold) / (n[j + 1] - n[j]);
                hi = f[j + 1] - frac * (f[j + 1] - f[j]);
            }
            best = std::max(best, hi - lo);
            i = j + 1;
        } else {
            ++i;
        }
    }
    if (best < 0)
        throw std::runtime_error("noise_bandwidth: spectrum everywhere above threshold");
    return best;
}

}  // namespace kitsim::noisecal
