#pragma once

// Parametric gain prediction: analytic phase-matched formulas, coupled-mode
// integration along the line using the cascade dispersion, pump sweeps with
// band metrics, and the standing-wave gain-ripple estimator.

#include <optional>
#include <string>
#include <vector>

#include "kitsim/cascade.hpp"

namespace kitsim::gainsim {

enum class ModeSet { triplet, triplet_pump_harmonic };

struct CMEConfig {
    double pump_frequency = 0.0;     // Hz
    double pump_amplitude = 0.0;     // A at the device input
    double signal_amplitude = 0.0;   // A
    std::vector<double> signal_grid; // Hz
    ModeSet mode_set = ModeSet::triplet;
    double rel_tolerance = 1e-9;
    double abs_tolerance = 1e-20;    // A
    double device_length = 0.0;      // m
    bool undepleted_pump = true;     // pump magnitude frozen, phase still evolves
    bool allow_degeneracies = false; // integrate at f_s = f_p/2 or f_p anyway

    void validate() const;
};

struct GainProfile {
    std::vector<double> signal_frequencies;   // Hz
    std::vector<double> gain_linear;          // |I_s(L)/I_s0|^2
    std::vector<double> gain_db;
    std::vector<double> idler_gain_linear;    // |I_i(L)/I_s0|^2
    std::vector<double> pump_exit_fraction;   // |I_p(L)|/I_p0 (estimated if frozen)
    std::vector<double> harmonic_exit_fraction;  // |I_2p(L)|/I_p0, harmonic mode only
    std::vector<bool> skipped;                // excluded degeneracies
    bool depletion_warning = false;  // undepleted assumption violated somewhere
    std::optional<double> insertion_loss_db;  // <= 0; enables true gain

    /// On/off gain reduced by the device insertion loss.
    double true_gain_db(std::size_t i) const;
};

struct BandMetrics {
    double b3db_hz = 0.0;
    double mean_gain_db = 0.0;    // mean over the 3 dB band
    double gbp_hz_db = 0.0;       // mean gain [dB] x bandwidth [Hz]
    double peak_gain_db = 0.0;
    double peak_frequency = 0.0;  // Hz
    bool left_truncated = false;  // no -3 dB crossing before grid edge
    bool right_truncated = false;
};

struct SweepResult {
    std::vector<double> pump_frequencies;
    std::vector<GainProfile> profiles;
    std::vector<BandMetrics> metrics;
    std::vector<std::string> errors;    // empty string = pump point succeeded
    std::vector<bool> below_bandgap_warning;
};

// ============================================================================
// Analytic relations
// ============================================================================

/// Three-wave phase matching residual
/// (k_p - k_s - k_i) + (xi*I_p0^2/8)*(k_p - 2k_s - 2k_i).
double phase_mismatch(double k_p, double k_s, double k_i, double xi, double i_p0);

/// Exponential gain coefficient g3 = eps*I_p0*sqrt(k_s*k_i)/4.
double gain_coefficient(double epsilon, double i_p0, double k_s, double k_i);

/// Phase-matched gain cosh^2(g3*x).
double analytic_gain(double g3, double x);

/// Gain at the degenerate point (k_s = k_i = k_p/2) written out in control
/// parameters: cosh^2((1/4)*I_dc*I_p/(I*2^2+I_dc^2)*w_p*sqrt(Ld*C)*x),
/// with Ld and C per unit length.
double explicit_gain(double i_dc, double i_p, double i_star2, double omega_p,
                     double l_d_per_length, double c_per_length, double x);

/// Peak-to-peak ripple 10*log10((1+G*eta*|Gamma|^2)/(1-G*eta*|Gamma|^2)) in dB.
/// Throws std::domain_error when G*eta*|Gamma|^2 >= 1 (ripple -> G).
double gain_ripple(double gain, double transmittivity, double reflection_mag);

// ============================================================================
// Coupled-mode integration
// ============================================================================

/// Integrates the three-wave coupled amplitude equations in position over
/// [0, x_total]: quadratic (eps-weighted) pump-signal-idler coupling plus
/// cubic (xi-weighted) self/cross phase rotation, with per-mode wavenumbers
/// taken from the supplied dispersion. At a phase-matched degenerate point
/// in the small-signal undepleted-pump limit this reproduces cosh^2(g3*x).
GainProfile solve_cmes(const cascade::DeviceSpec& spec, const CMEConfig& config,
                       const cascade::DispersionCurve& dispersion);

/// Per-pump gain profiles plus band metrics; parallel over pump points with
/// deterministic ordering. Per-pump failures are recorded, not thrown.
SweepResult pump_sweep(const cascade::DeviceSpec& spec, const CMEConfig& config_template,
                       const std::vector<double>& pump_grid,
                       const cascade::DispersionCurve& dispersion,
                       const std::optional<cascade::Bandgap>& bandgap = std::nullopt,
                       int threads = 1, int smoothing_window = 51);

/// 3 dB bandwidth around the (smoothed) gain maximum, mean in-band gain and
/// their product. smoothing_window = 1 gives raw metrics. Missing crossings
/// are flagged as truncation, not errors.
BandMetrics band_metrics(const GainProfile& profile, int smoothing_window = 51);

}  // namespace kitsim::gainsim
