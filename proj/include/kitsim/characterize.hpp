#pragma once

// Measurement-analysis suite: scaling-current extraction from phase vs bias,
// critical-current detection, TDR impedance profiling, and two-tone
// compression (IIP1/IIP3) extraction.

#include <optional>
#include <vector>

namespace kitsim::characterize {

// ============================================================================
// Scaling currents from phase vs bias
// ============================================================================

struct PhaseBiasTrace {
    std::vector<double> bias;   // A, nondecreasing
    std::vector<double> phase;  // rad, probe tone phase per bias point
    double probe_omega = 0.0;   // rad/s
    double traversal_time = 0.0;  // s, full light traversal from TDR

    /// First bias point defines the zero-bias phase.
    double theta0() const { return phase.front(); }
    /// Reference phase omega*tau/2.
    double theta_r() const { return probe_omega * traversal_time / 2.0; }
    void validate() const;
};

struct ScalingCurrentFit {
    double i_star2 = 0.0;  // A
    double i_star4 = 0.0;  // A (infinity when unconstrained)
    double rms_relative_residual = 0.0;
    /// Set when the quartic term is not constrained by the data (fit value
    /// nonpositive or contributing under 1% at max bias).
    bool quartic_unconstrained = false;
};

/// Weighted least squares of (theta-theta0)/theta_r = -(I/I*2)^2 - (I/I*4)^4.
/// Both terms are always included. Positive phase shifts (wrong sign
/// convention) are rejected.
ScalingCurrentFit fit_scaling_currents(const PhaseBiasTrace& trace);

// ============================================================================
// Critical current
// ============================================================================

struct TransmissionBiasSweep {
    std::vector<double> bias;    // A, increasing
    std::vector<double> s21_db;  // dB
};

/// First bias where transmission drops more than drop_db below the low-bias
/// median. Throws std::runtime_error when no drop is found.
double critical_current(const TransmissionBiasSweep& sweep, double drop_db = 10.0);

// ============================================================================
// TDR impedance profile
// ============================================================================

struct TdrTrace {
    std::vector<double> time;  // s
    std::vector<double> rho;   // reflection coefficient, |rho| < 1
    double z_ref = 50.0;       // ohm
};

struct TdrProfile {
    std::vector<double> time;       // s
    std::vector<double> impedance;  // ohm
    std::optional<double> device_start;  // s, first threshold crossing
    std::optional<double> device_end;    // s, last threshold crossing
    std::optional<double> mean_device_impedance;  // ohm
    bool near_singular = false;  // max |rho| above 0.999
};

double reflection_to_impedance(double rho, double z_ref);
double impedance_to_reflection(double z, double z_ref);

/// Pointwise Z(t) = Z_ref*(1+rho)/(1-rho) plus the device window located by
/// |Z - Z_ref| > deviation_threshold crossings.
TdrProfile tdr_impedance_profile(const TdrTrace& trace, double deviation_threshold = 1.0);

// ============================================================================
// Two-tone compression
// ============================================================================

struct TwoToneSweep {
    std::vector<double> input_power_dbm;  // increasing
    std::vector<double> fund1_dbm;        // output at f1
    std::vector<double> fund2_dbm;        // output at f2
    std::vector<double> imd_dbm;          // output at 2f1 - f2

    void validate() const;
};

struct CompressionResult {
    double iip1_dbm = 0.0;
    double iip3_dbm = 0.0;
    // fit diagnostics
    double fundamental_slope = 0.0;
    double imd_slope = 0.0;
    double fundamental_intercept_dbm = 0.0;  // of the anchored slope-1 line
    double imd_intercept_dbm = 0.0;          // of the anchored slope-3 line
    double fundamental_rms_residual_db = 0.0;
    double imd_rms_residual_db = 0.0;
    int fundamental_window_points = 0;
    int imd_window_points = 0;
};

/// Standard log-log intercept construction: anchors ideal slope-1 and
/// slope-3 lines in auto-detected low-power windows; IIP3 is their
/// intersection, IIP1 the input power of 1 dB fundamental deviation.
CompressionResult extract_compression(const TwoToneSweep& sweep,
                                      double noise_floor_dbm = -300.0,
                                      double compression_db = 1.0);

}  // namespace kitsim::characterize
