#pragma once

// Shot-noise-tunnel-junction calibrated system-noise analysis: SNTJ PSD
// models, system gain / excess noise fits, transmittivity chains, the
// reference-plane transform, and noise-bandwidth extraction.

#include <array>
#include <string>
#include <vector>

namespace kitsim::noisecal {

/// Photon-energy convention for the SNTJ quanta normalization. The printed
/// asymptote is e|V|/(2*hbar*omega); the compat convention doubles it,
/// reproducing the quoted 0.48 quanta at 10 uV and 5 GHz.
enum class PhotonConvention {
    half_ev_per_hbar_omega,  // printed formula (default)
    ev_per_hbar_omega,       // doubled, quoted-value compatible
};

// ============================================================================
// PSD models
// ============================================================================

/// Junction PSD in quanta:
/// [(eV+hw)/(4hw)]coth((eV+hw)/2kT) + [(eV-hw)/(4hw)]coth((eV-hw)/2kT).
/// The coth singularities cancel analytically and are handled by series.
double sntj_psd(double voltage, double omega, double electron_temperature,
                PhotonConvention convention = PhotonConvention::half_ev_per_hbar_omega);

/// High-bias asymptote e|V|/(2*hbar*omega).
double sntj_psd_asymptotic(double voltage, double omega,
                           PhotonConvention convention = PhotonConvention::half_ev_per_hbar_omega);

/// Thermal photon occupancy (1/2)coth(hbar*omega/(2*kB*T)); 0.5 at T -> 0.
double thermal_occupancy(double temperature, double omega);

// ============================================================================
// System-noise fit
// ============================================================================

/// Captured half-ramp of output noise power vs junction bias.
struct SntjTrace {
    std::vector<double> voltage;    // V, nonnegative samples only
    std::vector<double> noise_out;  // quanta
    double omega = 0.0;             // rad/s, analysis (signal) frequency
    double electron_temperature = 0.0;  // K

    void validate() const;
};

struct NoiseFitOptions {
    double eta0 = 1.0;            // source-chain transmittivity
    double eta1 = 1.0;            // amplifier-chain transmittivity
    double gain_asymmetry = 1.0;  // r = G1_idler/G1_signal
    double omega_idler = 0.0;     // rad/s; 0 means same as the trace frequency
    PhotonConvention convention = PhotonConvention::half_ev_per_hbar_omega;
    /// Points enter the fit only when e|V| exceeds this multiple of
    /// max(hbar*omega, kB*Te); the asymptotic linear regime.
    double bias_cutoff_factor = 5.0;
    /// Second-stage added noise referred through the first-stage gain,
    /// N2_add/G1 in quanta. Zero in the high-first-stage-gain limit.
    double second_stage_noise_over_gain = 0.0;
};

struct NoiseFitResult {
    double system_gain = 0.0;   // linear
    double excess_noise = 0.0;  // quanta, clamped at 0
    bool excess_clamped = false;  // unconstrained optimum was negative
    std::array<std::array<double, 2>, 2> covariance{};  // (gain, excess)
    int points_used = 0;
};

/// Linear fit of N_out = G_sys*(N_in_s + r*N_in_i + N_ex + N2_add/G1) over
/// the high-bias regime, with N_in = eta0*eta1*sntj_psd(V). The second-stage
/// term defaults to zero (high first-stage gain limit) and is subtracted
/// from the fitted excess when supplied.
NoiseFitResult fit_system_noise(const SntjTrace& trace, const NoiseFitOptions& options);

// ============================================================================
// Transmittivity chains
// ============================================================================

enum class DbConvention { amplitude, power };

struct ChainComponent {
    std::string name;
    double insertion_loss_db = 0.0;  // <= 0
};

struct TransmittivityChain {
    std::vector<ChainComponent> components;
    DbConvention convention = DbConvention::amplitude;
};

/// eta = 10^(sum_dB/20) under the amplitude convention (default; the one
/// that reproduces the 0.93/0.95 chain values), 10^(sum_dB/10) under power.
/// Positive-dB components are rejected.
double chain_transmittivity(const TransmittivityChain& chain);

// ============================================================================
// Reference-plane transform
// ============================================================================

/// Moves the excess noise reference plane upstream of a lossy chain:
/// N~ex = [(1-eta1_s)N_T + N_ex_s]/eta1 + r*[(1-eta1_i)N_T + N_ex_i]/eta1
/// with eta1 = eta1_s in the denominators.
double transform_reference_plane(double n_ex_signal, double n_ex_idler,
                                 double eta1_signal, double eta1_idler,
                                 double gain_asymmetry, double thermal_occupancy);

/// Applies the even split N_ex -> N_ex/2 + N_ex/2 before transforming.
double transform_reference_plane_even_split(double n_ex_total, double eta1,
                                            double gain_asymmetry,
                                            double thermal_occupancy);

// ============================================================================
// Noise bandwidth
// ============================================================================

struct ExcessSpectrum {
    std::vector<double> frequencies;  // Hz, increasing
    std::vector<double> excess;       // quanta
};

/// Total width of the widest contiguous region with N_ex <= factor*floor,
/// edges interpolated. Throws std::runtime_error when the region is empty.
double noise_bandwidth(const ExcessSpectrum& spectrum, double floor, double factor = 2.0);

}  // namespace kitsim::noisecal
