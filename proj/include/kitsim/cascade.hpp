#pragma once

// ABCD-matrix cascade of the dispersion-engineered artificial transmission
// line: unit cell, supercell, and whole-device transfer matrices, conversion
// to S-parameters, dispersion extraction, and stopband location.

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "kitsim/cellmodel.hpp"

namespace kitsim::cascade {

using complexd = std::complex<double>;

/// Thrown when a cell is evaluated at its stub self-resonance.
class PoleError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Thrown when device matrix entries exceed representable magnitude
/// (deep stopband evanescence).
class OverflowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ============================================================================
// Two-port chain matrices
// ============================================================================

struct TwoPortABCD {
    complexd a{1.0}, b{0.0}, c{0.0}, d{1.0};

    complexd determinant() const { return a * d - b * c; }
    TwoPortABCD operator*(const TwoPortABCD& rhs) const;
    static TwoPortABCD identity() { return {}; }
};

/// Chain matrix with a separate magnitude exponent: entries() * exp(log_scale).
/// Keeps stopband evanescence representable where a bare matrix would overflow.
struct ScaledAbcd {
    TwoPortABCD m;
    double log_scale = 0.0;

    /// Collapses to a plain matrix; throws OverflowError when not representable.
    TwoPortABCD unscaled() const;
};

/// T^n by binary exponentiation. Renormalizes by sqrt(det) after each
/// squaring while the determinant is numerically observable, and pulls
/// entry magnitude into log_scale past that.
ScaledAbcd matrix_power(const TwoPortABCD& t, long n);

// ============================================================================
// Device description
// ============================================================================

struct DeviceSpec {
    cellmodel::CellElectricals unloaded;
    cellmodel::CellElectricals loaded;
    int n_unloaded = 0;    // per supercell, split symmetrically (must be even)
    int n_loaded = 0;      // per supercell
    int n_supercells = 1;
    cellmodel::BiasState bias;
    cellmodel::FilmProperties film;
    double z_ref = 50.0;     // ohm
    double cell_pitch = 2e-6;  // m, elementary cell length (2s)

    void validate() const;
    /// dc-dressed series inductance per cell (shared center line).
    double biased_series_inductance() const;
    int cells_per_supercell() const { return n_unloaded + n_loaded; }
    double supercell_length() const { return cells_per_supercell() * cell_pitch; }
    double device_length() const { return n_supercells * supercell_length(); }
};

enum class PointStatus : std::uint8_t {
    ok = 0,
    stub_pole = 1,   // cell evaluated at stub self-resonance
    evanescent = 2,  // transmission below double-precision representability
};

struct SParamSpectrum {
    std::vector<double> frequencies;  // Hz
    std::vector<complexd> s11, s21, s12, s22;
    std::vector<PointStatus> status;

    std::size_t size() const { return frequencies.size(); }
};

enum class DispersionBaseline { unloaded_cell, supercell_mean };

/// Unwrapped transmission phase and derived wavenumber. arg_s21 is the
/// cumulative unwrap starting from the principal value at the lowest grid
/// frequency (negative: phase delay); wavenumber k = -arg_s21/length in
/// rad/m; k_star is the total-device residual against the linear baseline
/// omega*sqrt(Ld*C) of the chosen cell, in radians.
struct DispersionCurve {
    std::vector<double> frequencies;
    std::vector<double> arg_s21;     // rad, unwrapped
    std::vector<double> k_star;      // rad
    std::vector<double> wavenumber;  // rad/m
    double device_length = 0.0;      // m
    bool unwrap_ambiguous = false;   // an adjacent step exceeded pi

    /// Linear interpolation of k(omega); throws std::out_of_range outside grid.
    double k_at(double freq_hz) const;
};

struct Bandgap {
    double f_low;     // Hz
    double f_high;    // Hz
    double f_center;  // Hz
};

// ============================================================================
// Operations
// ============================================================================

/// Single-cell chain matrix at angular frequency omega with the bias-dressed
/// series inductance l_d. Throws PoleError at the stub resonance
/// omega^2 = 2/(Lf*C).
TwoPortABCD cell_abcd(const cellmodel::CellElectricals& cell, double l_d, double omega);

/// T_u^(Nu/2) * T_l^Nl * T_u^(Nu/2).
TwoPortABCD supercell_abcd(const DeviceSpec& spec, double omega);

/// Whole-device matrix T_sc^Nsc. Throws OverflowError deep in the stopband;
/// use device_abcd_scaled for a representation that never overflows.
TwoPortABCD device_abcd(const DeviceSpec& spec, double omega);
ScaledAbcd device_abcd_scaled(const DeviceSpec& spec, double omega);

struct SPoint {
    complexd s11, s21, s12, s22;
};

/// Standard ABCD -> S conversion with equal reference impedance at both ports.
SPoint abcd_to_s(const TwoPortABCD& t, double z_ref);
SPoint abcd_to_s(const ScaledAbcd& t, double z_ref);

/// Per-frequency device S-parameters; parallel over the grid with
/// deterministic result ordering. Pole and evanescent points are flagged
/// rather than failing the sweep.
SParamSpectrum s21_spectrum(const DeviceSpec& spec, const std::vector<double>& grid,
                            int threads = 1);

/// Unwraps arg(S21) and subtracts the linear baseline. The grid must be
/// dense enough that adjacent phase steps stay below pi; violations set
/// unwrap_ambiguous instead of throwing.
DispersionCurve dispersion(const DeviceSpec& spec, const SParamSpectrum& spectrum,
                           DispersionBaseline baseline = DispersionBaseline::unloaded_cell);

/// Widest contiguous region with |S21| below threshold_db. Evanescent points
/// count as below any threshold; pole points break contiguity. Edges are
/// refined by linear interpolation in dB. Throws std::runtime_error when no
/// region exists.
Bandgap find_bandgap(const SParamSpectrum& spectrum, double threshold_db = -10.0);

}  // namespace kitsim::cascade
