#pragma once

// Electrical model of the stub-loaded inverted-microstrip unit cell:
// film nonlinearity coefficients, closed-form cell electricals, admittance
// fits, stub-length design curves, and the test-structure extractions
// (sheet inductance from R(T), permittivity from resonance).

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace kitsim::cellmodel {

// ============================================================================
// Domain types
// ============================================================================

/// Superconducting film parameters. Currents are the nonlinearity scales of
/// the kinetic inductance expansion; the critical current is where
/// superconductivity actually breaks (measured, always below I*2).
struct FilmProperties {
    double sheet_inductance = 0.0;     // H per square
    double scaling_current_2 = 0.0;    // A, quadratic term
    double scaling_current_4 = 0.0;    // A, quartic term
    std::optional<double> critical_current;  // A

    void validate() const;
};

struct DielectricProperties {
    double relative_permittivity = 1.0;
    double thickness = 0.0;  // m

    void validate() const;
};

/// Metal-layer geometry of one elementary cell (pitch = 2 * stub_spacing,
/// one stub per side). squares_per_cell <= 0 means derive from pitch/width.
struct UnitCellGeometry {
    double center_width = 0.0;   // w0, m
    double stub_width = 0.0;     // w1, m
    double stub_spacing = 0.0;   // s, m
    double stub_length = 0.0;    // l, m
    double squares_per_cell = 0.0;

    double pitch() const { return 2.0 * stub_spacing; }
    double squares() const;
    void validate() const;
};

/// Lumped per-cell electricals feeding the ABCD cascade.
struct CellElectricals {
    double series_inductance = 0.0;         // H per cell
    double shunt_capacitance = 0.0;         // F per cell
    double finger_inductance = 0.0;         // H, stub loading
    double characteristic_impedance = 0.0;  // ohm, sqrt(L/C)

    /// Builds a consistent record; impedance is derived, never free.
    static CellElectricals from_lc(double series_inductance, double shunt_capacitance,
                                   double finger_inductance);
    void validate() const;  // enforces Z0 == sqrt(L/C) to 1e-12 relative
};

struct BiasState {
    double dc_current = 0.0;        // A
    double pump_amplitude = 0.0;    // A
    double signal_amplitude = 0.0;  // A

    /// Returns a warning when I_dc + I_p0 reaches the scaling current.
    /// Operating near breakdown is legitimate, so this never throws.
    std::optional<std::string> check(const FilmProperties& film) const;
};

enum class LineBoundary { shorted, open };

/// Single-port input admittance of an n-cell line segment, used to fit the
/// per-cell L and C. Frequencies must be strictly increasing and inside the
/// quasi-static window (beta*n <= 0.3 by default).
struct AdmittanceSpectrum {
    std::vector<double> frequencies;            // Hz
    std::vector<std::complex<double>> y11;      // S
    LineBoundary boundary = LineBoundary::shorted;
    int cell_count = 0;

    void validate() const;
};

// ============================================================================
// Film nonlinearity
// ============================================================================

/// Current-dependent kinetic inductance l0*[1 + (I/I*2)^2 + (I/I*4)^4].
/// Throws std::domain_error at |I| >= I*2 where the expansion is unphysical.
double kinetic_inductance(const FilmProperties& film, double l0, double current);

struct MixingCoefficients {
    double epsilon;  // 1/A, three-wave mixing strength
    double xi;       // 1/A^2, four-wave mixing strength
};

/// eps = 2*I_dc/(I*^2 + I_dc^2), xi = 1/(I*^2 + I_dc^2).
MixingCoefficients mixing_coefficients(double i_dc, double i_star);

/// dc-dressed inductance l0*(1 + I_dc^2/I*^2).
double biased_inductance(double l0, double i_dc, double i_star);

/// Pump-induced inductance modulation depth 2*I_p*I_dc/(I*2^2 + I_dc^2).
double pump_modulation_depth(double i_dc, double i_p, double i_star2);

// ============================================================================
// Closed-form cell electricals
// ============================================================================

/// Parallel-plate estimate eps0*eps_r*a/d with a = 2*l*w1 + 2*s*w0.
/// Excludes fringing, which undershoots fitted values by roughly 20% at
/// d = 100 nm; fringing_scale is a calibration knob (1.0 = bare plates).
double cell_capacitance_closed_form(const UnitCellGeometry& geom,
                                    const DielectricProperties& diel,
                                    double fringing_scale = 1.0);

/// Series inductance n_squares * L0.
double cell_inductance(const UnitCellGeometry& geom, const FilmProperties& film);

/// Stub loading inductance (l/w1 squares of film per stub).
double finger_inductance(const UnitCellGeometry& geom, const FilmProperties& film);

// ============================================================================
// Line input reactance models and fits
// ============================================================================

/// Input inductance of an n-cell shorted line,
/// L1 = L*n*[1 + u/3 + 2u^2/15] with u = w^2 n^2 L C.
/// Valid for w*n*sqrt(LC) < 1; throws std::domain_error outside.
double input_inductance_model(double series_inductance, double shunt_capacitance,
                              int cell_count, double omega);

/// Input capacitance of an n-cell open line, C1 = C*n*45/(45 - 15u - u^2).
double input_capacitance_model(double series_inductance, double shunt_capacitance,
                               int cell_count, double omega);

struct LineFitResult {
    double series_inductance = 0.0;   // H per cell
    double shunt_capacitance = 0.0;   // F per cell
    double rms_relative_residual = 0.0;
    int iterations = 0;
};

/// Least-squares estimate of per-cell L and C from a single-port admittance
/// spectrum. The boundary tag selects the shorted (inductance) or open
/// (capacitance) model. Polynomial initialization from the w->0 intercept
/// followed by Gauss-Newton refinement to 1e-10 relative.
LineFitResult fit_line_params(const AdmittanceSpectrum& spectrum,
                              double fit_window = 0.3);

struct CombinedLineFit {
    LineFitResult shorted;
    LineFitResult open;
    double series_inductance = 0.0;  // authoritative: shorted fit
    double shunt_capacitance = 0.0;  // authoritative: open fit
};

/// Fits both boundary conditions and combines them the way the extraction
/// procedure prescribes: L from the shorted line, C from the open line.
CombinedLineFit fit_line_params_combined(const AdmittanceSpectrum& shorted,
                                         const AdmittanceSpectrum& open);

// ============================================================================
// Stub-length design
// ============================================================================

/// Per-cell capacitance as a linear function of stub length.
struct StubCapacitanceModel {
    double slope = 0.0;   // F per meter of stub length
    double offset = 0.0;  // F at zero stub length

    double at(double stub_length) const { return slope * stub_length + offset; }

    static StubCapacitanceModel closed_form(const UnitCellGeometry& geom,
                                            const DielectricProperties& diel,
                                            double fringing_scale = 1.0);
    /// Two-point calibration, e.g. from fitted (stub length, capacitance) rows.
    static StubCapacitanceModel from_calibration(double length_a, double cap_a,
                                                 double length_b, double cap_b);
};

struct StubDesignPoint {
    double stub_length;  // m
    double z0;           // ohm
    double l_per_cell;   // H
    double c_per_cell;   // F
};

struct StubDesignResult {
    double stub_length = 0.0;  // solved length for the target impedance
    std::vector<StubDesignPoint> curve;
};

/// Inverts the monotone Z0(l) = sqrt(L/C(l)) curve by bisection and emits
/// the full curve for plotting. Throws std::domain_error when the target
/// lies outside [Z0(l_max), Z0(l_min)].
StubDesignResult stub_length_for_impedance(double z_target, double series_inductance,
                                           const StubCapacitanceModel& cap_model,
                                           double length_min, double length_max,
                                           int curve_points = 161);

/// Supercell impedance sqrt((Nu*Lu + Nl*Ll)/(Nu*Cu + Nl*Cl)).
double supercell_impedance(int n_unloaded, int n_loaded,
                           const CellElectricals& unloaded,
                           const CellElectricals& loaded);

// ============================================================================
// Process-control test structures
// ============================================================================

struct RtTrace {
    std::vector<double> temperature;  // K
    std::vector<double> resistance;   // ohm
};

struct SheetInductanceResult {
    double sheet_inductance;      // H per square
    double normal_resistance;     // ohm, trace plateau (whole structure)
    double critical_temperature;  // K, transition midpoint
};

/// L0 = hbar*(R_n/n_squares)/(1.76*pi*k_B*T_c) from an R(T) trace spanning
/// both branches. R_n is the mean over the top decile of temperatures; T_c
/// the R_n/2 crossing with linear interpolation.
SheetInductanceResult sheet_inductance_from_rt(const RtTrace& trace,
                                               double n_squares = 500.0);

struct ResonatorModel {
    double total_inductance;  // H, known from dc measurement
    double plate_area;        // m^2
    double thickness;         // m, assumed dielectric thickness
};

struct PermittivityResult {
    double relative_permittivity;
    /// eps0*eps_r/d; the measurement cannot break the eps_r/d degeneracy,
    /// so this composite is the authoritative output.
    double specific_capacitance;  // F/m^2
};

/// Inverts f_res = 1/(2*pi*sqrt(L_total*C)) for the dielectric constant of
/// the lumped parallel-plate resonator. Throws on nonphysical eps_r < 1.
PermittivityResult permittivity_from_resonance(double f_res, const ResonatorModel& model);

}  // namespace kitsim::cellmodel
