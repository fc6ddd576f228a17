#pragma once

// File formats: CSV trace ingestion/emission with the column layouts the
// analysis pipeline expects, and Touchstone v1 two-port S-parameter files.

#include <map>
#include <string>
#include <vector>

#include "kitsim/cascade.hpp"
#include "kitsim/cellmodel.hpp"
#include "kitsim/characterize.hpp"
#include "kitsim/noisecal.hpp"

namespace kitsim::io {

/// Thrown on malformed input; the message names the file and line.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ============================================================================
// Generic CSV
// ============================================================================

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    /// `# key=value` lines found before the header.
    std::map<std::string, std::string> metadata;
};

/// Reads a CSV with one header row; `#` lines are comments, `# key=value`
/// before the header is captured as metadata. Every data row must have
/// exactly the header's column count.
CsvTable read_csv(const std::string& path);

/// As read_csv but also checks the header matches the expected columns.
CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected);

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows,
               const std::vector<std::string>& metadata = {});

/// Shortest round-trip formatting used for every numeric artifact.
std::string format_double(double value);

// ============================================================================
// Trace readers (column layouts fixed by the analysis contracts)
// ============================================================================

/// freq_hz,re_y11,im_y11
cellmodel::AdmittanceSpectrum read_admittance_csv(const std::string& path,
                                                  cellmodel::LineBoundary boundary,
                                                  int cell_count);
/// temp_k,resistance_ohm
cellmodel::RtTrace read_rt_csv(const std::string& path);
/// bias_a,phase_rad  (probe frequency and traversal time supplied separately)
characterize::PhaseBiasTrace read_phase_bias_csv(const std::string& path,
                                                 double probe_omega,
                                                 double traversal_time);
/// bias_a,s21_db
characterize::TransmissionBiasSweep read_bias_s21_csv(const std::string& path);
/// time_s,rho
characterize::TdrTrace read_tdr_csv(const std::string& path, double z_ref);
/// pin_dbm,pout_f1_dbm,pout_f2_dbm,pout_imd_dbm
characterize::TwoToneSweep read_two_tone_csv(const std::string& path);
/// v_volt,nout_quanta with `# freq_hz=` and `# te_k=` metadata lines
noisecal::SntjTrace read_sntj_csv(const std::string& path);

// ============================================================================
// Spectrum writers
// ============================================================================

/// freq_hz,re_s21,im_s21,s21_db,flag
void write_spectrum_csv(const std::string& path, const cascade::SParamSpectrum& spectrum);
/// freq_hz,arg_s21_rad,k_star_rad
void write_dispersion_csv(const std::string& path, const cascade::DispersionCurve& curve);
/// stub_length_m,z0_ohm,l_per_cell_h,c_per_cell_f
void write_design_curve_csv(const std::string& path,
                            const std::vector<cellmodel::StubDesignPoint>& curve);

// ============================================================================
// Touchstone v1
// ============================================================================

/// Writes a two-port .s2p in RI format, Hz units. Flagged points are
/// emitted with their stored values.
void write_touchstone(const std::string& path, const cascade::SParamSpectrum& spectrum,
                      double z_ref, const std::string& comment = {});

struct TouchstoneData {
    double z_ref = 50.0;
    std::vector<double> frequencies;
    std::vector<cascade::complexd> s11, s21, s12, s22;
};

/// Reads a two-port .s2p (RI, MA or DB formats; Hz/kHz/MHz/GHz units).
TouchstoneData read_touchstone(const std::string& path);

}  // namespace kitsim::io
