#pragma once

// Declarative project configuration: a flat key = value file with
// unit-suffixed scalars (`30 pH_per_sq`, `12.1 um`). Every physical value
// must carry a unit of the dimension the schema assigns to its key; unknown
// keys are rejected. Mirrors the exemplar-device parameter table.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kitsim::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ProjectConfig {
    // film / dielectric / geometry
    std::optional<double> film_sheet_inductance;   // H per square
    std::optional<double> film_scaling_current_2;  // A
    std::optional<double> film_scaling_current_4;  // A
    std::optional<double> film_critical_current;   // A
    std::optional<double> diel_permittivity;
    std::optional<double> diel_thickness;          // m
    double diel_fringing_scale = 1.0;
    std::optional<double> geom_center_width;       // m
    std::optional<double> geom_stub_width;         // m
    std::optional<double> geom_stub_spacing;       // m
    std::optional<double> geom_squares_per_cell;

    // design
    std::vector<double> design_target_impedances;  // ohm
    double design_stub_min = 5e-7;                 // m
    double design_stub_max = 8e-5;                 // m
    int design_curve_points = 161;
    std::optional<double> design_cal_a_length, design_cal_a_capacitance;
    std::optional<double> design_cal_b_length, design_cal_b_capacitance;
    std::optional<std::string> design_shorted_admittance_csv;
    std::optional<std::string> design_open_admittance_csv;
    std::optional<int> design_admittance_cells;

    // device
    std::optional<int> device_n_unloaded, device_n_loaded, device_n_supercells;
    std::optional<double> device_unloaded_capacitance;   // F per cell
    std::optional<double> device_loaded_capacitance;     // F per cell
    std::optional<double> device_unloaded_stub_length;   // m
    std::optional<double> device_loaded_stub_length;     // m
    std::optional<double> device_unloaded_finger_inductance;  // H
    std::optional<double> device_loaded_finger_inductance;    // H
    std::optional<double> device_series_inductance;      // H per cell
    double device_z_ref = 50.0;                          // ohm

    // bias
    double bias_dc_current = 0.0;        // A
    double bias_pump_amplitude = 0.0;    // A
    double bias_signal_amplitude = 0.0;  // A

    // sweep
    double sweep_freq_start = 1e9, sweep_freq_stop = 2e10;
    int sweep_freq_points = 1901;
    std::optional<double> sweep_pump_start, sweep_pump_stop;
    int sweep_pump_points = 1;
    std::optional<double> sweep_signal_start, sweep_signal_stop;
    int sweep_signal_points = 241;
    std::string sweep_mode_set = "triplet";  // or triplet_pump_harmonic
    bool sweep_undepleted_pump = true;
    double sweep_rel_tolerance = 1e-9;
    int sweep_smoothing_window = 51;
    double sweep_bandgap_threshold_db = -10.0;
    std::optional<double> sweep_insertion_loss_db;  // <= 0

    // conventions
    std::string convention_transmittivity = "amplitude";  // or power
    std::string convention_photon_energy = "printed";     // or compat

    // noise
    std::vector<double> noise_eta0_db;
    std::vector<double> noise_eta1_db;
    double noise_gain_asymmetry = 1.0;
    double noise_thermal_temperature = 0.05;  // K
    double noise_bandwidth_factor = 2.0;

    // fit auxiliaries
    double fit_rt_squares = 500.0;
    std::optional<double> fit_resonator_inductance;  // H
    std::optional<double> fit_resonator_area;        // m^2
    std::optional<double> fit_resonator_thickness;   // m
    std::optional<double> fit_probe_frequency;       // Hz (scaling-current fit)
    std::optional<double> fit_traversal_time;        // s
    double fit_ic_drop_db = 10.0;
    double fit_tdr_z_ref = 50.0;                     // ohm
    double fit_tdr_threshold = 1.0;                  // ohm

    std::optional<std::string> output_directory;
};

/// Parses and schema-validates a config file. Unknown keys, missing units,
/// and wrong-dimension units are errors naming the offending line.
ProjectConfig parse_config(const std::string& path);

/// Parses config text (for tests); `origin` labels error messages.
ProjectConfig parse_config_text(const std::string& text, const std::string& origin);

}  // namespace kitsim::config
