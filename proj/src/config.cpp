#include "kitsim/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace kitsim::config {

namespace {

enum class Dim {
    dimensionless,
    inductance,
    capacitance,
    length,
    area,
    current,
    frequency,
    resistance,
    sheet_inductance,
    temperature,
    time,
    decibel,
};

const std::map<std::string, std::pair<Dim, double>>& unit_table() {
    static const std::map<std::string, std::pair<Dim, double>> table = {
        {"H", {Dim::inductance, 1.0}},      {"mH", {Dim::inductance, 1e-3}},
        {"uH", {Dim::inductance, 1e-6}},    {"nH", {Dim::inductance, 1e-9}},
        {"pH", {Dim::inductance, 1e-12}},
        {"F", {Dim::capacitance, 1.0}},     {"uF", {Dim::capacitance, 1e-6}},
        {"nF", {Dim::capacitance, 1e-9}},   {"pF", {Dim::capacitance, 1e-12}},
        {"fF", {Dim::capacitance, 1e-15}},
        {"m", {Dim::length, 1.0}},          {"cm", {Dim::length, 1e-2}},
        {"mm", {Dim::length, 1e-3}},        {"um", {Dim::length, 1e-6}},
        {"nm", {Dim::length, 1e-9}},
        {"m2", {Dim::area, 1.0}},           {"um2", {Dim::area, 1e-12}},
        {"A", {Dim::current, 1.0}},         {"mA", {Dim::current, 1e-3}},
        {"uA", {Dim::current, 1e-6}},       {"nA", {Dim::current, 1e-9}},
        {"Hz", {Dim::frequency, 1.0}},      {"kHz", {Dim::frequency, 1e3}},
        {"MHz", {Dim::frequency, 1e6}},     {"GHz", {Dim::frequency, 1e9}},
        {"ohm", {Dim::resistance, 1.0}},    {"Ohm", {Dim::resistance, 1.0}},
        {"kohm", {Dim::resistance, 1e3}},
        {"H_per_sq", {Dim::sheet_inductance, 1.0}},
        {"nH_per_sq", {Dim::sheet_inductance, 1e-9}},
        {"pH_per_sq", {Dim::sheet_inductance, 1e-12}},
        {"K", {Dim::temperature, 1.0}},     {"mK", {Dim::temperature, 1e-3}},
        {"s", {Dim::time, 1.0}},            {"ms", {Dim::time, 1e-3}},
        {"us", {Dim::time, 1e-6}},          {"ns", {Dim::time, 1e-9}},
        {"ps", {Dim::time, 1e-12}},
        {"dB", {Dim::decibel, 1.0}},
    };
    return table;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

struct Parser {
    std::string origin;
    int line_no = 0;

    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream os;
        os << origin << ":" << line_no << ": " << what;
        throw ConfigError(os.str());
    }

    /// `value [unit]` -> SI number of the required dimension.
    double quantity(const std::string& raw, Dim dim) const {
        std::istringstream is(raw);
        double number = 0.0;
        if (!(is >> number)) fail("expected a number in '" + raw + "'");
        std::string unit;
        is >> unit;
        std::string rest;
        if (is >> rest) fail("trailing content after unit in '" + raw + "'");
        if (dim == Dim::dimensionless) {
            if (!unit.empty()) fail("dimensionless key must not carry a unit ('" + raw + "')");
            return number;
        }
        if (unit.empty()) fail("physical value '" + raw + "' requires a unit suffix");
        const auto it = unit_table().find(unit);
        if (it == unit_table().end()) fail("unknown unit '" + unit + "'");
        if (it->second.first != dim) fail("unit '" + unit + "' has the wrong dimension");
        return number * it->second.second;
    }

    std::vector<double> quantity_list(const std::string& raw, Dim dim) const {
        std::vector<double> out;
        std::string field;
        std::istringstream is(raw);
        while (std::getline(is, field, ',')) out.push_back(quantity(trim(field), dim));
        return out;
    }

    int integer(const std::string& raw) const {
        const double v = quantity(raw, Dim::dimensionless);
        if (v != std::floor(v)) fail("expected an integer, got '" + raw + "'");
        return static_cast<int>(v);
    }

    bool boolean(const std::string& raw) const {
        if (raw == "true") return true;
        if (raw == "false") return false;
        fail("expected true or false, got '" + raw + "'");
    }

    std::string word(const std::string& raw, std::initializer_list<const char*> allowed) const {
        for (const char* a : allowed)
            if (raw == a) return raw;
        fail("unexpected value '" + raw + "'");
    }
};

}  // namespace

ProjectConfig parse_config_text(const std::string& text, const std::string& origin) {
    ProjectConfig cfg;
    Parser p{origin};

    using Setter = std::function<void(const Parser&, const std::string&)>;
    const std::map<std::string, Setter> schema = {
        {"film.sheet_inductance", [&](const Parser& pr, const std::string& v) {
             cfg.film_sheet_inductance = pr.quantity(v, Dim::sheet_inductance); }},
        {"film.scaling_current_2", [&](const Parser& pr, const std::string& v) {
             cfg.film_scaling_current_2 = pr.quantity(v, Dim::current); }},
        {"film.scaling_current_4", [&](const Parser& pr, const std::string& v) {
             cfg.film_scaling_current_4 = pr.quantity(v, Dim::current); }},
        {"film.critical_current", [&](const Parser& pr, const std::string& v) {
             cfg.film_critical_current = pr.quantity(v, Dim::current); }},
        {"dielectric.permittivity", [&](const Parser& pr, const std::string& v) {
             cfg.diel_permittivity = pr.quantity(v, Dim::dimensionless); }},
        {"dielectric.thickness", [&](const Parser& pr, const std::string& v) {
             cfg.diel_thickness = pr.quantity(v, Dim::length); }},
        {"dielectric.fringing_scale", [&](const Parser& pr, const std::string& v) {
             cfg.diel_fringing_scale = pr.quantity(v, Dim::dimensionless); }},
        {"geometry.center_width", [&](const Parser& pr, const std::string& v) {
             cfg.geom_center_width = pr.quantity(v, Dim::length); }},
        {"geometry.stub_width", [&](const Parser& pr, const std::string& v) {
             cfg.geom_stub_width = pr.quantity(v, Dim::length); }},
        {"geometry.stub_spacing", [&](const Parser& pr, const std::string& v) {
             cfg.geom_stub_spacing = pr.quantity(v, Dim::length); }},
        {"geometry.squares_per_cell", [&](const Parser& pr, const std::string& v) {
             cfg.geom_squares_per_cell = pr.quantity(v, Dim::dimensionless); }},
        {"design.target_impedances", [&](const Parser& pr, const std::string& v) {
             cfg.design_target_impedances = pr.quantity_list(v, Dim::resistance); }},
        {"design.stub_min", [&](const Parser& pr, const std::string& v) {
             cfg.design_stub_min = pr.quantity(v, Dim::length); }},
        {"design.stub_max", [&](const Parser& pr, const std::string& v) {
             cfg.design_stub_max = pr.quantity(v, Dim::length); }},
        {"design.curve_points", [&](const Parser& pr, const std::string& v) {
             cfg.design_curve_points = pr.integer(v); }},
        {"design.calibration_a.stub_length", [&](const Parser& pr, const std::string& v) {
             cfg.design_cal_a_length = pr.quantity(v, Dim::length); }},
        {"design.calibration_a.capacitance", [&](const Parser& pr, const std::string& v) {
             cfg.design_cal_a_capacitance = pr.quantity(v, Dim::capacitance); }},
        {"design.calibration_b.stub_length", [&](const Parser& pr, const std::string& v) {
             cfg.design_cal_b_length = pr.quantity(v, Dim::length); }},
        {"design.calibration_b.capacitance", [&](const Parser& pr, const std::string& v) {
             cfg.design_cal_b_capacitance = pr.quantity(v, Dim::capacitance); }},
        {"design.shorted_admittance_csv", [&](const Parser&, const std::string& v) {
             cfg.design_shorted_admittance_csv = v; }},
        {"design.open_admittance_csv", [&](const Parser&, const std::string& v) {
             cfg.design_open_admittance_csv = v; }},
        {"design.admittance_cells", [&](const Parser& pr, const std::string& v) {
             cfg.design_admittance_cells = pr.integer(v); }},
        {"device.n_unloaded", [&](const Parser& pr, const std::string& v) {
             cfg.device_n_unloaded = pr.integer(v); }},
        {"device.n_loaded", [&](const Parser& pr, const std::string& v) {
             cfg.device_n_loaded = pr.integer(v); }},
        {"device.n_supercells", [&](const Parser& pr, const std::string& v) {
             cfg.device_n_supercells = pr.integer(v); }},
        {"device.unloaded.capacitance", [&](const Parser& pr, const std::string& v) {
             cfg.device_unloaded_capacitance = pr.quantity(v, Dim::capacitance); }},
        {"device.loaded.capacitance", [&](const Parser& pr, const std::string& v) {
             cfg.device_loaded_capacitance = pr.quantity(v, Dim::capacitance); }},
        {"device.unloaded.stub_length", [&](const Parser& pr, const std::string& v) {
             cfg.device_unloaded_stub_length = pr.quantity(v, Dim::length); }},
        {"device.loaded.stub_length", [&](const Parser& pr, const std::string& v) {
             cfg.device_loaded_stub_length = pr.quantity(v, Dim::length); }},
        {"device.unloaded.finger_inductance", [&](const Parser& pr, const std::string& v) {
             cfg.device_unloaded_finger_inductance = pr.quantity(v, Dim::inductance); }},
        {"device.loaded.finger_inductance", [&](const Parser& pr, const std::string& v) {
             cfg.device_loaded_finger_inductance = pr.quantity(v, Dim::inductance); }},
        {"device.series_inductance", [&](const Parser& pr, const std::string& v) {
             cfg.device_series_inductance = pr.quantity(v, Dim::inductance); }},
        {"device.z_ref", [&](const Parser& pr, const std::string& v) {
             cfg.device_z_ref = pr.quantity(v, Dim::resistance); }},
        {"bias.dc_current", [&](const Parser& pr, const std::string& v) {
             cfg.bias_dc_current = pr.quantity(v, Dim::current); }},
        {"bias.pump_amplitude", [&](const Parser& pr, const std::string& v) {
             cfg.bias_pump_amplitude = pr.quantity(v, Dim::current); }},
        {"bias.signal_amplitude", [&](const Parser& pr, const std::string& v) {
             cfg.bias_signal_amplitude = pr.quantity(v, Dim::current); }},
        {"sweep.freq_start", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_freq_start = pr.quantity(v, Dim::frequency); }},
        {"sweep.freq_stop", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_freq_stop = pr.quantity(v, Dim::frequency); }},
        {"sweep.freq_points", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_freq_points = pr.integer(v); }},
        {"sweep.pump_start", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_pump_start = pr.quantity(v, Dim::frequency); }},
        {"sweep.pump_stop", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_pump_stop = pr.quantity(v, Dim::frequency); }},
        {"sweep.pump_points", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_pump_points = pr.integer(v); }},
        {"sweep.signal_start", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_signal_start = pr.quantity(v, Dim::frequency); }},
        {"sweep.signal_stop", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_signal_stop = pr.quantity(v, Dim::frequency); }},
        {"sweep.signal_points", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_signal_points = pr.integer(v); }},
        {"sweep.mode_set", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_mode_set = pr.word(v, {"triplet", "triplet_pump_harmonic"}); }},
        {"sweep.undepleted_pump", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_undepleted_pump = pr.boolean(v); }},
        {"sweep.rel_tolerance", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_rel_tolerance = pr.quantity(v, Dim::dimensionless); }},
        {"sweep.smoothing_window", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_smoothing_window = pr.integer(v); }},
        {"sweep.bandgap_threshold", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_bandgap_threshold_db = pr.quantity(v, Dim::decibel); }},
        {"sweep.insertion_loss", [&](const Parser& pr, const std::string& v) {
             cfg.sweep_insertion_loss_db = pr.quantity(v, Dim::decibel); }},
        {"conventions.transmittivity", [&](const Parser& pr, const std::string& v) {
             cfg.convention_transmittivity = pr.word(v, {"amplitude", "power"}); }},
        {"conventions.photon_energy", [&](const Parser& pr, const std::string& v) {
             cfg.convention_photon_energy = pr.word(v, {"printed", "compat"}); }},
        {"noise.eta0_components", [&](const Parser& pr, const std::string& v) {
             cfg.noise_eta0_db = pr.quantity_list(v, Dim::decibel); }},
        {"noise.eta1_components", [&](const Parser& pr, const std::string& v) {
             cfg.noise_eta1_db = pr.quantity_list(v, Dim::decibel); }},
        {"noise.gain_asymmetry", [&](const Parser& pr, const std::string& v) {
             cfg.noise_gain_asymmetry = pr.quantity(v, Dim::dimensionless); }},
        {"noise.thermal_temperature", [&](const Parser& pr, const std::string& v) {
             cfg.noise_thermal_temperature = pr.quantity(v, Dim::temperature); }},
        {"noise.bandwidth_factor", [&](const Parser& pr, const std::string& v) {
             cfg.noise_bandwidth_factor = pr.quantity(v, Dim::dimensionless); }},
        {"fit.rt_squares", [&](const Parser& pr, const std::string& v) {
             cfg.fit_rt_squares = pr.quantity(v, Dim::dimensionless); }},
        {"fit.resonator_inductance", [&](const Parser& pr, const std::string& v) {
             cfg.fit_resonator_inductance = pr.quantity(v, Dim::inductance); }},
        {"fit.resonator_area", [&](const Parser& pr, const std::string& v) {
             cfg.fit_resonator_area = pr.quantity(v, Dim::area); }},
        {"fit.resonator_thickness", [&](const Parser& pr, const std::string& v) {
             cfg.fit_resonator_thickness = pr.quantity(v, Dim::length); }},
        {"fit.probe_frequency", [&](const Parser& pr, const std::string& v) {
             cfg.fit_probe_frequency = pr.quantity(v, Dim::frequency); }},
        {"fit.traversal_time", [&](const Parser& pr, const std::string& v) {
             cfg.fit_traversal_time = pr.quantity(v, Dim::time); }},
        {"fit.ic_drop", [&](const Parser& pr, const std::string& v) {
             cfg.fit_ic_drop_db = pr.quantity(v, Dim::decibel); }},
        {"fit.tdr_z_ref", [&](const Parser& pr, const std::string& v) {
             cfg.fit_tdr_z_ref = pr.quantity(v, Dim::resistance); }},
        {"fit.tdr_threshold", [&](const Parser& pr, const std::string& v) {
             cfg.fit_tdr_threshold = pr.quantity(v, Dim::resistance); }},
        {"output.directory", [&](const Parser&, const std::string& v) {
             cfg.output_directory = v; }},
    };

    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++p.line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) p.fail("expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty()) p.fail("empty value for key '" + key + "'");
        const auto it = schema.find(key);
        if (it == schema.end()) p.fail("unknown key '" + key + "'");
        it->second(p, value);
    }

    if (!cfg.film_scaling_current_4 && cfg.film_scaling_current_2)
        cfg.film_scaling_current_4 = cfg.film_scaling_current_2;
    return cfg;
}

ProjectConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config_text(os.str(), path);
}

}  // namespace kitsim::config
