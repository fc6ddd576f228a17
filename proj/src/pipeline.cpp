#include "kitsim/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "kitsim/characterize.hpp"
#include "kitsim/constants.hpp"
#include "kitsim/io.hpp"
#include "kitsim/noisecal.hpp"

namespace kitsim::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double require(const std::optional<double>& v, const char* key) {
    if (!v) throw config::ConfigError(std::string("missing required config key: ") + key);
    return *v;
}

int require(const std::optional<int>& v, const char* key) {
    if (!v) throw config::ConfigError(std::string("missing required config key: ") + key);
    return *v;
}

cellmodel::FilmProperties film_from_config(const config::ProjectConfig& cfg) {
    cellmodel::FilmProperties film;
    film.sheet_inductance = require(cfg.film_sheet_inductance, "film.sheet_inductance");
    film.scaling_current_2 = require(cfg.film_scaling_current_2, "film.scaling_current_2");
    film.scaling_current_4 = cfg.film_scaling_current_4.value_or(film.scaling_current_2);
    film.critical_current = cfg.film_critical_current;
    film.validate();
    return film;
}

cellmodel::UnitCellGeometry geometry_from_config(const config::ProjectConfig& cfg,
                                                 double stub_length) {
    cellmodel::UnitCellGeometry geom;
    geom.center_width = require(cfg.geom_center_width, "geometry.center_width");
    geom.stub_width = require(cfg.geom_stub_width, "geometry.stub_width");
    geom.stub_spacing = require(cfg.geom_stub_spacing, "geometry.stub_spacing");
    geom.stub_length = stub_length;
    geom.squares_per_cell = cfg.geom_squares_per_cell.value_or(0.0);
    geom.validate();
    return geom;
}

std::vector<double> linspace(double start, double stop, int points) {
    if (points < 1) throw std::invalid_argument("linspace: need at least one point");
    std::vector<double> v(static_cast<std::size_t>(points));
    if (points == 1) {
        v[0] = start;
        return v;
    }
    for (int i = 0; i < points; ++i)
        v[static_cast<std::size_t>(i)] = start + (stop - start) * i / (points - 1);
    return v;
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << j.dump(2) << "\n";
}

json fit_common(const config::ProjectConfig& cfg) {
    return json{{"conventions",
                 {{"transmittivity", cfg.convention_transmittivity},
                  {"photon_energy", cfg.convention_photon_energy}}}};
}

void flatten_into(const json& j, const std::string& prefix, std::ostream& out) {
    for (const auto& [key, value] : j.items()) {
        const std::string name = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object()) {
            flatten_into(value, name, out);
        } else if (value.is_array()) {
            continue;  // tabular data stays in its own CSV
        } else if (value.is_string()) {
            out << name << "," << value.get<std::string>() << "\n";
        } else {
            out << name << "," << value.dump() << "\n";
        }
    }
}

// key,value companion for JSON reports, emitted under --format csv.
void write_report_csv(const std::string& path, const json& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "key,value\n";
    flatten_into(report, "", out);
}

}  // namespace

// ============================================================================
// Device construction
// ============================================================================

cascade::DeviceSpec device_from_config(const config::ProjectConfig& cfg) {
    cascade::DeviceSpec spec;
    spec.film = film_from_config(cfg);

    const double cap_u = require(cfg.device_unloaded_capacitance, "device.unloaded.capacitance");
    const double cap_l = require(cfg.device_loaded_capacitance, "device.loaded.capacitance");

    double series = 0.0;
    if (cfg.device_series_inductance) {
        series = *cfg.device_series_inductance;
    } else {
        const auto geom = geometry_from_config(cfg, 1e-6);
        series = cellmodel::cell_inductance(geom, spec.film);
    }

    auto finger = [&](const std::optional<double>& explicit_value,
                      const std::optional<double>& stub_length, const char* key) {
        if (explicit_value) return *explicit_value;
        const auto geom = geometry_from_config(cfg, require(stub_length, key));
        return cellmodel::finger_inductance(geom, spec.film);
    };
    const double lf_u = finger(cfg.device_unloaded_finger_inductance,
                               cfg.device_unloaded_stub_length, "device.unloaded.stub_length");
    const double lf_l = finger(cfg.device_loaded_finger_inductance,
                               cfg.device_loaded_stub_length, "device.loaded.stub_length");

    spec.unloaded = cellmodel::CellElectricals::from_lc(series, cap_u, lf_u);
    spec.loaded = cellmodel::CellElectricals::from_lc(series, cap_l, lf_l);
    spec.n_unloaded = require(cfg.device_n_unloaded, "device.n_unloaded");
    spec.n_loaded = require(cfg.device_n_loaded, "device.n_loaded");
    spec.n_supercells = require(cfg.device_n_supercells, "device.n_supercells");
    spec.bias.dc_current = cfg.bias_dc_current;
    spec.bias.pump_amplitude = cfg.bias_pump_amplitude;
    spec.bias.signal_amplitude = cfg.bias_signal_amplitude;
    spec.z_ref = cfg.device_z_ref;
    if (cfg.geom_stub_spacing) spec.cell_pitch = 2.0 * *cfg.geom_stub_spacing;
    spec.validate();
    return spec;
}

cascade::DispersionCurve dispersion_for_device(const cascade::DeviceSpec& spec,
                                               double f_max, int threads) {
    // Step small enough that the per-device phase advances by well under pi
    // between samples, with headroom for the band-edge slowdown.
    const double delay = spec.device_length() *
                         std::sqrt(spec.biased_series_inductance() *
                                   spec.unloaded.shunt_capacitance) /
                         spec.cell_pitch;
    double step = 1.0 / (8.0 * delay);
    for (int attempt = 0; attempt < 3; ++attempt) {
        const int points = static_cast<int>(std::ceil(f_max / step)) + 1;
        std::vector<double> grid(static_cast<std::size_t>(points));
        for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = step * (i + 1);
        const auto spectrum = cascade::s21_spectrum(spec, grid, threads);
        auto curve = cascade::dispersion(spec, spectrum);
        if (!curve.unwrap_ambiguous) return curve;
        step /= 2.0;
    }
    throw std::runtime_error("dispersion_for_device: unwrap stayed ambiguous after "
                             "grid refinement");
}

// ============================================================================
// design
// ============================================================================

RunArtifacts run_design(const config::ProjectConfig& cfg, const std::string& out_dir,
                        const std::string& format) {
    const auto film = film_from_config(cfg);
    ensure_dir(out_dir + "/design");

    // Per-cell series inductance from geometry unless given explicitly.
    const auto geom0 = geometry_from_config(cfg, 1e-6);
    const double series = cfg.device_series_inductance
                              ? *cfg.device_series_inductance
                              : cellmodel::cell_inductance(geom0, film);

    // Capacitance model: admittance fits beat calibration rows beat closed form.
    cellmodel::StubCapacitanceModel cap_model{};
    std::string cap_source;
    double fitted_series = series;
    if (cfg.design_shorted_admittance_csv && cfg.design_open_admittance_csv) {
        const int cells = require(cfg.design_admittance_cells, "design.admittance_cells");
        const auto shorted = io::read_admittance_csv(*cfg.design_shorted_admittance_csv,
                                                     cellmodel::LineBoundary::shorted, cells);
        const auto open = io::read_admittance_csv(*cfg.design_open_admittance_csv,
                                                  cellmodel::LineBoundary::open, cells);
        const auto fit = cellmodel::fit_line_params_combined(shorted, open);
        fitted_series = fit.series_inductance;
        // One fitted point plus the closed-form slope pins the linear model.
        const auto closed = cellmodel::StubCapacitanceModel::closed_form(
            geom0, {require(cfg.diel_permittivity, "dielectric.permittivity"),
                    require(cfg.diel_thickness, "dielectric.thickness")},
            cfg.diel_fringing_scale);
        cap_model.slope = closed.slope;
        cap_model.offset = fit.shunt_capacitance - closed.slope * geom0.stub_length;
        cap_source = "admittance_fit";
    } else if (cfg.design_cal_a_length && cfg.design_cal_b_length) {
        cap_model = cellmodel::StubCapacitanceModel::from_calibration(
            *cfg.design_cal_a_length,
            require(cfg.design_cal_a_capacitance, "design.calibration_a.capacitance"),
            *cfg.design_cal_b_length,
            require(cfg.design_cal_b_capacitance, "design.calibration_b.capacitance"));
        cap_source = "calibration_rows";
    } else {
        cellmodel::DielectricProperties diel{
            require(cfg.diel_permittivity, "dielectric.permittivity"),
            require(cfg.diel_thickness, "dielectric.thickness")};
        cap_model = cellmodel::StubCapacitanceModel::closed_form(geom0, diel,
                                                                 cfg.diel_fringing_scale);
        cap_source = "closed_form";
    }

    std::vector<double> targets = cfg.design_target_impedances;
    if (targets.empty()) targets = {48.0, 78.0};

    json report;
    report["capacitance_model"] = {{"source", cap_source},
                                   {"slope_f_per_m", cap_model.slope},
                                   {"offset_f", cap_model.offset}};
    report["series_inductance_h"] = fitted_series;

    RunArtifacts artifacts;
    json solved = json::array();
    std::vector<cellmodel::StubDesignPoint> curve;
    std::vector<cellmodel::CellElectricals> cells;
    for (double z : targets) {
        const auto result = cellmodel::stub_length_for_impedance(
            z, fitted_series, cap_model, cfg.design_stub_min, cfg.design_stub_max,
            cfg.design_curve_points);
        if (curve.empty()) curve = result.curve;
        const double cap = cap_model.at(result.stub_length);
        const auto geom = geometry_from_config(cfg, result.stub_length);
        const auto cell = cellmodel::CellElectricals::from_lc(
            fitted_series, cap, cellmodel::finger_inductance(geom, film));
        cells.push_back(cell);
        solved.push_back({{"target_z0_ohm", z},
                          {"stub_length_m", result.stub_length},
                          {"capacitance_f", cap},
                          {"finger_inductance_h", cell.finger_inductance},
                          {"achieved_z0_ohm", cell.characteristic_impedance}});
    }
    report["targets"] = solved;
    if (cells.size() >= 2 && cfg.device_n_unloaded && cfg.device_n_loaded) {
        report["supercell_z0_ohm"] = cellmodel::supercell_impedance(
            *cfg.device_n_unloaded, *cfg.device_n_loaded, cells[0], cells[1]);
    }

    io::write_design_curve_csv(out_dir + "/design/curve.csv", curve);
    artifacts.files.push_back("design/curve.csv");
    if (format == "csv") {
        std::vector<std::vector<double>> rows;
        for (const auto& t : solved)
            rows.push_back({t["target_z0_ohm"].get<double>(),
                            t["stub_length_m"].get<double>(),
                            t["capacitance_f"].get<double>(),
                            t["achieved_z0_ohm"].get<double>()});
        io::write_csv(out_dir + "/design/report.csv",
                      {"target_z0_ohm", "stub_length_m", "capacitance_f", "achieved_z0_ohm"},
                      rows);
        artifacts.files.push_back("design/report.csv");
    } else {
        write_json(out_dir + "/design/report.json", report);
        artifacts.files.push_back("design/report.json");
    }
    return artifacts;
}

// ============================================================================
// sweep
// ============================================================================

RunArtifacts run_sweep(const config::ProjectConfig& cfg, const std::string& out_dir,
                       int threads, const std::string& format) {
    const auto spec = device_from_config(cfg);
    ensure_dir(out_dir + "/sweep");
    RunArtifacts artifacts;

    const auto grid = linspace(cfg.sweep_freq_start, cfg.sweep_freq_stop,
                               cfg.sweep_freq_points);
    const auto spectrum = cascade::s21_spectrum(spec, grid, threads);
    io::write_touchstone(out_dir + "/sweep/device.s2p", spectrum, spec.z_ref,
                         "kitsim sweep output");
    io::write_spectrum_csv(out_dir + "/sweep/spectrum.csv", spectrum);
    artifacts.files.push_back("sweep/device.s2p");
    artifacts.files.push_back("sweep/spectrum.csv");

    json metrics;
    std::optional<cascade::Bandgap> bandgap;
    try {
        bandgap = cascade::find_bandgap(spectrum, cfg.sweep_bandgap_threshold_db);
        metrics["bandgap"] = {{"f_low_hz", bandgap->f_low},
                              {"f_high_hz", bandgap->f_high},
                              {"f_center_hz", bandgap->f_center},
                              {"threshold_db", cfg.sweep_bandgap_threshold_db}};
    } catch (const std::exception& e) {
        metrics["bandgap"] = {{"error", e.what()}};
    }

    const bool harmonic = cfg.sweep_mode_set == "triplet_pump_harmonic";
    const bool have_pumps = cfg.sweep_pump_start.has_value();
    double disp_max = cfg.sweep_freq_stop;
    if (have_pumps) {
        const double pump_top = cfg.sweep_pump_stop.value_or(*cfg.sweep_pump_start);
        disp_max = std::max(disp_max, (harmonic ? 2.0 : 1.05) * pump_top);
    }
    const auto dispersion = dispersion_for_device(spec, disp_max, threads);
    io::write_dispersion_csv(out_dir + "/sweep/dispersion.csv", dispersion);
    artifacts.files.push_back("sweep/dispersion.csv");

    if (have_pumps) {
        gainsim::CMEConfig cme;
        cme.pump_amplitude = spec.bias.pump_amplitude;
        cme.signal_amplitude = spec.bias.signal_amplitude;
        cme.signal_grid = linspace(require(cfg.sweep_signal_start, "sweep.signal_start"),
                                   require(cfg.sweep_signal_stop, "sweep.signal_stop"),
                                   cfg.sweep_signal_points);
        cme.mode_set = harmonic ? gainsim::ModeSet::triplet_pump_harmonic
                                : gainsim::ModeSet::triplet;
        cme.rel_tolerance = cfg.sweep_rel_tolerance;
        cme.device_length = spec.device_length();
        cme.undepleted_pump = cfg.sweep_undepleted_pump;

        const auto pumps = linspace(*cfg.sweep_pump_start,
                                    cfg.sweep_pump_stop.value_or(*cfg.sweep_pump_start),
                                    cfg.sweep_pump_points);
        const auto sweep = gainsim::pump_sweep(spec, cme, pumps, dispersion, bandgap,
                                               threads, cfg.sweep_smoothing_window);

        std::vector<std::vector<double>> rows;
        for (std::size_t p = 0; p < pumps.size(); ++p) {
            if (!sweep.errors[p].empty()) continue;
            const auto& prof = sweep.profiles[p];
            for (std::size_t i = 0; i < prof.signal_frequencies.size(); ++i) {
                if (prof.skipped[i]) continue;
                rows.push_back({pumps[p], prof.signal_frequencies[i], prof.gain_db[i]});
            }
        }
        io::write_csv(out_dir + "/sweep/gain.csv", {"pump_hz", "signal_hz", "gain_db"}, rows);
        artifacts.files.push_back("sweep/gain.csv");

        json per_pump = json::array();
        double best_gbp = -1.0, best_peak = -1e300;
        std::size_t gbp_idx = 0, peak_idx = 0;
        for (std::size_t p = 0; p < pumps.size(); ++p) {
            json entry{{"pump_hz", pumps[p]}};
            if (!sweep.errors[p].empty()) {
                entry["error"] = sweep.errors[p];
            } else {
                const auto& m = sweep.metrics[p];
                const auto raw = gainsim::band_metrics(sweep.profiles[p], 1);
                entry["b3db_hz"] = m.b3db_hz;
                entry["mean_gain_db"] = m.mean_gain_db;
                entry["gbp_hz_db"] = m.gbp_hz_db;
                entry["peak_gain_db"] = m.peak_gain_db;
                entry["peak_signal_hz"] = m.peak_frequency;
                entry["left_truncated"] = m.left_truncated;
                entry["right_truncated"] = m.right_truncated;
                entry["raw_b3db_hz"] = raw.b3db_hz;
                entry["raw_peak_gain_db"] = raw.peak_gain_db;
                entry["below_bandgap_warning"] = sweep.below_bandgap_warning[p];
                entry["depletion_warning"] = sweep.profiles[p].depletion_warning;
                if (cfg.sweep_insertion_loss_db)
                    entry["peak_true_gain_db"] = m.peak_gain_db + *cfg.sweep_insertion_loss_db;
                if (m.gbp_hz_db > best_gbp && !m.left_truncated && !m.right_truncated) {
                    best_gbp = m.gbp_hz_db;
                    gbp_idx = p;
                }
                if (m.peak_gain_db > best_peak) {
                    best_peak = m.peak_gain_db;
                    peak_idx = p;
                }
            }
            per_pump.push_back(entry);
        }
        metrics["pumps"] = per_pump;
        metrics["max_gbp_pump_hz"] = pumps[gbp_idx];
        metrics["max_gain_pump_hz"] = pumps[peak_idx];
        metrics["smoothing_window"] = cfg.sweep_smoothing_window;
        if (cfg.sweep_insertion_loss_db)
            metrics["insertion_loss_db"] = *cfg.sweep_insertion_loss_db;
    }

    write_json(out_dir + "/sweep/metrics.json", metrics);
    artifacts.files.push_back("sweep/metrics.json");
    if (format == "csv" && metrics.contains("pumps")) {
        std::vector<std::vector<double>> rows;
        for (const auto& p : metrics["pumps"]) {
            if (p.contains("error")) continue;
            rows.push_back({p["pump_hz"].get<double>(), p["peak_gain_db"].get<double>(),
                            p["peak_signal_hz"].get<double>(), p["b3db_hz"].get<double>(),
                            p["mean_gain_db"].get<double>(), p["gbp_hz_db"].get<double>()});
        }
        io::write_csv(out_dir + "/sweep/pump_metrics.csv",
                      {"pump_hz", "peak_gain_db", "peak_signal_hz", "b3db_hz",
                       "mean_gain_db", "gbp_hz_db"},
                      rows);
        artifacts.files.push_back("sweep/pump_metrics.csv");
    }
    return artifacts;
}

// ============================================================================
// fit subcommands
// ============================================================================

RunArtifacts run_fit_scaling(const config::ProjectConfig& cfg, const std::string& trace,
                             const std::string& out_dir, const std::string& format) {
    ensure_dir(out_dir + "/fit");
    const double f_probe = require(cfg.fit_probe_frequency, "fit.probe_frequency");
    const double tau = require(cfg.fit_traversal_time, "fit.traversal_time");
    const auto data = io::read_phase_bias_csv(trace, 2.0 * constants::pi * f_probe, tau);
    const auto fit = characterize::fit_scaling_currents(data);
    json report = fit_common(cfg);
    report["i_star2_a"] = fit.i_star2;
    report["i_star4_a"] = std::isinf(fit.i_star4) ? json() : json(fit.i_star4);
    report["rms_relative_residual"] = fit.rms_relative_residual;
    report["quartic_unconstrained"] = fit.quartic_unconstrained;
    report["theta_r_rad"] = data.theta_r();
    write_json(out_dir + "/fit/scaling.json", report);
    if (format == "csv") write_report_csv(out_dir + "/fit/scaling.csv", report);
    return {{"fit/scaling.json"}};
}

RunArtifacts run_fit_ic(const config::ProjectConfig& cfg, const std::string& trace,
                        const std::string& out_dir, const std::string& format) {
    ensure_dir(out_dir + "/fit");
    const auto sweep = io::read_bias_s21_csv(trace);
    const double ic = characterize::critical_current(sweep, cfg.fit_ic_drop_db);
    json report = fit_common(cfg);
    report["critical_current_a"] = ic;
    report["drop_threshold_db"] = cfg.fit_ic_drop_db;
    write_json(out_dir + "/fit/ic.json", report);
    if (format == "csv") write_report_csv(out_dir + "/fit/ic.csv", report);
    return {{"fit/ic.json"}};
}

RunArtifacts run_fit_tdr(const config::ProjectConfig& cfg, const std::string& trace,
                         const std::string& out_dir, const std::string& format) {
    ensure_dir(out_dir + "/fit");
    const auto data = io::read_tdr_csv(trace, cfg.fit_tdr_z_ref);
    const auto profile = characterize::tdr_impedance_profile(data, cfg.fit_tdr_threshold);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < profile.time.size(); ++i)
        rows.push_back({profile.time[i], profile.impedance[i]});
    io::write_csv(out_dir + "/fit/tdr_profile.csv", {"time_s", "z_ohm"}, rows);
    json report = fit_common(cfg);
    report["z_ref_ohm"] = data.z_ref;
    report["near_singular"] = profile.near_singular;
    if (profile.device_start) {
        report["device_start_s"] = *profile.device_start;
        report["device_end_s"] = *profile.device_end;
        report["mean_device_impedance_ohm"] = *profile.mean_device_impedance;
        report["traversal_time_s"] = *profile.device_end - *profile.device_start;
    }
    write_json(out_dir + "/fit/tdr.json", report);
    if (format == "csv") write_report_csv(out_dir + "/fit/tdr.csv", report);
    return {{"fit/tdr_profile.csv", "fit/tdr.json"}};
}

RunArtifacts run_fit_iip(const config::ProjectConfig& cfg, const std::string& trace,
                         const std::string& out_dir, const std::string& format) {
    ensure_dir(out_dir + "/fit");
    const auto sweep = io::read_two_tone_csv(trace);
    const auto result = characterize::extract_compression(sweep);
    json report = fit_common(cfg);
    report["iip1_dbm"] = result.iip1_dbm;
    report["iip3_dbm"] = result.iip3_dbm;
    report["fundamental_slope"] = result.fundamental_slope;
    report["imd_slope"] = result.imd_slope;
    report["fundamental_rms_residual_db"] = result.fundamental_rms_residual_db;
    report["imd_rms_residual_db"] = result.imd_rms_residual_db;
    write_json(out_dir + "/fit/iip.json", report);
    if (format == "csv") write_report_csv(out_dir + "/fit/iip.csv", report);
    return {{"fit/iip.json"}};
}

RunArtifacts run_fit_rt(const config::ProjectConfig& cfg, const std::string& trace,
                        const std::string& out_dir, const std::string& format) {
    ensure_dir(out_dir + "/fit");
    const auto data = io::read_rt_csv(trace);
    const auto result = cellmodel::sheet_inductance_from_rt(data, cfg.fit_rt_squares);
    json report = fit_common(cfg);
    report["sheet_inductance_h_per_sq"] = result.sheet_inductance;
    report["normal_resistance_ohm"] = result.normal_resistance;
    report["critical_temperature_k"] = result.critical_temperature;
    report["n_squares"] = cfg.fit_rt_squares;
    write_json(out_dir + "/fit/rt.json", report);
    if (format == "csv") write_report_csv(out_dir + "/fit/rt.csv", report);
    return {{"fit/rt.json"}};
}

RunArtifacts run_fit_resonance(const config::ProjectConfig& cfg, const std::string& trace,
                               const std::string& out_dir, const std::string& format) {
    ensure_dir(out_dir + "/fit");
    const auto table = io::read_csv(trace, {"freq_hz", "s21_db"});
    if (table.rows.size() < 3) throw io::ParseError(trace + ": too few rows for a dip search");
    // Resonance = transmission dip; plain minimum search, no lineshape fit.
    std::size_t min_idx = 0;
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        if (table.rows[i][1] < table.rows[min_idx][1]) min_idx = i;
    const double f_res = table.rows[min_idx][0];
    cellmodel::ResonatorModel model{
        require(cfg.fit_resonator_inductance, "fit.resonator_inductance"),
        require(cfg.fit_resonator_area, "fit.resonator_area"),
        require(cfg.fit_resonator_thickness, "fit.resonator_thickness")};
    const auto result = cellmodel::permittivity_from_resonance(f_res, model);
    json report = fit_common(cfg);
    report["resonance_hz"] = f_res;
    report["relative_permittivity"] = result.relative_permittivity;
    report["specific_capacitance_f_per_m2"] = result.specific_capacitance;
    report["degeneracy_note"] =
        "eps_r assumes the stated thickness; only eps_r/d is measured";
    write_json(out_dir + "/fit/resonance.json", report);
    if (format == "csv") write_report_csv(out_dir + "/fit/resonance.csv", report);
    return {{"fit/resonance.json"}};
}

// ============================================================================
// noise
// ============================================================================

RunArtifacts run_noise(const config::ProjectConfig& cfg,
                       const std::vector<std::string>& traces, const std::string& out_dir,
                       const std::string& format) {
    if (traces.empty()) throw std::invalid_argument("noise: no SNTJ trace files given");
    if (cfg.noise_eta0_db.empty() || cfg.noise_eta1_db.empty())
        throw config::ConfigError("noise: eta0/eta1 component chains missing from config");
    ensure_dir(out_dir + "/noise");

    const auto db_conv = cfg.convention_transmittivity == "power"
                             ? noisecal::DbConvention::power
                             : noisecal::DbConvention::amplitude;
    const auto photon = cfg.convention_photon_energy == "compat"
                            ? noisecal::PhotonConvention::ev_per_hbar_omega
                            : noisecal::PhotonConvention::half_ev_per_hbar_omega;

    noisecal::TransmittivityChain chain0{{}, db_conv}, chain1{{}, db_conv};
    for (double db : cfg.noise_eta0_db) chain0.components.push_back({"", db});
    for (double db : cfg.noise_eta1_db) chain1.components.push_back({"", db});
    const double eta0 = noisecal::chain_transmittivity(chain0);
    const double eta1 = noisecal::chain_transmittivity(chain1);

    json report;
    report["eta0"] = eta0;
    report["eta1"] = eta1;
    report["conventions"] = {{"transmittivity", cfg.convention_transmittivity},
                             {"photon_energy", cfg.convention_photon_energy}};

    std::vector<double> freqs, excess;
    json per_trace = json::array();
    for (const auto& path : traces) {
        const auto trace = io::read_sntj_csv(path);
        noisecal::NoiseFitOptions opt;
        opt.eta0 = eta0;
        opt.eta1 = eta1;
        opt.gain_asymmetry = cfg.noise_gain_asymmetry;
        opt.convention = photon;
        const auto fit = noisecal::fit_system_noise(trace, opt);
        const double f = trace.omega / (2.0 * constants::pi);
        const double n_t = noisecal::thermal_occupancy(cfg.noise_thermal_temperature,
                                                       trace.omega);
        const double transformed = noisecal::transform_reference_plane_even_split(
            fit.excess_noise, eta1, cfg.noise_gain_asymmetry, n_t);
        per_trace.push_back({{"file", path},
                             {"freq_hz", f},
                             {"system_gain", fit.system_gain},
                             {"excess_noise_quanta", fit.excess_noise},
                             {"excess_clamped", fit.excess_clamped},
                             {"points_used", fit.points_used},
                             {"thermal_occupancy_quanta", n_t},
                             {"transformed_excess_quanta", transformed}});
        freqs.push_back(f);
        excess.push_back(fit.excess_noise);
    }
    report["traces"] = per_trace;

    if (freqs.size() >= 2) {
        std::vector<std::size_t> order(freqs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return freqs[a] < freqs[b]; });
        noisecal::ExcessSpectrum spec;
        for (std::size_t i : order) {
            spec.frequencies.push_back(freqs[i]);
            spec.excess.push_back(excess[i]);
        }
        const double floor = *std::min_element(spec.excess.begin(), spec.excess.end());
        try {
            report["noise_bandwidth_hz"] =
                noisecal::noise_bandwidth(spec, floor, cfg.noise_bandwidth_factor);
            report["noise_floor_quanta"] = floor;
            report["bandwidth_factor"] = cfg.noise_bandwidth_factor;
        } catch (const std::exception& e) {
            report["noise_bandwidth_error"] = e.what();
        }
    }

    write_json(out_dir + "/noise/report.json", report);
    RunArtifacts artifacts{{"noise/report.json"}};
    if (format == "csv") {
        std::vector<std::vector<double>> rows;
        for (const auto& t : report["traces"]) {
            rows.push_back({t["freq_hz"].get<double>(), t["system_gain"].get<double>(),
                            t["excess_noise_quanta"].get<double>(),
                            t["transformed_excess_quanta"].get<double>()});
        }
        io::write_csv(out_dir + "/noise/report.csv",
                      {"freq_hz", "system_gain", "excess_noise_quanta",
                       "transformed_excess_quanta"},
                      rows);
        artifacts.files.push_back("noise/report.csv");
    }
    return artifacts;
}

// ============================================================================
// manifest
// ============================================================================

void write_manifest(const std::string& out_dir, const std::string& command,
                    const RunArtifacts& artifacts) {
    ensure_dir(out_dir);
    json manifest;
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    manifest["generated_at"] = buf;  // the single timestamped field of a run
    manifest["command"] = command;
    manifest["artifacts"] = artifacts.files;
    write_json(out_dir + "/manifest.json", manifest);
}

}  // namespace kitsim::pipeline
