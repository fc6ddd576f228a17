#include "kitsim/cellmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "kitsim/constants.hpp"

namespace kitsim::cellmodel {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

// ============================================================================
// Domain type validation
// ============================================================================

void FilmProperties::validate() const {
    require(sheet_inductance > 0, "film: sheet inductance must be positive");
    require(scaling_current_2 > 0, "film: scaling current I*2 must be positive");
    require(scaling_current_4 > 0, "film: scaling current I*4 must be positive");
    if (critical_current) {
        require(*critical_current > 0, "film: critical current must be positive");
        require(*critical_current < scaling_current_2,
                "film: critical current must lie below I*2");
    }
}

void DielectricProperties::validate() const {
    require(relative_permittivity >= 1.0, "dielectric: permittivity must be >= 1");
    require(thickness > 0, "dielectric: thickness must be positive");
}

double UnitCellGeometry::squares() const {
    if (squares_per_cell > 0) return squares_per_cell;
    return pitch() / center_width;
}

void UnitCellGeometry::validate() const {
    require(center_width > 0 && stub_width > 0 && stub_spacing > 0 && stub_length >= 0,
            "geometry: all lengths must be positive");
}

CellElectricals CellElectricals::from_lc(double series_inductance, double shunt_capacitance,
                                         double finger_inductance) {
    require(series_inductance > 0, "cell: series inductance must be positive");
    require(shunt_capacitance > 0, "cell: shunt capacitance must be positive");
    require(finger_inductance >= 0, "cell: finger inductance must be nonnegative");
    CellElectricals c;
    c.series_inductance = series_inductance;
    c.shunt_capacitance = shunt_capacitance;
    c.finger_inductance = finger_inductance;
    c.characteristic_impedance = std::sqrt(series_inductance / shunt_capacitance);
    return c;
}

void CellElectricals::validate() const {
    require(series_inductance > 0 && shunt_capacitance > 0 && characteristic_impedance > 0,
            "cell: electricals must be positive");
    const double z = std::sqrt(series_inductance / shunt_capacitance);
    require(std::abs(characteristic_impedance - z) <= 1e-12 * z,
            "cell: impedance inconsistent with sqrt(L/C)");
}

std::optional<std::string> BiasState::check(const FilmProperties& film) const {
    if (dc_current < 0) throw std::invalid_argument("bias: dc current must be nonnegative");
    if (dc_current + pump_amplitude >= film.scaling_current_2) {
        std::ostringstream os;
        os << "bias: I_dc + I_p0 = " << (dc_current + pump_amplitude)
           << " A reaches the scaling current " << film.scaling_current_2 << " A";
        return os.str();
    }
    return std::nullopt;
}

void AdmittanceSpectrum::validate() const {
    require(cell_count >= 1, "admittance: cell count must be >= 1");
    require(frequencies.size() == y11.size(), "admittance: array length mismatch");
    for (std::size_t i = 1; i < frequencies.size(); ++i)
        require(frequencies[i] > frequencies[i - 1],
                "admittance: frequencies must be strictly increasing");
}

// ============================================================================
// Film nonlinearity
// ============================================================================

double kinetic_inductance(const FilmProperties& film, double l0, double current) {
    film.validate();
    if (std::abs(current) >= film.scaling_current_2)
        throw std::domain_error("kinetic_inductance: |I| >= I*2, expansion unphysical");
    const double q2 = current / film.scaling_current_2;
    const double q4 = current / film.scaling_current_4;
    return l0 * (1.0 + q2 * q2 + q4 * q4 * q4 * q4);
}

MixingCoefficients mixing_coefficients(double i_dc, double i_star) {
    require(i_star > 0, "mixing_coefficients: scaling current must be positive");
    const double denom = i_star * i_star + i_dc * i_dc;
    return {2.0 * i_dc / denom, 1.0 / denom};
}

double biased_inductance(double l0, double i_dc, double i_star) {
    require(i_star > 0, "biased_inductance: scaling current must be positive");
    const double q = i_dc / i_star;
    return l0 * (1.0 + q * q);
}

double pump_modulation_depth(double i_dc, double i_p, double i_star2) {
    require(i_dc >= 0 && i_p >= 0, "pump_modulation_depth: currents must be nonnegative");
    require(i_star2 > 0, "pump_modulation_depth: scaling current must be positive");
    return 2.0 * i_p * i_dc / (i_star2 * i_star2 + i_dc * i_dc);
}

// ============================================================================
// Closed-form cell electricals
// ============================================================================

double cell_capacitance_closed_form(const UnitCellGeometry& geom,
                                    const DielectricProperties& diel,
                                    double fringing_scale) {
    geom.validate();
    diel.validate();
    // metal area per cell: two stubs plus the pitch-long center segment
    const double area = 2.0 * geom.stub_length * geom.stub_width +
                        geom.pitch() * geom.center_width;
    return fringing_scale * constants::vacuum_permittivity * diel.relative_permittivity *
           area / diel.thickness;
}

double cell_inductance(const UnitCellGeometry& geom, const FilmProperties& film) {
    geom.validate();
    require(geom.squares() > 0, "cell_inductance: squares per cell must be positive");
    return geom.squares() * film.sheet_inductance;
}

double finger_inductance(const UnitCellGeometry& geom, const FilmProperties& film) {
    geom.validate();
    return geom.stub_length / geom.stub_width * film.sheet_inductance;
}

// ============================================================================
// Line input reactance models
// ============================================================================

double input_inductance_model(double series_inductance, double shunt_capacitance,
                              int cell_count, double omega) {
    const double n = static_cast<double>(cell_count);
    const double u = omega * omega * n * n * series_inductance * shunt_capacitance;
    if (u >= 1.0)
        throw std::domain_error("input_inductance_model: outside series validity window");
    return series_inductance * n * (1.0 + u / 3.0 + 2.0 * u * u / 15.0);
}

double input_capacitance_model(double series_inductance, double shunt_capacitance,
                               int cell_count, double omega) {
    const double n = static_cast<double>(cell_count);
    const double u = omega * omega * n * n * series_inductance * shunt_capacitance;
    const double denom = 45.0 - 15.0 * u - u * u;
    if (denom <= 0.0)
        throw std::domain_error("input_capacitance_model: denominator not positive");
    return shunt_capacitance * n * 45.0 / denom;
}

// ============================================================================
// Admittance fits
// ============================================================================

namespace {

struct FitData {
    std::vector<double> omega;
    std::vector<double> value;  // L1 or C1 samples
};

FitData reactance_samples(const AdmittanceSpectrum& spectrum) {
    FitData d;
    d.omega.reserve(spectrum.frequencies.size());
    d.value.reserve(spectrum.frequencies.size());
    for (std::size_t i = 0; i < spectrum.frequencies.size(); ++i) {
        const double w = 2.0 * constants::pi * spectrum.frequencies[i];
        const std::complex<double> z11 = 1.0 / spectrum.y11[i];
        if (spectrum.boundary == LineBoundary::shorted) {
            d.value.push_back(z11.imag() / w);          // L1 = Im(Z11)/w
        } else {
            d.value.push_back(-1.0 / (w * z11.imag())); // C1 = -1/(w Im(Z11))
        }
        d.omega.push_back(w);
    }
    return d;
}

// Least-squares polynomial in w^2 on a scaled basis; returns coefficients of
// 1, w^2, w^4, w^6 in physical units.
Eigen::Vector4d poly_even_fit(const std::vector<double>& omega,
                              const std::vector<double>& y) {
    const double wmax = omega.back();
    const Eigen::Index m = static_cast<Eigen::Index>(omega.size());
    Eigen::MatrixXd basis(m, 4);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double ws = omega[static_cast<std::size_t>(i)] / wmax;
        const double ws2 = ws * ws;
        basis(i, 0) = 1.0;
        basis(i, 1) = ws2;
        basis(i, 2) = ws2 * ws2;
        basis(i, 3) = ws2 * ws2 * ws2;
        rhs(i) = y[static_cast<std::size_t>(i)];
    }
    Eigen::Vector4d a = basis.colPivHouseholderQr().solve(rhs);
    for (int k = 1; k < 4; ++k) a(k) /= std::pow(wmax, 2.0 * k);
    return a;
}

struct ModelEval {
    double value;
    double d_log_l;  // dm/dlog(L)
    double d_log_c;  // dm/dlog(C)
};

ModelEval eval_shorted(double l, double c, double n, double w) {
    const double u = w * w * n * n * l * c;
    const double poly = 1.0 + u / 3.0 + 2.0 * u * u / 15.0;
    const double dpoly_du = 1.0 / 3.0 + 4.0 * u / 15.0;
    const double m = l * n * poly;
    // u scales linearly with both L and C
    return {m, m + l * n * dpoly_du * u, l * n * dpoly_du * u};
}

ModelEval eval_open(double l, double c, double n, double w) {
    const double u = w * w * n * n * l * c;
    const double denom = 45.0 - 15.0 * u - u * u;
    const double m = c * n * 45.0 / denom;
    const double dfrac_du = 45.0 * (15.0 + 2.0 * u) / (denom * denom);
    return {m, c * n * dfrac_du * u, m + c * n * dfrac_du * u};
}

}  // namespace

LineFitResult fit_line_params(const AdmittanceSpectrum& spectrum, double fit_window) {
    spectrum.validate();
    if (spectrum.frequencies.size() < 5)
        throw std::runtime_error("fit_line_params: need at least 5 frequency points");

    FitData data = reactance_samples(spectrum);
    const double n = static_cast<double>(spectrum.cell_count);
    const bool shorted = spectrum.boundary == LineBoundary::shorted;

    // Initialization from the quasi-static intercept and leading slope.
    Eigen::Vector4d a = poly_even_fit(data.omega, data.value);
    double l, c;
    if (shorted) {
        l = a(0) / n;
        c = 3.0 * a(1) / (n * n * n * l * l);
    } else {
        c = a(0) / n;
        l = 3.0 * a(1) / (n * n * n * c * c);
    }
    if (!(l > 0) || !(c > 0))
        throw std::runtime_error("fit_line_params: ill-conditioned data, "
                                 "quasi-static regime does not constrain both parameters");

    // Trim to the quasi-static window using the initial estimate.
    std::vector<double> omega, value;
    for (std::size_t i = 0; i < data.omega.size(); ++i) {
        if (data.omega[i] * n * std::sqrt(l * c) <= fit_window) {
            omega.push_back(data.omega[i]);
            value.push_back(data.value[i]);
        }
    }
    if (omega.size() < 5)
        throw std::runtime_error("fit_line_params: fewer than 5 points inside the "
                                 "quasi-static fit window");
    const double u_max = omega.back() * omega.back() * n * n * l * c;
    if (u_max < 1e-8)
        throw std::runtime_error("fit_line_params: ill-conditioned data, all points "
                                 "too deep in the flat quasi-static regime");
    if (omega.size() != data.omega.size()) {
        a = poly_even_fit(omega, value);
        if (shorted) {
            l = a(0) / n;
            c = 3.0 * a(1) / (n * n * n * l * l);
        } else {
            c = a(0) / n;
            l = 3.0 * a(1) / (n * n * n * c * c);
        }
    }

    // Gauss-Newton in log-parameters down to 1e-10 relative.
    int iters = 0;
    for (; iters < 60; ++iters) {
        Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        for (std::size_t i = 0; i < omega.size(); ++i) {
            const ModelEval m = shorted ? eval_shorted(l, c, n, omega[i])
                                        : eval_open(l, c, n, omega[i]);
            const double r = value[i] - m.value;
            const Eigen::Vector2d j(m.d_log_l, m.d_log_c);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        const Eigen::Vector2d step = jtj.ldlt().solve(jtr);
        if (!step.allFinite())
            throw std::runtime_error("fit_line_params: normal equations singular");
        l *= std::exp(std::clamp(step(0), -1.0, 1.0));
        c *= std::exp(std::clamp(step(1), -1.0, 1.0));
        if (std::abs(step(0)) < 1e-10 && std::abs(step(1)) < 1e-10) break;
    }
    if (iters >= 60)
        throw std::runtime_error("fit_line_params: Gauss-Newton did not converge");

    double ss = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        const ModelEval m = shorted ? eval_shorted(l, c, n, omega[i])
                                    : eval_open(l, c, n, omega[i]);
        const double rel = (value[i] - m.value) / value[i];
        ss += rel * rel;
    }
    LineFitResult out;
    out.series_inductance = l;
    out.shunt_capacitance = c;
    out.rms_relative_residual = std::sqrt(ss / static_cast<double>(omega.size()));
    out.iterations = iters + 1;
    return out;
}

CombinedLineFit fit_line_params_combined(const AdmittanceSpectrum& shorted,
                                         const AdmittanceSpectrum& open) {
    if (shorted.boundary != LineBoundary::shorted || open.boundary != LineBoundary::open)
        throw std::invalid_argument("fit_line_params_combined: boundary tags swapped");
    CombinedLineFit out;
    out.shorted = fit_line_params(shorted);
    out.open = fit_line_params(open);
    out.series_inductance = out.shorted.series_inductance;
    out.shunt_capacitance = out.open.shunt_capacitance;
    return out;
}

// ============================================================================
// Stub-length design
// ============================================================================

StubCapacitanceModel StubCapacitanceModel::closed_form(const UnitCellGeometry& geom,
                                                       const DielectricProperties& diel,
                                                       double fringing_scale) {
    geom.validate();
    diel.validate();
    const double per_area = fringing_scale * constants::vacuum_permittivity *
                            diel.relative_permittivity / diel.thickness;
    StubCapacitanceModel m;
    m.slope = per_area * 2.0 * geom.stub_width;
    m.offset = per_area * geom.pitch() * geom.center_width;
    return m;
}

StubCapacitanceModel StubCapacitanceModel::from_calibration(double length_a, double cap_a,
                                                            double length_b, double cap_b) {
    if (length_a == length_b)
        throw std::invalid_argument("StubCapacitanceModel: calibration lengths coincide");
    StubCapacitanceModel m;
    m.slope = (cap_b - cap_a) / (length_b - length_a);
    m.offset = cap_a - m.slope * length_a;
    if (m.slope <= 0)
        throw std::invalid_argument("StubCapacitanceModel: capacitance must grow with length");
    return m;
}

StubDesignResult stub_length_for_impedance(double z_target, double series_inductance,
                                           const StubCapacitanceModel& cap_model,
                                           double length_min, double length_max,
                                           int curve_points) {
    require(series_inductance > 0, "stub design: series inductance must be positive");
    require(length_min < length_max && length_min >= 0, "stub design: bad scan range");
    require(curve_points >= 2, "stub design: need at least 2 curve points");

    auto z_of = [&](double len) {
        const double c = cap_model.at(len);
        if (c <= 0) throw std::domain_error("stub design: nonpositive capacitance in range");
        return std::sqrt(series_inductance / c);
    };

    StubDesignResult out;
    out.curve.reserve(static_cast<std::size_t>(curve_points));
    for (int i = 0; i < curve_points; ++i) {
        const double len = length_min + (length_max - length_min) * i / (curve_points - 1);
        out.curve.push_back({len, z_of(len), series_inductance, cap_model.at(len)});
    }

    // Z0 decreases with stub length.
    const double z_hi = z_of(length_min);
    const double z_lo = z_of(length_max);
    if (z_target > z_hi || z_target < z_lo)
        throw std::domain_error("stub design: target impedance outside achievable range");

    double lo = length_min, hi = length_max;
    for (int it = 0; it < 200 && (hi - lo) > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (z_of(mid) > z_target)
            lo = mid;
        else
            hi = mid;
    }
    out.stub_length = 0.5 * (lo + hi);
    return out;
}

double supercell_impedance(int n_unloaded, int n_loaded,
                           const CellElectricals& unloaded,
                           const CellElectricals& loaded) {
    require(n_unloaded >= 0 && n_loaded >= 0 && n_unloaded + n_loaded > 0,
            "supercell_impedance: need at least one cell");
    const double nu = n_unloaded, nl = n_loaded;
    const double l = nu * unloaded.series_inductance + nl * loaded.series_inductance;
    const double c = nu * unloaded.shunt_capacitance + nl * loaded.shunt_capacitance;
    return std::sqrt(l / c);
}

// ============================================================================
// Process-control test structures
// ============================================================================

SheetInductanceResult sheet_inductance_from_rt(const RtTrace& trace, double n_squares) {
    require(trace.temperature.size() == trace.resistance.size(),
            "rt trace: array length mismatch");
    require(trace.temperature.size() >= 8, "rt trace: too few samples");
    require(n_squares > 0, "rt trace: squares count must be positive");

    // Sort by temperature so the result is invariant under re-sampling order.
    std::vector<std::size_t> idx(trace.temperature.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return trace.temperature[a] < trace.temperature[b];
    });
    std::vector<double> t(idx.size()), r(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        t[i] = trace.temperature[idx[i]];
        r[i] = trace.resistance[idx[i]];
    }

    // Plateau: mean over the top decile of the temperature span.
    const double t_cut = t.front() + 0.9 * (t.back() - t.front());
    double rn = 0.0;
    int n_plateau = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] >= t_cut) {
            rn += r[i];
            ++n_plateau;
        }
    }
    if (n_plateau < 2)
        throw std::runtime_error("sheet_inductance_from_rt: no normal-state plateau detected");
    rn /= n_plateau;
    if (rn <= 0)
        throw std::runtime_error("sheet_inductance_from_rt: nonpositive plateau resistance");

    const double r_min = *std::min_element(r.begin(), r.end());
    if (r_min > 0.1 * rn)
        throw std::runtime_error("sheet_inductance_from_rt: no superconducting transition "
                                 "detected in trace");

    // T_c: first upward crossing of R_n/2, linearly interpolated.
    const double half = 0.5 * rn;
    double tc = -1.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (r[i - 1] < half && r[i] >= half) {
            const double f = (half - r[i - 1]) / (r[i] - r[i - 1]);
            tc = t[i - 1] + f * (t[i] - t[i - 1]);
            break;
        }
    }
    if (tc <= 0)
        throw std::runtime_error("sheet_inductance_from_rt: transition midpoint not found");

    const double r_sheet = rn / n_squares;
    const double l0 = constants::hbar * r_sheet /
                      (1.76 * constants::pi * constants::boltzmann * tc);
    return {l0, rn, tc};
}

PermittivityResult permittivity_from_resonance(double f_res, const ResonatorModel& model) {
    require(f_res > 0, "permittivity_from_resonance: resonance frequency must be positive");
    require(model.total_inductance > 0 && model.plate_area > 0 && model.thickness > 0,
            "permittivity_from_resonance: model parameters must be positive");
    const double w = 2.0 * constants::pi * f_res;
    const double c_total = 1.0 / (model.total_inductance * w * w);
    const double c_specific = c_total / model.plate_area;
    const double eps_r = c_specific * model.thickness / constants::vacuum_permittivity;
    if (eps_r < 1.0)
        throw std::domain_error("permittivity_from_resonance: nonphysical eps_r < 1");
    return {eps_r, c_specific};
}

}  // namespace kitsim::cellmodel
