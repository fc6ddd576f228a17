#include "kitsim/cascade.hpp"

#include <algorithm>
#include <cmath>

#include "kitsim/constants.hpp"
#include "kitsim/parallel.hpp"

namespace kitsim::cascade {

namespace {

// Entry magnitude where AD - BC still resolves a unit determinant to ~1e-9.
constexpr double det_trust_limit = 1e7;
// Entry magnitude that triggers pulling scale out into log space.
constexpr double rescale_limit = 1e8;
// log_scale past which exp(-s) underflows and transmission is flagged.
constexpr double evanescent_log_scale = 690.0;

double max_abs(const TwoPortABCD& t) {
    return std::max(std::max(std::abs(t.a), std::abs(t.b)),
                    std::max(std::abs(t.c), std::abs(t.d)));
}

void scale_down(TwoPortABCD& t, double& log_scale) {
    const double s = max_abs(t);
    if (s > rescale_limit) {
        t.a /= s;
        t.b /= s;
        t.c /= s;
        t.d /= s;
        log_scale += std::log(s);
    }
}

void renormalize_det(TwoPortABCD& t, double log_scale) {
    // Only meaningful while no scale has been pulled out and entries are
    // small enough that the determinant is numerically observable.
    if (log_scale != 0.0 || max_abs(t) > det_trust_limit) return;
    const complexd root = std::sqrt(t.determinant());
    if (root == complexd{0.0}) return;
    t.a /= root;
    t.b /= root;
    t.c /= root;
    t.d /= root;
}

}  // namespace

TwoPortABCD TwoPortABCD::operator*(const TwoPortABCD& rhs) const {
    return {a * rhs.a + b * rhs.c, a * rhs.b + b * rhs.d,
            c * rhs.a + d * rhs.c, c * rhs.b + d * rhs.d};
}

TwoPortABCD ScaledAbcd::unscaled() const {
    const double top = log_scale + std::log(std::max(max_abs(m), 1e-300));
    if (top > 700.0)
        throw OverflowError("device matrix entries exceed representable magnitude "
                            "(stopband evanescence)");
    const double f = std::exp(log_scale);
    return {m.a * f, m.b * f, m.c * f, m.d * f};
}

ScaledAbcd matrix_power(const TwoPortABCD& t, long n) {
    if (n < 0) throw std::invalid_argument("matrix_power: negative exponent");
    ScaledAbcd result{TwoPortABCD::identity(), 0.0};
    TwoPortABCD base = t;
    double base_log = 0.0;
    while (n > 0) {
        if (n & 1) {
            result.m = result.m * base;
            result.log_scale += base_log;
            scale_down(result.m, result.log_scale);
        }
        n >>= 1;
        if (n > 0) {
            base = base * base;
            base_log *= 2.0;
            renormalize_det(base, base_log);
            scale_down(base, base_log);
        }
    }
    renormalize_det(result.m, result.log_scale);
    return result;
}

// ============================================================================
// Device description
// ============================================================================

void DeviceSpec::validate() const {
    unloaded.validate();
    loaded.validate();
    film.validate();
    if (n_unloaded < 0 || n_loaded < 0 || n_unloaded + n_loaded <= 0)
        throw std::invalid_argument("device: supercell needs at least one cell");
    if (n_unloaded % 2 != 0)
        throw std::invalid_argument("device: N_u must be even (symmetric split "
                                    "about the loaded cells)");
    if (n_supercells < 1)
        throw std::invalid_argument("device: N_sc must be >= 1");
    if (z_ref <= 0) throw std::invalid_argument("device: reference impedance must be positive");
    if (cell_pitch <= 0) throw std::invalid_argument("device: cell pitch must be positive");
}

double DeviceSpec::biased_series_inductance() const {
    return cellmodel::biased_inductance(unloaded.series_inductance, bias.dc_current,
                                        film.scaling_current_2);
}

// ============================================================================
// Matrices
// ============================================================================

TwoPortABCD cell_abcd(const cellmodel::CellElectricals& cell, double l_d, double omega) {
    if (omega < 0) throw std::invalid_argument("cell_abcd: omega must be nonnegative");
    const double cap = cell.shunt_capacitance;
    const double lf = cell.finger_inductance;
    const double denom = 2.0 - lf * cap * omega * omega;
    if (std::abs(denom) < 1e-9 * 2.0)
        throw PoleError("cell_abcd: stub self-resonance (2 - Lf*C*w^2 = 0)");
    TwoPortABCD t;
    t.a = {1.0, 0.0};
    t.b = {0.0, l_d * omega};
    t.c = {0.0, 2.0 * cap * omega / denom};
    t.d = {1.0 - 2.0 * l_d * cap * omega * omega / denom, 0.0};
    return t;
}

TwoPortABCD supercell_abcd(const DeviceSpec& spec, double omega) {
    spec.validate();
    const double l_d = spec.biased_series_inductance();
    const TwoPortABCD tu = cell_abcd(spec.unloaded, l_d, omega);
    const TwoPortABCD half_u = matrix_power(tu, spec.n_unloaded / 2).unscaled();
    if (spec.n_loaded == 0) return half_u * half_u;
    const TwoPortABCD tl = cell_abcd(spec.loaded, l_d, omega);
    const TwoPortABCD mid = matrix_power(tl, spec.n_loaded).unscaled();
    return half_u * mid * half_u;
}

ScaledAbcd device_abcd_scaled(const DeviceSpec& spec, double omega) {
    return matrix_power(supercell_abcd(spec, omega), spec.n_supercells);
}

TwoPortABCD device_abcd(const DeviceSpec& spec, double omega) {
    return device_abcd_scaled(spec, omega).unscaled();
}

// ============================================================================
// S-parameters
// ============================================================================

SPoint abcd_to_s(const TwoPortABCD& t, double z_ref) {
    if (z_ref <= 0) throw std::invalid_argument("abcd_to_s: z_ref must be positive");
    const complexd b_z = t.b / z_ref;
    const complexd c_z = t.c * z_ref;
    const complexd denom = t.a + b_z + c_z + t.d;
    if (denom == complexd{0.0})
        throw std::domain_error("abcd_to_s: degenerate denominator A + B/Z + CZ + D = 0");
    SPoint s;
    s.s11 = (t.a + b_z - c_z - t.d) / denom;
    s.s21 = 2.0 / denom;
    s.s12 = 2.0 * t.determinant() / denom;
    s.s22 = (-t.a + b_z - c_z + t.d) / denom;
    return s;
}

SPoint abcd_to_s(const ScaledAbcd& t, double z_ref) {
    if (z_ref <= 0) throw std::invalid_argument("abcd_to_s: z_ref must be positive");
    const complexd b_z = t.m.b / z_ref;
    const complexd c_z = t.m.c * z_ref;
    const complexd denom = t.m.a + b_z + c_z + t.m.d;
    if (denom == complexd{0.0})
        throw std::domain_error("abcd_to_s: degenerate denominator A + B/Z + CZ + D = 0");
    SPoint s;
    // Reflections are scale-free; transmission carries exp(-log_scale).
    s.s11 = (t.m.a + b_z - c_z - t.m.d) / denom;
    s.s22 = (-t.m.a + b_z - c_z + t.m.d) / denom;
    const double att = t.log_scale >= evanescent_log_scale ? 0.0 : std::exp(-t.log_scale);
    s.s21 = 2.0 * att / denom;
    if (t.log_scale < 8.0) {
        // Direct determinant while it still resolves below the 1e-9 target.
        s.s12 = 2.0 * t.m.determinant() * std::exp(t.log_scale) * att * att / denom;
    } else {
        // Past that the unit determinant is maintained by construction and
        // det(T) = 1 gives S12 = 2/denom at the same scale as S21.
        s.s12 = s.s21;
    }
    return s;
}

SParamSpectrum s21_spectrum(const DeviceSpec& spec, const std::vector<double>& grid,
                            int threads) {
    spec.validate();
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1])
            throw std::invalid_argument("s21_spectrum: grid must be strictly increasing");

    SParamSpectrum out;
    out.frequencies = grid;
    out.s11.resize(grid.size());
    out.s21.resize(grid.size());
    out.s12.resize(grid.size());
    out.s22.resize(grid.size());
    out.status.assign(grid.size(), PointStatus::ok);

    parallel_for(grid.size(), threads, [&](std::size_t i) {
        const double omega = 2.0 * constants::pi * grid[i];
        try {
            const ScaledAbcd dev = device_abcd_scaled(spec, omega);
            const SPoint s = abcd_to_s(dev, spec.z_ref);
            out.s11[i] = s.s11;
            out.s21[i] = s.s21;
            out.s12[i] = s.s12;
            out.s22[i] = s.s22;
            if (dev.log_scale >= evanescent_log_scale)
                out.status[i] = PointStatus::evanescent;
        } catch (const PoleError&) {
            out.s11[i] = out.s21[i] = out.s12[i] = out.s22[i] = complexd{0.0};
            out.status[i] = PointStatus::stub_pole;
        }
    });
    return out;
}

// ============================================================================
// Dispersion
// ============================================================================

DispersionCurve dispersion(const DeviceSpec& spec, const SParamSpectrum& spectrum,
                           DispersionBaseline baseline) {
    spec.validate();
    if (spectrum.size() < 2)
        throw std::invalid_argument("dispersion: need at least 2 spectrum points");

    DispersionCurve out;
    out.frequencies = spectrum.frequencies;
    out.device_length = spec.device_length();
    out.arg_s21.resize(spectrum.size());
    out.k_star.resize(spectrum.size());
    out.wavenumber.resize(spectrum.size());

    double c_per_cell = spec.unloaded.shunt_capacitance;
    if (baseline == DispersionBaseline::supercell_mean) {
        c_per_cell = (spec.n_unloaded * spec.unloaded.shunt_capacitance +
                      spec.n_loaded * spec.loaded.shunt_capacitance) /
                     spec.cells_per_supercell();
    }
    const double delay_per_cell = std::sqrt(spec.biased_series_inductance() * c_per_cell);
    const double n_cells = static_cast<double>(spec.n_supercells) * spec.cells_per_supercell();

    double phase = std::arg(spectrum.s21[0]);
    double prev = phase;
    complexd prev_s = spectrum.s21[0];
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        if (i > 0) {
            const complexd cur = spectrum.s21[i];
            double step = 0.0;
            if (cur != complexd{0.0} && prev_s != complexd{0.0}) {
                step = std::arg(cur * std::conj(prev_s));  // principal in (-pi, pi]
                prev_s = cur;
            } else {
                out.unwrap_ambiguous = true;  // flagged point, phase carried over
            }
            if (std::abs(step) > constants::pi * 0.999) out.unwrap_ambiguous = true;
            phase = prev + step;
            prev = phase;
        }
        const double omega = 2.0 * constants::pi * spectrum.frequencies[i];
        out.arg_s21[i] = phase;
        out.k_star[i] = -phase - omega * delay_per_cell * n_cells;
        out.wavenumber[i] = -phase / out.device_length;
    }
    return out;
}

double DispersionCurve::k_at(double freq_hz) const {
    if (frequencies.empty()) throw std::out_of_range("dispersion: empty curve");
    if (freq_hz < frequencies.front() || freq_hz > frequencies.back())
        throw std::out_of_range("dispersion: frequency outside tabulated range");
    const auto it = std::lower_bound(frequencies.begin(), frequencies.end(), freq_hz);
    const std::size_t hi = std::min<std::size_t>(
        std::max<std::size_t>(static_cast<std::size_t>(it - frequencies.begin()), 1),
        frequencies.size() - 1);
    const std::size_t lo = hi - 1;
    const double f = (freq_hz - frequencies[lo]) / (frequencies[hi] - frequencies[lo]);
    return wavenumber[lo] + f * (wavenumber[hi] - wavenumber[lo]);
}

// ============================================================================
// Bandgap
// ============================================================================

Bandgap find_bandgap(const SParamSpectrum& spectrum, double threshold_db) {
    if (spectrum.size() < 3)
        throw std::invalid_argument("find_bandgap: spectrum too short");

    auto level_db = [&](std::size_t i) {
        if (spectrum.status[i] == PointStatus::evanescent) return -1e9;
        const double mag = std::abs(spectrum.s21[i]);
        return mag > 0 ? 20.0 * std::log10(mag) : -1e9;
    };
    auto below = [&](std::size_t i) {
        return spectrum.status[i] != PointStatus::stub_pole && level_db(i) < threshold_db;
    };

    std::size_t best_lo = 0, best_hi = 0;
    bool found = false;
    std::size_t i = 0;
    const std::size_t n = spectrum.size();
    while (i < n) {
        if (below(i)) {
            std::size_t j = i;
            while (j + 1 < n && below(j + 1)) ++j;
            const double width = spectrum.frequencies[j] - spectrum.frequencies[i];
            if (!found || width > spectrum.frequencies[best_hi] - spectrum.frequencies[best_lo]) {
                best_lo = i;
                best_hi = j;
                found = true;
            }
            i = j + 1;
        } else {
            ++i;
        }
    }
    if (!found)
        throw std::runtime_error("find_bandgap: no contiguous region below threshold");

    // Refine edges by linear interpolation in dB against the neighbors.
    double f_low = spectrum.frequencies[best_lo];
    if (best_lo > 0 && spectrum.status[best_lo - 1] == PointStatus::ok) {
        const double g0 = level_db(best_lo - 1), g1 = level_db(best_lo);
        if (g0 > threshold_db && g1 < g0) {
            const double f = (g0 - threshold_db) / (g0 - g1);
            f_low = spectrum.frequencies[best_lo - 1] +
                    f * (spectrum.frequencies[best_lo] - spectrum.frequencies[best_lo - 1]);
        }
    }
    double f_high = spectrum.frequencies[best_hi];
    if (best_hi + 1 < n && spectrum.status[best_hi + 1] == PointStatus::ok) {
        const double g0 = level_db(best_hi), g1 = level_db(best_hi + 1);
        if (g1 > threshold_db && g1 > g0) {
            const double f = (threshold_db - g0) / (g1 - g0);
            f_high = spectrum.frequencies[best_hi] +
                     f * (spectrum.frequencies[best_hi + 1] - spectrum.frequencies[best_hi]);
        }
    }
    return {f_low, f_high, 0.5 * (f_low + f_high)};
}

}  // namespace kitsim::cascade
