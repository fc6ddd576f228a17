#include "kitsim/gainsim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include <boost/numeric/odeint.hpp>

#include "kitsim/constants.hpp"
#include "kitsim/parallel.hpp"

namespace kitsim::gainsim {

namespace odeint = boost::numeric::odeint;
using complexd = std::complex<double>;

// ============================================================================
// Analytic relations
// ============================================================================

double phase_mismatch(double k_p, double k_s, double k_i, double xi, double i_p0) {
    return (k_p - k_s - k_i) +
           xi * i_p0 * i_p0 / 8.0 * (k_p - 2.0 * k_s - 2.0 * k_i);
}

double gain_coefficient(double epsilon, double i_p0, double k_s, double k_i) {
    return epsilon * i_p0 * std::sqrt(k_s * k_i) / 4.0;
}

double analytic_gain(double g3, double x) {
    const double c = std::cosh(g3 * x);
    return c * c;
}

double explicit_gain(double i_dc, double i_p, double i_star2, double omega_p,
                     double l_d_per_length, double c_per_length, double x) {
    const double arg = 0.25 * i_dc * i_p / (i_star2 * i_star2 + i_dc * i_dc) *
                       omega_p * std::sqrt(l_d_per_length * c_per_length) * x;
    const double c = std::cosh(arg);
    return c * c;
}

double gain_ripple(double gain, double transmittivity, double reflection_mag) {
    if (gain < 1.0) throw std::invalid_argument("gain_ripple: gain must be >= 1");
    if (transmittivity <= 0.0 || transmittivity > 1.0)
        throw std::invalid_argument("gain_ripple: transmittivity must be in (0, 1]");
    if (reflection_mag < 0.0 || reflection_mag >= 1.0)
        throw std::invalid_argument("gain_ripple: |Gamma| must be in [0, 1)");
    const double g = gain * transmittivity * reflection_mag * reflection_mag;
    if (g >= 1.0)
        throw std::domain_error("gain_ripple: G*eta*|Gamma|^2 >= 1, ripple diverges");
    return 10.0 * std::log10((1.0 + g) / (1.0 - g));
}

// ============================================================================
// Coupled-mode integration
// ============================================================================

void CMEConfig::validate() const {
    if (pump_frequency <= 0) throw std::invalid_argument("cme: pump frequency must be positive");
    if (pump_amplitude < 0 || signal_amplitude < 0)
        throw std::invalid_argument("cme: amplitudes must be nonnegative");
    if (device_length <= 0) throw std::invalid_argument("cme: device length must be positive");
    if (rel_tolerance <= 0 || abs_tolerance <= 0)
        throw std::invalid_argument("cme: tolerances must be positive");
    for (std::size_t i = 1; i < signal_grid.size(); ++i)
        if (signal_grid[i] <= signal_grid[i - 1])
            throw std::invalid_argument("cme: signal grid must be strictly increasing");
}

double GainProfile::true_gain_db(std::size_t i) const {
    if (!insertion_loss_db)
        throw std::logic_error("GainProfile: insertion loss not set, no true gain");
    return gain_db.at(i) + *insertion_loss_db;
}

namespace {

// State layout: [pump, signal, idler, (pump 2nd harmonic)].
using CmeState = std::vector<complexd>;

struct CmeSystem {
    double k_p, k_s, k_i, k_h;
    double epsilon, xi;
    double delta_k;    // k_p - k_s - k_i
    double delta_k_h;  // 2k_p - k_h
    bool undepleted;
    bool harmonic;

    void operator()(const CmeState& y, CmeState& dydx, double x) const {
        const complexd ap = y[0], as = y[1], ai = y[2];
        const complexd ah = harmonic ? y[3] : complexd{0.0};
        const double p2 = std::norm(ap), s2 = std::norm(as), i2 = std::norm(ai);
        const double h2 = harmonic ? std::norm(ah) : 0.0;
        const complexd j{0.0, 1.0};
        const complexd mix_phase = std::exp(j * (delta_k * x));

        // Cubic self/cross phase rotation, xi/8 self and xi/4 cross weights.
        const complexd spm_p = j * k_p * (xi / 8.0) * (p2 + 2.0 * (s2 + i2 + h2)) * ap;
        const complexd spm_s = j * k_s * (xi / 8.0) * (s2 + 2.0 * (p2 + i2 + h2)) * as;
        const complexd spm_i = j * k_i * (xi / 8.0) * (i2 + 2.0 * (p2 + s2 + h2)) * ai;

        // Quadratic three-wave coupling.
        dydx.resize(y.size());
        dydx[0] = spm_p;
        if (!undepleted)
            dydx[0] += j * k_p * (epsilon / 4.0) * as * ai * std::conj(mix_phase);
        dydx[1] = spm_s + j * k_s * (epsilon / 4.0) * ap * std::conj(ai) * mix_phase;
        dydx[2] = spm_i + j * k_i * (epsilon / 4.0) * ap * std::conj(as) * mix_phase;
        if (harmonic) {
            // Generation-only second harmonic of the pump; no back-action.
            const complexd spm_h =
                j * k_h * (xi / 8.0) * (h2 + 2.0 * (p2 + s2 + i2)) * ah;
            dydx[3] = spm_h + j * k_h * (epsilon / 8.0) * ap * ap *
                              std::exp(j * (delta_k_h * x));
        }
    }
};

}  // namespace

GainProfile solve_cmes(const cascade::DeviceSpec& spec, const CMEConfig& config,
                       const cascade::DispersionCurve& dispersion) {
    spec.validate();
    config.validate();
    if (config.signal_grid.empty())
        throw std::invalid_argument("solve_cmes: empty signal grid");

    const auto mix = cellmodel::mixing_coefficients(spec.bias.dc_current,
                                                    spec.film.scaling_current_2);
    const double f_p = config.pump_frequency;
    const double k_p = dispersion.k_at(f_p);
    const bool harmonic = config.mode_set == ModeSet::triplet_pump_harmonic;
    const double k_h = harmonic ? dispersion.k_at(2.0 * f_p) : 0.0;

    GainProfile profile;
    profile.signal_frequencies = config.signal_grid;
    const std::size_t n = config.signal_grid.size();
    profile.gain_linear.assign(n, 1.0);
    profile.gain_db.assign(n, 0.0);
    profile.idler_gain_linear.assign(n, 0.0);
    profile.pump_exit_fraction.assign(n, 1.0);
    profile.harmonic_exit_fraction.assign(n, 0.0);
    profile.skipped.assign(n, false);

    for (std::size_t i = 0; i < n; ++i) {
        const double f_s = config.signal_grid[i];
        const double f_i = f_p - f_s;
        if (f_i <= 0)
            throw std::invalid_argument("solve_cmes: signal frequency at or above pump");
        const bool degenerate = std::abs(f_s - 0.5 * f_p) < 1e-6 * f_p ||
                                std::abs(f_s - f_p) < 1e-6 * f_p;
        if (degenerate && !config.allow_degeneracies) {
            profile.skipped[i] = true;
            profile.gain_linear[i] = std::numeric_limits<double>::quiet_NaN();
            profile.gain_db[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }

        CmeSystem sys;
        sys.k_p = k_p;
        sys.k_s = dispersion.k_at(f_s);
        sys.k_i = dispersion.k_at(f_i);
        sys.k_h = k_h;
        sys.epsilon = mix.epsilon;
        sys.xi = mix.xi;
        sys.delta_k = k_p - sys.k_s - sys.k_i;
        sys.delta_k_h = 2.0 * k_p - k_h;
        sys.undepleted = config.undepleted_pump;
        sys.harmonic = harmonic;

        CmeState y(harmonic ? 4 : 3, complexd{0.0});
        y[0] = config.pump_amplitude;
        y[1] = config.signal_amplitude;

        using stepper = odeint::runge_kutta_cash_karp54<CmeState>;
        const double dx0 = config.device_length / 1024.0;
        try {
            odeint::integrate_adaptive(
                odeint::make_controlled<stepper>(config.abs_tolerance, config.rel_tolerance),
                sys, y, 0.0, config.device_length, dx0);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("solve_cmes: integrator failed: ") + e.what());
        }

        const double i_s0 = config.signal_amplitude;
        if (i_s0 > 0) {
            profile.gain_linear[i] = std::norm(y[1]) / (i_s0 * i_s0);
            profile.idler_gain_linear[i] = std::norm(y[2]) / (i_s0 * i_s0);
        } else {
            profile.gain_linear[i] = 1.0;
            profile.idler_gain_linear[i] = 0.0;
        }
        profile.gain_db[i] = 10.0 * std::log10(std::max(profile.gain_linear[i], 1e-300));

        double exit_fraction = 1.0;
        if (config.pump_amplitude > 0) {
            if (config.undepleted_pump) {
                // Photon bookkeeping: flux gained by signal and idler comes
                // from the pump, so estimate what depletion would have been.
                const double ip2 = config.pump_amplitude * config.pump_amplitude;
                const double taken =
                    sys.k_p * ((std::norm(y[1]) - i_s0 * i_s0) / sys.k_s +
                               std::norm(y[2]) / sys.k_i);
                exit_fraction = std::sqrt(std::max(0.0, ip2 - taken) / ip2);
            } else {
                exit_fraction = std::abs(y[0]) / config.pump_amplitude;
            }
        }
        profile.pump_exit_fraction[i] = exit_fraction;
        if (harmonic && config.pump_amplitude > 0)
            profile.harmonic_exit_fraction[i] = std::abs(y[3]) / config.pump_amplitude;
        if (config.undepleted_pump && exit_fraction < 0.9) profile.depletion_warning = true;
    }
    return profile;
}

// ============================================================================
// Band metrics
// ============================================================================

namespace {

// Moving average with a window that shrinks near the edges.
std::vector<double> smooth(const std::vector<double>& y, int window) {
    if (window <= 1) return y;
    const int half = window / 2;
    const int n = static_cast<int>(y.size());
    std::vector<double> out(y.size());
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(n - 1, i + half);
        double acc = 0.0;
        for (int j = lo; j <= hi; ++j) acc += y[j];
        out[i] = acc / (hi - lo + 1);
    }
    return out;
}

}  // namespace

BandMetrics band_metrics(const GainProfile& profile, int smoothing_window) {
    std::vector<double> f, g;
    f.reserve(profile.signal_frequencies.size());
    g.reserve(profile.signal_frequencies.size());
    for (std::size_t i = 0; i < profile.signal_frequencies.size(); ++i) {
        if (profile.skipped[i] || !std::isfinite(profile.gain_db[i])) continue;
        f.push_back(profile.signal_frequencies[i]);
        g.push_back(profile.gain_db[i]);
    }
    if (f.size() < 3) throw std::invalid_argument("band_metrics: too few usable points");

    const std::vector<double> s = smooth(g, smoothing_window);
    const std::size_t peak =
        static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    const double target = s[peak] - 3.0;

    BandMetrics m;
    m.peak_gain_db = s[peak];
    m.peak_frequency = f[peak];

    double f_lo = f.front();
    m.left_truncated = true;
    for (std::size_t i = peak; i-- > 0;) {
        if (s[i] < target) {
            const double frac = (s[i + 1] - target) / (s[i + 1] - s[i]);
            f_lo = f[i + 1] - frac * (f[i + 1] - f[i]);
            m.left_truncated = false;
            break;
        }
    }
    double f_hi = f.back();
    m.right_truncated = true;
    for (std::size_t i = peak + 1; i < s.size(); ++i) {
        if (s[i] < target) {
            const double frac = (s[i - 1] - target) / (s[i - 1] - s[i]);
            f_hi = f[i - 1] + frac * (f[i] - f[i - 1]);
            m.right_truncated = false;
            break;
        }
    }

    m.b3db_hz = f_hi - f_lo;
    double acc = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] >= f_lo && f[i] <= f_hi) {
            acc += s[i];
            ++count;
        }
    }
    m.mean_gain_db = count > 0 ? acc / count : s[peak];
    m.gbp_hz_db = m.mean_gain_db * m.b3db_hz;
    return m;
}

// ============================================================================
// Pump sweep
// ============================================================================

SweepResult pump_sweep(const cascade::DeviceSpec& spec, const CMEConfig& config_template,
                       const std::vector<double>& pump_grid,
                       const cascade::DispersionCurve& dispersion,
                       const std::optional<cascade::Bandgap>& bandgap,
                       int threads, int smoothing_window) {
    if (pump_grid.empty()) throw std::invalid_argument("pump_sweep: empty pump grid");
    SweepResult result;
    result.pump_frequencies = pump_grid;
    result.profiles.resize(pump_grid.size());
    result.metrics.resize(pump_grid.size());
    result.errors.assign(pump_grid.size(), std::string{});
    result.below_bandgap_warning.assign(pump_grid.size(), false);

    parallel_for(pump_grid.size(), threads, [&](std::size_t i) {
        CMEConfig cfg = config_template;
        cfg.pump_frequency = pump_grid[i];
        if (bandgap && pump_grid[i] <= bandgap->f_high)
            result.below_bandgap_warning[i] = true;
        try {
            result.profiles[i] = solve_cmes(spec, cfg, dispersion);
            result.metrics[i] = band_metrics(result.profiles[i], smoothing_window);
        } catch (const std::exception& e) {
            result.errors[i] = e.what();
        }
    });
    return result;
}

}  // namespace kitsim::gainsim
