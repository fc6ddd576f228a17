#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kitsim/characterize.hpp"
#include "kitsim/constants.hpp"

using namespace kitsim;
using namespace kitsim::characterize;
using doctest::Approx;

namespace {

// Phase trace from the quadratic+quartic inductance model, optional
// multiplicative noise on the phase shifts.
PhaseBiasTrace synthetic_phase_trace(double i2, double i4, double noise, unsigned seed,
                                     double i_max = 1.2e-3, int points = 30) {
    PhaseBiasTrace trace;
    trace.probe_omega = 2 * constants::pi * 4e9;
    trace.traversal_time = 51e-9;
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double theta0 = -12.0;
    const double theta_r = trace.theta_r();
    for (int k = 0; k < points; ++k) {
        const double i = 0.05e-3 + (i_max - 0.05e-3) * k / (points - 1);
        double y = -std::pow(i / i2, 2.0) - std::pow(i / i4, 4.0);
        if (noise > 0) y *= 1.0 + noise * gauss(rng);
        trace.bias.push_back(k == 0 ? 0.0 : i);
        trace.phase.push_back(k == 0 ? theta0 : theta0 + theta_r * y);
    }
    // first point carries the zero-bias phase
    trace.phase[0] = theta0;
    return trace;
}

}  // namespace

TEST_CASE("scaling current fit") {
    const double i2 = 2.14e-3, i4 = 1.95e-3;

    SUBCASE("noiseless recovery is exact to fit precision") {
        const auto fit = fit_scaling_currents(synthetic_phase_trace(i2, i4, 0.0, 1));
        CHECK(fit.i_star2 == Approx(i2).epsilon(1e-9));
        CHECK(fit.i_star4 == Approx(i4).epsilon(1e-9));
        CHECK(!fit.quartic_unconstrained);
    }
    SUBCASE("1 percent noise keeps both within 2 percent (Monte Carlo)") {
        int good = 0;
        const int trials = 100;
        for (int t = 0; t < trials; ++t) {
            const auto fit =
                fit_scaling_currents(synthetic_phase_trace(i2, i4, 0.01, 100 + t));
            if (std::abs(fit.i_star2 / i2 - 1.0) < 0.02 &&
                std::abs(fit.i_star4 / i4 - 1.0) < 0.02)
                ++good;
        }
        CHECK(good >= 95);
    }
    SUBCASE("constant phase offset does not matter") {
        auto trace = synthetic_phase_trace(i2, i4, 0.0, 2);
        auto shifted = trace;
        for (auto& p : shifted.phase) p += 3.7;
        const auto a = fit_scaling_currents(trace);
        const auto b = fit_scaling_currents(shifted);
        CHECK(a.i_star2 == Approx(b.i_star2).epsilon(1e-12));
        CHECK(a.i_star4 == Approx(b.i_star4).epsilon(1e-12));
    }
    SUBCASE("model is even in bias: mirrored sweep fits identically") {
        const auto trace = synthetic_phase_trace(i2, i4, 0.005, 3);
        auto mirrored = trace;
        for (auto& b : mirrored.bias) b = -b;  // 0 -> -I ramp, same phases
        const auto a = fit_scaling_currents(trace);
        const auto b = fit_scaling_currents(mirrored);
        CHECK(a.i_star2 == Approx(b.i_star2).epsilon(1e-12));
        CHECK(a.i_star4 == Approx(b.i_star4).epsilon(1e-12));
    }
    SUBCASE("zero-bias-only trace is under-determined") {
        PhaseBiasTrace flat;
        flat.probe_omega = 2 * constants::pi * 4e9;
        flat.traversal_time = 51e-9;
        for (int i = 0; i < 10; ++i) {
            flat.bias.push_back(0.0);
            flat.phase.push_back(-12.0);
        }
        CHECK_THROWS_AS(fit_scaling_currents(flat), std::runtime_error);
    }
    SUBCASE("positive phase shift rejected") {
        auto trace = synthetic_phase_trace(i2, i4, 0.0, 4);
        for (std::size_t i = 1; i < trace.phase.size(); ++i)
            trace.phase[i] = 2 * trace.phase[0] - trace.phase[i];
        CHECK_THROWS_AS(fit_scaling_currents(trace), std::invalid_argument);
    }
    SUBCASE("quadratic-only data flags the quartic term") {
        PhaseBiasTrace trace;
        trace.probe_omega = 2 * constants::pi * 4e9;
        trace.traversal_time = 51e-9;
        const double theta_r = trace.theta_r();
        trace.bias.push_back(0.0);
        trace.phase.push_back(-1.0);
        for (int k = 0; k < 20; ++k) {
            const double i = 0.05e-3 + 0.5e-3 * k / 19.0;
            trace.bias.push_back(i);
            trace.phase.push_back(-1.0 - theta_r * std::pow(i / i2, 2.0));
        }
        const auto fit = fit_scaling_currents(trace);
        CHECK(fit.quartic_unconstrained);
        CHECK(fit.i_star2 == Approx(i2).epsilon(1e-6));
    }
}

TEST_CASE("critical current detection") {
    SUBCASE("clean step") {
        TransmissionBiasSweep sweep;
        for (int i = 0; i <= 100; ++i) {
            sweep.bias.push_back(i * 1e-5);
            sweep.s21_db.push_back(i * 1e-5 < 700e-6 ? -2.0 : -40.0);
        }
        CHECK(critical_current(sweep) == Approx(700e-6).epsilon(1e-12));
    }
    SUBCASE("2 dB ripple with a 20 dB drop at 650 uA") {
        TransmissionBiasSweep sweep;
        std::mt19937 rng(9);
        std::uniform_real_distribution<double> ripple(-1.0, 1.0);
        const double step = 1e-5;
        for (int i = 0; i <= 100; ++i) {
            const double bias = i * step;
            sweep.bias.push_back(bias);
            sweep.s21_db.push_back((bias < 650e-6 ? -3.0 : -23.0) + ripple(rng));
        }
        const double ic = critical_current(sweep);
        CHECK(std::abs(ic - 650e-6) <= step + 1e-15);
    }
    SUBCASE("flat trace has no critical current") {
        TransmissionBiasSweep sweep;
        for (int i = 0; i <= 50; ++i) {
            sweep.bias.push_back(i * 1e-5);
            sweep.s21_db.push_back(-3.0);
        }
        CHECK_THROWS_AS(critical_current(sweep), std::runtime_error);
    }
}

TEST_CASE("tdr impedance profile") {
    SUBCASE("matched line returns the reference everywhere") {
        TdrTrace trace;
        for (int i = 0; i < 50; ++i) {
            trace.time.push_back(i * 1e-10);
            trace.rho.push_back(0.0);
        }
        const auto profile = tdr_impedance_profile(trace);
        for (double z : profile.impedance) CHECK(z == Approx(50.0).epsilon(1e-14));
        CHECK(!profile.device_start.has_value());
    }
    SUBCASE("closed-form point value") {
        CHECK(reflection_to_impedance(1.0 / 3.0, 50.0) == Approx(100.0).epsilon(1e-12));
    }
    SUBCASE("transform is the exact inverse of the reflection map") {
        std::mt19937 rng(13);
        std::uniform_real_distribution<double> zdist(5.0, 400.0);
        for (int t = 0; t < 200; ++t) {
            const double z = zdist(rng);
            CHECK(reflection_to_impedance(impedance_to_reflection(z, 50.0), 50.0) ==
                  Approx(z).epsilon(1e-12));
        }
    }
    SUBCASE("two-segment profile recovered with the right boundary") {
        TdrTrace trace;
        const double t_step = 2e-10;
        for (int i = 0; i < 200; ++i) {
            const double t = i * t_step;
            double z = 50.0;
            if (t >= 10e-9 && t < 25e-9) z = 45.0;
            trace.time.push_back(t);
            trace.rho.push_back(impedance_to_reflection(z, 50.0));
        }
        const auto profile = tdr_impedance_profile(trace, 1.0);
        REQUIRE(profile.device_start.has_value());
        CHECK(*profile.device_start == Approx(10e-9).epsilon(2e-2));
        CHECK(*profile.device_end == Approx(25e-9 - t_step).epsilon(2e-2));
        CHECK(*profile.mean_device_impedance == Approx(45.0).epsilon(2e-3));
        for (std::size_t i = 0; i < profile.impedance.size(); ++i) {
            const double expect = (trace.time[i] >= 10e-9 && trace.time[i] < 25e-9)
                                      ? 45.0 : 50.0;
            CHECK(std::abs(profile.impedance[i] - expect) < 0.1);
        }
    }
    SUBCASE("singular samples rejected") {
        TdrTrace trace;
        trace.time = {0.0, 1e-10};
        trace.rho = {0.0, 1.0};
        CHECK_THROWS_AS(tdr_impedance_profile(trace), std::domain_error);
    }
}

namespace {

// Memoryless cubic y = a1*x + a3*x^3 driven by two equal tones, output powers
// referred to 1 ohm: fundamental amplitude a1*A + (9/4)*a3*A^3, IMD (3/4)*a3*A^3.
TwoToneSweep cubic_sweep(double a1, double a3, double pin_lo_dbm, double pin_hi_dbm,
                         int points) {
    TwoToneSweep sweep;
    for (int i = 0; i < points; ++i) {
        const double pin = pin_lo_dbm + (pin_hi_dbm - pin_lo_dbm) * i / (points - 1);
        const double amp = std::sqrt(2.0 * 1e-3 * std::pow(10.0, pin / 10.0));
        const double fund = a1 * amp + 2.25 * a3 * amp * amp * amp;
        const double imd = 0.75 * std::abs(a3) * amp * amp * amp;
        auto dbm = [](double a) { return 10.0 * std::log10(a * a / 2.0 / 1e-3); };
        sweep.input_power_dbm.push_back(pin);
        sweep.fund1_dbm.push_back(dbm(fund));
        sweep.fund2_dbm.push_back(dbm(fund));
        sweep.imd_dbm.push_back(dbm(imd));
    }
    return sweep;
}

double cubic_iip3_dbm(double a1, double a3) {
    const double amp = std::sqrt(4.0 * a1 / (3.0 * std::abs(a3)));
    return 10.0 * std::log10(amp * amp / 2.0 / 1e-3);
}

}  // namespace

TEST_CASE("two-tone compression extraction") {
    SUBCASE("cubic nonlinearity against the closed form") {
        const double a1 = 100.0, a3 = -8e7;
        const double iip3 = cubic_iip3_dbm(a1, a3);
        const auto sweep = cubic_sweep(a1, a3, iip3 - 45.0, iip3 - 4.0, 83);
        const auto result = extract_compression(sweep);
        CHECK(std::abs(result.iip3_dbm - iip3) < 0.1);
        CHECK(result.fundamental_slope == Approx(1.0).epsilon(0.02));
        CHECK(result.imd_slope == Approx(3.0).epsilon(0.02));
        CHECK(result.iip1_dbm < result.iip3_dbm);
    }
    SUBCASE("randomized coefficients keep the closed form") {
        std::mt19937 rng(31);
        std::uniform_real_distribution<double> a1dist(0.5, 200.0);
        std::uniform_real_distribution<double> a3exp(3.0, 9.0);
        for (int t = 0; t < 25; ++t) {
            const double a1 = a1dist(rng);
            const double a3 = -a1 * std::pow(10.0, a3exp(rng));
            const double iip3 = cubic_iip3_dbm(a1, a3);
            const auto sweep = cubic_sweep(a1, a3, iip3 - 45.0, iip3 - 4.0, 83);
            const auto result = extract_compression(sweep);
            CHECK(std::abs(result.iip3_dbm - iip3) < 0.1);
        }
    }
    SUBCASE("purely linear data has no intercepts") {
        TwoToneSweep sweep;
        for (int i = 0; i < 40; ++i) {
            const double pin = -90.0 + i;
            sweep.input_power_dbm.push_back(pin);
            sweep.fund1_dbm.push_back(pin + 40.0);
            sweep.fund2_dbm.push_back(pin + 40.0);
            sweep.imd_dbm.push_back(-400.0);  // below any floor
        }
        CHECK_THROWS_AS(extract_compression(sweep, -300.0), std::runtime_error);
    }
}
