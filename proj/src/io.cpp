#include "kitsim/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kitsim/constants.hpp"

namespace kitsim::io {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) out.push_back(trim(field));
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& what) {
    std::ostringstream os;
    os << path << ":" << line << ": " << what;
    throw ParseError(os.str());
}

double parse_number(const std::string& path, int line, const std::string& field) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(field, &pos);
        if (pos != field.size()) fail(path, line, "trailing characters in number '" + field + "'");
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        fail(path, line, "not a number: '" + field + "'");
    }
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

// ============================================================================
// Generic CSV
// ============================================================================

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");

    CsvTable table;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty()) continue;
        if (text[0] == '#') {
            if (!header_seen) {
                const std::string body = trim(text.substr(1));
                const auto eq = body.find('=');
                if (eq != std::string::npos)
                    table.metadata[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
            }
            continue;
        }
        if (!header_seen) {
            table.columns = split(text, ',');
            if (table.columns.empty()) fail(path, line_no, "empty header row");
            header_seen = true;
            continue;
        }
        const std::vector<std::string> fields = split(text, ',');
        if (fields.size() != table.columns.size()) {
            std::ostringstream os;
            os << "expected " << table.columns.size() << " columns, got " << fields.size();
            fail(path, line_no, os.str());
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(parse_number(path, line_no, f));
        table.rows.push_back(std::move(row));
    }
    if (!header_seen) throw ParseError(path + ": missing header row");
    return table;
}

CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected) {
    CsvTable table = read_csv(path);
    if (table.columns != expected) {
        std::ostringstream os;
        os << path << ": unexpected header, want '";
        for (std::size_t i = 0; i < expected.size(); ++i)
            os << (i ? "," : "") << expected[i];
        os << "' got '";
        for (std::size_t i = 0; i < table.columns.size(); ++i)
            os << (i ? "," : "") << table.columns[i];
        os << "'";
        throw ParseError(os.str());
    }
    return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows,
               const std::vector<std::string>& metadata) {
    std::ofstream out(path);
    if (!out) throw ParseError(path + ": cannot open file for writing");
    for (const auto& m : metadata) out << "# " << m << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << format_double(row[i]);
        out << "\n";
    }
}

// ============================================================================
// Trace readers
// ============================================================================

cellmodel::AdmittanceSpectrum read_admittance_csv(const std::string& path,
                                                  cellmodel::LineBoundary boundary,
                                                  int cell_count) {
    const CsvTable t = read_csv(path, {"freq_hz", "re_y11", "im_y11"});
    cellmodel::AdmittanceSpectrum s;
    s.boundary = boundary;
    s.cell_count = cell_count;
    for (const auto& r : t.rows) {
        s.frequencies.push_back(r[0]);
        s.y11.emplace_back(r[1], r[2]);
    }
    s.validate();
    return s;
}

cellmodel::RtTrace read_rt_csv(const std::string& path) {
    const CsvTable t = read_csv(path, {"temp_k", "resistance_ohm"});
    cellmodel::RtTrace trace;
    for (const auto& r : t.rows) {
        trace.temperature.push_back(r[0]);
        trace.resistance.push_back(r[1]);
    }
    return trace;
}

characterize::PhaseBiasTrace read_phase_bias_csv(const std::string& path,
                                                 double probe_omega,
                                                 double traversal_time) {
    const CsvTable t = read_csv(path, {"bias_a", "phase_rad"});
    characterize::PhaseBiasTrace trace;
    trace.probe_omega = probe_omega;
    trace.traversal_time = traversal_time;
    for (const auto& r : t.rows) {
        trace.bias.push_back(r[0]);
        trace.phase.push_back(r[1]);
    }
    return trace;
}

characterize::TransmissionBiasSweep read_bias_s21_csv(const std::string& path) {
    const CsvTable t = read_csv(path, {"bias_a", "s21_db"});
    characterize::TransmissionBiasSweep sweep;
    for (const auto& r : t.rows) {
        sweep.bias.push_back(r[0]);
        sweep.s21_db.push_back(r[1]);
    }
    return sweep;
}

characterize::TdrTrace read_tdr_csv(const std::string& path, double z_ref) {
    const CsvTable t = read_csv(path, {"time_s", "rho"});
    characterize::TdrTrace trace;
    trace.z_ref = z_ref;
    for (const auto& r : t.rows) {
        trace.time.push_back(r[0]);
        trace.rho.push_back(r[1]);
    }
    return trace;
}

characterize::TwoToneSweep read_two_tone_csv(const std::string& path) {
    const CsvTable t =
        read_csv(path, {"pin_dbm", "pout_f1_dbm", "pout_f2_dbm", "pout_imd_dbm"});
    characterize::TwoToneSweep sweep;
    for (const auto& r : t.rows) {
        sweep.input_power_dbm.push_back(r[0]);
        sweep.fund1_dbm.push_back(r[1]);
        sweep.fund2_dbm.push_back(r[2]);
        sweep.imd_dbm.push_back(r[3]);
    }
    return sweep;
}

noisecal::SntjTrace read_sntj_csv(const std::string& path) {
    const CsvTable t = read_csv(path, {"v_volt", "nout_quanta"});
    noisecal::SntjTrace trace;
    const auto freq = t.metadata.find("freq_hz");
    if (freq == t.metadata.end())
        throw ParseError(path + ": missing '# freq_hz=' metadata line");
    trace.omega = 2.0 * constants::pi * std::stod(freq->second);
    const auto te = t.metadata.find("te_k");
    if (te == t.metadata.end())
        throw ParseError(path + ": missing '# te_k=' metadata line");
    trace.electron_temperature = std::stod(te->second);
    for (const auto& r : t.rows) {
        trace.voltage.push_back(r[0]);
        trace.noise_out.push_back(r[1]);
    }
    trace.validate();
    return trace;
}

// ============================================================================
// Spectrum writers
// ============================================================================

void write_spectrum_csv(const std::string& path, const cascade::SParamSpectrum& spectrum) {
    std::vector<std::vector<double>> rows;
    rows.reserve(spectrum.size());
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        const double mag = std::abs(spectrum.s21[i]);
        rows.push_back({spectrum.frequencies[i], spectrum.s21[i].real(),
                        spectrum.s21[i].imag(),
                        mag > 0 ? 20.0 * std::log10(mag) : -1e9,
                        static_cast<double>(spectrum.status[i])});
    }
    write_csv(path, {"freq_hz", "re_s21", "im_s21", "s21_db", "flag"}, rows);
}

void write_dispersion_csv(const std::string& path, const cascade::DispersionCurve& curve) {
    std::vector<std::vector<double>> rows;
    rows.reserve(curve.frequencies.size());
    for (std::size_t i = 0; i < curve.frequencies.size(); ++i)
        rows.push_back({curve.frequencies[i], curve.arg_s21[i], curve.k_star[i]});
    write_csv(path, {"freq_hz", "arg_s21_rad", "k_star_rad"}, rows);
}

void write_design_curve_csv(const std::string& path,
                            const std::vector<cellmodel::StubDesignPoint>& curve) {
    std::vector<std::vector<double>> rows;
    rows.reserve(curve.size());
    for (const auto& p : curve)
        rows.push_back({p.stub_length, p.z0, p.l_per_cell, p.c_per_cell});
    write_csv(path, {"stub_length_m", "z0_ohm", "l_per_cell_h", "c_per_cell_f"}, rows);
}

// ============================================================================
// Touchstone v1
// ============================================================================

void write_touchstone(const std::string& path, const cascade::SParamSpectrum& spectrum,
                      double z_ref, const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw ParseError(path + ": cannot open file for writing");
    if (!comment.empty()) out << "! " << comment << "\n";
    out << "# Hz S RI R " << format_double(z_ref) << "\n";
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        out << format_double(spectrum.frequencies[i]);
        const cascade::complexd s[4] = {spectrum.s11[i], spectrum.s21[i],
                                        spectrum.s12[i], spectrum.s22[i]};
        for (const auto& v : s)
            out << " " << format_double(v.real()) << " " << format_double(v.imag());
        out << "\n";
    }
}

TouchstoneData read_touchstone(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");

    TouchstoneData data;
    enum class Fmt { ri, ma, db } fmt = Fmt::ri;
    double unit = 1.0;
    bool option_seen = false;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string text = trim(line);
        const auto bang = text.find('!');
        if (bang != std::string::npos) text = trim(text.substr(0, bang));
        if (text.empty()) continue;

        if (text[0] == '#') {
            std::istringstream is(text.substr(1));
            std::string token;
            std::vector<std::string> tokens;
            while (is >> token) tokens.push_back(token);
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                std::string up = tokens[i];
                std::transform(up.begin(), up.end(), up.begin(),
                               [](unsigned char ch) { return std::toupper(ch); });
                if (up == "HZ") unit = 1.0;
                else if (up == "KHZ") unit = 1e3;
                else if (up == "MHZ") unit = 1e6;
                else if (up == "GHZ") unit = 1e9;
                else if (up == "RI") fmt = Fmt::ri;
                else if (up == "MA") fmt = Fmt::ma;
                else if (up == "DB") fmt = Fmt::db;
                else if (up == "S") { /* parameter type */ }
                else if (up == "R" && i + 1 < tokens.size())
                    data.z_ref = parse_number(path, line_no, tokens[++i]);
                else fail(path, line_no, "unsupported option '" + tokens[i] + "'");
            }
            option_seen = true;
            continue;
        }

        std::istringstream is(text);
        std::vector<double> v;
        std::string field;
        while (is >> field) v.push_back(parse_number(path, line_no, field));
        if (v.size() != 9) fail(path, line_no, "expected 9 values for a two-port record");
        if (!option_seen) fail(path, line_no, "data before the option line");

        auto to_complex = [&](double p, double q) -> cascade::complexd {
            switch (fmt) {
                case Fmt::ri: return {p, q};
                case Fmt::ma: return std::polar(p, q * constants::pi / 180.0);
                case Fmt::db: return std::polar(std::pow(10.0, p / 20.0),
                                                q * constants::pi / 180.0);
            }
            return {};
        };
        data.frequencies.push_back(v[0] * unit);
        data.s11.push_back(to_complex(v[1], v[2]));
        data.s21.push_back(to_complex(v[3], v[4]));
        data.s12.push_back(to_complex(v[5], v[6]));
        data.s22.push_back(to_complex(v[7], v[8]));
    }
    if (data.frequencies.empty()) throw ParseError(path + ": no data records");
    return data;
}

}  // namespace kitsim::io
