#pragma once

// Config-driven pipelines behind the CLI subcommands. Kept in the library so
// the test suites drive the exact code paths the executable runs.

#include <string>
#include <vector>

#include "kitsim/cascade.hpp"
#include "kitsim/config.hpp"
#include "kitsim/gainsim.hpp"

namespace kitsim::pipeline {

/// Builds the cascade device description from config. Cell capacitances and
/// stub lengths come from the device section; series and finger inductances
/// fall back to geometry + film closed forms when not given explicitly.
cascade::DeviceSpec device_from_config(const config::ProjectConfig& cfg);

/// Dispersion sampled on an internally densified grid so the unwrap is
/// unambiguous from near dc up to (at least) f_max.
cascade::DispersionCurve dispersion_for_device(const cascade::DeviceSpec& spec,
                                               double f_max, int threads);

struct RunArtifacts {
    std::vector<std::string> files;  // paths relative to the output directory
};

/// design: Z0(stub length) curve, solved stub lengths, cell electricals,
/// supercell impedance. Writes design/curve.csv and design/report.{json|csv}.
RunArtifacts run_design(const config::ProjectConfig& cfg, const std::string& out_dir,
                        const std::string& format = "json");

/// sweep: S-parameters, dispersion, bandgap, pump sweep with band metrics.
/// Writes sweep/device.s2p, sweep/spectrum.csv, sweep/dispersion.csv,
/// sweep/gain.csv, sweep/metrics.json (plus sweep/pump_metrics.csv under
/// the csv format).
RunArtifacts run_sweep(const config::ProjectConfig& cfg, const std::string& out_dir,
                       int threads = 1, const std::string& format = "json");

/// fit subcommands; each reads one trace file and writes fit/<name>.json
/// (key,value CSV variant under the csv format).
RunArtifacts run_fit_scaling(const config::ProjectConfig& cfg, const std::string& trace,
                             const std::string& out_dir, const std::string& format = "json");
RunArtifacts run_fit_ic(const config::ProjectConfig& cfg, const std::string& trace,
                        const std::string& out_dir, const std::string& format = "json");
RunArtifacts run_fit_tdr(const config::ProjectConfig& cfg, const std::string& trace,
                         const std::string& out_dir, const std::string& format = "json");
RunArtifacts run_fit_iip(const config::ProjectConfig& cfg, const std::string& trace,
                         const std::string& out_dir, const std::string& format = "json");
RunArtifacts run_fit_rt(const config::ProjectConfig& cfg, const std::string& trace,
                        const std::string& out_dir, const std::string& format = "json");
RunArtifacts run_fit_resonance(const config::ProjectConfig& cfg, const std::string& trace,
                               const std::string& out_dir,
                               const std::string& format = "json");

/// noise: per-trace system-gain / excess-noise fits, reference-plane
/// transform, noise bandwidth. Writes noise/report.json (per-trace CSV
/// variant under the csv format).
RunArtifacts run_noise(const config::ProjectConfig& cfg,
                       const std::vector<std::string>& traces, const std::string& out_dir,
                       const std::string& format = "json");

/// Writes manifest.json (the single timestamped artifact of a run).
void write_manifest(const std::string& out_dir, const std::string& command,
                    const RunArtifacts& artifacts);

}  // namespace kitsim::pipeline
