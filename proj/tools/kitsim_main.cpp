// Command-line front end: design -> dispersion -> gain sweep -> metrics,
// plus the measurement-trace analysis subcommands.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kitsim/config.hpp"
#include "kitsim/pipeline.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir = "runs/out";
    int threads = 1;
    bool dry_run = false;
    std::string format = "json";
};

void add_common(CLI::App* cmd, CommonOptions& opt, bool config_required = true) {
    auto* c = cmd->add_option("--config", opt.config_path, "config file");
    if (config_required) c->required();
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--dry-run", opt.dry_run, "validate inputs and exit");
    cmd->add_option("--format", opt.format, "report format")
        ->check(CLI::IsMember({"json", "csv"}));
}

int fail_json(const std::string& stage, const std::exception& e) {
    nlohmann::json err{{"error", e.what()}, {"stage", stage}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinetic-inductance traveling-wave amplifier design and analysis"};
    app.require_subcommand(1);

    CommonOptions design_opt, sweep_opt, fit_opt, noise_opt;
    std::string fit_kind, fit_trace;
    std::vector<std::string> noise_traces;

    auto* design = app.add_subcommand("design", "stub-length design curves and impedances");
    add_common(design, design_opt);

    auto* sweep = app.add_subcommand("sweep", "S-parameters, dispersion, gain sweep");
    add_common(sweep, sweep_opt);

    auto* fit = app.add_subcommand("fit", "analyze a measurement trace");
    fit->add_option("kind", fit_kind, "scaling|ic|tdr|iip|rt|resonance")
        ->required()
        ->check(CLI::IsMember({"scaling", "ic", "tdr", "iip", "rt", "resonance"}));
    fit->add_option("--trace", fit_trace, "trace CSV file")->required();
    add_common(fit, fit_opt, /*config_required=*/false);

    auto* noise = app.add_subcommand("noise", "SNTJ-calibrated system-noise analysis");
    noise->add_option("--trace", noise_traces, "SNTJ trace CSV (repeatable)")->required();
    add_common(noise, noise_opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (design->parsed()) {
            const auto cfg = kitsim::config::parse_config(design_opt.config_path);
            if (design_opt.dry_run) {
                std::printf("config ok: %s\n", design_opt.config_path.c_str());
                return 0;
            }
            const auto artifacts =
                kitsim::pipeline::run_design(cfg, design_opt.out_dir, design_opt.format);
            kitsim::pipeline::write_manifest(design_opt.out_dir, "design", artifacts);
        } else if (sweep->parsed()) {
            const auto cfg = kitsim::config::parse_config(sweep_opt.config_path);
            if (sweep_opt.dry_run) {
                kitsim::pipeline::device_from_config(cfg);  // full validation
                std::printf("config ok: %s\n", sweep_opt.config_path.c_str());
                return 0;
            }
            const auto artifacts =
                kitsim::pipeline::run_sweep(cfg, sweep_opt.out_dir, sweep_opt.threads,
                                            sweep_opt.format);
            kitsim::pipeline::write_manifest(sweep_opt.out_dir, "sweep", artifacts);
        } else if (fit->parsed()) {
            const auto cfg = fit_opt.config_path.empty()
                                 ? kitsim::config::ProjectConfig{}
                                 : kitsim::config::parse_config(fit_opt.config_path);
            if (fit_opt.dry_run) {
                std::printf("trace: %s\n", fit_trace.c_str());
                return 0;
            }
            kitsim::pipeline::RunArtifacts artifacts;
            if (fit_kind == "scaling")
                artifacts = kitsim::pipeline::run_fit_scaling(cfg, fit_trace, fit_opt.out_dir,
                                                 fit_opt.format);
            else if (fit_kind == "ic")
                artifacts = kitsim::pipeline::run_fit_ic(cfg, fit_trace, fit_opt.out_dir,
                                                 fit_opt.format);
            else if (fit_kind == "tdr")
                artifacts = kitsim::pipeline::run_fit_tdr(cfg, fit_trace, fit_opt.out_dir,
                                                 fit_opt.format);
            else if (fit_kind == "iip")
                artifacts = kitsim::pipeline::run_fit_iip(cfg, fit_trace, fit_opt.out_dir,
                                                 fit_opt.format);
            else if (fit_kind == "rt")
                artifacts = kitsim::pipeline::run_fit_rt(cfg, fit_trace, fit_opt.out_dir,
                                                 fit_opt.format);
            else
                artifacts = kitsim::pipeline::run_fit_resonance(cfg, fit_trace, fit_opt.out_dir,
                                                    fit_opt.format);
            kitsim::pipeline::write_manifest(fit_opt.out_dir, "fit " + fit_kind, artifacts);
        } else if (noise->parsed()) {
            const auto cfg = kitsim::config::parse_config(noise_opt.config_path);
            if (noise_opt.dry_run) {
                std::printf("config ok: %s (%zu traces)\n", noise_opt.config_path.c_str(),
                            noise_traces.size());
                return 0;
            }
            const auto artifacts =
                kitsim::pipeline::run_noise(cfg, noise_traces, noise_opt.out_dir,
                                            noise_opt.format);
            kitsim::pipeline::write_manifest(noise_opt.out_dir, "noise", artifacts);
        }
    } catch (const std::exception& e) {
        const char* stage = design->parsed()  ? "design"
                            : sweep->parsed() ? "sweep"
                            : fit->parsed()   ? "fit"
                                              : "noise";
        return fail_json(stage, e);
    }
    return 0;
}
