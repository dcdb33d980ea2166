// hpcn: run preset or custom sampling experiments, list presets, and
// re-diagnose saved chains.

#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "hpcn/error.hpp"
#include "hpcn/harness.hpp"

namespace {

int cmd_presets() {
    std::size_t width = 0;
    for (const auto& p : hpcn::list_presets()) width = std::max(width, p.name.size());
    for (const auto& p : hpcn::list_presets()) {
        std::cout << std::left << std::setw(static_cast<int>(width) + 2) << p.name << p.experiment
                  << "\n" << std::string(width + 2, ' ') << p.settings << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Function-space MCMC: pCN and hybrid adaptive samplers"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a preset or a config file");
    std::string config_path;
    std::string preset;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    std::size_t prerun = 0;
    std::size_t grid_points = 0;
    std::string out;
    bool full_scale = false;
    std::size_t jobs = 1;
    bool export_basis = false;
    bool quiet = false;
    auto* config_opt = run->add_option("config", config_path, "Config file (.ini-style or summary.json)");
    auto* preset_opt = run->add_option("--preset", preset, "Preset name (see `hpcn presets`)");
    config_opt->excludes(preset_opt);
    auto* seed_opt = run->add_option("--seed", seed, "Master seed");
    auto* samples_opt = run->add_option("--samples", samples, "Measured samples per sampler");
    auto* prerun_opt = run->add_option("--prerun", prerun, "pCN pre-run / burn-in length");
    auto* grid_opt = run->add_option("--grid-points", grid_points, "Grid points of the field");
    auto* out_opt = run->add_option("--out", out, "Output directory");
    run->add_flag("--full-scale", full_scale, "5e5 samples with a 5e4 pre-run");
    run->add_option("--jobs", jobs, "Samplers run concurrently")->check(CLI::PositiveNumber);
    run->add_flag("--export-basis", export_basis, "Also write basis.csv");
    run->add_flag("-q,--quiet", quiet, "No progress lines");

    auto* presets = app.add_subcommand("presets", "List the built-in presets");

    auto* diagnose = app.add_subcommand("diagnose", "Per-point diagnostics for a chain CSV");
    std::string chain_path;
    std::size_t acf_lag = 100;
    std::size_t skip = 0;
    diagnose->add_option("chain", chain_path, "chain_<sampler>.csv")->required()->check(CLI::ExistingFile);
    diagnose->add_option("--acf-lag", acf_lag, "Lag reported in the acf column");
    diagnose->add_option("--skip", skip, "Leading rows to discard");

    CLI11_PARSE(app, argc, argv);

    try {
        if (presets->parsed()) return cmd_presets();

        if (diagnose->parsed()) {
            std::ifstream is(chain_path);
            hpcn::diagnose_chain(is, std::cout, acf_lag, skip);
            return 0;
        }

        if (config_opt->count() == 0 && preset_opt->count() == 0) {
            std::cerr << "run: give a config file or --preset NAME\n";
            return 2;
        }
        hpcn::ExperimentConfig config = preset_opt->count() ? hpcn::preset_config(preset)
                                                            : hpcn::load_config(config_path);
        hpcn::Overrides o;
        if (seed_opt->count()) o.seed = seed;
        if (samples_opt->count()) o.samples = samples;
        if (prerun_opt->count()) o.prerun = prerun;
        if (grid_opt->count()) o.grid_points = grid_points;
        if (out_opt->count()) o.out = out;
        o.full_scale = full_scale;
        hpcn::apply_overrides(config, o);

        hpcn::RunOptions options;
        options.jobs = jobs;
        options.write_basis = export_basis;
        options.log = quiet ? nullptr : &std::cerr;
        const auto result = hpcn::run_experiment(config, options);

        std::cout << std::setprecision(4);
        for (const auto& s : result.samplers) {
            std::cout << std::left << std::setw(10) << hpcn::to_string(s.kind) << " beta "
                      << std::setw(10) << s.beta << " accept " << std::setw(8) << s.acceptance_rate
                      << " ESS/100 min " << std::setw(8) << s.ess_per_100_min << " median "
                      << std::setw(8) << s.ess_per_100_median << " max " << s.ess_per_100_max << "\n";
        }
        std::cout << "artifacts in " << result.dir.string() << "\n";
        return 0;
    } catch (const hpcn::ConfigParseError& e) {
        std::cerr << "config error, " << e.what() << "\n";
    } catch (const hpcn::ValidationError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 1;
}
