#pragma once

// Experiment configuration, presets and the run orchestration behind the CLI.
//
// Config files are flat "key = value" text. Top-level keys (label, seed,
// preset) come first; explicit experiments add [prior], [model], [sampler],
// [diagnostics] and [output] sections. A file names either a preset or
// explicit sections, never both. docs/config.md lists every key.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hpcn/models.hpp"
#include "hpcn/prior.hpp"
#include "hpcn/samplers.hpp"

namespace hpcn {

enum class ModelKind { gaussian, ode, heat };
enum class SamplerKind { pcn, hybrid, diagonal };

std::string to_string(ModelKind kind);
std::string to_string(SamplerKind kind);

struct PriorBlock {
    MaternParams matern;
    std::size_t grid_points = 201;
    double length = 1.0;
};

struct ModelBlock {
    ModelKind kind = ModelKind::gaussian;
    // gaussian
    std::size_t K = 14;
    double Delta = 1.0;
    CoefficientScaling scaling = CoefficientScaling::grid;
    // ode / heat
    double noise_sd = 0.1;
    std::size_t obs_count = 50;  // readings at k T / obs_count, k = 0..obs_count
    double x0 = 1.0;
    std::size_t nx = 100;
    std::size_t nt = 200;
    bool halved_misfit = true;
    /// The truth is drawn on this grid and interpolated onto the run grid, so
    /// runs at different resolutions share the same data.
    std::size_t truth_grid_points = 201;
};

struct SamplerBlock {
    std::vector<SamplerKind> methods{SamplerKind::pcn, SamplerKind::hybrid,
                                     SamplerKind::diagonal};
    std::size_t J = 14;
    std::optional<double> rho;
    std::optional<double> beta;  // fixed step; otherwise tuned to target_rate
    double target_rate = 0.25;
    std::size_t samples = 50000;
    std::size_t prerun = 5000;
    double delta_reg = 1e-8;
    std::optional<double> R;
    std::size_t snapshot_stride = 1000;
    std::size_t tune_batches = 50;
    std::size_t tune_batch_size = 200;
};

struct DiagnosticsBlock {
    std::size_t acf_lag = 100;
    std::vector<double> acf_points{0.4, 0.8};
    std::size_t acf_table_lag = 500;
};

struct OutputBlock {
    std::string dir;  // empty: runs/<label>
    std::size_t thin = 10;
};

struct ExperimentConfig {
    std::string label = "custom";
    std::optional<std::string> preset;
    std::uint64_t seed = 1;
    PriorBlock prior;
    ModelBlock model;
    SamplerBlock sampler;
    DiagnosticsBlock diagnostics;
    OutputBlock output;

    /// Throws ValidationError naming the offending key.
    void validate() const;
    std::filesystem::path output_dir() const;
};

/// Ordered section -> (key, value) text form shared by the INI reader, the
/// INI writer and the JSON echo.
using KeyValueDocument = std::map<std::string, std::vector<std::pair<std::string, std::string>>>;

/// Parses "key = value" text; ConfigParseError carries the line number.
KeyValueDocument parse_key_values(std::istream& is);

/// Builds a validated config with defaults resolved. Unknown keys and
/// malformed values raise ValidationError naming the key.
ExperimentConfig config_from_document(const KeyValueDocument& doc);

/// Fully explicit form of a config; config_from_document(to_document(c))
/// reproduces c.
KeyValueDocument to_document(const ExperimentConfig& config);

void write_config(std::ostream& os, const ExperimentConfig& config);

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig load_config(std::istream& is);

/// The "config" object echoed in a run summary.
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& echo);

struct PresetInfo {
    std::string name;
    std::string experiment;  // what the preset reproduces
    std::string settings;    // one-line parameter summary
};

const std::vector<PresetInfo>& list_presets();

/// Throws ValidationError("preset", ...) naming the nearest known preset.
ExperimentConfig preset_config(const std::string& name);

/// Closest preset name by edit distance.
std::string nearest_preset(const std::string& name);

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<std::size_t> prerun;
    std::optional<std::size_t> grid_points;
    std::optional<std::string> out;
    bool full_scale = false;
};

void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

struct SamplerOutcome {
    SamplerKind kind = SamplerKind::pcn;
    double beta = 0.0;
    std::optional<double> prerun_beta;
    std::size_t J = 0;
    double acceptance_rate = 0.0;
    std::optional<double> prerun_acceptance_rate;
    std::size_t nonfinite_rejections = 0;
    std::size_t measured_states = 0;
    double ess_per_100_min = 0.0;
    double ess_per_100_median = 0.0;
    double ess_per_100_max = 0.0;
    std::vector<double> ess_per_100;  // per grid point
    std::optional<bool> adaptation_bounded;
    double wall_seconds = 0.0;
};

struct ExperimentResult {
    std::filesystem::path dir;
    std::vector<SamplerOutcome> samplers;
    nlohmann::json summary;

    const SamplerOutcome& outcome(SamplerKind kind) const;
};

struct RunOptions {
    std::size_t jobs = 1;  // samplers run concurrently when > 1
    bool write_basis = false;
    std::ostream* log = nullptr;
};

/// Generates data, tunes step sizes, runs every configured sampler and
/// writes chain_<sampler>.csv, diag_<sampler>.csv, acf_<sampler>.csv,
/// summary.json and, for data models, data.csv and truth.csv.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Diagnostics CSV for an existing chain file.
void diagnose_chain(std::istream& chain_csv, std::ostream& out, std::size_t acf_lag,
                    std::size_t skip);

}  // namespace hpcn
