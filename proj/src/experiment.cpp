#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>

#include "hpcn/diagnostics.hpp"
#include "hpcn/error.hpp"
#include "hpcn/harness.hpp"
#include "hpcn/io.hpp"

namespace hpcn {

namespace {

// Stream offsets for std::seed_seq{seed, offset}.
constexpr std::uint64_t data_stream = 0;
constexpr std::uint64_t pcn_tune_stream = 1;

std::uint64_t sampler_stream(SamplerKind kind) {
    return 10 + static_cast<std::uint64_t>(kind);
}

std::uint64_t sampler_tune_stream(SamplerKind kind) {
    return 20 + static_cast<std::uint64_t>(kind);
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

struct Problem {
    GridPtr grid;
    std::shared_ptr<const KLBasis> basis;
    Potential potential;
    std::optional<Field> truth;
    std::optional<ObservationSet> data;
};

Problem build_problem(const ExperimentConfig& config) {
    Problem p;
    p.grid = Grid::uniform(config.prior.grid_points, config.prior.length);
    p.basis = std::make_shared<const KLBasis>(matern_basis(p.grid, config.prior.matern));
    const auto& m = config.model;

    if (m.kind == ModelKind::gaussian) {
        p.potential = gaussian_potential(GaussianPotentialSpec::make(m.K, m.Delta, m.scaling), p.basis);
        return p;
    }

    std::shared_ptr<const ForwardModel> model;
    if (m.kind == ModelKind::ode) {
        model = std::make_shared<OdeModel>(m.x0, uniform_times(1.0, m.obs_count));
    } else {
        HeatModelSpec spec;
        spec.L = config.prior.length;
        spec.nx = m.nx;
        spec.nt = m.nt;
        spec.obs_count = m.obs_count;
        model = std::make_shared<HeatRobinModel>(spec);
    }

    Rng rng = make_rng(config.seed, data_stream);
    auto truth_grid = Grid::uniform(m.truth_grid_points, config.prior.length);
    const Field truth = sample_prior(matern_basis(truth_grid, config.prior.matern), rng);
    p.data = simulate_data(truth, *model, m.noise_sd, rng);

    Eigen::VectorXd on_run_grid(p.grid->points().size());
    for (Eigen::Index k = 0; k < on_run_grid.size(); ++k) {
        on_run_grid[k] = truth_grid->interpolate(truth.values(), p.grid->points()[k]);
    }
    p.truth = Field(p.grid, on_run_grid);
    p.potential = misfit_potential(model, *p.data, m.halved_misfit);
    return p;
}

TuneOptions tune_options(const ExperimentConfig& config) {
    TuneOptions t;
    t.target_rate = config.sampler.target_rate;
    t.batches = config.sampler.tune_batches;
    t.batch_size = config.sampler.tune_batch_size;
    return t;
}

HybridConfig hybrid_config(const ExperimentConfig& config, SamplerKind kind, double prerun_beta) {
    HybridConfig h;
    h.prerun_beta = prerun_beta;
    h.J = config.sampler.rho ? 0 : config.sampler.J;
    h.rho = config.sampler.rho;
    h.n_prerun = config.sampler.prerun;
    h.n_samples = config.sampler.samples;
    h.delta_reg = config.sampler.delta_reg;
    h.R = config.sampler.R;
    h.mode = kind == SamplerKind::diagonal ? CovarianceMode::diagonal : CovarianceMode::full;
    h.snapshot_stride = config.sampler.snapshot_stride;
    return h;
}

double median(std::vector<double> v) {
    std::erase_if(v, [](double x) { return !std::isfinite(x); });
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct SamplerRun {
    SamplerOutcome outcome;
    std::vector<double> decay;
};

SamplerRun run_sampler(const ExperimentConfig& config, const Problem& problem, SamplerKind kind,
                       double pcn_beta, const std::filesystem::path& dir) {
    const auto start = std::chrono::steady_clock::now();
    const Field initial(problem.grid);
    SamplerRun run;
    SamplerOutcome& out = run.outcome;
    out.kind = kind;

    Chain chain(problem.grid);
    std::size_t burn = 0;
    if (kind == SamplerKind::pcn) {
        PcnConfig pc;
        pc.beta = pcn_beta;
        pc.n_samples = config.sampler.prerun + config.sampler.samples;
        Rng rng = make_rng(config.seed, sampler_stream(kind));
        chain = run_pcn_chain(pc, problem.potential, *problem.basis, initial, rng);
        burn = config.sampler.prerun;
        out.beta = pcn_beta;
        out.J = 0;
    } else {
        HybridConfig hc = hybrid_config(config, kind, pcn_beta);
        if (config.sampler.beta) {
            hc.beta = *config.sampler.beta;
        } else {
            TuneOptions t = tune_options(config);
            t.initial_beta = pcn_beta;
            Rng tune_rng = make_rng(config.seed, sampler_tune_stream(kind));
            hc.beta = tune_beta(t, hc, problem.potential, *problem.basis, initial, tune_rng).beta;
        }
        Rng rng = make_rng(config.seed, sampler_stream(kind));
        chain = run_hybrid_chain(hc, problem.potential, *problem.basis, initial, rng);
        burn = chain.prerun_states;
        out.beta = hc.beta;
        out.prerun_beta = hc.resolve_prerun_beta();
        out.J = hc.resolve_J(*problem.basis);
        out.prerun_acceptance_rate = chain.prerun.rate();
        run.decay = adaptation_decay(chain.sigma_snapshots);
        out.adaptation_bounded = check_adaptation_decay(run.decay).bounded;
    }

    out.acceptance_rate = chain.acceptance_rate();
    out.nonfinite_rejections = chain.nonfinite_rejections;
    const Chain measured = chain.tail(burn);
    out.measured_states = measured.size();

    const auto name = to_string(kind);
    {
        auto os = open_output(dir / ("chain_" + name + ".csv"));
        write_chain_csv(os, chain, config.output.thin);
    }
    const auto diag = point_diagnostics(measured, config.diagnostics.acf_lag, 0);
    {
        auto os = open_output(dir / ("diag_" + name + ".csv"));
        write_point_diagnostics_csv(os, diag, config.diagnostics.acf_lag);
    }
    {
        auto os = open_output(dir / ("acf_" + name + ".csv"));
        write_acf_table_csv(os, measured, config.diagnostics.acf_points,
                            config.diagnostics.acf_table_lag, 0);
    }

    out.ess_per_100 = diag.ess_per_100;
    std::vector<double> finite;
    for (double v : diag.ess_per_100) {
        if (std::isfinite(v)) finite.push_back(v);
    }
    if (!finite.empty()) {
        out.ess_per_100_min = *std::min_element(finite.begin(), finite.end());
        out.ess_per_100_max = *std::max_element(finite.begin(), finite.end());
    }
    out.ess_per_100_median = median(diag.ess_per_100);
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

nlohmann::json outcome_json(const SamplerRun& run) {
    const auto& o = run.outcome;
    nlohmann::json j;
    j["beta"] = o.beta;
    if (o.prerun_beta) j["prerun_beta"] = *o.prerun_beta;
    if (o.kind != SamplerKind::pcn) j["J"] = o.J;
    j["acceptance_rate"] = o.acceptance_rate;
    if (o.prerun_acceptance_rate) j["prerun_acceptance_rate"] = *o.prerun_acceptance_rate;
    j["nonfinite_rejections"] = o.nonfinite_rejections;
    j["measured_states"] = o.measured_states;
    j["ess_per_100"] = {{"min", o.ess_per_100_min},
                        {"median", o.ess_per_100_median},
                        {"max", o.ess_per_100_max}};
    if (o.adaptation_bounded) {
        j["adaptation_bounded"] = *o.adaptation_bounded;
        j["adaptation_decay"] = run.decay;
    }
    j["wall_seconds"] = o.wall_seconds;
    return j;
}

}  // namespace

const SamplerOutcome& ExperimentResult::outcome(SamplerKind kind) const {
    for (const auto& s : samplers) {
        if (s.kind == kind) return s;
    }
    throw ParameterError("sampler " + to_string(kind) + " was not run");
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    auto log = [&](const std::string& line) {
        if (options.log) *options.log << line << std::endl;
    };

    ExperimentResult result;
    result.dir = config.output_dir();
    std::filesystem::create_directories(result.dir);

    log("[" + config.label + "] building prior and potential");
    const Problem problem = build_problem(config);
    if (problem.data) {
        auto os = open_output(result.dir / "data.csv");
        problem.data->write_csv(os);
        auto ts = open_output(result.dir / "truth.csv");
        write_field_csv(ts, *problem.truth);
    }
    if (options.write_basis) {
        auto os = open_output(result.dir / "basis.csv");
        problem.basis->write_csv(os);
    }

    double pcn_beta = 0.0;
    nlohmann::json tuning;
    if (config.sampler.beta) {
        pcn_beta = *config.sampler.beta;
        tuning["mode"] = "fixed";
    } else {
        log("[" + config.label + "] tuning pCN step size");
        Rng rng = make_rng(config.seed, pcn_tune_stream);
        const auto tuned =
            tune_beta(tune_options(config), problem.potential, *problem.basis, Field(problem.grid), rng);
        pcn_beta = tuned.beta;
        tuning["mode"] = "batch";
        tuning["target_rate"] = config.sampler.target_rate;
        tuning["batches"] = config.sampler.tune_batches;
        tuning["batch_size"] = config.sampler.tune_batch_size;
        tuning["final_batch_rate"] = tuned.rates.empty() ? 0.0 : tuned.rates.back();
    }

    std::vector<SamplerRun> runs(config.sampler.methods.size());
    auto one = [&](std::size_t i) {
        const SamplerKind kind = config.sampler.methods[i];
        log("[" + config.label + "] running " + to_string(kind));
        runs[i] = run_sampler(config, problem, kind, pcn_beta, result.dir);
    };
    if (options.jobs > 1) {
        std::vector<std::future<void>> pending;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            pending.push_back(std::async(std::launch::async, one, i));
            if (pending.size() >= options.jobs) {
                pending.front().get();
                pending.erase(pending.begin());
            }
        }
        for (auto& f : pending) f.get();
    } else {
        for (std::size_t i = 0; i < runs.size(); ++i) one(i);
    }

    nlohmann::json samplers = nlohmann::json::object();
    for (const auto& run : runs) {
        result.samplers.push_back(run.outcome);
        samplers[to_string(run.outcome.kind)] = outcome_json(run);
    }

    auto& s = result.summary;
    s["label"] = config.label;
    if (config.preset) s["preset"] = *config.preset;
    s["seed"] = config.seed;
    s["config"] = config_to_json(config);
    s["tuning"] = tuning;
    s["samplers"] = samplers;
    s["estimators"] = {{"acf", "biased sample autocorrelation (divide by n), zero-padded FFT"},
                       {"ess", "n / tau, tau truncated by Geyer's initial positive sequence"},
                       {"ess_per_100", "100 * ESS / measured states, per grid point"}};
    s["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    {
        auto os = open_output(result.dir / "summary.json");
        os << std::setw(2) << s << '\n';
    }
    log("[" + config.label + "] wrote " + result.dir.string());
    return result;
}

void diagnose_chain(std::istream& chain_csv, std::ostream& out, std::size_t acf_lag,
                    std::size_t skip) {
    const Chain chain = read_chain_csv(chain_csv);
    if (skip >= chain.size()) throw ParameterError("skip leaves no states");
    const auto diag = point_diagnostics(chain, acf_lag, skip);
    write_point_diagnostics_csv(out, diag, acf_lag);
}

}  // namespace hpcn
