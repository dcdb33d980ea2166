// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance [--seed N] [--only K] [--out DIR]
//
// The seed feeds every stochastic criterion; presets keep their own seed
// unless --seed is given.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hpcn/diagnostics.hpp"
#include "hpcn/harness.hpp"
#include "hpcn/models.hpp"
#include "hpcn/prior.hpp"
#include "hpcn/samplers.hpp"

using namespace hpcn;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[200];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::vector<double> ess_column(const fs::path& diag_csv) {
    std::ifstream is(diag_csv);
    std::string line;
    std::getline(is, line);
    std::vector<double> out;
    while (std::getline(is, line)) {
        std::stringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        std::getline(row, cell, ',');
        std::getline(row, cell, ',');
        out.push_back(std::stod(cell));
    }
    return out;
}

double median_of(std::vector<double> v) {
    std::erase_if(v, [](double x) { return !std::isfinite(x); });
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Context {
    std::uint64_t seed = 1;
    bool seed_given = false;
    fs::path out = fs::temp_directory_path() / "hpcn_acceptance";
    // hybrid runs that feed the diminishing-adaptation check
    std::vector<std::pair<std::string, bool>> adaptation;
};

ExperimentConfig preset_for(const Context& ctx, const std::string& name, const std::string& dir) {
    auto c = preset_config(name);
    if (ctx.seed_given) c.seed = ctx.seed;
    c.output.dir = (ctx.out / dir).string();
    return c;
}

void record_adaptation(Context& ctx, const std::string& label, const ExperimentResult& r) {
    for (const auto& s : r.samplers) {
        if (s.adaptation_bounded) ctx.adaptation.emplace_back(label + "/" + to_string(s.kind), *s.adaptation_bounded);
    }
}

// 1. Gaussian posterior with K = 5 against direct inversion of D^{-1} + Gamma.
Verdict gaussian_oracle(Context& ctx) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t K = 5;
    const double Delta = 14.0;
    auto grid = Grid::uniform(201);
    const auto basis = std::make_shared<const KLBasis>(matern_basis(grid, {1.0, 1.0, 2.5}));
    const auto spec = GaussianPotentialSpec::make(K, Delta, CoefficientScaling::quadrature);
    const auto phi = gaussian_potential(spec, basis);

    Eigen::MatrixXd precision(K, K);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            const double d = static_cast<double>(i) - static_cast<double>(j);
            precision(i, j) = std::exp(-d * d / Delta);
        }
        precision(i, i) += 1.0 / basis->eigenvalues()[static_cast<Eigen::Index>(i)];
    }
    const Eigen::MatrixXd oracle = precision.fullPivLu().inverse();

    Rng tune_rng(ctx.seed * 1000 + 1);
    HybridConfig hc;
    hc.J = K;
    hc.n_prerun = 5000;
    hc.n_samples = 200000;
    hc.snapshot_stride = 1000;
    hc.seed = ctx.seed * 1000 + 2;
    TuneOptions t;
    hc.prerun_beta = tune_beta(t, phi, *basis, Field(grid), tune_rng).beta;
    hc.beta = tune_beta(t, hc, phi, *basis, Field(grid), tune_rng).beta;
    const Chain chain = run_hybrid_chain(hc, phi, *basis, Field(grid));
    const Chain measured = chain.tail(chain.prerun_states);
    ctx.adaptation.emplace_back("gaussian-K5/hybrid", check_adaptation_decay(adaptation_decay(chain.sigma_snapshots)).bounded);

    const auto n = static_cast<Eigen::Index>(measured.size());
    Eigen::MatrixXd x(K, n);
    for (std::size_t j = 0; j < K; ++j) {
        const auto series = measured.coefficient_series(*basis, j);
        for (Eigen::Index i = 0; i < n; ++i) x(static_cast<Eigen::Index>(j), i) = series[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd mean = x.rowwise().mean();
    const Eigen::MatrixXd centred = x.colwise() - mean;
    const Eigen::MatrixXd cov = centred * centred.transpose() / static_cast<double>(n - 1);
    const double mean_err = mean.cwiseAbs().maxCoeff();
    const double cov_err = (cov - oracle).norm() / oracle.norm();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {mean_err <= 0.02 && cov_err <= 0.05 && seconds < 300.0,
            fmt("max |mean| %.4f (<= 0.02), covariance rel. Frobenius %.4f (<= 0.05), %.1f s", mean_err,
                cov_err, seconds) +
                fmt(", beta %.3f, accept %.3f", hc.beta, measured.acceptance_rate())};
}

// 2. Zero potential leaves the prior invariant.
Verdict prior_invariance(Context& ctx) {
    auto grid = Grid::uniform(201);
    const KLBasis basis = matern_basis(grid, {1.0, 1.0, 2.5});
    const Potential zero = [](const Field&) { return 0.0; };
    const std::size_t top = 5;

    auto worst = [&](const Chain& chain) {
        double err = 0.0;
        for (std::size_t j = 0; j < top; ++j) {
            const auto s = chain.coefficient_series(basis, j);
            double m = 0.0, v = 0.0;
            for (double y : s) m += y;
            m /= static_cast<double>(s.size());
            for (double y : s) v += (y - m) * (y - m);
            v /= static_cast<double>(s.size() - 1);
            const double alpha = basis.eigenvalues()[static_cast<Eigen::Index>(j)];
            err = std::max(err, std::abs(v - alpha) / alpha);
        }
        return err;
    };

    PcnConfig pc;
    pc.beta = 0.9;
    pc.n_samples = 100000;
    pc.seed = ctx.seed * 1000 + 3;
    const Chain pcn = run_pcn_chain(pc, zero, basis, Field(grid));

    HybridConfig hc;
    hc.beta = 1.0;
    hc.J = top;
    hc.n_prerun = 0;
    hc.n_samples = 100000;
    hc.fixed_sigma = basis.eigenvalues().head(top).asDiagonal().toDenseMatrix();
    hc.seed = ctx.seed * 1000 + 4;
    const Chain hybrid = run_hybrid_chain(hc, zero, basis, Field(grid));

    const double pcn_err = worst(pcn);
    const double hybrid_err = worst(hybrid);
    const double rate = pcn.acceptance_rate();
    return {pcn_err <= 0.05 && hybrid_err <= 0.05 && rate == 1.0,
            fmt("pcn max rel. variance error %.4f, hybrid %.4f (<= 0.05); pcn acceptance %.6f (== 1)",
                pcn_err, hybrid_err, rate)};
}

struct GaussRuns {
    std::optional<ExperimentResult> weak;
    std::optional<ExperimentResult> strong;
};

ExperimentResult run_gauss(Context& ctx, const std::string& name) {
    auto c = preset_for(ctx, name, name);
    const auto r = run_experiment(c);
    record_adaptation(ctx, name, r);
    return r;
}

// 3. Hybrid beats pCN on the strongly coupled Gaussian example.
Verdict strong_coupling(Context& ctx, GaussRuns& runs) {
    if (!runs.strong) runs.strong = run_gauss(ctx, "gauss-strong");
    const auto dir = runs.strong->dir;
    const auto p = ess_column(dir / "diag_pcn.csv");
    const auto h = ess_column(dir / "diag_hybrid.csv");
    const auto d = ess_column(dir / "diag_diagonal.csv");
    std::size_t wins = 0;
    std::vector<double> ratio;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (h[k] > p[k]) ++wins;
        ratio.push_back(h[k] / d[k]);
    }
    const double frac = static_cast<double>(wins) / static_cast<double>(p.size());
    const double med = median_of(ratio);
    return {frac >= 0.8 && med > 1.0,
            fmt("hybrid > pcn at %.1f%% of points (>= 80%%), median hybrid/diagonal %.3f (> 1)",
                100.0 * frac, med)};
}

// 4. Parity on the weakly coupled Gaussian example.
Verdict weak_coupling(Context& ctx, GaussRuns& runs) {
    if (!runs.weak) runs.weak = run_gauss(ctx, "gauss-weak");
    const auto dir = runs.weak->dir;
    const auto h = ess_column(dir / "diag_hybrid.csv");
    const auto d = ess_column(dir / "diag_diagonal.csv");
    std::vector<double> ratio;
    for (std::size_t k = 0; k < h.size(); ++k) ratio.push_back(h[k] / d[k]);
    const double med = median_of(ratio);
    return {med >= 0.7 && med <= 2.0, fmt("median hybrid/diagonal %.3f (in [0.7, 2.0])", med)};
}

// 5. Manufactured heat solution u = x^2 + 1 + 2t with rho(t) = t.
Verdict manufactured_heat(Context&) {
    auto error_at = [](std::size_t n) {
        HeatModelSpec spec;
        spec.nx = n;
        spec.nt = n;
        spec.obs_count = 200;
        const auto y = solve_heat_robin([](double t) { return t; }, spec);
        const auto times = spec.observation_times();
        double err = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            err = std::max(err, std::abs(y[static_cast<Eigen::Index>(k)] - (1.0 + 2.0 * times[k])));
        }
        return err;
    };
    const double e400 = error_at(400);
    const std::vector<std::size_t> levels{200, 400, 800, 1600};
    std::vector<double> errors;
    for (auto n : levels) errors.push_back(error_at(n));
    bool orders_ok = true;
    std::string orders;
    for (std::size_t k = 1; k < errors.size(); ++k) {
        const double order = std::log2(errors[k - 1] / errors[k]);
        orders_ok = orders_ok && std::isfinite(order) && std::abs(order - 2.0) <= 0.2;
        orders += (k > 1 ? ", " : "") + fmt("%.2f", order);
    }
    std::string errs;
    for (std::size_t k = 0; k < errors.size(); ++k) errs += (k ? ", " : "") + fmt("%.2e", errors[k]);
    return {e400 < 1e-6 && orders_ok,
            fmt("max sensor error at nx = nt = 400: %.2e (< 1e-6); ", e400) + "errors at n = 200..1600: " +
                errs + "; observed orders " + orders + " (2.0 +- 0.2)"};
}

// 6. Closed-form ODE solutions.
Verdict ode_analytic(Context&) {
    auto grid = Grid::uniform(201);
    const std::vector<double> times{0.0, 0.5, 1.0};
    const double e1 = std::abs(solve_ode(Field(grid, Eigen::VectorXd::Ones(201)), 1.0, times)[2] - std::exp(-1.0));
    const double e2 = std::abs(solve_ode(Field(grid, grid->points()), 1.0, times)[2] - std::exp(-0.5));
    return {e1 < 1e-6 && e2 < 1e-6, fmt("|x(1) - e^-1| = %.2e, |x(1) - e^-1/2| = %.2e (< 1e-6)", e1, e2)};
}

// 7. Scaled covariance increments of every hybrid run show no upward trend.
Verdict diminishing_adaptation(Context& ctx) {
    if (ctx.adaptation.empty()) return {false, "no hybrid runs recorded"};
    std::size_t bounded = 0;
    std::string failed;
    for (const auto& [label, ok] : ctx.adaptation) {
        if (ok) {
            ++bounded;
        } else {
            failed += " " + label;
        }
    }
    std::string detail = std::to_string(bounded) + "/" + std::to_string(ctx.adaptation.size()) +
                         " adaptive runs with last-quartile max <= 2x first-quartile max";
    if (!failed.empty()) detail += "; unbounded:" + failed;
    return {bounded == ctx.adaptation.size(), detail};
}

// 8. Acceptance rates survive refinement from 201 to 401 grid points.
struct OdeRuns {
    std::optional<ExperimentResult> base;
};

Verdict dimension_robustness(Context& ctx, OdeRuns& runs) {
    auto base = preset_for(ctx, "ode-1", "ode-1-201");
    base.sampler.methods = {SamplerKind::pcn, SamplerKind::hybrid};
    runs.base = run_experiment(base);
    record_adaptation(ctx, "ode-1@201", *runs.base);

    double worst = 0.0;
    std::string detail;
    for (SamplerKind kind : {SamplerKind::pcn, SamplerKind::hybrid}) {
        const auto& coarse = runs.base->outcome(kind);
        auto fine = preset_for(ctx, "ode-1", "ode-1-401-" + to_string(kind));
        fine.prior.grid_points = 401;
        fine.sampler.methods = {kind};
        fine.sampler.beta = coarse.beta;
        const auto r = run_experiment(fine);
        record_adaptation(ctx, "ode-1@401", r);
        const double a = coarse.acceptance_rate;
        const double b = r.outcome(kind).acceptance_rate;
        worst = std::max(worst, std::abs(a - b));
        detail += (detail.empty() ? "" : "; ") + to_string(kind) +
                  fmt(" beta %.4f: %.4f at 201, %.4f at 401", coarse.beta, a, b);
    }
    return {worst <= 0.05, detail + fmt("; max gap %.2f points (<= 5)", 100.0 * worst)};
}

// 9. ESS estimator on series with known integrated autocorrelation.
Verdict ess_calibration(Context& ctx) {
    std::mt19937_64 rng(ctx.seed * 1000 + 9);
    std::normal_distribution<double> normal;
    const std::size_t n = 100000;
    std::vector<double> iid(n), ar(n);
    for (auto& v : iid) v = normal(rng);
    const double phi = 0.9;
    double x = normal(rng) / std::sqrt(1.0 - phi * phi);
    for (auto& v : ar) {
        x = phi * x + normal(rng);
        v = x;
    }
    const double r_iid = effective_sample_size(iid).ess / static_cast<double>(n);
    const double r_ar = effective_sample_size(ar).ess / static_cast<double>(n);
    const double target = (1.0 - phi) / (1.0 + phi);
    const double rel = std::abs(r_ar - target) / target;
    return {r_iid >= 0.9 && r_iid <= 1.1 && rel <= 0.2,
            fmt("iid ESS/n %.4f (in [0.9, 1.1]); AR(1) 0.9 ESS/n %.4f vs %.4f", r_iid, r_ar, target) +
                fmt(" (rel. error %.3f <= 0.2)", rel)};
}

// 10. Same seed, same bytes.
Verdict determinism(Context& ctx, OdeRuns& runs) {
    if (!runs.base) return {false, "reference run missing"};
    auto again = preset_for(ctx, "ode-1", "ode-1-201-again");
    again.sampler.methods = {SamplerKind::pcn, SamplerKind::hybrid};
    run_experiment(again);
    std::size_t same = 0, total = 0;
    for (const char* f : {"chain_pcn.csv", "chain_hybrid.csv", "diag_pcn.csv", "diag_hybrid.csv",
                          "acf_pcn.csv", "acf_hybrid.csv", "data.csv", "truth.csv"}) {
        ++total;
        const auto a = slurp(runs.base->dir / f);
        if (!a.empty() && a == slurp(fs::path(again.output.dir) / f)) ++same;
    }
    return {same == total, std::to_string(same) + "/" + std::to_string(total) +
                               " artifacts byte-identical across two ode-1 runs"};
}

}  // namespace

int main(int argc, char** argv) {
    Context ctx;
    std::optional<int> only;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--seed") {
            ctx.seed = std::stoull(argv[i + 1]);
            ctx.seed_given = true;
        } else if (flag == "--only") {
            only = std::stoi(argv[i + 1]);
        } else if (flag == "--out") {
            ctx.out = argv[i + 1];
        } else {
            std::cerr << "usage: acceptance [--seed N] [--only K] [--out DIR]\n";
            return 2;
        }
    }
    fs::create_directories(ctx.out);

    GaussRuns gauss;
    OdeRuns ode;
    struct Criterion {
        int id;
        const char* name;
        std::function<Verdict()> check;
    };
    const std::vector<Criterion> criteria{
        {1, "gaussian posterior oracle (K = 5)", [&] { return gaussian_oracle(ctx); }},
        {2, "prior invariance under zero potential", [&] { return prior_invariance(ctx); }},
        {3, "hybrid beats pcn on gauss-strong", [&] { return strong_coupling(ctx, gauss); }},
        {4, "hybrid/diagonal parity on gauss-weak", [&] { return weak_coupling(ctx, gauss); }},
        {5, "manufactured heat solution", [&] { return manufactured_heat(ctx); }},
        {6, "ode analytic solutions", [&] { return ode_analytic(ctx); }},
        {8, "dimension robustness on ode-1", [&] { return dimension_robustness(ctx, ode); }},
        {9, "ess calibration", [&] { return ess_calibration(ctx); }},
        {10, "determinism", [&] { return determinism(ctx, ode); }},
        // runs last so every adaptive chain above is included
        {7, "diminishing adaptation", [&] { return diminishing_adaptation(ctx); }},
    };

    std::vector<std::pair<int, std::string>> lines;
    int failures = 0;
    for (const auto& c : criteria) {
        if (only && *only != c.id) continue;
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        if (!v.pass) ++failures;
        std::string line = std::string(v.pass ? "PASS" : "FAIL") + " [" + std::to_string(c.id) + "] " +
                           c.name + ": " + v.detail;
        std::cout << line << std::endl;
        lines.emplace_back(c.id, line);
    }
    std::sort(lines.begin(), lines.end());
    std::cout << "\nsummary (" << lines.size() - static_cast<std::size_t>(failures) << "/" << lines.size()
              << " passed)\n";
    for (const auto& [id, line] : lines) std::cout << line.substr(0, line.find(':')) << "\n";
    return failures == 0 ? 0 : 1;
}
