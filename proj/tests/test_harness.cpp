#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hpcn/error.hpp"
#include "hpcn/harness.hpp"

using namespace hpcn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hpcn_harness_" + name);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig small(const std::string& preset, const fs::path& out) {
    auto c = preset_config(preset);
    c.sampler.samples = 1500;
    c.sampler.prerun = 300;
    c.sampler.tune_batches = 5;
    c.sampler.tune_batch_size = 50;
    c.sampler.snapshot_stride = 100;
    c.diagnostics.acf_lag = 20;
    c.diagnostics.acf_table_lag = 50;
    c.prior.grid_points = 51;
    c.output.dir = out.string();
    c.output.thin = 5;
    return c;
}

ExperimentConfig parse(const std::string& text) {
    std::istringstream is(text);
    return load_config(is);
}

}  // namespace

TEST_CASE("preset values") {
    const auto gs = preset_config("gauss-strong");
    CHECK(gs.model.kind == ModelKind::gaussian);
    CHECK(gs.model.Delta == 14.0);
    CHECK(gs.model.K == 14);
    CHECK(gs.sampler.J == 14);
    CHECK(gs.prior.matern.sigma == 1.0);
    CHECK(gs.prior.matern.ell == 1.0);
    CHECK(gs.prior.matern.nu == 2.5);
    CHECK(gs.prior.grid_points == 201);
    CHECK(preset_config("gauss-weak").model.Delta == 1.0);

    const auto ode1 = preset_config("ode-1");
    CHECK(ode1.model.kind == ModelKind::ode);
    CHECK(ode1.prior.matern.ell == 1.0);
    CHECK(ode1.prior.matern.sigma == 1.0);
    CHECK(ode1.sampler.J == 14);
    CHECK(ode1.model.obs_count == 50);
    CHECK(ode1.model.noise_sd == 0.1);

    const auto ode2 = preset_config("ode-2-J10");
    CHECK(ode2.prior.matern.ell == 0.2);
    CHECK(ode2.sampler.J == 10);
    CHECK(preset_config("ode-2-J5").sampler.J == 5);
    CHECK(preset_config("ode-2-J20").sampler.J == 20);

    const auto robin = preset_config("robin");
    CHECK(robin.model.kind == ModelKind::heat);
    CHECK(robin.model.obs_count == 200);
    CHECK(robin.model.noise_sd == 0.1);
    CHECK(robin.diagnostics.acf_points == std::vector<double>{0.1, 0.5});

    CHECK(gs.sampler.samples == 50000);
    CHECK(gs.sampler.prerun == 5000);
    CHECK(gs.sampler.target_rate == 0.25);
}

TEST_CASE("preset table") {
    const auto& presets = list_presets();
    CHECK(presets.size() == 7);
    for (const auto& p : presets) {
        CHECK_FALSE(p.experiment.empty());
        CHECK_FALSE(p.settings.empty());
        CHECK_NOTHROW(preset_config(p.name));
    }
    CHECK(nearest_preset("gauss-strng") == "gauss-strong");
    CHECK(nearest_preset("robn") == "robin");
    try {
        preset_config("ode2-J10");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.key() == "preset");
        CHECK(std::string(e.what()).find("ode-2-J10") != std::string::npos);
    }
}

TEST_CASE("config parse errors carry line numbers") {
    try {
        parse("seed = 3\n\n[prior]\nsigma 1.0\n");
        FAIL("expected ConfigParseError");
    } catch (const ConfigParseError& e) {
        CHECK(e.line() == 4);
    }
    try {
        parse("[prior\n");
        FAIL("expected ConfigParseError");
    } catch (const ConfigParseError& e) {
        CHECK(e.line() == 1);
    }
    try {
        parse("[prior]\nsigma = 1\nsigma = 2\n");
        FAIL("expected ConfigParseError");
    } catch (const ConfigParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("config validation names the key") {
    auto key_of = [](const std::string& text) {
        try {
            parse(text);
        } catch (const ValidationError& e) {
            return e.key();
        }
        return std::string("<none>");
    };
    CHECK(key_of("[prior]\nsigmaa = 1\n") == "prior.sigmaa");
    CHECK(key_of("[priors]\nsigma = 1\n") == "[priors]");
    CHECK(key_of("[prior]\nsigma = -1\n") == "prior.sigma");
    CHECK(key_of("[prior]\nell = abc\n") == "prior.ell");
    CHECK(key_of("[sampler]\nsamples = 0\n") == "sampler.samples");
    CHECK(key_of("[sampler]\nmethods = pcn, hmc\n") == "sampler.methods");
    CHECK(key_of("[sampler]\nrho = 1.5\n") == "sampler.rho");
    CHECK(key_of("preset = robin\n[prior]\nsigma = 2\n") == "preset");
    CHECK(key_of("seed = 4\n") == "preset");
    CHECK(key_of("preset = robbin\n") == "preset");
    CHECK(key_of("[model]\nkind = heat\nobs_count = 7\n") == "model.nt");
}

TEST_CASE("preset files and explicit files") {
    const auto c = parse("# comment\npreset = ode-2-J20\nseed = 9\nlabel = mine\n");
    CHECK(c.prior.matern.ell == 0.2);
    CHECK(c.sampler.J == 20);
    CHECK(c.seed == 9);
    CHECK(c.label == "mine");

    const auto e = parse(
        "label = custom-ode\n[prior]\nell = 0.3\n[model]\nkind = ode\nobs_count = 20\n"
        "[sampler]\nmethods = pcn, hybrid\nrho = 0.99\n[diagnostics]\nacf_points = 0.25, 0.75\n");
    CHECK_FALSE(e.preset);
    CHECK(e.prior.matern.ell == 0.3);
    CHECK(e.model.kind == ModelKind::ode);
    CHECK(e.sampler.rho == 0.99);
    CHECK(e.sampler.methods.size() == 2);
    CHECK(e.diagnostics.acf_points == std::vector<double>{0.25, 0.75});
}

TEST_CASE("config text and json round trips") {
    for (const auto& p : list_presets()) {
        auto c = preset_config(p.name);
        c.seed = 77;
        c.sampler.beta = 0.3;
        c.sampler.R = 12.5;
        c.output.dir = "somewhere/else";
        std::ostringstream os;
        write_config(os, c);
        const auto back = parse(os.str());
        CHECK(to_document(back) == to_document(c));

        const auto j = config_to_json(c);
        const auto from_json = config_from_json(nlohmann::json::parse(j.dump()));
        CHECK(to_document(from_json) == to_document(c));
    }
}

TEST_CASE("overrides") {
    auto c = preset_config("ode-1");
    Overrides o;
    o.full_scale = true;
    o.seed = 5;
    o.grid_points = 401;
    o.out = "x";
    apply_overrides(c, o);
    CHECK(c.sampler.samples == 500000);
    CHECK(c.sampler.prerun == 50000);
    CHECK(c.seed == 5);
    CHECK(c.prior.grid_points == 401);
    CHECK(c.output_dir() == fs::path("x"));
    Overrides s;
    s.samples = 1234;
    apply_overrides(c, s);
    CHECK(c.sampler.samples == 1234);
    CHECK(preset_config("robin").output_dir() == fs::path("runs") / "robin");
}

TEST_CASE("experiment writes the documented artifacts") {
    const auto dir = scratch("gauss");
    const auto result = run_experiment(small("gauss-weak", dir));
    for (const char* f : {"chain_pcn.csv", "chain_hybrid.csv", "chain_diagonal.csv", "diag_pcn.csv",
                          "diag_hybrid.csv", "diag_diagonal.csv", "acf_pcn.csv", "summary.json"}) {
        CHECK(fs::exists(dir / f));
    }
    CHECK_FALSE(fs::exists(dir / "data.csv"));
    CHECK(result.samplers.size() == 3);
    CHECK(result.outcome(SamplerKind::hybrid).J == 14);
    CHECK(result.outcome(SamplerKind::pcn).measured_states == 1500);
    CHECK(result.outcome(SamplerKind::hybrid).measured_states == 1500);

    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary["seed"] == 1);
    for (const char* s : {"pcn", "hybrid", "diagonal"}) {
        CHECK(summary["samplers"].contains(s));
        CHECK(summary["samplers"][s].contains("beta"));
        CHECK(summary["samplers"][s].contains("acceptance_rate"));
        CHECK(summary["samplers"][s]["ess_per_100"].contains("median"));
        CHECK(summary["samplers"][s].contains("wall_seconds"));
    }
    CHECK(summary["samplers"]["hybrid"]["J"] == 14);
    CHECK(summary.contains("estimators"));
}

TEST_CASE("data experiments write truth and data, and the summary reruns exactly") {
    const auto dir = scratch("ode");
    auto c = small("ode-2-J5", dir);
    RunOptions opts;
    opts.write_basis = true;
    run_experiment(c, opts);
    CHECK(fs::exists(dir / "data.csv"));
    CHECK(fs::exists(dir / "truth.csv"));
    CHECK(fs::exists(dir / "basis.csv"));
    CHECK_FALSE(fs::exists(dir / "chain_diagonal.csv"));

    const auto rerun = load_config(dir / "summary.json");
    CHECK(to_document(rerun) == to_document(c));
    const auto dir2 = scratch("ode_rerun");
    auto c2 = rerun;
    c2.output.dir = dir2.string();
    run_experiment(c2);
    for (const char* f : {"chain_pcn.csv", "chain_hybrid.csv", "diag_pcn.csv", "diag_hybrid.csv",
                          "acf_hybrid.csv", "data.csv", "truth.csv"}) {
        CHECK(slurp(dir / f) == slurp(dir2 / f));
    }
}

TEST_CASE("concurrent samplers produce the same artifacts") {
    const auto a = scratch("serial");
    const auto b = scratch("parallel");
    run_experiment(small("robin", a));
    RunOptions opts;
    opts.jobs = 3;
    run_experiment(small("robin", b), opts);
    for (const char* s : {"pcn", "hybrid", "diagonal"}) {
        const std::string name(s);
        CHECK(slurp(a / ("chain_" + name + ".csv")) == slurp(b / ("chain_" + name + ".csv")));
        CHECK(slurp(a / ("diag_" + name + ".csv")) == slurp(b / ("diag_" + name + ".csv")));
    }
}

TEST_CASE("diagnose an existing chain") {
    const auto dir = scratch("diagnose");
    run_experiment(small("gauss-strong", dir));
    std::ifstream chain(dir / "chain_pcn.csv");
    std::ostringstream out;
    diagnose_chain(chain, out, 5, 10);
    std::istringstream rows(out.str());
    std::string line;
    std::getline(rows, line);
    CHECK(line == "x,acf_lag5,ess_per_100,mean,variance");
    int count = 0;
    while (std::getline(rows, line)) ++count;
    CHECK(count == 51);
}
