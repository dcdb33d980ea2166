#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "hpcn/error.hpp"
#include "hpcn/harness.hpp"

namespace hpcn {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v)) {
        throw ValidationError(key, "expected a number, got '" + text + "'");
    }
    return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size()) {
        throw ValidationError(key, "expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "no" || text == "0") return false;
    throw ValidationError(key, "expected true or false, got '" + text + "'");
}

ModelKind parse_model(const std::string& key, const std::string& text) {
    if (text == "gaussian") return ModelKind::gaussian;
    if (text == "ode") return ModelKind::ode;
    if (text == "heat") return ModelKind::heat;
    throw ValidationError(key, "unknown model '" + text + "' (gaussian, ode, heat)");
}

SamplerKind parse_sampler(const std::string& key, const std::string& text) {
    if (text == "pcn") return SamplerKind::pcn;
    if (text == "hybrid") return SamplerKind::hybrid;
    if (text == "diagonal") return SamplerKind::diagonal;
    throw ValidationError(key, "unknown sampler '" + text + "' (pcn, hybrid, diagonal)");
}

CoefficientScaling parse_scaling(const std::string& key, const std::string& text) {
    if (text == "grid") return CoefficientScaling::grid;
    if (text == "quadrature") return CoefficientScaling::quadrature;
    throw ValidationError(key, "unknown coefficient scaling '" + text + "' (grid, quadrature)");
}

std::string scaling_name(CoefficientScaling s) {
    return s == CoefficientScaling::grid ? "grid" : "quadrature";
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string&)>;

template <class T>
Setter size_setter(T ExperimentConfig::*block, std::size_t T::*field) {
    return [=](ExperimentConfig& c, const std::string& k, const std::string& v) {
        (c.*block).*field = static_cast<std::size_t>(parse_uint(k, v));
    };
}

template <class T>
Setter double_setter(T ExperimentConfig::*block, double T::*field) {
    return [=](ExperimentConfig& c, const std::string& k, const std::string& v) {
        (c.*block).*field = parse_double(k, v);
    };
}

const std::map<std::string, std::map<std::string, Setter>>& schema() {
    static const std::map<std::string, std::map<std::string, Setter>> table = {
        {"",
         {{"label", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.label = v; }},
          {"seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.seed = parse_uint(k, v);
           }},
          {"preset", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.preset = v; }}}},
        {"prior",
         {{"sigma", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.prior.matern.sigma = parse_double(k, v);
           }},
          {"ell", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.prior.matern.ell = parse_double(k, v);
           }},
          {"nu", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.prior.matern.nu = parse_double(k, v);
           }},
          {"grid_points", size_setter(&ExperimentConfig::prior, &PriorBlock::grid_points)},
          {"length", double_setter(&ExperimentConfig::prior, &PriorBlock::length)}}},
        {"model",
         {{"kind", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.model.kind = parse_model(k, v);
           }},
          {"K", size_setter(&ExperimentConfig::model, &ModelBlock::K)},
          {"Delta", double_setter(&ExperimentConfig::model, &ModelBlock::Delta)},
          {"coefficients", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.model.scaling = parse_scaling(k, v);
           }},
          {"noise_sd", double_setter(&ExperimentConfig::model, &ModelBlock::noise_sd)},
          {"obs_count", size_setter(&ExperimentConfig::model, &ModelBlock::obs_count)},
          {"x0", double_setter(&ExperimentConfig::model, &ModelBlock::x0)},
          {"nx", size_setter(&ExperimentConfig::model, &ModelBlock::nx)},
          {"nt", size_setter(&ExperimentConfig::model, &ModelBlock::nt)},
          {"halved_misfit", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.model.halved_misfit = parse_bool(k, v);
           }},
          {"truth_grid_points", size_setter(&ExperimentConfig::model, &ModelBlock::truth_grid_points)}}},
        {"sampler",
         {{"methods", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.sampler.methods.clear();
               for (const auto& item : split_list(v)) c.sampler.methods.push_back(parse_sampler(k, item));
           }},
          {"J", size_setter(&ExperimentConfig::sampler, &SamplerBlock::J)},
          {"rho", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.sampler.rho = parse_double(k, v);
           }},
          {"beta", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.sampler.beta = parse_double(k, v);
           }},
          {"target_rate", double_setter(&ExperimentConfig::sampler, &SamplerBlock::target_rate)},
          {"samples", size_setter(&ExperimentConfig::sampler, &SamplerBlock::samples)},
          {"prerun", size_setter(&ExperimentConfig::sampler, &SamplerBlock::prerun)},
          {"delta_reg", double_setter(&ExperimentConfig::sampler, &SamplerBlock::delta_reg)},
          {"R", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.sampler.R = parse_double(k, v);
           }},
          {"snapshot_stride", size_setter(&ExperimentConfig::sampler, &SamplerBlock::snapshot_stride)},
          {"tune_batches", size_setter(&ExperimentConfig::sampler, &SamplerBlock::tune_batches)},
          {"tune_batch_size", size_setter(&ExperimentConfig::sampler, &SamplerBlock::tune_batch_size)}}},
        {"diagnostics",
         {{"acf_lag", size_setter(&ExperimentConfig::diagnostics, &DiagnosticsBlock::acf_lag)},
          {"acf_points", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
               c.diagnostics.acf_points.clear();
               for (const auto& item : split_list(v)) c.diagnostics.acf_points.push_back(parse_double(k, item));
           }},
          {"acf_table_lag", size_setter(&ExperimentConfig::diagnostics, &DiagnosticsBlock::acf_table_lag)}}},
        {"output",
         {{"dir", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output.dir = v; }},
          {"thin", size_setter(&ExperimentConfig::output, &OutputBlock::thin)}}},
    };
    return table;
}

std::string qualified(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

}  // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::gaussian: return "gaussian";
        case ModelKind::ode: return "ode";
        case ModelKind::heat: return "heat";
    }
    return "?";
}

std::string to_string(SamplerKind kind) {
    switch (kind) {
        case SamplerKind::pcn: return "pcn";
        case SamplerKind::hybrid: return "hybrid";
        case SamplerKind::diagonal: return "diagonal";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    auto require = [](bool ok, const std::string& key, const std::string& what) {
        if (!ok) throw ValidationError(key, what);
    };
    require(prior.matern.sigma > 0.0, "prior.sigma", "must be positive");
    require(prior.matern.ell > 0.0, "prior.ell", "must be positive");
    require(prior.matern.nu > 0.0, "prior.nu", "must be positive");
    require(prior.grid_points >= 2, "prior.grid_points", "must be at least 2");
    require(prior.length > 0.0, "prior.length", "must be positive");

    if (model.kind == ModelKind::gaussian) {
        require(model.K >= 1 && model.K <= prior.grid_points, "model.K", "must lie in [1, grid_points]");
        require(model.Delta > 0.0, "model.Delta", "must be positive");
    } else {
        require(model.noise_sd > 0.0, "model.noise_sd", "must be positive");
        require(model.obs_count >= 1, "model.obs_count", "must be positive");
        require(model.truth_grid_points >= 2, "model.truth_grid_points", "must be at least 2");
    }
    if (model.kind == ModelKind::heat) {
        require(model.nx >= 2, "model.nx", "must be at least 2");
        require(model.nt >= 2, "model.nt", "must be at least 2");
        require(model.nt % model.obs_count == 0, "model.nt", "must be a multiple of model.obs_count");
    }

    require(!sampler.methods.empty(), "sampler.methods", "needs at least one sampler");
    require(sampler.J >= 1 && sampler.J <= prior.grid_points, "sampler.J", "must lie in [1, grid_points]");
    if (sampler.rho) require(*sampler.rho > 0.0 && *sampler.rho < 1.0, "sampler.rho", "must lie in (0, 1)");
    if (sampler.beta) require(*sampler.beta >= 0.0 && *sampler.beta <= 1.0, "sampler.beta", "must lie in [0, 1]");
    require(sampler.target_rate > 0.0 && sampler.target_rate < 1.0, "sampler.target_rate", "must lie in (0, 1)");
    require(sampler.samples >= 1, "sampler.samples", "must be positive");
    require(sampler.prerun >= 2, "sampler.prerun", "must be at least 2");
    require(sampler.delta_reg >= 0.0, "sampler.delta_reg", "must be non-negative");
    if (sampler.R) require(*sampler.R > 0.0, "sampler.R", "must be positive");
    require(sampler.snapshot_stride >= 1, "sampler.snapshot_stride", "must be positive");
    require(sampler.tune_batch_size >= 1, "sampler.tune_batch_size", "must be positive");

    require(diagnostics.acf_lag < sampler.samples, "diagnostics.acf_lag", "must be below sampler.samples");
    for (double t : diagnostics.acf_points) {
        require(t >= 0.0 && t <= prior.length, "diagnostics.acf_points", "must lie in [0, length]");
    }
    require(output.thin >= 1, "output.thin", "must be positive");
}

std::filesystem::path ExperimentConfig::output_dir() const {
    return output.dir.empty() ? std::filesystem::path("runs") / label : std::filesystem::path(output.dir);
}

KeyValueDocument parse_key_values(std::istream& is) {
    KeyValueDocument doc;
    std::string section;
    doc[section];
    std::set<std::string> seen;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) throw ConfigParseError(lineno, "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (doc.count(section) && section != "") {
                throw ConfigParseError(lineno, "section [" + section + "] repeated");
            }
            doc[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigParseError(lineno, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigParseError(lineno, "missing key");
        if (!seen.insert(qualified(section, key)).second) {
            throw ConfigParseError(lineno, "key '" + qualified(section, key) + "' repeated");
        }
        doc[section].emplace_back(key, value);
    }
    return doc;
}

ExperimentConfig config_from_document(const KeyValueDocument& doc) {
    const auto& table = schema();
    bool has_preset = false;
    bool has_sections = false;
    for (const auto& [section, entries] : doc) {
        if (!section.empty()) has_sections = true;
        if (!table.count(section)) throw ValidationError("[" + section + "]", "unknown section");
        for (const auto& [key, value] : entries) {
            if (section.empty() && key == "preset") has_preset = true;
            if (!table.at(section).count(key)) {
                throw ValidationError(qualified(section, key), "unknown key");
            }
        }
    }
    if (has_preset && has_sections) {
        throw ValidationError("preset", "a config names either a preset or explicit sections, not both");
    }
    if (!has_preset && !has_sections) {
        throw ValidationError("preset", "config needs a preset or explicit sections");
    }

    ExperimentConfig config;
    if (has_preset) {
        for (const auto& [key, value] : doc.at("")) {
            if (key == "preset") config = preset_config(value);
        }
    }
    for (const auto& [section, entries] : doc) {
        for (const auto& [key, value] : entries) {
            if (section.empty() && key == "preset") continue;
            table.at(section).at(key)(config, qualified(section, key), value);
        }
    }
    if (!has_preset) config.preset.reset();
    config.validate();
    return config;
}

KeyValueDocument to_document(const ExperimentConfig& c) {
    KeyValueDocument doc;
    auto put = [&](const std::string& section, const std::string& key, std::string value) {
        doc[section].emplace_back(key, std::move(value));
    };
    auto num = [](auto v) {
        if constexpr (std::is_floating_point_v<decltype(v)>) {
            return format_double(v);
        } else {
            return std::to_string(v);
        }
    };
    put("", "label", c.label);
    put("", "seed", num(c.seed));

    put("prior", "sigma", num(c.prior.matern.sigma));
    put("prior", "ell", num(c.prior.matern.ell));
    put("prior", "nu", num(c.prior.matern.nu));
    put("prior", "grid_points", num(c.prior.grid_points));
    put("prior", "length", num(c.prior.length));

    put("model", "kind", to_string(c.model.kind));
    if (c.model.kind == ModelKind::gaussian) {
        put("model", "K", num(c.model.K));
        put("model", "Delta", num(c.model.Delta));
        put("model", "coefficients", scaling_name(c.model.scaling));
    } else {
        put("model", "noise_sd", num(c.model.noise_sd));
        put("model", "obs_count", num(c.model.obs_count));
        put("model", "halved_misfit", c.model.halved_misfit ? "true" : "false");
        put("model", "truth_grid_points", num(c.model.truth_grid_points));
        if (c.model.kind == ModelKind::ode) put("model", "x0", num(c.model.x0));
        if (c.model.kind == ModelKind::heat) {
            put("model", "nx", num(c.model.nx));
            put("model", "nt", num(c.model.nt));
        }
    }

    std::string methods;
    for (auto m : c.sampler.methods) methods += (methods.empty() ? "" : ", ") + to_string(m);
    put("sampler", "methods", methods);
    if (c.sampler.rho) {
        put("sampler", "rho", num(*c.sampler.rho));
    } else {
        put("sampler", "J", num(c.sampler.J));
    }
    if (c.sampler.beta) put("sampler", "beta", num(*c.sampler.beta));
    put("sampler", "target_rate", num(c.sampler.target_rate));
    put("sampler", "samples", num(c.sampler.samples));
    put("sampler", "prerun", num(c.sampler.prerun));
    put("sampler", "delta_reg", num(c.sampler.delta_reg));
    if (c.sampler.R) put("sampler", "R", num(*c.sampler.R));
    put("sampler", "snapshot_stride", num(c.sampler.snapshot_stride));
    put("sampler", "tune_batches", num(c.sampler.tune_batches));
    put("sampler", "tune_batch_size", num(c.sampler.tune_batch_size));

    put("diagnostics", "acf_lag", num(c.diagnostics.acf_lag));
    std::string points;
    for (double t : c.diagnostics.acf_points) points += (points.empty() ? "" : ", ") + format_double(t);
    put("diagnostics", "acf_points", points);
    put("diagnostics", "acf_table_lag", num(c.diagnostics.acf_table_lag));

    put("output", "dir", c.output.dir);
    put("output", "thin", num(c.output.thin));
    return doc;
}

void write_config(std::ostream& os, const ExperimentConfig& config) {
    const auto doc = to_document(config);
    static const char* order[] = {"", "prior", "model", "sampler", "diagnostics", "output"};
    for (const char* section : order) {
        const auto it = doc.find(section);
        if (it == doc.end()) continue;
        if (*section) os << "\n[" << section << "]\n";
        for (const auto& [key, value] : it->second) os << key << " = " << value << '\n';
    }
}

ExperimentConfig load_config(std::istream& is) { return config_from_document(parse_key_values(is)); }

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot read config '" + path.string() + "'");
    if (path.extension() == ".json") {
        nlohmann::json j;
        try {
            is >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigParseError(0, e.what());
        }
        return config_from_json(j.contains("config") ? j.at("config") : j);
    }
    return load_config(is);
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [section, entries] : to_document(config)) {
        nlohmann::json block = nlohmann::json::object();
        for (const auto& [key, value] : entries) block[key] = value;
        if (section.empty()) {
            for (auto& [k, v] : block.items()) out[k] = v;
        } else {
            out[section] = block;
        }
    }
    return out;
}

ExperimentConfig config_from_json(const nlohmann::json& echo) {
    KeyValueDocument doc;
    doc[""];
    for (const auto& [key, value] : echo.items()) {
        if (value.is_object()) {
            auto& entries = doc[key];
            for (const auto& [k, v] : value.items()) {
                entries.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
            }
        } else {
            doc[""].emplace_back(key, value.is_string() ? value.get<std::string>() : value.dump());
        }
    }
    return config_from_document(doc);
}

// ---------------------------------------------------------------------------

const std::vector<PresetInfo>& list_presets() {
    static const std::vector<PresetInfo> presets = {
        {"gauss-weak", "Gaussian example, weakly coupled modes (Delta = 1)",
         "Matern(1, 1, 5/2); K = 14; J = 14; pcn, hybrid, diagonal"},
        {"gauss-strong", "Gaussian example, strongly coupled modes (Delta = 14)",
         "Matern(1, 1, 5/2); K = 14; J = 14; pcn, hybrid, diagonal"},
        {"ode-1", "ODE decay coefficient, smooth prior",
         "Matern(1, 1, 5/2); obs every T/50, noise 0.1; J = 14; pcn, hybrid, diagonal"},
        {"ode-2-J5", "ODE decay coefficient, rough prior, adapted dimension study",
         "Matern(1, 0.2, 5/2); obs every T/50, noise 0.1; J = 5; pcn, hybrid"},
        {"ode-2-J10", "ODE decay coefficient, rough prior, adapted dimension study",
         "Matern(1, 0.2, 5/2); obs every T/50, noise 0.1; J = 10; pcn, hybrid"},
        {"ode-2-J20", "ODE decay coefficient, rough prior, adapted dimension study",
         "Matern(1, 0.2, 5/2); obs every T/50, noise 0.1; J = 20; pcn, hybrid"},
        {"robin", "Heat equation Robin coefficient from a sensor at x = 0",
         "Matern(1, 1, 5/2); obs every T/200, noise 0.1; nx = 100, nt = 200; J = 14; "
         "pcn, hybrid, diagonal"},
    };
    return presets;
}

std::string nearest_preset(const std::string& name) {
    const auto& presets = list_presets();
    const PresetInfo* best = &presets.front();
    std::size_t best_distance = edit_distance(name, best->name);
    for (const auto& p : presets) {
        const std::size_t d = edit_distance(name, p.name);
        if (d < best_distance) {
            best = &p;
            best_distance = d;
        }
    }
    return best->name;
}

ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig c;
    c.label = name;
    c.preset = name;
    c.prior.matern = {1.0, 1.0, 2.5};
    c.sampler.J = 14;

    if (name == "gauss-weak" || name == "gauss-strong") {
        c.model.kind = ModelKind::gaussian;
        c.model.K = 14;
        c.model.Delta = name == "gauss-weak" ? 1.0 : 14.0;
        c.model.scaling = CoefficientScaling::grid;
        c.diagnostics.acf_points = {0.4, 0.8};
    } else if (name == "ode-1") {
        c.model.kind = ModelKind::ode;
        c.model.obs_count = 50;
        c.diagnostics.acf_points = {0.4, 0.8};
    } else if (name == "ode-2-J5" || name == "ode-2-J10" || name == "ode-2-J20") {
        c.model.kind = ModelKind::ode;
        c.model.obs_count = 50;
        c.prior.matern.ell = 0.2;
        c.sampler.J = name == "ode-2-J5" ? 5 : name == "ode-2-J10" ? 10 : 20;
        c.sampler.methods = {SamplerKind::pcn, SamplerKind::hybrid};
        c.diagnostics.acf_points = {0.4, 0.8};
    } else if (name == "robin") {
        c.model.kind = ModelKind::heat;
        c.model.obs_count = 200;
        c.model.nx = 100;
        c.model.nt = 200;
        c.diagnostics.acf_points = {0.1, 0.5};
    } else {
        throw ValidationError("preset", "unknown preset '" + name + "'; did you mean '" +
                                            nearest_preset(name) + "'?");
    }
    c.validate();
    return c;
}

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
    if (o.full_scale) {
        config.sampler.samples = 500000;
        config.sampler.prerun = 50000;
    }
    if (o.seed) config.seed = *o.seed;
    if (o.samples) config.sampler.samples = *o.samples;
    if (o.prerun) config.sampler.prerun = *o.prerun;
    if (o.grid_points) config.prior.grid_points = *o.grid_points;
    if (o.out) config.output.dir = *o.out;
    config.validate();
}

}  // namespace hpcn
