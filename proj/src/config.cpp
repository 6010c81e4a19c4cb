#include "fbt/config.hpp"

#include "fbt/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fbt {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Shortest text that parses back to the same double.
std::string exact(Real v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// Flattens nested maps into dotted keys; sequences stay as leaves.
void flatten(const YAML::Node& node, const std::string& prefix, std::map<std::string, YAML::Node>& out) {
    if (node.IsMap()) {
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            flatten(kv.second, prefix.empty() ? key : prefix + "." + key, out);
        }
        return;
    }
    if (prefix.empty()) throw ConfigError("<root>", "configuration must be a mapping");
    if (out.count(prefix)) throw ConfigError(prefix, "key given twice");
    out[prefix] = node;
}

template <class T>
T scalar(const std::string& key, const YAML::Node& n) {
    if (!n.IsScalar()) throw ConfigError(key, "expected a scalar value");
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(key, "cannot interpret '" + n.Scalar() + "'");
    }
}

std::vector<Real> real_list(const std::string& key, const YAML::Node& n) {
    if (n.IsNull()) return {};
    if (!n.IsSequence()) throw ConfigError(key, "expected a list of numbers");
    std::vector<Real> v;
    for (const auto& item : n) v.push_back(scalar<Real>(key, item));
    return v;
}

template <class F>
auto wrap(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(key, e.what());
    }
}

SweepVariable parse_sweep(const std::string& key, const std::string& text) {
    const auto s = lower(text);
    if (s == "none" || s.empty()) return SweepVariable::None;
    if (s == "x") return SweepVariable::X;
    if (s == "y") return SweepVariable::Y;
    if (s == "alpha") return SweepVariable::Alpha;
    if (s == "e" || s == "energy") return SweepVariable::Energy;
    throw ConfigError(key, "unknown sweep variable '" + text + "' (x, y, alpha, E)");
}

RunConfig from_map(const std::map<std::string, YAML::Node>& m) {
    const auto& known = RunConfig::keys();
    for (const auto& [k, v] : m)
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError(k, "unknown key");
    if (m.count("disorder.x") && m.count("disorder.y"))
        throw ConfigError("disorder.y", "give disorder.x or disorder.y, not both");

    RunConfig c;
    auto has = [&](const char* k) { return m.count(k) > 0; };
    auto get = [&](const char* k) { return m.at(k); };

    if (has("lattice.kind"))
        c.lattice.kind = wrap("lattice.kind", [&] { return parse_lattice_kind(scalar<std::string>("lattice.kind", get("lattice.kind"))); });
    if (c.lattice.kind == LatticeKind::Stub) c.lattice.alpha = 1.0;
    if (has("lattice.n_cells")) c.lattice.n_cells = scalar<int>("lattice.n_cells", get("lattice.n_cells"));
    if (has("lattice.t")) c.lattice.t = scalar<Real>("lattice.t", get("lattice.t"));
    if (has("lattice.alpha")) c.lattice.alpha = scalar<Real>("lattice.alpha", get("lattice.alpha"));
    if (has("lattice.phi")) c.lattice.phi = scalar<Real>("lattice.phi", get("lattice.phi"));

    if (has("disorder.x")) c.x = scalar<Real>("disorder.x", get("disorder.x"));
    if (has("disorder.y")) c.x = 1.0 - scalar<Real>("disorder.y", get("disorder.y"));
    if (has("disorder.mode"))
        c.mode = wrap("disorder.mode", [&] { return parse_disorder_mode(scalar<std::string>("disorder.mode", get("disorder.mode"))); });

    if (has("ensemble.n_configs")) c.n_configs = scalar<int>("ensemble.n_configs", get("ensemble.n_configs"));
    if (has("ensemble.master_seed"))
        c.master_seed = scalar<std::uint64_t>("ensemble.master_seed", get("ensemble.master_seed"));
    if (has("ensemble.method"))
        c.method = wrap("ensemble.method", [&] { return parse_method(scalar<std::string>("ensemble.method", get("ensemble.method"))); });

    if (has("cpgf.eta")) c.cpgf.eta = scalar<Real>("cpgf.eta", get("cpgf.eta"));
    if (has("cpgf.moments")) {
        const auto text = scalar<std::string>("cpgf.moments", get("cpgf.moments"));
        if (lower(text) != "auto") c.cpgf.moments = scalar<int>("cpgf.moments", get("cpgf.moments"));
    }
    if (has("cpgf.random_vectors"))
        c.cpgf.random_vectors = scalar<int>("cpgf.random_vectors", get("cpgf.random_vectors"));
    if (has("cpgf.margin")) c.cpgf.margin = scalar<Real>("cpgf.margin", get("cpgf.margin"));
    if (has("cpgf.exact_trace")) c.cpgf.exact_trace = scalar<bool>("cpgf.exact_trace", get("cpgf.exact_trace"));
    if (has("cpgf.eta_protocol")) c.eta_protocol = scalar<bool>("cpgf.eta_protocol", get("cpgf.eta_protocol"));

    if (has("sweep.variable"))
        c.sweep = parse_sweep("sweep.variable", scalar<std::string>("sweep.variable", get("sweep.variable")));
    if (has("sweep.values")) {
        c.sweep_values = real_list("sweep.values", get("sweep.values"));
        if (c.sweep == SweepVariable::None && !c.sweep_values.empty()) throw ConfigError("sweep.variable", "sweep.values given without a variable");
    }
    if (c.sweep != SweepVariable::None && c.sweep_values.empty())
        throw ConfigError("sweep.values", "sweep needs at least one value");

    if (has("energy.min")) c.energy_min = scalar<Real>("energy.min", get("energy.min"));
    if (has("energy.max")) c.energy_max = scalar<Real>("energy.max", get("energy.max"));
    if (has("energy.points")) c.energy_points = scalar<int>("energy.points", get("energy.points"));
    if (has("energy.window")) c.window = scalar<Real>("energy.window", get("energy.window"));

    if (has("output.path")) c.output_path = scalar<std::string>("output.path", get("output.path"));
    if (has("output.format")) {
        const auto f = lower(scalar<std::string>("output.format", get("output.format")));
        if (f == "csv") c.format = OutputFormat::CSV;
        else if (f == "json") c.format = OutputFormat::JSON;
        else throw ConfigError("output.format", "expected csv or json");
    }
    if (has("output.verbosity")) c.verbosity = scalar<int>("output.verbosity", get("output.verbosity"));

    c.validate();
    return c;
}

}  // namespace

std::string to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::None: return "none";
        case SweepVariable::X: return "x";
        case SweepVariable::Y: return "y";
        case SweepVariable::Alpha: return "alpha";
        case SweepVariable::Energy: return "E";
    }
    return "none";
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k{
        "lattice.kind",       "lattice.n_cells",   "lattice.t",          "lattice.alpha",
        "lattice.phi",        "disorder.x",        "disorder.y",         "disorder.mode",
        "ensemble.n_configs", "ensemble.master_seed", "ensemble.method", "cpgf.eta",
        "cpgf.moments",       "cpgf.random_vectors", "cpgf.margin",      "cpgf.exact_trace",
        "cpgf.eta_protocol",  "sweep.variable",    "sweep.values",       "energy.min",
        "energy.max",         "energy.points",     "energy.window",      "output.path",
        "output.format",      "output.verbosity"};
    return k;
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_pairs() const {
    std::vector<std::pair<std::string, std::string>> p;
    p.emplace_back("lattice.kind", lower(to_string(lattice.kind)));
    p.emplace_back("lattice.n_cells", std::to_string(lattice.n_cells));
    p.emplace_back("lattice.t", exact(lattice.t));
    p.emplace_back("lattice.alpha", exact(lattice.alpha));
    p.emplace_back("lattice.phi", exact(lattice.phi));
    p.emplace_back("disorder.x", exact(x));
    p.emplace_back("disorder.mode", lower(to_string(mode)));
    p.emplace_back("ensemble.n_configs", std::to_string(n_configs));
    p.emplace_back("ensemble.master_seed", std::to_string(master_seed));
    p.emplace_back("ensemble.method", lower(to_string(method)));
    p.emplace_back("cpgf.eta", exact(cpgf.eta));
    p.emplace_back("cpgf.moments", cpgf.moments ? std::to_string(*cpgf.moments) : "auto");
    p.emplace_back("cpgf.random_vectors", std::to_string(cpgf.random_vectors));
    p.emplace_back("cpgf.margin", exact(cpgf.margin));
    p.emplace_back("cpgf.exact_trace", cpgf.exact_trace ? "true" : "false");
    p.emplace_back("cpgf.eta_protocol", eta_protocol ? "true" : "false");
    p.emplace_back("sweep.variable", to_string(sweep));
    std::string vals = "[";
    for (std::size_t i = 0; i < sweep_values.size(); ++i) vals += (i ? ", " : "") + exact(sweep_values[i]);
    p.emplace_back("sweep.values", vals + "]");
    p.emplace_back("energy.min", exact(energy_min));
    p.emplace_back("energy.max", exact(energy_max));
    p.emplace_back("energy.points", std::to_string(energy_points));
    p.emplace_back("energy.window", exact(window));
    return p;
}

void RunConfig::validate() const {
    wrap("lattice.n_cells", [&] {
        LatticeSpec l = lattice;
        if (l.n_cells < 3) throw DomainError("n_cells must be >= 3");
        if (!(l.t > 0)) throw ConfigError("lattice.t", "t must be > 0");
        if (l.kind == LatticeKind::Sawtooth && std::abs(l.alpha - LatticeSpec::kSqrt2) > 1e-12)
            throw ConfigError("lattice.alpha", "the sawtooth flat band needs alpha = sqrt(2)");
        if (l.kind == LatticeKind::Stub && sweep != SweepVariable::Alpha && l.alpha == 0.0)
            throw ConfigError("lattice.alpha", "alpha = 0 decouples the stubs (see the x = 1 chain limit)");
        return 0;
    });
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("disorder.x", "x must lie in [0, 1]");
    if (n_configs < 1) throw ConfigError("ensemble.n_configs", "must be >= 1");
    if (!(cpgf.eta > 0)) throw ConfigError("cpgf.eta", "eta must be > 0");
    if (cpgf.moments && *cpgf.moments < 2) throw ConfigError("cpgf.moments", "must be >= 2 or auto");
    if (cpgf.random_vectors < 1) throw ConfigError("cpgf.random_vectors", "must be >= 1");
    if (!(cpgf.margin > 0 && cpgf.margin < 0.5)) throw ConfigError("cpgf.margin", "must lie in (0, 0.5)");
    wrap("cpgf", [&] {
        cpgf.validate();
        return 0;
    });
    for (Real v : sweep_values) {
        switch (sweep) {
            case SweepVariable::X:
                if (!(v >= 0 && v <= 1)) throw ConfigError("sweep.values", "x values must lie in [0, 1]");
                break;
            case SweepVariable::Y:
                if (!(v >= 0 && v <= 1)) throw ConfigError("sweep.values", "y values must lie in [0, 1]");
                break;
            case SweepVariable::Alpha:
                if (lattice.kind != LatticeKind::Stub)
                    throw ConfigError("sweep.variable", "alpha sweeps need the stub lattice");
                if (!std::isfinite(v)) throw ConfigError("sweep.values", "alpha values must be finite");
                break;
            case SweepVariable::Energy:
                if (!std::isfinite(v)) throw ConfigError("sweep.values", "energies must be finite");
                break;
            case SweepVariable::None: break;
        }
    }
    if (!(energy_max > energy_min)) throw ConfigError("energy.max", "must exceed energy.min");
    if (energy_points < 2) throw ConfigError("energy.points", "must be >= 2");
    if (!(window > 0)) throw ConfigError("energy.window", "must be > 0");
    if (verbosity < 0) throw ConfigError("output.verbosity", "must be >= 0");
}

EnsembleSpec RunConfig::ensemble() const {
    EnsembleSpec s;
    s.lattice = lattice;
    s.mode = mode;
    s.n_configs = n_configs;
    s.master_seed = master_seed;
    s.method = method;
    s.cpgf = cpgf;
    s.eta_protocol = eta_protocol;
    s.window = window;
    s.x_grid = {x};
    if (sweep == SweepVariable::X) s.x_grid = sweep_values;
    if (sweep == SweepVariable::Y) {
        s.x_grid.clear();
        for (Real y : sweep_values) s.x_grid.push_back(1.0 - y);
    }
    if (sweep == SweepVariable::Alpha) s.alpha_grid = sweep_values;
    s.energies = energy_grid();
    return s;
}

std::vector<Real> RunConfig::energy_grid() const {
    std::vector<Real> e(static_cast<std::size_t>(energy_points));
    for (int i = 0; i < energy_points; ++i)
        e[static_cast<std::size_t>(i)] = energy_min + (energy_max - energy_min) * i / (energy_points - 1);
    return e;
}

RunConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("<file>", std::string("YAML syntax: ") + e.what());
    }
    std::map<std::string, YAML::Node> m;
    if (!root.IsNull()) flatten(root, "", m);
    return from_map(m);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

RunConfig config_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
    const auto& known = RunConfig::keys();
    std::string text;
    for (const auto& [k, v] : pairs)
        if (std::find(known.begin(), known.end(), k) != known.end()) text += k + ": " + v + "\n";
    return parse_config(text);
}

}  // namespace fbt
