#include "fbt/commands.hpp"

#include "fbt/analytic.hpp"
#include "fbt/errors.hpp"
#include "fbt/exactdiag.hpp"
#include "fbt/flatband.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>

#ifndef FBT_VERSION
#define FBT_VERSION "unknown"
#endif

namespace fbt {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

// FNV-1a over the canonical config: equal configs share a run id.
std::string make_run_id(Command cmd, const RunConfig& c) {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    };
    feed(to_string(cmd));
    for (const auto& [k, v] : c.to_pairs()) feed(k + "=" + v);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Context {
    Command cmd;
    const RunConfig& cfg;
    std::ostream* log;
    ResultTable table;
    std::string run_id;

    ResultRow row(const GridPoint& p, const std::string& observable, Real value) const {
        ResultRow r;
        r.run_id = run_id;
        r.lattice = lower(to_string(cfg.lattice.kind));
        r.n_cells = cfg.lattice.n_cells;
        r.x = p.x;
        r.alpha = p.alpha;
        r.eta = cfg.cpgf.eta;
        r.seed = cfg.master_seed;
        r.observable = observable;
        r.value = value;
        return r;
    }

    // Numeric row: CPGF bookkeeping and the ensemble standard error.
    ResultRow numeric(const GridResult& g, const std::string& observable, const Statistic& s) const {
        ResultRow r = row(g.point, observable, s.mean);
        if (cfg.method == Method::CPGF) {
            if (g.moments > 0) r.moments = g.moments;
            if (!cfg.cpgf.exact_trace) r.rvecs = cfg.cpgf.random_vectors;
        }
        if (s.n > 1) r.stderr = s.stderr;
        return r;
    }

    void note(const std::string& msg) const {
        if (log && cfg.verbosity > 0) *log << "[" << to_string(cmd) << "] " << msg << "\n";
    }

    void record(const std::vector<GridResult>& results) {
        for (std::size_t g = 0; g < results.size(); ++g) {
            const auto& r = results[g];
            std::string seeds;
            for (std::size_t i = 0; i < r.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(r.seeds[i]);
            const std::string tag = std::to_string(g);
            table.metadata.emplace_back("seeds." + tag, seeds);
            if (r.failures > 0) {
                table.metadata.emplace_back("failures." + tag, std::to_string(r.failures) + " (" +
                                                                   r.failure_messages.front() + ")");
                note("grid point " + tag + ": " + std::to_string(r.failures) + " realizations failed");
            }
            if (r.stats.empty() || r.stats.front().n == 0)
                throw Error("every realization failed at x = " + std::to_string(r.point.x) +
                            ", alpha = " + std::to_string(r.point.alpha) + ": " + r.failure_messages.front());
        }
    }
};

Real survivor_density(Real x) { return 1.0 - x; }

void overlay_sigma(Context& ctx, const GridPoint& p) {
    const Real y = survivor_density(p.x);
    for (const auto& pred : predictions(ctx.cfg.lattice.kind, y, p.alpha)) {
        ResultRow r = ctx.row(p, pred.label, pred.value);
        r.energy = ctx.cfg.lattice.flat_band_energy();
        ctx.table.rows.push_back(r);
    }
}

void cmd_dos(Context& ctx) {
    EnsembleSpec spec = ctx.cfg.ensemble();
    if (spec.method != Method::CPGF) throw ConfigError("ensemble.method", "the DOS uses the CPGF method");
    if (ctx.cfg.sweep == SweepVariable::Energy) {
        spec.energies = ctx.cfg.sweep_values;
        for (std::size_t i = 1; i < spec.energies.size(); ++i)
            if (!(spec.energies[i] > spec.energies[i - 1]))
                throw ConfigError("sweep.values", "energies must increase strictly");
    }
    std::vector<std::string> names;
    for (std::size_t i = 0; i < spec.energies.size(); ++i) names.push_back("dos@" + std::to_string(i));
    names.push_back("fb_weight");
    const auto& energies = spec.energies;
    ctx.note("DOS on " + std::to_string(energies.size()) + " energies");
    const auto results = run_ensemble(spec, names, [&](const Realization& r) {
        const LatticeModel model = build_hamiltonian(r.lattice, r.disorder);
        CPGFParams p = spec.cpgf;
        p.seed = r.seed;
        const SpectrumSample s = dos_cpgf(model.hamiltonian, model.sites, energies, p);
        Evaluation e{std::vector<Real>(s.values.begin(), s.values.end()), s.moments};
        const Real efb = r.lattice.flat_band_energy();
        const bool covered = energies.front() <= efb - spec.window * p.eta && energies.back() >= efb + spec.window * p.eta;
        e.values.push_back(covered ? flat_band_weight(s, efb, p.eta, spec.window).weight
                                   : std::numeric_limits<Real>::quiet_NaN());
        return e;
    });
    ctx.record(results);
    for (const auto& g : results) {
        for (std::size_t i = 0; i < energies.size(); ++i) {
            ResultRow r = ctx.numeric(g, "dos", g.stats[i]);
            r.energy = energies[i];
            ctx.table.rows.push_back(r);
        }
        const Statistic& w = g.stats.back();
        if (std::isfinite(w.mean)) {
            ResultRow r = ctx.numeric(g, "fb_weight", w);
            r.energy = ctx.cfg.lattice.flat_band_energy();
            ctx.table.rows.push_back(r);
            ResultRow expected = ctx.row(g.point, "fb_weight_expected", survivor_density(g.point.x));
            expected.energy = r.energy;
            ctx.table.rows.push_back(expected);
        }
    }
}

void cmd_sigma(Context& ctx) {
    EnsembleSpec spec = ctx.cfg.ensemble();
    if (ctx.cfg.sweep != SweepVariable::Energy) {
        ctx.note("sigma at the flat-band energy");
        const auto results = run_ensemble(spec, Observable::SigmaFB);
        ctx.record(results);
        for (const auto& g : results) {
            for (std::size_t c = 0; c < g.components.size(); ++c) {
                ResultRow r = ctx.numeric(g, g.components[c], g.stats[c]);
                r.energy = ctx.cfg.lattice.flat_band_energy();
                if (c == 1) r.eta = 2 * ctx.cfg.cpgf.eta;
                if (c == 2) r.eta = 4 * ctx.cfg.cpgf.eta;
                ctx.table.rows.push_back(r);
            }
            overlay_sigma(ctx, g.point);
        }
        return;
    }

    if (spec.method == Method::FBStates)
        throw ConfigError("ensemble.method", "energy sweeps need cpgf or exactdiag");
    const auto& energies = ctx.cfg.sweep_values;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < energies.size(); ++i) names.push_back("sigma@" + std::to_string(i));
    ctx.note("sigma(E) on " + std::to_string(energies.size()) + " energies");
    const auto results = run_ensemble(spec, names, [&](const Realization& r) {
        const LatticeModel model = build_hamiltonian(r.lattice, r.disorder);
        const SparseOperator v = build_velocity(r.lattice, model.hamiltonian, model.sites);
        Evaluation e;
        if (spec.method == Method::ExactDiag) {
            const Spectrum sp = eigh_dense(model.hamiltonian);
            for (Real en : energies) e.values.push_back(kubo_exact(sp, v, en, spec.cpgf.eta, r.lattice.n_cells));
            return e;
        }
        CPGFParams p = spec.cpgf;
        p.seed = r.seed;
        std::vector<ResolventPoint> pts;
        for (Real en : energies) pts.push_back({en, spec.cpgf.eta});
        for (const auto& k : kubo_cpgf(model, v, pts, p)) {
            e.values.push_back(k.value);
            e.moments = k.moments;
        }
        return e;
    });
    ctx.record(results);
    for (const auto& g : results) {
        for (std::size_t i = 0; i < energies.size(); ++i) {
            ResultRow r = ctx.numeric(g, "sigma", g.stats[i]);
            r.energy = energies[i];
            ctx.table.rows.push_back(r);
            // Bare-chain limit: all B atoms removed.
            if (g.point.x == 1.0 && ctx.cfg.lattice.kind == LatticeKind::Sawtooth && std::abs(energies[i]) < 2.0) {
                ResultRow d = ctx.row(g.point, "drude_chain", drude_chain(energies[i], ctx.cfg.cpgf.eta));
                d.energy = energies[i];
                ctx.table.rows.push_back(d);
            }
        }
        overlay_sigma(ctx, g.point);
    }
}

void cmd_metric(Context& ctx) {
    EnsembleSpec spec = ctx.cfg.ensemble();
    spec.method = Method::FBStates;
    ctx.note("flat-band metric from compact localized states");
    const auto results = run_ensemble(spec, Observable::FBMetric);
    ctx.record(results);
    for (const auto& g : results) {
        for (std::size_t c = 0; c < g.components.size(); ++c) {
            ResultRow r = ctx.numeric(g, g.components[c], g.stats[c]);
            r.moments.reset();
            r.rvecs.reset();
            ctx.table.rows.push_back(r);
        }
        const Real y = survivor_density(g.point.x);
        if (y <= 0) continue;
        if (ctx.cfg.lattice.kind == LatticeKind::Sawtooth) {
            ctx.table.rows.push_back(ctx.row(g.point, "qm_avg_random", qm_avg_sc(y, Arrangement::Random)));
            ctx.table.rows.push_back(ctx.row(g.point, "qm_avg_ordered", qm_avg_sc(y, Arrangement::Ordered)));
        } else if (y < 1) {
            ctx.table.rows.push_back(
                ctx.row(g.point, "qm_avg_random", sigma_sl(g.point.alpha, y).value / (2 * y)));
            ctx.table.rows.push_back(ctx.row(
                g.point, "qm_avg_ordered", sigma_sl(g.point.alpha, y, Arrangement::Ordered).value / (2 * y)));
        }
    }
}

void cmd_analytic(Context& ctx) {
    const auto& c = ctx.cfg;
    std::vector<GridPoint> points;
    switch (c.sweep) {
        case SweepVariable::X:
            for (Real v : c.sweep_values) points.push_back({v, c.lattice.alpha});
            break;
        case SweepVariable::Y:
            for (Real v : c.sweep_values) points.push_back({1.0 - v, c.lattice.alpha});
            break;
        case SweepVariable::Alpha:
            for (Real v : c.sweep_values) points.push_back({c.x, v});
            break;
        default: points.push_back({c.x, c.lattice.alpha});
    }
    int errors = 0;
    auto fail = [&](const GridPoint& p, const std::string& what) {
        const std::string msg = "x=" + std::to_string(p.x) + " alpha=" + std::to_string(p.alpha) + ": " + what;
        ctx.table.metadata.emplace_back("error." + std::to_string(errors++), msg);
        if (ctx.log) *ctx.log << "[analytic] " << msg << "\n";
    };
    for (const auto& p : points) {
        if (c.lattice.kind == LatticeKind::Stub && p.alpha == 0.0) {
            fail(p, "alpha = 0 is singular: the stubs decouple and the backbone is a bare chain "
                    "(use the drude_chain limit)");
            continue;
        }
        try {
            for (const auto& pred : predictions(c.lattice.kind, survivor_density(p.x), p.alpha)) {
                ResultRow r = ctx.row(p, pred.label, pred.value);
                r.energy = c.lattice.flat_band_energy();
                ctx.table.rows.push_back(r);
            }
        } catch (const DomainError& e) {
            fail(p, e.what());
        }
    }
    if (c.sweep == SweepVariable::Energy) {
        for (Real e : c.sweep_values) {
            const GridPoint p{1.0, c.lattice.alpha};
            try {
                ResultRow r = ctx.row(p, "drude_chain", drude_chain(e, c.cpgf.eta));
                r.energy = e;
                ctx.table.rows.push_back(r);
            } catch (const DomainError& err) {
                fail(p, "E=" + std::to_string(e) + ": " + err.what());
            }
        }
    }
}

}  // namespace

std::string to_string(Command c) {
    switch (c) {
        case Command::DOS: return "dos";
        case Command::Sigma: return "sigma";
        case Command::Metric: return "metric";
        case Command::Analytic: return "analytic";
    }
    return "?";
}

Command parse_command(std::string_view text) {
    const auto s = lower(std::string(text));
    if (s == "dos") return Command::DOS;
    if (s == "sigma") return Command::Sigma;
    if (s == "metric") return Command::Metric;
    if (s == "analytic") return Command::Analytic;
    throw ConfigError("command", "unknown command '" + std::string(text) + "'");
}

const char* version() { return FBT_VERSION; }

ResultTable run_command(Command command, const RunConfig& config, std::ostream* log) {
    config.validate();
    if (command != Command::Analytic) {
        try {
            config.ensemble().validate();
        } catch (const DomainError& e) {
            throw ConfigError(config.sweep == SweepVariable::None ? "lattice" : "sweep.values", e.what());
        }
    }
    Context ctx{command, config, log, {}, make_run_id(command, config)};
    ctx.table.metadata.emplace_back("command", to_string(command));
    ctx.table.metadata.emplace_back("version", version());
    ctx.table.metadata.emplace_back("run_id", ctx.run_id);
    for (auto& kv : config.to_pairs()) ctx.table.metadata.push_back(std::move(kv));
    switch (command) {
        case Command::DOS: cmd_dos(ctx); break;
        case Command::Sigma: cmd_sigma(ctx); break;
        case Command::Metric: cmd_metric(ctx); break;
        case Command::Analytic: cmd_analytic(ctx); break;
    }
    return std::move(ctx.table);
}

ResultTable replay(const ResultTable& recorded, std::ostream* log) {
    const std::string* cmd = recorded.meta("command");
    if (!cmd) throw ConfigError("command", "metadata does not name a command");
    return run_command(parse_command(*cmd), config_from_pairs(recorded.metadata), log);
}

}  // namespace fbt
