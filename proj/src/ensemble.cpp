#include "fbt/ensemble.hpp"

#include "fbt/errors.hpp"
#include "fbt/exactdiag.hpp"
#include "fbt/flatband.hpp"
#include "fbt/parallel.hpp"
#include "fbt/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fbt {

std::string to_string(Method method) {
    switch (method) {
        case Method::CPGF: return "CPGF";
        case Method::ExactDiag: return "ExactDiag";
        case Method::FBStates: return "FBStates";
    }
    return "?";
}

std::string to_string(Observable observable) {
    switch (observable) {
        case Observable::SigmaFB: return "SigmaFB";
        case Observable::DOS: return "DOS";
        case Observable::FBMetric: return "FBMetric";
        case Observable::FBWeight: return "FBWeight";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "cpgf") return Method::CPGF;
    if (s == "exactdiag" || s == "exact") return Method::ExactDiag;
    if (s == "fbstates" || s == "states") return Method::FBStates;
    throw DomainError("unknown method '" + std::string(text) + "'");
}

void EnsembleSpec::validate() const {
    if (x_grid.empty()) throw DomainError("x grid is empty");
    for (Real x : x_grid)
        if (!(x >= 0.0 && x <= 1.0)) throw DomainError("x must lie in [0, 1]");
    if (n_configs < 1) throw DomainError("n_configs must be >= 1");
    for (Real a : alpha_grid) {
        LatticeSpec l = lattice;
        l.alpha = a;
        l.validate();
    }
    lattice.validate();
    cpgf.validate();
    if (!(window > 0)) throw DomainError("window must be > 0");
}

Statistic summarize(const std::vector<Real>& values) {
    Statistic s;
    s.n = static_cast<int>(values.size());
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.n;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    if (s.n > 1) {
        Real ss = 0.0;
        for (Real v : values) ss += (v - s.mean) * (v - s.mean);
        s.stderr = std::sqrt(ss / (s.n - 1) / s.n);
    }
    return s;
}

std::vector<GridPoint> grid_points(const EnsembleSpec& spec) {
    std::vector<GridPoint> pts;
    const std::vector<Real> alphas =
        spec.alpha_grid.empty() ? std::vector<Real>{spec.lattice.alpha} : spec.alpha_grid;
    for (Real x : spec.x_grid)
        for (Real a : alphas) pts.push_back({x, a});
    return pts;
}

std::uint64_t realization_seed(std::uint64_t master, std::size_t grid_index, int realization) {
    return derive_seed(master, {static_cast<std::uint64_t>(grid_index),
                                static_cast<std::uint64_t>(realization)});
}

std::vector<GridResult> run_ensemble(const EnsembleSpec& spec,
                                     const std::vector<std::string>& components,
                                     const Evaluator& evaluate) {
    spec.validate();
    const auto points = grid_points(spec);
    const std::size_t per = static_cast<std::size_t>(spec.n_configs);
    struct Slot {
        std::optional<Evaluation> result;
        std::string error;
    };
    std::vector<Slot> slots(points.size() * per);

    parallel_for(slots.size(), [&](std::size_t task) {
        const std::size_t g = task / per;
        const int r = static_cast<int>(task % per);
        Realization real;
        real.lattice = spec.lattice;
        real.lattice.alpha = points[g].alpha;
        real.seed = realization_seed(spec.master_seed, g, r);
        try {
            real.disorder = make_disorder(real.lattice, points[g].x, spec.mode, real.seed);
            Evaluation e = evaluate(real);
            if (e.values.size() != components.size())
                throw SizeMismatchError("evaluator returned " + std::to_string(e.values.size()) +
                                        " values for " + std::to_string(components.size()) +
                                        " components");
            slots[task].result = std::move(e);
        } catch (const Error& err) {
            slots[task].error = err.what();
        }
    });

    std::vector<GridResult> out;
    for (std::size_t g = 0; g < points.size(); ++g) {
        GridResult res;
        res.point = points[g];
        res.components = components;
        std::vector<std::vector<Real>> columns(components.size());
        for (std::size_t r = 0; r < per; ++r) {
            const Slot& slot = slots[g * per + r];
            res.seeds.push_back(realization_seed(spec.master_seed, g, static_cast<int>(r)));
            if (!slot.result) {
                ++res.failures;
                res.failure_messages.push_back(slot.error);
                continue;
            }
            for (std::size_t c = 0; c < components.size(); ++c)
                columns[c].push_back(slot.result->values[c]);
            res.moments = slot.result->moments;
        }
        for (const auto& col : columns) res.stats.push_back(summarize(col));
        out.push_back(std::move(res));
    }
    return out;
}

namespace {

Real sigma_energy(const EnsembleSpec& spec, const LatticeSpec& lattice) {
    return spec.energy ? *spec.energy : lattice.flat_band_energy();
}

Evaluation eval_sigma(const EnsembleSpec& spec, const Realization& r) {
    const LatticeModel model = build_hamiltonian(r.lattice, r.disorder);
    const SparseOperator v = build_velocity(r.lattice, model.hamiltonian, model.sites);
    const Real e = sigma_energy(spec, r.lattice);
    const Real eta = spec.cpgf.eta;
    Evaluation out;
    switch (spec.method) {
        case Method::CPGF: {
            CPGFParams p = spec.cpgf;
            p.seed = r.seed;
            std::vector<ResolventPoint> pts{{e, eta}};
            if (spec.eta_protocol) {
                pts.push_back({e, 2 * eta});
                pts.push_back({e, 4 * eta});
            }
            for (const auto& k : kubo_cpgf(model, v, pts, p)) {
                out.values.push_back(k.value);
                out.moments = k.moments;
            }
            break;
        }
        case Method::ExactDiag: {
            const Spectrum sp = eigh_dense(model.hamiltonian);
            out.values.push_back(kubo_exact(sp, v, e, eta, r.lattice.n_cells));
            if (spec.eta_protocol) {
                out.values.push_back(kubo_exact(sp, v, e, 2 * eta, r.lattice.n_cells));
                out.values.push_back(kubo_exact(sp, v, e, 4 * eta, r.lattice.n_cells));
            }
            break;
        }
        case Method::FBStates: {
            const FBSigma s = sigma_fb_from_states(r.lattice, r.disorder);
            out.values.assign(spec.eta_protocol ? 3 : 1, s.metric_route);
            break;
        }
    }
    return out;
}

SpectrumSample dos_sample(const EnsembleSpec& spec, const Realization& r) {
    const LatticeModel model = build_hamiltonian(r.lattice, r.disorder);
    CPGFParams p = spec.cpgf;
    p.seed = r.seed;
    return dos_cpgf(model.hamiltonian, model.sites, spec.energies, p);
}

}  // namespace

std::vector<GridResult> run_ensemble(const EnsembleSpec& spec, Observable observable) {
    switch (observable) {
        case Observable::SigmaFB: {
            std::vector<std::string> names{"sigma"};
            if (spec.eta_protocol) {
                names.push_back("sigma_2eta");
                names.push_back("sigma_4eta");
            }
            return run_ensemble(spec, names, [&](const Realization& r) { return eval_sigma(spec, r); });
        }
        case Observable::DOS: {
            if (spec.method != Method::CPGF) throw DomainError("DOS ensembles use the CPGF method");
            std::vector<std::string> names;
            for (std::size_t i = 0; i < spec.energies.size(); ++i)
                names.push_back("dos@" + std::to_string(i));
            return run_ensemble(spec, names, [&](const Realization& r) {
                const SpectrumSample s = dos_sample(spec, r);
                return Evaluation{std::vector<Real>(s.values.begin(), s.values.end()), s.moments};
            });
        }
        case Observable::FBWeight: {
            if (spec.method != Method::CPGF) throw DomainError("FB weights use the CPGF method");
            return run_ensemble(spec, {"fb_weight"}, [&](const Realization& r) {
                const SpectrumSample s = dos_sample(spec, r);
                const WindowWeight w =
                    flat_band_weight(s, r.lattice.flat_band_energy(), spec.cpgf.eta, spec.window);
                return Evaluation{{w.weight}, s.moments};
            });
        }
        case Observable::FBMetric: {
            return run_ensemble(
                spec, {"mean_metric", "mean_spread2", "sigma_metric", "sigma_spread"},
                [&](const Realization& r) {
                    const FBSigma s = sigma_fb_from_states(r.lattice, r.disorder);
                    return Evaluation{{s.mean_metric, s.mean_spread2, s.metric_route, s.spread_route}, 0};
                });
        }
    }
    throw DomainError("unknown observable");
}

PowerLaw fit_power_law(const std::vector<Real>& y, const std::vector<Real>& sigma) {
    if (y.size() != sigma.size()) throw SizeMismatchError("fit_power_law: length mismatch");
    if (y.size() < 3) throw DomainError("fit_power_law needs at least 3 points");
    const Index n = static_cast<Index>(y.size());
    MatrixXr a(n, 2);
    VectorXr b(n);
    for (Index i = 0; i < n; ++i) {
        if (!(y[static_cast<std::size_t>(i)] > 0 && sigma[static_cast<std::size_t>(i)] > 0))
            throw DomainError("fit_power_law needs positive data");
        a(i, 0) = 1.0;
        a(i, 1) = -std::log(y[static_cast<std::size_t>(i)]);
        b[i] = std::log(sigma[static_cast<std::size_t>(i)]);
    }
    const VectorXr c = a.colPivHouseholderQr().solve(b);
    PowerLaw fit;
    fit.amplitude = std::exp(c[0]);
    fit.exponent = c[1];
    fit.residual = std::sqrt((a * c - b).squaredNorm() / static_cast<Real>(n));
    return fit;
}

Crossover detect_crossover(const std::vector<Real>& alpha, const std::vector<Real>& sigma, Real y) {
    if (alpha.size() != sigma.size()) throw SizeMismatchError("detect_crossover: length mismatch");
    if (alpha.size() < 3) throw DomainError("detect_crossover needs at least 3 points");
    if (!(y > 0)) throw DomainError("y must be > 0");
    for (std::size_t i = 1; i < alpha.size(); ++i)
        if (!(alpha[i] > alpha[i - 1] && alpha[i - 1] > 0))
            throw DomainError("alpha grid must be positive and increasing");
    const Real root = std::sqrt(y);
    if (alpha.front() > root / 10 * (1 + 1e-9) || alpha.back() < root * 10 * (1 - 1e-9))
        throw DomainError("alpha grid must span sqrt(y) by a decade on each side");

    const std::size_t n = alpha.size();
    std::vector<Real> la(n), ls(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sigma[i] > 0)) throw DomainError("detect_crossover needs positive sigma");
        la[i] = std::log(alpha[i]);
        ls[i] = std::log(sigma[i]);
    }
    Crossover c;
    c.slopes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1, hi = i + 1 == n ? n - 1 : i + 1;
        c.slopes[i] = (ls[hi] - ls[lo]) / (la[hi] - la[lo]);
    }
    std::size_t steep = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(c.slopes[i]) > std::abs(c.slopes[steep])) steep = i;
    c.found = std::abs(c.slopes[steep]) >= 0.05;
    c.steepest = alpha[steep];

    // Curvature from the three-point second derivative on a non-uniform grid.
    Real best = -std::numeric_limits<Real>::infinity();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const Real h1 = la[i] - la[i - 1], h2 = la[i + 1] - la[i];
        const Real d2 = 2 * (h1 * ls[i + 1] - (h1 + h2) * ls[i] + h2 * ls[i - 1]) / (h1 * h2 * (h1 + h2));
        if (d2 > best) {
            best = d2;
            c.knee = alpha[i];
        }
    }
    return c;
}

CrossoverScan crossover_scan(EnsembleSpec spec, Real y) {
    if (!(y > 0 && y <= 1)) throw DomainError("y must lie in (0, 1]");
    if (spec.lattice.kind != LatticeKind::Stub) throw DomainError("crossover scans need the stub lattice");
    spec.x_grid = {1.0 - y};
    CrossoverScan scan;
    scan.table = run_ensemble(spec, Observable::SigmaFB);
    std::vector<Real> a, s;
    for (const auto& row : scan.table) {
        a.push_back(row.point.alpha);
        s.push_back(row.stats.front().mean);
    }
    scan.crossover = detect_crossover(a, s, y);
    return scan;
}

}  // namespace fbt
