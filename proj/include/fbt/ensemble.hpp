#pragma once

#include "fbt/lattice.hpp"
#include "fbt/spectral.hpp"
#include "fbt/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fbt {

enum class Method { CPGF, ExactDiag, FBStates };
enum class Observable { SigmaFB, DOS, FBMetric, FBWeight };

std::string to_string(Method method);
std::string to_string(Observable observable);
Method parse_method(std::string_view text);

struct EnsembleSpec {
    LatticeSpec lattice;
    std::vector<Real> x_grid;      ///< vacancy densities
    std::vector<Real> alpha_grid;  ///< stub couplings; empty means {lattice.alpha}
    DisorderMode mode = DisorderMode::Random;
    int n_configs = 1;
    std::uint64_t master_seed = 1;
    Method method = Method::CPGF;
    CPGFParams cpgf;
    std::optional<Real> energy;      ///< σ energy; defaults to the flat-band energy
    std::vector<Real> energies;      ///< DOS grid
    Real window = 10.0;              ///< FBWeight half-window in units of η
    bool eta_protocol = false;       ///< σ also at 2η and 4η from the same recurrence

    void validate() const;
};

struct Statistic {
    Real mean = 0.0;
    Real stderr = 0.0;
    int n = 0;
    Real min = 0.0;
    Real max = 0.0;
};

/// Mean, standard error of the mean, extremes.
Statistic summarize(const std::vector<Real>& values);

struct GridPoint {
    Real x = 0.0;
    Real alpha = 0.0;
};

struct GridResult {
    GridPoint point;
    std::vector<std::string> components;  ///< names of the aggregated quantities
    std::vector<Statistic> stats;         ///< one per component
    std::vector<std::uint64_t> seeds;     ///< realization seeds, in realization order
    int failures = 0;
    std::vector<std::string> failure_messages;
    int moments = 0;  ///< CPGF moment count of the last successful realization
};

/// One realization: spec with the grid point applied, its disorder, its seed.
struct Realization {
    LatticeSpec lattice;
    DisorderRealization disorder;
    std::uint64_t seed;
};

/// Evaluates one realization; returns the component values and, optionally, a moment count.
struct Evaluation {
    std::vector<Real> values;
    int moments = 0;
};
using Evaluator = std::function<Evaluation(const Realization&)>;

/// Grid points in x-major order.
std::vector<GridPoint> grid_points(const EnsembleSpec& spec);

/// Realization seed for (grid point, realization index).
std::uint64_t realization_seed(std::uint64_t master, std::size_t grid_index, int realization);

/// Generic driver. Realizations that throw fbt::Error are excluded and counted.
std::vector<GridResult> run_ensemble(const EnsembleSpec& spec,
                                     const std::vector<std::string>& components,
                                     const Evaluator& evaluate);

/// Built-in observables.
///   SigmaFB:  "sigma" (+ "sigma_2eta", "sigma_4eta" with the η protocol)
///   DOS:      "dos@<index>" per energy of spec.energies
///   FBMetric: "mean_metric", "mean_spread2", "sigma_metric", "sigma_spread"
///   FBWeight: "fb_weight"
std::vector<GridResult> run_ensemble(const EnsembleSpec& spec, Observable observable);

struct PowerLaw {
    Real amplitude = 0.0;
    Real exponent = 0.0;  ///< β in σ = A / y^β
    Real residual = 0.0;  ///< RMS residual of the log fit
};

/// Least squares of log σ = log A − β log y. Needs ≥ 3 points, all positive.
PowerLaw fit_power_law(const std::vector<Real>& y, const std::vector<Real>& sigma);

struct Crossover {
    bool found = false;
    Real steepest = 0.0;  ///< α at max |d log σ / d log α|
    Real knee = 0.0;      ///< α at max d² log σ / d(log α)²
    std::vector<Real> slopes;  ///< d log σ / d log α at each grid point
};

/// Locates the crossover on a σ(α) table. Grid must span √y by a decade on each side
/// (DomainError otherwise). Flat input (all |slopes| < 0.05) reports found = false.
Crossover detect_crossover(const std::vector<Real>& alpha, const std::vector<Real>& sigma, Real y);

struct CrossoverScan {
    std::vector<GridResult> table;
    Crossover crossover;
};

/// Runs σ_fb over spec.alpha_grid at x = 1 − y and locates the crossover.
CrossoverScan crossover_scan(EnsembleSpec spec, Real y);

}  // namespace fbt
