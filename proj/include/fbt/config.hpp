#pragma once

#include "fbt/ensemble.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fbt {

enum class OutputFormat { CSV, JSON };
enum class SweepVariable { None, X, Y, Alpha, Energy };

std::string to_string(SweepVariable v);

/// Declarative run description. Keys use dotted paths ("lattice.kind"); nested YAML maps and
/// dotted top-level keys are both accepted and may be mixed.
struct RunConfig {
    LatticeSpec lattice;
    Real x = 0.0;  ///< disorder.x, or 1 − disorder.y
    DisorderMode mode = DisorderMode::Random;
    int n_configs = 1;
    std::uint64_t master_seed = 1;
    Method method = Method::CPGF;
    CPGFParams cpgf;
    bool eta_protocol = false;

    SweepVariable sweep = SweepVariable::None;
    std::vector<Real> sweep_values;

    Real energy_min = -4.5;
    Real energy_max = 2.5;
    int energy_points = 401;
    Real window = 10.0;  ///< flat-band weight half-window, in units of η

    std::string output_path;  ///< empty: stdout
    OutputFormat format = OutputFormat::CSV;
    int verbosity = 0;

    /// Every key accepted by the loader, in canonical order.
    static const std::vector<std::string>& keys();

    /// Canonical (key, value) pairs; loading them back reproduces this config.
    std::vector<std::pair<std::string, std::string>> to_pairs() const;

    /// Physical checks against the module preconditions. Throws ConfigError naming the key.
    void validate() const;

    /// Ensemble spec for the configured sweep (energy sweeps leave the x grid at {x}).
    EnsembleSpec ensemble() const;

    /// Uniform DOS grid from energy.min/max/points.
    std::vector<Real> energy_grid() const;
};

/// Parses YAML text. Unknown keys, malformed values and failed validation throw ConfigError.
RunConfig parse_config(const std::string& yaml_text);
RunConfig load_config(const std::string& path);

/// Rebuilds a config from "key: value" metadata pairs; keys outside the config are ignored.
RunConfig config_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace fbt
