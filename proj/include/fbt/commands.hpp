#pragma once

#include "fbt/config.hpp"
#include "fbt/output.hpp"

#include <iosfwd>
#include <string>

namespace fbt {

enum class Command { DOS, Sigma, Metric, Analytic };

std::string to_string(Command c);
Command parse_command(std::string_view text);

/// Library version embedded in every output header.
const char* version();

/// Runs one experiment. The table's metadata holds the command, the version, every config key
/// and the realization seeds, so `config_from_pairs(table.metadata)` reproduces the run.
/// Progress goes to `log` when verbosity > 0.
ResultTable run_command(Command command, const RunConfig& config, std::ostream* log = nullptr);

/// Re-runs the experiment recorded in a result table's metadata.
ResultTable replay(const ResultTable& recorded, std::ostream* log = nullptr);

}  // namespace fbt
