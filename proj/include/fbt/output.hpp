#pragma once

#include "fbt/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fbt {

enum class OutputFormat;

/// One row of the fixed result schema. Unset optionals serialize as empty CSV cells / JSON null.
struct ResultRow {
    std::string run_id;
    std::string lattice;
    int n_cells = 0;
    Real x = 0.0;
    Real alpha = 0.0;
    Real eta = 0.0;
    std::optional<int> moments;
    std::optional<int> rvecs;
    std::uint64_t seed = 0;
    std::optional<Real> energy;
    std::string observable;
    Real value = 0.0;
    std::optional<Real> stderr;
};

struct ResultTable {
    std::vector<std::pair<std::string, std::string>> metadata;  ///< "# key: value" lines, in order
    std::vector<ResultRow> rows;

    const std::string* meta(const std::string& key) const;
};

/// Header row, exactly as written.
const std::string& csv_header();

void write_csv(const ResultTable& table, std::ostream& out);
void write_json(const ResultTable& table, std::ostream& out);
void write_table(const ResultTable& table, const std::string& path, OutputFormat format);

/// Reads either format back; throws ConfigError on a schema mismatch.
ResultTable read_csv(std::istream& in);
ResultTable read_json(std::istream& in);
ResultTable read_table(const std::string& path);

}  // namespace fbt
