#pragma once

// Result tables and phase-space exports. Numeric formatting is fixed at
// %.12g so a rerun of the same configuration reproduces the file byte for
// byte; the single "# run:" header line carries the only varying content
// (timestamp and wall time).

#include "dopo/types.hpp"
#include "dopo/wigner.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dopo {

struct Table {
    std::string label_column;           // empty: purely numeric table
    std::vector<std::string> columns;   // numeric column names
    std::vector<std::string> labels;    // one per row when label_column is set
    std::vector<std::vector<double>> rows;
};

struct RunMeta {
    std::vector<std::pair<std::string, std::string>> entries;  // ordered
    double wall_seconds = 0.0;
};

std::string format_value(double v);  // %.12g; nan for undefined entries

// CSV: "# key: value" header lines, then a header row and data rows.
void write_csv(std::ostream& os, const RunMeta& meta, const Table& table);

// JSON: meta object (wall time and timestamp under "run"), columns, rows.
// Undefined entries become null.
void write_json(std::ostream& os, const RunMeta& meta, const Table& table);

// Long-format grid: header lines, then x,p,w rows.
void write_wigner_csv(std::ostream& os, const RunMeta& meta, const WignerGrid& grid);

// Row-major doubles behind a fixed-size header: magic, dims, axis bounds,
// convention tag ("xp vac-var=1 int=1").
void write_wigner_binary(const std::string& path, const WignerGrid& grid);
WignerGrid read_wigner_binary(const std::string& path);

// The one nondeterministic line, shared by all writers.
std::string run_stamp_line(double wall_seconds);

} // namespace dopo
