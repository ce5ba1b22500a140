#include "dopo/output.hpp"

#include "dopo/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <ostream>

namespace dopo {

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string run_stamp_line(double wall_seconds) {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    char line[128];
    std::snprintf(line, sizeof line, "# run: %s wall=%.3fs", stamp, wall_seconds);
    return line;
}

void write_csv(std::ostream& os, const RunMeta& meta, const Table& table) {
    for (const auto& [key, value] : meta.entries) os << "# " << key << ": " << value << "\n";
    os << run_stamp_line(meta.wall_seconds) << "\n";
    bool first = true;
    if (!table.label_column.empty()) {
        os << table.label_column;
        first = false;
    }
    for (const auto& c : table.columns) {
        if (!first) os << ",";
        os << c;
        first = false;
    }
    os << "\n";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        first = true;
        if (!table.label_column.empty()) {
            os << table.labels.at(i);
            first = false;
        }
        for (double v : table.rows[i]) {
            if (!first) os << ",";
            os << format_value(v);
            first = false;
        }
        os << "\n";
    }
}

void write_json(std::ostream& os, const RunMeta& meta, const Table& table) {
    nlohmann::ordered_json j;
    for (const auto& [key, value] : meta.entries) j["meta"][key] = value;
    j["run"] = run_stamp_line(meta.wall_seconds).substr(2);
    if (!table.label_column.empty()) j["label_column"] = table.label_column;
    j["columns"] = table.columns;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        auto row = nlohmann::ordered_json::array();
        if (!table.label_column.empty()) row.push_back(table.labels.at(i));
        for (double v : table.rows[i]) {
            if (std::isfinite(v))
                row.push_back(v);
            else
                row.push_back(nullptr);
        }
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    os << j.dump(2) << "\n";
}

void write_wigner_csv(std::ostream& os, const RunMeta& meta, const WignerGrid& grid) {
    for (const auto& [key, value] : meta.entries) os << "# " << key << ": " << value << "\n";
    os << run_stamp_line(meta.wall_seconds) << "\n";
    os << "x,p,w\n";
    for (Eigen::Index ip = 0; ip < grid.p.size(); ++ip)
        for (Eigen::Index ix = 0; ix < grid.x.size(); ++ix)
            os << format_value(grid.x(ix)) << "," << format_value(grid.p(ip)) << ","
               << format_value(grid.w(ip, ix)) << "\n";
}

namespace {

constexpr char kWignerMagic[8] = {'D', 'O', 'P', 'O', 'W', 'I', 'G', '1'};
constexpr char kWignerTag[24] = "xp vac-var=1 int=1";

} // namespace

void write_wigner_binary(const std::string& path, const WignerGrid& grid) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw SolverError("cannot open " + path + " for writing");
    const std::int32_t nx = static_cast<std::int32_t>(grid.x.size());
    const std::int32_t np = static_cast<std::int32_t>(grid.p.size());
    const double bounds[4] = {grid.x(0), grid.x(nx - 1), grid.p(0), grid.p(np - 1)};
    os.write(kWignerMagic, sizeof kWignerMagic);
    os.write(reinterpret_cast<const char*>(&nx), sizeof nx);
    os.write(reinterpret_cast<const char*>(&np), sizeof np);
    os.write(reinterpret_cast<const char*>(bounds), sizeof bounds);
    os.write(kWignerTag, sizeof kWignerTag);
    for (std::int32_t ip = 0; ip < np; ++ip)
        for (std::int32_t ix = 0; ix < nx; ++ix) {
            const double v = grid.w(ip, ix);
            os.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    if (!os) throw SolverError("short write to " + path);
}

WignerGrid read_wigner_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SolverError("cannot open " + path);
    char magic[8], tag[24];
    std::int32_t nx = 0, np = 0;
    double bounds[4];
    is.read(magic, sizeof magic);
    is.read(reinterpret_cast<char*>(&nx), sizeof nx);
    is.read(reinterpret_cast<char*>(&np), sizeof np);
    is.read(reinterpret_cast<char*>(bounds), sizeof bounds);
    is.read(tag, sizeof tag);
    if (!is || std::memcmp(magic, kWignerMagic, sizeof magic) != 0)
        throw SolverError("not a Wigner grid file: " + path);
    if (nx < 2 || np < 2 || nx > 100000 || np > 100000)
        throw SolverError("corrupt Wigner grid header in " + path);
    WignerGrid g;
    g.x = RVec::LinSpaced(nx, bounds[0], bounds[1]);
    g.p = RVec::LinSpaced(np, bounds[2], bounds[3]);
    g.w.resize(np, nx);
    for (std::int32_t ip = 0; ip < np; ++ip)
        for (std::int32_t ix = 0; ix < nx; ++ix) {
            double v;
            is.read(reinterpret_cast<char*>(&v), sizeof v);
            g.w(ip, ix) = v;
        }
    if (!is) throw SolverError("truncated Wigner grid file: " + path);
    return g;
}

} // namespace dopo
