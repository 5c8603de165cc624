// output.cpp — deterministic CSV/JSON artifacts and checksums

#include "stoq/output.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace stoq {

using nlohmann::json;

int CsvTable::column(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (columns[k] == name) return static_cast<int>(k);
    }
    return -1;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw Error("cli", "cannot write " + path);
    for (std::size_t k = 0; k < table.columns.size(); ++k) {
        if (k) out << ',';
        out << table.columns[k];
    }
    out << '\n';
    char buf[64];
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) {
            throw Error("cli", "CSV row width mismatch in " + path);
        }
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", row[k]);
            out << buf;
        }
        out << '\n';
    }
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cli", "cannot open " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw Error("cli", "empty CSV: " + path);
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) table.columns.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::vector<double> values;
        while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
        if (values.size() != table.columns.size()) {
            throw Error("cli", "CSV row width mismatch in " + path);
        }
        table.rows.push_back(std::move(values));
    }
    return table;
}

std::uint64_t fnv1a(const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (std::size_t k = 0; k < n; ++k) {
        h ^= bytes[k];
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cli", "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
    return hex;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cli", "cannot write " + path);
    out << j.dump(2) << '\n';
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cli", "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& ex) {
        throw Error("cli", std::string("JSON parse error in ") + path + ": " + ex.what());
    }
    return j;
}

json Manifest::to_json() const {
    json files_j = json::object();
    for (const auto& [name, sum] : files) files_j[name] = sum;
    return {{"scenario", scenario_path},
            {"seed", master_seed},
            {"trajectories", n_traj},
            {"workers", workers},
            {"deterministic_reduce", deterministic_reduce},
            {"out", out_dir},
            {"version", version},
            {"wall_seconds", wall_seconds},
            {"files", std::move(files_j)}};
}

Manifest Manifest::from_json(const json& j) {
    Manifest m;
    m.scenario_path = j.value("scenario", "");
    m.master_seed = j.value("seed", static_cast<std::uint64_t>(0));
    m.n_traj = j.value("trajectories", static_cast<std::uint64_t>(0));
    m.workers = j.value("workers", 1);
    m.deterministic_reduce = j.value("deterministic_reduce", true);
    m.out_dir = j.value("out", "");
    m.version = j.value("version", "");
    m.wall_seconds = j.value("wall_seconds", 0.0);
    if (j.contains("files")) {
        for (const auto& [name, sum] : j["files"].items()) {
            m.files.emplace_back(name, sum.get<std::string>());
        }
    }
    return m;
}

std::vector<std::string> verify_manifest(const Manifest& m, const std::string& dir) {
    std::vector<std::string> bad;
    for (const auto& [name, sum] : m.files) {
        try {
            if (file_checksum(dir + "/" + name) != sum) bad.push_back(name);
        } catch (const Error&) {
            bad.push_back(name);
        }
    }
    return bad;
}

} // namespace stoq
