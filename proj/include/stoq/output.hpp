// output.hpp — CSV series, JSON summaries, and checksummed run manifests.

#pragma once

#include "stoq/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace stoq {

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const;  // -1 if absent
};

// Values are written with 17 significant digits so rereads are bit-exact.
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

std::uint64_t fnv1a(const void* data, std::size_t n);
std::string file_checksum(const std::string& path);  // hex FNV-1a of the bytes

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

// Manifest: run parameters plus per-file checksums; in deterministic-reduce
// mode it fully determines the outputs.
struct Manifest {
    std::string scenario_path;
    std::uint64_t master_seed{0};
    std::uint64_t n_traj{0};
    int workers{1};
    bool deterministic_reduce{true};
    std::string out_dir;
    std::string version;
    double wall_seconds{0.0};
    std::vector<std::pair<std::string, std::string>> files;  // (name, checksum)

    nlohmann::json to_json() const;
    static Manifest from_json(const nlohmann::json& j);
};

// Checks every file listed in the manifest against its checksum; returns the
// names that do not match.
std::vector<std::string> verify_manifest(const Manifest& m, const std::string& dir);

} // namespace stoq
