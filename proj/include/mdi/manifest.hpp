#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace mdi {

// FNV-1a 64 over file bytes, hex-encoded.
std::string file_digest(const std::string& path);

// Run provenance written next to each produced artifact: effective config,
// input digests, outputs, wall-clock, and an optional metric summary.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::vector<std::pair<std::string, std::string>> inputs; // path, digest
    std::vector<std::string> outputs;
    double wall_seconds = 0.0;
    nlohmann::json metrics;

    nlohmann::json to_json() const;
    void write(const std::string& path) const;
};

} // namespace mdi
