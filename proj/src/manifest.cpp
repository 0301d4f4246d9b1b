#include "mdi/manifest.hpp"

#include <fstream>
#include <sstream>

#include "mdi/error.hpp"
#include "mdi/rng.hpp"

namespace mdi {

std::string file_digest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError(ErrCode::bad_file, "cannot open '" + path + "' for hashing");
    std::ostringstream ss;
    ss << f.rdbuf();
    std::string bytes = ss.str();
    std::uint64_t h = fnv1a64(bytes);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    nlohmann::json ins = nlohmann::json::array();
    for (auto& [path, digest] : inputs) ins.push_back({{"path", path}, {"digest", digest}});
    j["inputs"] = ins;
    j["outputs"] = outputs;
    j["wall_seconds"] = wall_seconds;
    j["metrics"] = metrics;
    return j;
}

void RunManifest::write(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw DataError(ErrCode::bad_file, "cannot write manifest '" + path + "'");
    f << to_json().dump(2) << '\n';
}

} // namespace mdi
