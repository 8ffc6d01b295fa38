#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace relmine {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::uint64_t file_fnv64(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("hash: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        const std::streamsize n = f.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!f) break;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Everything needed to reproduce one CLI run exactly.
struct RunManifest {
    std::string command;
    std::string config_path;
    nlohmann::json resolved_config;
    std::map<std::string, std::string> dataset_hashes;
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    std::int64_t wall_ms = 0;

    nlohmann::json to_json() const {
        return {{"command", command},
                {"config_path", config_path},
                {"resolved_config", resolved_config},
                {"dataset_hashes", dataset_hashes},
                {"seed", seed},
                {"outputs", outputs},
                {"wall_ms", wall_ms},
                {"tool_version", kToolVersion}};
    }
};

/// Written atomically (tmp + rename) at run end.
inline void write_manifest(const RunManifest& m, const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(path).parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw std::runtime_error("manifest: cannot write " + tmp);
        f << m.to_json().dump(2) << "\n";
        if (!f) throw std::runtime_error("manifest: write failure on " + tmp);
    }
    fs::rename(tmp, path);
}

class WallClock {
public:
    WallClock() : start_(std::chrono::steady_clock::now()) {}
    std::int64_t elapsed_ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace relmine
