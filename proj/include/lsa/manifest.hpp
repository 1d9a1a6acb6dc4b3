#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "lsa/mat.hpp"

// Run manifests: every CLI run writes exactly one manifest.json into its run
// directory, recording the command, config snapshot, seed, and content hashes
// (fnv1a-64 hex) of inputs and produced artifacts.

namespace lsa {

inline std::string hash_bytes(const void* data, size_t n) {
    uint64_t h = 0xcbf29ce484222325ull;
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file: " + path);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hash_bytes(contents.data(), contents.size());
}

struct RunManifest {
    std::string command;
    nlohmann::json config;
    uint64_t seed = 0;
    std::map<std::string, std::string> input_hashes;
    std::map<std::string, std::string> artifact_hashes;
    double wall_time_sec = 0.0;

    void add_input(const std::string& path) { input_hashes[path] = hash_file(path); }
    void add_artifact(const std::string& path) {
        artifact_hashes[std::filesystem::path(path).filename().string()] = hash_file(path);
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"command", command},      {"config", config},
                              {"seed", seed},            {"input_hashes", input_hashes},
                              {"artifact_hashes", artifact_hashes},
                              {"wall_time_sec", wall_time_sec}};
    }

    void write(const std::string& run_dir) const {
        std::ofstream out(std::filesystem::path(run_dir) / "manifest.json");
        if (!out) throw std::runtime_error("cannot write manifest in " + run_dir);
        out << to_json().dump(2) << "\n";
    }

    static RunManifest read(const std::string& run_dir) {
        std::ifstream in(std::filesystem::path(run_dir) / "manifest.json");
        if (!in) throw std::runtime_error("missing manifest: " + run_dir);
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("command"))
            throw std::runtime_error("corrupted manifest: " + run_dir);
        RunManifest m;
        m.command = j.value("command", "");
        m.config = j.value("config", nlohmann::json::object());
        m.seed = j.value("seed", uint64_t(0));
        if (j.contains("input_hashes"))
            m.input_hashes = j["input_hashes"].get<std::map<std::string, std::string>>();
        if (j.contains("artifact_hashes"))
            m.artifact_hashes = j["artifact_hashes"].get<std::map<std::string, std::string>>();
        m.wall_time_sec = j.value("wall_time_sec", 0.0);
        return m;
    }
};

class WallClock {
public:
    WallClock() : start_(std::chrono::steady_clock::now()) {}
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace lsa
