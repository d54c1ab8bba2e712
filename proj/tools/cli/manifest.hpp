#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace gattf::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Record of one command invocation, written as manifest.json next to its artifacts.
class RunManifest {
public:
    RunManifest(std::string command, std::filesystem::path out_dir);

    void set_config(nlohmann::json config) { config_ = std::move(config); }
    void add_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }
    void add_input(const std::filesystem::path& path) { inputs_.push_back(path); }
    /// Registers a file already written under the output directory.
    void add_artifact(const std::filesystem::path& path) { artifacts_.push_back(path); }
    void add_timing(const std::string& name, double seconds) { timings_[name] = seconds; }

    nlohmann::json to_json() const;
    /// Writes manifest.json and returns its path.
    std::filesystem::path write() const;

private:
    std::string command_;
    std::filesystem::path out_dir_;
    nlohmann::json config_ = nlohmann::json::object();
    nlohmann::json seeds_ = nlohmann::json::object();
    std::vector<std::filesystem::path> inputs_;
    std::vector<std::filesystem::path> artifacts_;
    nlohmann::json timings_ = nlohmann::json::object();
    std::chrono::system_clock::time_point started_;
    std::chrono::steady_clock::time_point t0_;
};

} // namespace gattf::cli
