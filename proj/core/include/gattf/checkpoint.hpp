#pragma once

#include "gattf/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace gattf {

inline constexpr char kCheckpointMagic[8] = {'G', 'A', 'T', 'T', 'F', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelParams params;
    /// Free-form block stored next to the model config (feature layout, seeds).
    nlohmann::json metadata;
};

/// Binary layout is documented in docs/checkpoint_format.md.
std::string serialize_checkpoint(const ModelParams& params, const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint deserialize_checkpoint(const std::string& bytes);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `contents` to a temporary sibling of `path` and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace gattf
