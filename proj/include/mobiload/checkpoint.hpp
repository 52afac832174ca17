#pragma once

#include "mobiload/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mobiload {

// One file per trained variant: metadata (variant, config, seed) plus every model it
// produced. A multi-task model stores its trunk once, followed by each head.
struct Checkpoint {
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<MultiTaskModel> models;

    // Model holding a head for `task_id`; UnknownTask otherwise.
    const MultiTaskModel& model_for(std::string_view task_id) const;
    bool operator==(const Checkpoint& other) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "MLCK", u32 version, u64 header length, JSON header, raw little-endian doubles
// (weights row-major, then bias, per layer).
std::string serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::string_view bytes, const std::string& source);

// Raw little-endian bytes of a layer list, for exact comparisons.
std::string serialize_layers(const std::vector<Layer>& layers);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);  // MissingCheckpoint, CorruptCheckpoint

nlohmann::json to_json(const ArchitectureSpec& spec);
ArchitectureSpec architecture_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NormalizationState& norm);
NormalizationState normalizer_from_json(const nlohmann::json& j);

}  // namespace mobiload
