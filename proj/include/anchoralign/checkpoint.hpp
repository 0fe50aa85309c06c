#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "anchoralign/model.hpp"
#include "anchoralign/objectives.hpp"

namespace anchoralign {

nlohmann::json to_json(const ProjectionConfig& cfg);
nlohmann::json to_json(const LossConfig& cfg);
ProjectionConfig projection_config_from_json(const nlohmann::json& j);
LossConfig loss_config_from_json(const nlohmann::json& j);

// Checkpoint directory: config.json plus layer<i>.weight.emb1 (out x in) and
// layer<i>.bias.emb1 (1 x out). Tensors are stored as float32, so a loaded
// model equals round_to_storage() of the saved one, bit for bit.
void save_checkpoint(const ProjectionModel& model, const std::filesystem::path& dir,
                     const std::optional<LossConfig>& loss = std::nullopt);
ProjectionModel load_checkpoint(const std::filesystem::path& dir);

// Parameters rounded through float32, i.e. what a save/load cycle produces.
ProjectionModel round_to_storage(const ProjectionModel& model);

}  // namespace anchoralign
