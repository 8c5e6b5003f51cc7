#pragma once

#include "primht/association.hpp"
#include "primht/benchkit.hpp"

#include <json.hpp>

#include <filesystem>

namespace primht {

using Json = nlohmann::json;

// --- segmentation results -------------------------------------------------

/// Full segmentation document: input summary, effective config echo,
/// segments (with poses as 16 row-major values), unsegmented indices and
/// diagnostics.  `groups` carries association output when present.
Json segmentation_to_json(const RecognitionResult& result);
RecognitionResult segmentation_from_json(const Json& doc);

/// Replace (or add) the association section of a segmentation document:
/// updated segment list, groups and the association config echo.
void attach_association(Json& doc, const AssociationResult& association,
                        const AssociationConfig& config);

// --- instances, scenes, ground truth, metrics -----------------------------

Json instance_to_json(const PrimitiveInstance& instance);
PrimitiveInstance instance_from_json(const Json& doc);

Json scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const Json& doc);

Json ground_truth_to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const Json& doc);

Json metrics_to_json(const MetricsReport& report);

Json config_to_json(const PipelineConfig& config);
/// Overlay fields present in `doc` onto `config` (unknown keys rejected).
void config_merge_json(PipelineConfig& config, const Json& doc);

// --- files and schema checking --------------------------------------------

Json load_json(const std::filesystem::path& path);
void save_json(const Json& doc, const std::filesystem::path& path);

/// Minimal structural validator for the shipped schema files: supports
/// type/properties/required/items/enum recursively.  Returns human-readable
/// violations (empty = valid).
std::vector<std::string> schema_check(const Json& doc, const Json& schema);

}  // namespace primht
