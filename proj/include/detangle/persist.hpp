#pragma once

#include "detangle/analyze.hpp"
#include "detangle/extract.hpp"
#include "detangle/extrapolate.hpp"
#include "detangle/model.hpp"

#include <json.hpp>

#include <string>

namespace detangle {

// Every artifact carries {"format": "detangle.<kind>", "version": N}; a
// missing or different tag is rejected on load. Doubles are written as
// shortest round-trip decimals, so reloads are exact.

inline constexpr int kArtifactVersion = 1;

void check_artifact(const nlohmann::json& doc, const std::string& format);

nlohmann::json extraction_to_json(const ExtractionResult& r);
ExtractionResult extraction_from_json(const nlohmann::json& doc);

nlohmann::json estimate_to_json(const DistEstimate& e);
DistEstimate estimate_from_json(const nlohmann::json& doc);

nlohmann::json model_to_json(const DataModel& m);
DataModel model_from_json(const nlohmann::json& doc);

nlohmann::json representation_to_json(const Representation& r);
Representation representation_from_json(const nlohmann::json& doc);

nlohmann::json extrapolated_to_json(const ExtrapolatedRepresentation& r);
ExtrapolatedRepresentation extrapolated_from_json(const nlohmann::json& doc);

nlohmann::json read_json_file(const std::string& path);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::string& path, const nlohmann::json& doc);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace detangle
