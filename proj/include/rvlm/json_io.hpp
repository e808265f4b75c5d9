#pragma once

#include <json.hpp>

#include "rvlm/geometry.hpp"
#include "rvlm/pseudo_label.hpp"

namespace rvlm {

// Boxes serialize as [xmin, ymin, xmax, ymax]; the space tag is not written
// (callers know which space a field holds).
void to_json(nlohmann::json& j, const BBox& b);
void from_json(const nlohmann::json& j, BBox& b);

void to_json(nlohmann::json& j, const PointCoord& p);
void from_json(const nlohmann::json& j, PointCoord& p);

void to_json(nlohmann::json& j, const CropSpec& c);
void from_json(const nlohmann::json& j, CropSpec& c);

/// {gt, boxes[], gious[], weights[], seed}
nlohmann::json pseudo_set_to_json(const PseudoLabelSet& set);
PseudoLabelSet pseudo_set_from_json(const nlohmann::json& j);

/// Reads a required field, throwing SchemaError that names it.
template <typename T>
T require_field(const nlohmann::json& j, const char* name);

}  // namespace rvlm
