#pragma once

// Grounding dataset records. JSONL, one object per line:
//   {"image_path": str, "instruction": str, "bbox": [x1,y1,x2,y2] (normalized),
//    "platform": "mobile"|"desktop"|"web"|"other",
//    "element_type": "text"|"icon"|"other",
//    "width": int, "height": int}        <- optional, used when pixels are absent

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rvlm/geometry.hpp"

namespace rvlm {

enum class Platform { mobile, desktop, web, other };
enum class ElementType { text, icon, other };

std::string_view to_string(Platform p) noexcept;
std::string_view to_string(ElementType e) noexcept;
Platform parse_platform(std::string_view s);
ElementType parse_element_type(std::string_view s);

struct GroundingSample {
    std::string image_path;
    std::string instruction;
    BBox gt;
    Platform platform = Platform::other;
    ElementType element_type = ElementType::other;
    std::optional<ImageDims> dims;
};

nlohmann::json sample_to_json(const GroundingSample& s);
GroundingSample sample_from_json(const nlohmann::json& j);

/// Blank lines are skipped; a malformed line throws SchemaError with its line number.
std::vector<GroundingSample> read_dataset(const std::filesystem::path& path);
void write_dataset(const std::vector<GroundingSample>& samples, const std::filesystem::path& path);

/// Reads every non-blank line of a JSONL file as JSON.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace rvlm
