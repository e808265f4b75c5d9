#include "rvlm/dataset.hpp"

#include <fstream>

#include "rvlm/errors.hpp"
#include "rvlm/json_io.hpp"

namespace rvlm {

std::string_view to_string(Platform p) noexcept {
    switch (p) {
        case Platform::mobile: return "mobile";
        case Platform::desktop: return "desktop";
        case Platform::web: return "web";
        case Platform::other: break;
    }
    return "other";
}

std::string_view to_string(ElementType e) noexcept {
    switch (e) {
        case ElementType::text: return "text";
        case ElementType::icon: return "icon";
        case ElementType::other: break;
    }
    return "other";
}

Platform parse_platform(std::string_view s) {
    if (s == "mobile") return Platform::mobile;
    if (s == "desktop") return Platform::desktop;
    if (s == "web") return Platform::web;
    if (s == "other") return Platform::other;
    throw SchemaError("platform: unknown value '" + std::string(s) + "'");
}

ElementType parse_element_type(std::string_view s) {
    if (s == "text") return ElementType::text;
    if (s == "icon") return ElementType::icon;
    if (s == "other") return ElementType::other;
    throw SchemaError("element_type: unknown value '" + std::string(s) + "'");
}

nlohmann::json sample_to_json(const GroundingSample& s) {
    nlohmann::json j{{"image_path", s.image_path},
                     {"instruction", s.instruction},
                     {"bbox", s.gt},
                     {"platform", to_string(s.platform)},
                     {"element_type", to_string(s.element_type)}};
    if (s.dims) {
        j["width"] = s.dims->width;
        j["height"] = s.dims->height;
    }
    return j;
}

GroundingSample sample_from_json(const nlohmann::json& j) {
    GroundingSample s;
    s.image_path = require_field<std::string>(j, "image_path");
    s.instruction = require_field<std::string>(j, "instruction");
    s.gt = require_field<BBox>(j, "bbox");
    s.platform = parse_platform(j.value("platform", std::string("other")));
    s.element_type = parse_element_type(j.value("element_type", std::string("other")));
    if (j.contains("width") || j.contains("height")) {
        try {
            s.dims = make_dims(require_field<int>(j, "width"), require_field<int>(j, "height"));
        } catch (const GeometryError& e) {
            throw SchemaError(std::string("width/height: ") + e.what());
        }
    }
    return s;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    std::vector<nlohmann::json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

std::vector<GroundingSample> read_dataset(const std::filesystem::path& path) {
    const auto rows = read_jsonl(path);
    std::vector<GroundingSample> samples;
    samples.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            samples.push_back(sample_from_json(rows[i]));
        } catch (const SchemaError& e) {
            throw SchemaError(path.string() + ": record " + std::to_string(i) + ": " + e.what());
        }
    }
    return samples;
}

void write_dataset(const std::vector<GroundingSample>& samples, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
    if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace rvlm
