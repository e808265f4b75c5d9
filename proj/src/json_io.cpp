#include "rvlm/json_io.hpp"

#include <string>
#include <vector>

#include "rvlm/errors.hpp"

namespace rvlm {

void to_json(nlohmann::json& j, const BBox& b) {
    j = nlohmann::json::array({b.xmin, b.ymin, b.xmax, b.ymax});
}

void from_json(const nlohmann::json& j, BBox& b) {
    if (!j.is_array() || j.size() != 4) throw SchemaError("box must be an array of 4 numbers");
    for (const auto& v : j) {
        if (!v.is_number()) throw SchemaError("box must be an array of 4 numbers");
    }
    b = make_box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

void to_json(nlohmann::json& j, const PointCoord& p) { j = nlohmann::json::array({p.x, p.y}); }

void from_json(const nlohmann::json& j, PointCoord& p) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw SchemaError("point must be an array of 2 numbers");
    }
    p = PointCoord{j[0].get<double>(), j[1].get<double>(), std::nullopt};
}

void to_json(nlohmann::json& j, const CropSpec& c) {
    j = nlohmann::json{{"xmin", c.xmin},
                       {"ymin", c.ymin},
                       {"xmax", c.xmax},
                       {"ymax", c.ymax},
                       {"width", c.source.width},
                       {"height", c.source.height}};
}

void from_json(const nlohmann::json& j, CropSpec& c) {
    const ImageDims dims = make_dims(require_field<int>(j, "width"), require_field<int>(j, "height"));
    c = make_crop(require_field<int>(j, "xmin"), require_field<int>(j, "ymin"),
                  require_field<int>(j, "xmax"), require_field<int>(j, "ymax"), dims);
}

nlohmann::json pseudo_set_to_json(const PseudoLabelSet& set) {
    return nlohmann::json{{"gt", set.gt},
                          {"boxes", set.boxes},
                          {"gious", set.gious},
                          {"weights", set.weights},
                          {"seed", set.seed}};
}

PseudoLabelSet pseudo_set_from_json(const nlohmann::json& j) {
    PseudoLabelSet set;
    set.gt = require_field<BBox>(j, "gt");
    set.boxes = require_field<std::vector<BBox>>(j, "boxes");
    set.gious = require_field<std::vector<double>>(j, "gious");
    set.weights = require_field<std::vector<double>>(j, "weights");
    set.seed = j.value("seed", std::uint64_t{0});
    if (set.gious.size() != set.boxes.size() || set.weights.size() != set.boxes.size()) {
        throw SchemaError("boxes, gious and weights must have equal length");
    }
    return set;
}

template <typename T>
T require_field(const nlohmann::json& j, const char* name) {
    if (!j.is_object() || !j.contains(name)) {
        throw SchemaError(std::string("missing field '") + name + "'");
    }
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("field '") + name + "': " + e.what());
    } catch (const GeometryError& e) {
        throw SchemaError(std::string("field '") + name + "': " + e.what());
    }
}

template bool require_field<bool>(const nlohmann::json&, const char*);
template int require_field<int>(const nlohmann::json&, const char*);
template double require_field<double>(const nlohmann::json&, const char*);
template std::size_t require_field<std::size_t>(const nlohmann::json&, const char*);
template std::string require_field<std::string>(const nlohmann::json&, const char*);
template BBox require_field<BBox>(const nlohmann::json&, const char*);
template PointCoord require_field<PointCoord>(const nlohmann::json&, const char*);
template CropSpec require_field<CropSpec>(const nlohmann::json&, const char*);
template std::vector<BBox> require_field<std::vector<BBox>>(const nlohmann::json&, const char*);
template std::vector<double> require_field<std::vector<double>>(const nlohmann::json&, const char*);
template std::vector<int> require_field<std::vector<int>>(const nlohmann::json&, const char*);
template nlohmann::json require_field<nlohmann::json>(const nlohmann::json&, const char*);

}  // namespace rvlm
