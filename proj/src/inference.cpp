#include "rvlm/inference.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <regex>

#include "rvlm/image.hpp"
#include "rvlm/json_io.hpp"

namespace rvlm {

std::string_view to_string(Mode m) noexcept { return m == Mode::box ? "box" : "point"; }

Mode parse_mode(std::string_view s) {
    if (s == "box") return Mode::box;
    if (s == "point") return Mode::point;
    throw Error("mode must be 'box' or 'point', got '" + std::string(s) + "'");
}

std::string_view to_string(CoordConvention c) noexcept {
    switch (c) {
        case CoordConvention::normalized: return "normalized";
        case CoordConvention::pixel: return "pixel";
        case CoordConvention::percent: return "percent";
        case CoordConvention::per_mille: return "per_mille";
    }
    return "normalized";
}

CoordConvention parse_convention(std::string_view s) {
    if (s == "normalized") return CoordConvention::normalized;
    if (s == "pixel") return CoordConvention::pixel;
    if (s == "percent") return CoordConvention::percent;
    if (s == "per_mille") return CoordConvention::per_mille;
    throw Error("unknown coordinate convention '" + std::string(s) + "'");
}

// ------------------------------------------------------------------ parsing

namespace {

#define RVLM_NUM R"(\s*([-+]?(?:\d+\.?\d*|\.\d+))\s*)"

const std::regex& box_pair_re() {
    static const std::regex re(R"(\()" RVLM_NUM "," RVLM_NUM R"(\)\s*,?\s*\()" RVLM_NUM "," RVLM_NUM
                               R"(\))");
    return re;
}
const std::regex& box_quad_re() {
    static const std::regex re(R"([\(\[])" RVLM_NUM "," RVLM_NUM "," RVLM_NUM "," RVLM_NUM R"([\)\]])");
    return re;
}
const std::regex& point_re() {
    static const std::regex re(R"([\(\[])" RVLM_NUM "," RVLM_NUM R"([\)\]])");
    return re;
}

#undef RVLM_NUM

template <std::size_t N>
std::optional<std::pair<std::ptrdiff_t, std::array<double, N>>> first_match(const std::string& text,
                                                                             const std::regex& re) {
    std::smatch m;
    if (!std::regex_search(text, m, re)) return std::nullopt;
    std::array<double, N> v{};
    for (std::size_t i = 0; i < N; ++i) v[i] = std::stod(m[i + 1].str());
    return std::pair{m.position(0), v};
}

template <std::size_t N>
std::array<double, N> normalize(std::array<double, N> v, CoordConvention conv, ImageDims view,
                                const std::string& text) {
    const bool unit = std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
    if (unit) return v;
    for (double x : v) {
        if (x < 0.0 || x > 1000.0) throw ParseError("coordinate out of range", text);
    }
    for (std::size_t i = 0; i < N; ++i) {
        switch (conv) {
            case CoordConvention::normalized:
                throw ParseError("coordinates outside [0,1] under the normalized convention", text);
            case CoordConvention::pixel:
                v[i] /= (i % 2 == 0) ? view.width : view.height;
                break;
            case CoordConvention::percent:
                v[i] /= 100.0;
                break;
            case CoordConvention::per_mille:
                v[i] /= 1000.0;
                break;
        }
        v[i] = std::clamp(v[i], 0.0, 1.0);
    }
    return v;
}

}  // namespace

Prediction parse_coords(std::string_view text_view, Mode mode, CoordConvention convention,
                        ImageDims view) {
    const std::string text(text_view);
    if (mode == Mode::box) {
        auto pair = first_match<4>(text, box_pair_re());
        auto quad = first_match<4>(text, box_quad_re());
        if (!pair && !quad) throw ParseError("no box coordinates found", text);
        const auto& hit = (pair && (!quad || pair->first <= quad->first)) ? *pair : *quad;
        const auto v = normalize(hit.second, convention, view, text);
        return BBox{std::min(v[0], v[2]), std::min(v[1], v[3]), std::max(v[0], v[2]),
                    std::max(v[1], v[3]), std::nullopt};
    }
    auto hit = first_match<2>(text, point_re());
    if (!hit) throw ParseError("no point coordinates found", text);
    const auto v = normalize(hit->second, convention, view, text);
    return PointCoord{v[0], v[1], std::nullopt};
}

namespace {

std::string fmt_num(double v, int decimals) {
    char buf[40];
    if (decimals < 0) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
    } else {
        std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    }
    return buf;
}

std::string fmt_point(double x, double y, int decimals) {
    return "(" + fmt_num(x, decimals) + "," + fmt_num(y, decimals) + ")";
}

}  // namespace

std::string format_prediction(const Prediction& p, int decimals) {
    if (const auto* b = std::get_if<BBox>(&p)) {
        return fmt_point(b->xmin, b->ymin, decimals) + "," + fmt_point(b->xmax, b->ymax, decimals);
    }
    const auto& pt = std::get<PointCoord>(p);
    return fmt_point(pt.x, pt.y, decimals);
}

// ---------------------------------------------------------------- simulator

SimOracleBackend::SimOracleBackend(SimOracleConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.rng_seed) {
    if (cfg_.noise_scale < 0.0) throw Error("noise_scale must be non-negative");
    if (!(cfg_.parse_failure_rate >= 0.0 && cfg_.parse_failure_rate <= 1.0)) {
        throw Error("parse_failure_rate must lie in [0,1]");
    }
}

std::string SimOracleBackend::complete(const BackendRequest& req) {
    ++calls_;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const bool fail = unit(rng_) < cfg_.parse_failure_rate;

    const BBox view_gt = to_view(cfg_.hidden_gt, req.view);
    const double s = cfg_.noise_scale;
    Prediction answer;
    if (req.mode == Mode::box) {
        double c[4] = {view_gt.xmin, view_gt.ymin, view_gt.xmax, view_gt.ymax};
        for (double& v : c) v += s * noise(rng_);
        answer = clamp01(BBox{std::min(c[0], c[2]), std::min(c[1], c[3]), std::max(c[0], c[2]),
                              std::max(c[1], c[3]), std::nullopt});
    } else {
        const PointCoord ctr = center(view_gt);
        const double dx = s * noise(rng_);
        const double dy = s * noise(rng_);
        answer = clamp01(PointCoord{ctr.x + dx, ctr.y + dy, std::nullopt});
    }
    if (fail) return "I cannot determine the location of that element.";
    return format_prediction(answer, cfg_.decimals);
}

// -------------------------------------------------------------- orchestrator

std::string default_base_template(Mode mode) {
    return std::string("In this UI screenshot, what is the position of the element corresponding "
                       "to the command \"{instruction}\" (with ") +
           (mode == Mode::box ? "bbox" : "point") + ")?";
}

std::string default_zoom_template(Mode mode) {
    return std::string("Given the zoomed-in view centered on the initial prediction, predict a "
                       "detailed ") +
           (mode == Mode::box ? "bounding box" : "point") + " for {instruction}";
}

namespace {

void replace_all(std::string& s, std::string_view what, std::string_view with) {
    for (auto pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos + with.size())) {
        s.replace(pos, what.size(), with);
    }
}

std::string render_prompt(const std::string& tpl, std::string_view instruction,
                          const std::string& history_text) {
    std::string out = tpl;
    replace_all(out, "{instruction}", instruction);
    if (out.find("{history}") != std::string::npos) {
        replace_all(out, "{history}", history_text);
    } else if (!history_text.empty()) {
        out += "\n" + history_text;
    }
    return out;
}

std::string render_history(const std::vector<HistoryAction>& history, const CropSpec* view) {
    if (history.empty()) return {};
    std::string out = "Previous actions:";
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& h = history[i];
        const PointCoord p = view ? to_view(h.point, *view) : h.point;
        out += (i == 0 ? " " : "; ") + h.action + " " + fmt_point(p.x, p.y, 2);
    }
    return out;
}

Prediction tag_space(Prediction p, const CropSpec& crop) {
    std::visit([&](auto& v) { v.space = crop; }, p);
    return p;
}

Prediction invert(const Prediction& p, const CropSpec& crop) {
    return std::visit([&](const auto& v) -> Prediction { return from_view(v, crop); }, p);
}

GroundingResult run_chain(Backend& backend, const Screenshot& shot, std::string_view instruction,
                          const std::vector<HistoryAction>& history, const GroundConfig& cfg) {
    if (cfg.stages < 1) throw Error("stages must be at least 1");
    const ImageDims dims = shot.pixels ? dims_of(*shot.pixels) : shot.dims;
    const CropSpec full{0, 0, dims.width, dims.height, dims};
    const std::string base_tpl = cfg.base_template.empty() ? default_base_template(cfg.mode)
                                                           : cfg.base_template;
    const std::string zoom_tpl = cfg.zoom_template.empty() ? default_zoom_template(cfg.mode)
                                                           : cfg.zoom_template;
    std::vector<PointCoord> history_points;
    for (const auto& h : history) history_points.push_back(h.point);

    GroundingResult result;
    std::optional<Prediction> last_good;

    for (int s = 1; s <= cfg.stages; ++s) {
        StageRecord rec;
        rec.stage = s;
        if (s == 1) {
            rec.crop = full;
        } else if (const auto* b = std::get_if<BBox>(&*last_good)) {
            rec.crop = zoom_region(dims, *b, cfg.k);
        } else {
            rec.crop = point_region(dims, std::get<PointCoord>(*last_good), cfg.point_fraction);
        }
        if (s > 1 && !history_points.empty()) rec.crop = expand_to_include(rec.crop, history_points);

        cv::Mat zoomed;
        const cv::Mat* view_pixels = shot.pixels;
        if (s > 1 && shot.pixels) {
            zoomed = zoom_view(*shot.pixels, rec.crop);
            view_pixels = &zoomed;
        }
        rec.prompt = render_prompt(s == 1 ? base_tpl : zoom_tpl, instruction,
                                   render_history(history, s == 1 ? nullptr : &rec.crop));

        BackendRequest req{rec.prompt, view_pixels, dims, rec.crop, cfg.mode, s};
        const auto t0 = std::chrono::steady_clock::now();
        try {
            for (int attempt = 0;; ++attempt) {
                ++result.backend_calls;
                try {
                    rec.raw_text = backend.complete(req);
                    break;
                } catch (const TransportError&) {
                    if (attempt >= cfg.transport_retries) throw;
                }
            }
            const Prediction parsed = parse_coords(rec.raw_text, cfg.mode, backend.convention(), dims);
            if (s == 1) {
                rec.parsed = parsed;
                rec.inverted = parsed;
            } else {
                rec.parsed = tag_space(parsed, rec.crop);
                rec.inverted = invert(*rec.parsed, rec.crop);
            }
        } catch (const Error& e) {
            rec.error = e.what();
        }
        rec.latency = std::chrono::steady_clock::now() - t0;

        if (rec.ok()) {
            last_good = rec.inverted;
        } else if (s == 1) {
            throw GroundingError("stage 1 failed: " + rec.error, std::move(rec));
        } else {
            result.fallback_used = true;
        }
        result.stages.push_back(std::move(rec));
    }
    result.final = *last_good;
    return result;
}

}  // namespace

GroundingResult ground_multistage(Backend& backend, const Screenshot& shot,
                                  std::string_view instruction, const GroundConfig& cfg) {
    return run_chain(backend, shot, instruction, {}, cfg);
}

GroundingResult ground_navigation(Backend& backend, const Screenshot& shot,
                                  std::string_view instruction,
                                  const std::vector<HistoryAction>& history, const GroundConfig& cfg) {
    return run_chain(backend, shot, instruction, history, cfg);
}

nlohmann::json prediction_to_json(const Prediction& p) {
    return std::visit([](const auto& v) { return nlohmann::json(v); }, p);
}

nlohmann::json result_to_json(const GroundingResult& r, Mode mode) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : r.stages) {
        nlohmann::json js{{"stage", s.stage},
                          {"prompt", s.prompt},
                          {"raw_text", s.raw_text},
                          {"crop", s.crop},
                          {"parsed", s.parsed ? prediction_to_json(*s.parsed) : nlohmann::json()},
                          {"inverted", s.inverted ? prediction_to_json(*s.inverted) : nlohmann::json()}};
        if (!s.error.empty()) js["error"] = s.error;
        stages.push_back(std::move(js));
    }
    return nlohmann::json{{"mode", to_string(mode)},
                          {"stages", stages},
                          {"final", prediction_to_json(r.final)},
                          {"fallback_used", r.fallback_used},
                          {"backend_calls", r.backend_calls}};
}

}  // namespace rvlm
