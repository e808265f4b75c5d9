#include "rvlm/zoom_data.hpp"

#include <cstdio>
#include <fstream>
#include <limits>

#include <opencv2/core.hpp>

#include "rvlm/errors.hpp"
#include "rvlm/image.hpp"
#include "rvlm/json_io.hpp"
#include "rvlm/pseudo_label.hpp"

namespace rvlm {

namespace {

constexpr std::array<std::string_view, kZoomTemplateCount> kTemplates{
    "Given the zoomed-in view centered on the initial prediction, predict a detailed bounding box "
    "for [INSTRUCTION]",
    "This is a zoomed-in view around the initial prediction. Predict a precise bounding box for "
    "[INSTRUCTION]",
    "The image is magnified around a first guess of the target. Give the refined bounding box for "
    "[INSTRUCTION]",
    "Within this enlarged region centered on the initial prediction, output the bounding box of "
    "[INSTRUCTION]",
    "A zoomed-in region proposal is shown. Refine the bounding box of the element for [INSTRUCTION]",
};

constexpr std::string_view kPlaceholder = "[INSTRUCTION]";

std::string k_key(double k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", k);
    return buf;
}

}  // namespace

std::string_view zoom_template(std::size_t template_id) {
    if (template_id >= kTemplates.size()) {
        throw Error("zoom template id " + std::to_string(template_id) + " out of range");
    }
    return kTemplates[template_id];
}

std::string render_zoom_instruction(std::size_t template_id, std::string_view instruction) {
    std::string out(zoom_template(template_id));
    const auto pos = out.find(kPlaceholder);
    out.replace(pos, kPlaceholder.size(), instruction);
    return out;
}

BBox perturb_for_zoom(const BBox& gt, double sigma, Rng& rng, std::size_t max_attempts,
                      PerturbStats* stats) {
    if (!(sigma > -1.0 && sigma < 1.0)) throw Error("sigma must lie in (-1, 1)");
    if (!is_valid(gt) || gt.area() <= 0.0) {
        throw GeometryError("perturbation needs a ground truth with positive area");
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
        const BBox cand = perturb_candidates(gt, 1, rng).front();
        const double g = giou(cand, gt);
        best = std::max(best, g);
        if (g >= sigma) {
            if (stats) stats->attempts += attempt;
            return cand;
        }
    }
    if (stats) stats->attempts += max_attempts;
    throw ExhaustionError(max_attempts, best);
}

std::string_view to_string(DropReason r) noexcept {
    switch (r) {
        case DropReason::gt_outside_crop: return "gt_outside_crop";
        case DropReason::low_visibility: return "low_visibility";
        case DropReason::unreadable_image: return "unreadable_image";
        case DropReason::perturb_exhausted: return "perturb_exhausted";
    }
    return "unknown";
}

ZoomOutcome make_zoom_sample(const GroundingSample& s, ImageDims dims, const BBox& perturbed, double k,
                             std::size_t template_id) {
    ZoomSample z;
    z.source = s;
    z.perturbed = perturbed;
    z.k = k;
    z.template_id = template_id;
    z.crop = zoom_region(dims, perturbed, k);
    z.label_view_unclamped = to_view(s.gt, z.crop);
    z.label_view = clamp01(z.label_view_unclamped);
    z.instruction_rendered = render_zoom_instruction(template_id, s.instruction);

    const double full = z.label_view_unclamped.area();
    const double visible = z.label_view.area();
    if (full > 0.0) {
        if (visible <= 0.0) return {std::nullopt, DropReason::gt_outside_crop};
        if (visible / full < kMinVisibleFraction) return {std::nullopt, DropReason::low_visibility};
    } else if (!crop_contains(z.crop, s.gt)) {
        return {std::nullopt, DropReason::gt_outside_crop};
    }
    return {std::move(z), std::nullopt};
}

nlohmann::json stats_to_json(const PipelineStats& s, const PipelineConfig& cfg) {
    return nlohmann::json{{"inputs", s.inputs},
                          {"requested", s.requested},
                          {"emitted", s.emitted},
                          {"dropped", s.dropped},
                          {"drops_by_reason", s.drops_by_reason},
                          {"emitted_per_k", s.emitted_per_k},
                          {"perturb_attempts", s.perturb_attempts},
                          {"perturb_accepted", s.perturb_accepted},
                          {"acceptance_rate", s.acceptance_rate()},
                          {"resampling", kResampling},
                          {"config",
                           {{"ks", cfg.ks},
                            {"sigma", cfg.sigma},
                            {"seed", cfg.seed},
                            {"samples_per_gt", cfg.samples_per_gt},
                            {"max_attempts", cfg.max_attempts}}}};
}

namespace {

struct ItemResult {
    std::optional<ZoomSample> sample;
    std::optional<DropReason> drop;
    std::size_t attempts = 0;
    bool accepted = false;
    std::string note;
};

std::vector<ItemResult> process_input(const GroundingSample& s, std::size_t index,
                                      const PipelineConfig& cfg) {
    std::vector<ItemResult> out(cfg.samples_per_gt);
    cv::Mat pixels;
    std::optional<ImageDims> dims = s.dims;
    try {
        if (!cfg.image_dir.empty()) {
            pixels = load_image(s.image_path);
            dims = dims_of(pixels);
        }
        if (!dims) throw IoError(s.image_path, "no pixels and no width/height in the record");
    } catch (const Error& e) {
        for (auto& r : out) {
            r.drop = DropReason::unreadable_image;
            r.note = e.what();
        }
        return out;
    }

    for (std::size_t rep = 0; rep < cfg.samples_per_gt; ++rep) {
        auto& r = out[rep];
        try {
            Rng rng = stream_for(cfg.seed, index * cfg.samples_per_gt + rep);
            std::uniform_int_distribution<std::size_t> pick_k(0, cfg.ks.size() - 1);
            std::uniform_int_distribution<std::size_t> pick_tpl(0, kZoomTemplateCount - 1);
            const double k = cfg.ks[pick_k(rng)];
            const std::size_t tpl = pick_tpl(rng);

            PerturbStats ps;
            BBox perturbed;
            try {
                perturbed = perturb_for_zoom(s.gt, cfg.sigma, rng, cfg.max_attempts, &ps);
            } catch (const ExhaustionError& e) {
                r.attempts = ps.attempts;
                r.drop = DropReason::perturb_exhausted;
                r.note = e.what();
                continue;
            }
            r.attempts = ps.attempts;
            r.accepted = true;

            auto outcome = make_zoom_sample(s, *dims, perturbed, k, tpl);
            if (!outcome.sample) {
                r.drop = outcome.dropped;
                continue;
            }
            if (!pixels.empty()) {
                char name[64];
                std::snprintf(name, sizeof name, "zoom_%06zu_%zu.png", index, rep);
                const auto path = cfg.image_dir / name;
                save_image(zoom_view(pixels, outcome.sample->crop), path);
                outcome.sample->zoomed_image_path = path.string();
            }
            r.sample = std::move(outcome.sample);
        } catch (const Error& e) {
            r.sample.reset();
            r.drop = DropReason::unreadable_image;
            r.note = e.what();
        }
    }
    return out;
}

}  // namespace

PipelineResult run_pipeline(const std::vector<GroundingSample>& inputs, const PipelineConfig& cfg) {
    if (cfg.ks.empty()) throw Error("at least one zoom factor is required");
    for (double k : cfg.ks) {
        if (!(k > 1.0)) throw Error("zoom factors must exceed 1");
    }
    if (!(cfg.sigma > -1.0 && cfg.sigma < 1.0)) throw Error("sigma must lie in (-1, 1)");
    if (!cfg.image_dir.empty()) std::filesystem::create_directories(cfg.image_dir);

    std::vector<std::vector<ItemResult>> per_input(inputs.size());
    const auto n = static_cast<std::ptrdiff_t>(inputs.size());
    // process_input converts every rvlm::Error into a drop; nothing escapes the region.
#pragma omp parallel for schedule(dynamic) num_threads(cfg.jobs > 0 ? cfg.jobs : 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        per_input[static_cast<std::size_t>(i)] =
            process_input(inputs[static_cast<std::size_t>(i)], static_cast<std::size_t>(i), cfg);
    }

    PipelineResult result;
    auto& st = result.stats;
    st.inputs = inputs.size();
    for (std::size_t i = 0; i < per_input.size(); ++i) {
        for (std::size_t rep = 0; rep < per_input[i].size(); ++rep) {
            auto& r = per_input[i][rep];
            ++st.requested;
            st.perturb_attempts += r.attempts;
            st.perturb_accepted += r.accepted ? 1 : 0;
            if (r.sample) {
                ++st.emitted;
                ++st.emitted_per_k[k_key(r.sample->k)];
                result.samples.push_back(std::move(*r.sample));
            } else {
                ++st.dropped;
                const auto reason = r.drop.value_or(DropReason::unreadable_image);
                ++st.drops_by_reason[std::string(to_string(reason))];
                st.log.push_back("sample " + std::to_string(i) + "/" + std::to_string(rep) +
                                 " dropped: " + std::string(to_string(reason)) +
                                 (r.note.empty() ? "" : " (" + r.note + ")"));
            }
        }
    }
    return result;
}

nlohmann::json zoom_sample_to_json(const ZoomSample& z) {
    return nlohmann::json{{"image_path", z.zoomed_image_path},
                          {"instruction", z.instruction_rendered},
                          {"bbox", z.label_view},
                          {"source_image_path", z.source.image_path},
                          {"source_instruction", z.source.instruction},
                          {"gt", z.source.gt},
                          {"perturbed", z.perturbed},
                          {"crop", z.crop},
                          {"k", z.k},
                          {"template_id", z.template_id},
                          {"platform", to_string(z.source.platform)},
                          {"element_type", to_string(z.source.element_type)}};
}

PipelineStats run_pipeline_files(const std::filesystem::path& in_path,
                                 const std::filesystem::path& out_path, const PipelineConfig& cfg) {
    const auto inputs = read_dataset(in_path);
    auto result = run_pipeline(inputs, cfg);

    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError(out_path.string(), "cannot open for writing");
    for (const auto& z : result.samples) out << zoom_sample_to_json(z).dump() << '\n';
    if (!out) throw IoError(out_path.string(), "write failed");

    auto stats_path = out_path;
    stats_path += ".stats.json";
    std::ofstream sout(stats_path, std::ios::trunc);
    if (!sout) throw IoError(stats_path.string(), "cannot open for writing");
    sout << stats_to_json(result.stats, cfg).dump(2) << '\n';
    return result.stats;
}

}  // namespace rvlm
