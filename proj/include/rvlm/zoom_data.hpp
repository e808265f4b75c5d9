#pragma once

// Zoom-in instruction data: simulate a noisy first-stage prediction around
// each ground truth, crop and zoom the screenshot around it, remap the label
// into the zoomed view and pair it with a zoom instruction.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rvlm/dataset.hpp"
#include "rvlm/geometry.hpp"
#include "rvlm/rng.hpp"

namespace rvlm {

inline constexpr std::size_t kZoomTemplateCount = 5;

/// Template 0 is the canonical phrasing; 1..4 are paraphrases.
std::string_view zoom_template(std::size_t template_id);

/// Substitutes `[INSTRUCTION]` in the chosen template.
std::string render_zoom_instruction(std::size_t template_id, std::string_view instruction);

struct PerturbStats {
    std::size_t attempts = 0;
};

/// Draws candidates one at a time until one reaches GIoU >= sigma with gt.
/// Throws ExhaustionError after max_attempts.
BBox perturb_for_zoom(const BBox& gt, double sigma, Rng& rng, std::size_t max_attempts = 10000,
                      PerturbStats* stats = nullptr);

enum class DropReason { gt_outside_crop, low_visibility, unreadable_image, perturb_exhausted };
std::string_view to_string(DropReason r) noexcept;

struct ZoomSample {
    GroundingSample source;
    BBox perturbed;
    CropSpec crop;
    double k = 5.0;
    std::size_t template_id = 0;
    std::string zoomed_image_path;
    std::string instruction_rendered;
    BBox label_view;            // clamped to [0,1]
    BBox label_view_unclamped;  // exact to_view(gt, crop)
};

/// Minimum visible fraction of the remapped label before a sample is dropped.
inline constexpr double kMinVisibleFraction = 0.25;

struct ZoomOutcome {
    std::optional<ZoomSample> sample;
    std::optional<DropReason> dropped;
};

/// Pure geometry + templating; no pixels are touched.
ZoomOutcome make_zoom_sample(const GroundingSample& s, ImageDims dims, const BBox& perturbed, double k,
                             std::size_t template_id);

struct PipelineConfig {
    std::vector<double> ks{5.0, 7.0};
    double sigma = -0.2;
    std::uint64_t seed = 0;
    std::size_t samples_per_gt = 1;
    std::size_t max_attempts = 10000;
    /// Directory for zoomed images; empty disables pixel work (dims must then
    /// come from the record's width/height).
    std::filesystem::path image_dir;
    int jobs = 1;
};

struct PipelineStats {
    std::size_t inputs = 0;
    std::size_t requested = 0;
    std::size_t emitted = 0;
    std::size_t dropped = 0;
    std::map<std::string, std::size_t> drops_by_reason;
    std::map<std::string, std::size_t> emitted_per_k;
    std::size_t perturb_attempts = 0;
    std::size_t perturb_accepted = 0;
    std::vector<std::string> log;  // per-sample diagnostics in input order

    double acceptance_rate() const noexcept {
        return perturb_attempts == 0 ? 0.0
                                     : static_cast<double>(perturb_accepted) / perturb_attempts;
    }
};

nlohmann::json stats_to_json(const PipelineStats& s, const PipelineConfig& cfg);

struct PipelineResult {
    std::vector<ZoomSample> samples;  // input order, then replicate order
    PipelineStats stats;
};

/// Every (input, replicate) pair draws from its own RNG stream, so the result
/// does not depend on cfg.jobs.
PipelineResult run_pipeline(const std::vector<GroundingSample>& inputs, const PipelineConfig& cfg);

/// Output JSONL record for one zoom sample.
nlohmann::json zoom_sample_to_json(const ZoomSample& z);

/// Reads the dataset, runs the pipeline, writes JSONL to out_path and the stats
/// JSON next to it (<out_path>.stats.json).
PipelineStats run_pipeline_files(const std::filesystem::path& in_path,
                                 const std::filesystem::path& out_path, const PipelineConfig& cfg);

}  // namespace rvlm
