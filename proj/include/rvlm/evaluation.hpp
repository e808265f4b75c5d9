#pragma once

// Grounding evaluation: click accuracy with platform/element breakdowns, IoU
// histogram, accuracy per ground-truth size decile, and how often the stage-1
// region proposal already contained the target among failed samples.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rvlm/dataset.hpp"
#include "rvlm/geometry.hpp"
#include "rvlm/inference.hpp"

namespace rvlm {

enum class CorrectnessRule { center_in_gt, iou_threshold };

struct EvalConfig {
    GroundConfig ground;
    CorrectnessRule rule = CorrectnessRule::center_in_gt;
    double iou_tau = 0.5;
    int jobs = 1;
    std::uint64_t seed = 0;
};

struct EvalRecord {
    std::size_t id = 0;
    Mode mode = Mode::box;
    BBox gt;
    Platform platform = Platform::other;
    ElementType element_type = ElementType::other;
    std::optional<Prediction> final;
    std::optional<Prediction> stage1;
    std::optional<CropSpec> proposal;  // region proposal from the stage-1 box
    bool correct = false;
    std::optional<double> iou;  // box mode only
    double gt_area_fraction = 0.0;
    std::size_t backend_calls = 0;
    bool fallback_used = false;
    std::string error;
    double latency_ms = 0.0;  // wall clock; excluded from report.json
};

nlohmann::json record_to_json(const EvalRecord& r);
EvalRecord record_from_json(const nlohmann::json& j);

struct Bucket {
    std::size_t n = 0;
    std::size_t correct = 0;
    double accuracy() const noexcept { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
};

struct EvalReport {
    Mode mode = Mode::box;
    Bucket overall;
    std::map<std::string, Bucket> by_platform;
    std::map<std::string, Bucket> by_element_type;
    std::optional<std::array<std::size_t, 10>> iou_histogram;
    std::optional<double> mean_iou;
    std::array<Bucket, 10> size_deciles{};
    std::optional<double> stage1_recall_among_failures;
    std::size_t failures = 0;
    std::size_t errors = 0;
    std::size_t backend_calls = 0;
    std::size_t fallbacks = 0;
    nlohmann::json config;
};

/// Builds a backend for sample `index`; the simulated oracle needs the sample's
/// ground truth, a wire backend ignores it.
using BackendFactory =
    std::function<std::unique_ptr<Backend>(std::size_t index, const GroundingSample& sample)>;

/// Grounds every sample; per-sample failures become incorrect records tagged
/// with the error. Records come back in input order.
std::vector<EvalRecord> evaluate_records(const std::vector<GroundingSample>& samples,
                                         const BackendFactory& factory, const EvalConfig& cfg);
std::vector<EvalRecord> evaluate_records_serial(const std::vector<GroundingSample>& samples,
                                                const BackendFactory& factory,
                                                const EvalConfig& cfg);

/// Bins [0,0.1), ..., [0.9,1.0]. nullopt in point mode.
std::optional<std::array<std::size_t, 10>> iou_histogram(const std::vector<EvalRecord>& records,
                                                         Mode mode);
/// Deciles of gt_area_fraction ranks (ties broken by record order).
std::array<Bucket, 10> size_percentile_accuracy(const std::vector<EvalRecord>& records);
/// Among incorrect records, the fraction whose gt lies inside the stage-1
/// region proposal. nullopt in point mode or with no failures.
std::optional<double> stage1_recall(const std::vector<EvalRecord>& records, Mode mode);

EvalReport summarize(const std::vector<EvalRecord>& records, Mode mode,
                     nlohmann::json config = nlohmann::json::object());

EvalReport evaluate(const std::vector<GroundingSample>& samples, const BackendFactory& factory,
                    const EvalConfig& cfg);

nlohmann::json report_to_json(const EvalReport& r);

/// report.json, records.jsonl, histogram.csv, deciles.csv, breakdown.csv and
/// timing.json (the only file with wall-clock numbers).
void write_report(const EvalReport& report, const std::vector<EvalRecord>& records,
                  const std::filesystem::path& dir);

/// Re-derives the report from a saved records.jsonl.
EvalReport analyze(const std::filesystem::path& records_jsonl);

nlohmann::json eval_config_to_json(const EvalConfig& cfg);

/// Writes the screenshot with gt (green) and prediction (red) drawn on it.
void annotate_to_file(const std::filesystem::path& image_path, const BBox& pred, const BBox& gt,
                      const std::filesystem::path& out_path);

}  // namespace rvlm
