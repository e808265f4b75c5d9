#include "rvlm/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rvlm/errors.hpp"
#include "rvlm/image.hpp"
#include "rvlm/json_io.hpp"

namespace rvlm {

using nlohmann::json;

namespace {

std::optional<Prediction> prediction_from_json(const json& j, Mode mode) {
    if (j.is_null()) return std::nullopt;
    if (mode == Mode::box) return j.get<BBox>();
    return j.get<PointCoord>();
}

json optional_prediction(const std::optional<Prediction>& p) {
    return p ? prediction_to_json(*p) : json();
}

EvalRecord evaluate_one(const GroundingSample& sample, std::size_t index,
                        const BackendFactory& factory, const EvalConfig& cfg) {
    EvalRecord rec;
    rec.id = index;
    rec.mode = cfg.ground.mode;
    rec.gt = sample.gt;
    rec.platform = sample.platform;
    rec.element_type = sample.element_type;
    rec.gt_area_fraction = sample.gt.area();
    if (rec.mode == Mode::box) rec.iou = 0.0;

    const auto t0 = std::chrono::steady_clock::now();
    try {
        cv::Mat pixels;
        Screenshot shot;
        if (std::filesystem::exists(sample.image_path)) {
            pixels = load_image(sample.image_path);
            shot.pixels = &pixels;
            shot.dims = dims_of(pixels);
        } else if (sample.dims) {
            shot.dims = *sample.dims;
        } else {
            throw IoError(sample.image_path, "image not found and no width/height given");
        }
        auto backend = factory(index, sample);
        GroundingResult result;
        try {
            result = ground_multistage(*backend, shot, sample.instruction, cfg.ground);
        } catch (const GroundingError&) {
            ++rec.backend_calls;  // the failed stage-1 attempt
            throw;
        }
        rec.backend_calls = result.backend_calls;
        rec.fallback_used = result.fallback_used;
        rec.final = result.final;
        rec.stage1 = result.stages.front().inverted;

        if (const auto* box = std::get_if<BBox>(&result.final)) {
            rec.iou = iou(*box, sample.gt);
            rec.correct = cfg.rule == CorrectnessRule::center_in_gt ? contains(sample.gt, center(*box))
                                                                    : *rec.iou >= cfg.iou_tau;
            rec.proposal = zoom_region(shot.dims, std::get<BBox>(*rec.stage1), cfg.ground.k);
        } else {
            rec.correct = contains(sample.gt, std::get<PointCoord>(result.final));
        }
    } catch (const std::exception& e) {
        rec.error = e.what();
        rec.correct = false;
    }
    rec.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

void add(Bucket& b, bool correct) {
    ++b.n;
    b.correct += correct ? 1 : 0;
}

json bucket_json(const Bucket& b) {
    return json{{"n", b.n}, {"correct", b.correct}, {"accuracy", b.accuracy()}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out << text;
    if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace

json record_to_json(const EvalRecord& r) {
    json j{{"id", r.id},
           {"mode", to_string(r.mode)},
           {"gt", r.gt},
           {"platform", to_string(r.platform)},
           {"element_type", to_string(r.element_type)},
           {"final", optional_prediction(r.final)},
           {"stage1", optional_prediction(r.stage1)},
           {"proposal", r.proposal ? json(*r.proposal) : json()},
           {"correct", r.correct},
           {"iou", r.iou ? json(*r.iou) : json()},
           {"gt_area_fraction", r.gt_area_fraction},
           {"backend_calls", r.backend_calls},
           {"fallback_used", r.fallback_used}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

EvalRecord record_from_json(const json& j) {
    EvalRecord r;
    r.id = require_field<std::size_t>(j, "id");
    r.mode = parse_mode(j.value("mode", std::string("box")));
    r.gt = require_field<BBox>(j, "gt");
    r.platform = parse_platform(j.value("platform", std::string("other")));
    r.element_type = parse_element_type(j.value("element_type", std::string("other")));
    r.final = prediction_from_json(j.value("final", json()), r.mode);
    r.stage1 = prediction_from_json(j.value("stage1", json()), r.mode);
    if (j.contains("proposal") && !j["proposal"].is_null()) r.proposal = j["proposal"].get<CropSpec>();
    r.correct = require_field<bool>(j, "correct");
    if (j.contains("iou") && !j["iou"].is_null()) r.iou = j["iou"].get<double>();
    r.gt_area_fraction = require_field<double>(j, "gt_area_fraction");
    r.backend_calls = j.value("backend_calls", std::size_t{0});
    r.fallback_used = j.value("fallback_used", false);
    r.error = j.value("error", std::string{});
    return r;
}

std::vector<EvalRecord> evaluate_records(const std::vector<GroundingSample>& samples,
                                         const BackendFactory& factory, const EvalConfig& cfg) {
    std::vector<EvalRecord> records(samples.size());
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
    // evaluate_one swallows every std::exception into the record.
#pragma omp parallel for schedule(dynamic) num_threads(cfg.jobs > 0 ? cfg.jobs : 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        records[idx] = evaluate_one(samples[idx], idx, factory, cfg);
    }
    return records;
}

std::vector<EvalRecord> evaluate_records_serial(const std::vector<GroundingSample>& samples,
                                                const BackendFactory& factory,
                                                const EvalConfig& cfg) {
    std::vector<EvalRecord> records;
    records.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        records.push_back(evaluate_one(samples[i], i, factory, cfg));
    }
    return records;
}

std::optional<std::array<std::size_t, 10>> iou_histogram(const std::vector<EvalRecord>& records,
                                                         Mode mode) {
    if (mode != Mode::box) return std::nullopt;
    std::array<std::size_t, 10> bins{};
    for (const auto& r : records) {
        const double v = std::clamp(r.iou.value_or(0.0), 0.0, 1.0);
        const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(std::floor(v * 10.0)));
        ++bins[bin];
    }
    return bins;
}

std::array<Bucket, 10> size_percentile_accuracy(const std::vector<EvalRecord>& records) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].gt_area_fraction < records[b].gt_area_fraction;
    });
    std::array<Bucket, 10> deciles{};
    const std::size_t n = records.size();
    for (std::size_t rank = 0; rank < n; ++rank) {
        add(deciles[rank * 10 / n], records[order[rank]].correct);
    }
    return deciles;
}

std::optional<double> stage1_recall(const std::vector<EvalRecord>& records, Mode mode) {
    if (mode != Mode::box) return std::nullopt;
    std::size_t failures = 0;
    std::size_t inside = 0;
    for (const auto& r : records) {
        if (r.correct) continue;
        ++failures;
        if (r.proposal && crop_contains(*r.proposal, r.gt)) ++inside;
    }
    if (failures == 0) return std::nullopt;
    return static_cast<double>(inside) / static_cast<double>(failures);
}

EvalReport summarize(const std::vector<EvalRecord>& records, Mode mode, json config) {
    EvalReport rep;
    rep.mode = mode;
    rep.config = std::move(config);
    double iou_sum = 0.0;
    for (const auto& r : records) {
        add(rep.overall, r.correct);
        add(rep.by_platform[std::string(to_string(r.platform))], r.correct);
        add(rep.by_element_type[std::string(to_string(r.element_type))], r.correct);
        rep.failures += r.correct ? 0 : 1;
        rep.errors += r.error.empty() ? 0 : 1;
        rep.backend_calls += r.backend_calls;
        rep.fallbacks += r.fallback_used ? 1 : 0;
        iou_sum += r.iou.value_or(0.0);
    }
    rep.iou_histogram = iou_histogram(records, mode);
    if (mode == Mode::box && !records.empty()) rep.mean_iou = iou_sum / static_cast<double>(records.size());
    rep.size_deciles = size_percentile_accuracy(records);
    rep.stage1_recall_among_failures = stage1_recall(records, mode);
    return rep;
}

json eval_config_to_json(const EvalConfig& cfg) {
    return json{{"stages", cfg.ground.stages},
                {"k", cfg.ground.k},
                {"mode", to_string(cfg.ground.mode)},
                {"point_fraction", cfg.ground.point_fraction},
                {"rule", cfg.rule == CorrectnessRule::center_in_gt ? "center_in_gt" : "iou_threshold"},
                {"iou_tau", cfg.iou_tau},
                {"seed", cfg.seed}};
}

EvalReport evaluate(const std::vector<GroundingSample>& samples, const BackendFactory& factory,
                    const EvalConfig& cfg) {
    return summarize(evaluate_records(samples, factory, cfg), cfg.ground.mode, eval_config_to_json(cfg));
}

json report_to_json(const EvalReport& r) {
    json by_platform = json::object();
    for (const auto& [k, b] : r.by_platform) by_platform[k] = bucket_json(b);
    json by_element = json::object();
    for (const auto& [k, b] : r.by_element_type) by_element[k] = bucket_json(b);
    json deciles = json::array();
    for (const auto& b : r.size_deciles) deciles.push_back(bucket_json(b));
    const double n = static_cast<double>(r.overall.n);
    return json{{"mode", to_string(r.mode)},
                {"samples", r.overall.n},
                {"accuracy", r.overall.accuracy()},
                {"correct", r.overall.correct},
                {"by_platform", by_platform},
                {"by_element_type", by_element},
                {"iou_histogram", r.iou_histogram ? json(*r.iou_histogram) : json()},
                {"mean_iou", r.mean_iou ? json(*r.mean_iou) : json()},
                {"size_deciles", deciles},
                {"stage1_recall_among_failures",
                 r.stage1_recall_among_failures ? json(*r.stage1_recall_among_failures) : json()},
                {"failures", r.failures},
                {"errors", r.errors},
                {"fallbacks", r.fallbacks},
                {"backend_calls", r.backend_calls},
                {"backend_calls_per_sample", n == 0 ? 0.0 : static_cast<double>(r.backend_calls) / n},
                {"config", r.config}};
}

void write_report(const EvalReport& report, const std::vector<EvalRecord>& records,
                  const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");

    std::string lines;
    for (const auto& r : records) lines += record_to_json(r).dump() + "\n";
    write_text(dir / "records.jsonl", lines);

    std::string hist = "bin_lo,bin_hi,count\n";
    if (report.iou_histogram) {
        for (std::size_t i = 0; i < 10; ++i) {
            char edges[32];
            std::snprintf(edges, sizeof edges, "%.1f,%.1f,", i / 10.0, (i + 1) / 10.0);
            hist += edges + std::to_string((*report.iou_histogram)[i]) + "\n";
        }
    }
    write_text(dir / "histogram.csv", hist);

    std::string dec = "decile,n,correct,accuracy\n";
    for (std::size_t i = 0; i < 10; ++i) {
        const auto& b = report.size_deciles[i];
        dec += std::to_string(i) + "," + std::to_string(b.n) + "," + std::to_string(b.correct) + "," +
               std::to_string(b.accuracy()) + "\n";
    }
    write_text(dir / "deciles.csv", dec);

    std::string br = "group,key,n,correct,accuracy\n";
    const auto rows = [&br](const char* group, const std::map<std::string, Bucket>& m) {
        for (const auto& [k, b] : m) {
            br += std::string(group) + "," + k + "," + std::to_string(b.n) + "," +
                  std::to_string(b.correct) + "," + std::to_string(b.accuracy()) + "\n";
        }
    };
    rows("platform", report.by_platform);
    rows("element_type", report.by_element_type);
    write_text(dir / "breakdown.csv", br);

    double total_ms = 0.0;
    for (const auto& r : records) total_ms += r.latency_ms;
    const double mean_ms = records.empty() ? 0.0 : total_ms / static_cast<double>(records.size());
    write_text(dir / "timing.json",
               json{{"total_ms", total_ms}, {"mean_ms_per_sample", mean_ms}}.dump(2) + "\n");
}

EvalReport analyze(const std::filesystem::path& records_jsonl) {
    const auto rows = read_jsonl(records_jsonl);
    std::vector<EvalRecord> records;
    records.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            records.push_back(record_from_json(rows[i]));
        } catch (const Error& e) {
            throw SchemaError(records_jsonl.string() + ": record " + std::to_string(i) + ": " + e.what());
        }
    }
    const Mode mode = records.empty() ? Mode::box : records.front().mode;
    return summarize(records, mode, json{{"source", records_jsonl.string()}});
}

void annotate_to_file(const std::filesystem::path& image_path, const BBox& pred, const BBox& gt,
                      const std::filesystem::path& out_path) {
    save_image(annotate(load_image(image_path), pred, gt), out_path);
}

}  // namespace rvlm
