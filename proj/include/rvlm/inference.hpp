#pragma once

// N-stage zoom-in grounding against a text-completion backend.
//
// Stage 1 sees the full screenshot. Every later stage derives a crop from the
// previous stage's original-space prediction, cuts it from the ORIGINAL image,
// zooms it back to full resolution, asks again, and maps the answer back.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "rvlm/errors.hpp"
#include "rvlm/geometry.hpp"
#include "rvlm/rng.hpp"

namespace rvlm {

enum class Mode { box, point };
std::string_view to_string(Mode m) noexcept;
Mode parse_mode(std::string_view s);

/// How to read coordinates that are not already within [0,1].
enum class CoordConvention { normalized, pixel, percent, per_mille };
std::string_view to_string(CoordConvention c) noexcept;
CoordConvention parse_convention(std::string_view s);

using Prediction = std::variant<BBox, PointCoord>;

/// Extracts the first "(a,b),(c,d)", "(a,b,c,d)" or "[a,b,c,d]" group (box mode)
/// or "(a,b)" / "[a,b]" group (point mode). `view` supplies the pixel size for
/// the pixel convention. Inverted boxes are reordered. Throws ParseError.
Prediction parse_coords(std::string_view text, Mode mode,
                        CoordConvention convention = CoordConvention::normalized,
                        ImageDims view = {1, 1});

/// "(x1,y1),(x2,y2)" or "(x,y)"; decimals < 0 prints full precision.
std::string format_prediction(const Prediction& p, int decimals = 2);

struct BackendRequest {
    std::string prompt;
    const cv::Mat* image = nullptr;  // view pixels; null when running geometry-only
    ImageDims view_dims;
    CropSpec view;  // region of the original the view shows
    Mode mode = Mode::box;
    int stage = 1;
};

class Backend {
public:
    virtual ~Backend() = default;
    /// Throws TransportError on transport failure.
    virtual std::string complete(const BackendRequest& req) = 0;
    virtual CoordConvention convention() const { return CoordConvention::normalized; }
};

struct SimOracleConfig {
    BBox hidden_gt;
    double noise_scale = 0.0;  // std-dev as a fraction of the current view's extent
    double parse_failure_rate = 0.0;
    std::uint64_t rng_seed = 0;
    int decimals = 2;  // < 0: full precision
};

/// Answers with the hidden ground truth as seen from the current view, plus
/// Gaussian noise proportional to that view's extent.
class SimOracleBackend final : public Backend {
public:
    explicit SimOracleBackend(SimOracleConfig cfg);
    std::string complete(const BackendRequest& req) override;

    std::size_t calls() const noexcept { return calls_; }
    const SimOracleConfig& config() const noexcept { return cfg_; }

private:
    SimOracleConfig cfg_;
    Rng rng_;
    std::size_t calls_ = 0;
};

struct StageRecord {
    int stage = 1;
    std::string prompt;
    std::string raw_text;
    CropSpec crop;
    std::optional<Prediction> parsed;    // view space
    std::optional<Prediction> inverted;  // original space
    std::string error;
    std::chrono::nanoseconds latency{0};

    bool ok() const noexcept { return inverted.has_value(); }
};

struct GroundingResult {
    std::vector<StageRecord> stages;
    Prediction final;
    bool fallback_used = false;
    std::size_t backend_calls = 0;
};

struct HistoryAction {
    std::string action;
    PointCoord point;  // original space
};

struct GroundConfig {
    int stages = 2;
    double k = 5.0;
    Mode mode = Mode::box;
    double point_fraction = 0.3;
    /// Placeholders: {instruction}, {history}. Empty selects the default for the mode.
    std::string base_template;
    std::string zoom_template;
    int transport_retries = 1;
};

std::string default_base_template(Mode mode);
std::string default_zoom_template(Mode mode);

/// What the orchestrator looks at: pixels when available, otherwise dims only.
struct Screenshot {
    const cv::Mat* pixels = nullptr;
    ImageDims dims;
};

/// Stage 1 failure has nothing to fall back to; carries the attempted stage.
class GroundingError : public Error {
public:
    GroundingError(const std::string& what, StageRecord stage)
        : Error(what), stage_(std::move(stage)) {}
    const StageRecord& stage() const noexcept { return stage_; }

private:
    StageRecord stage_;
};

GroundingResult ground_multistage(Backend& backend, const Screenshot& shot,
                                  std::string_view instruction, const GroundConfig& cfg);

/// Like ground_multistage, but zoom crops grow to cover every history point and
/// the history coordinates in the zoom prompts are rewritten into view space.
GroundingResult ground_navigation(Backend& backend, const Screenshot& shot,
                                  std::string_view instruction,
                                  const std::vector<HistoryAction>& history, const GroundConfig& cfg);

nlohmann::json prediction_to_json(const Prediction& p);
nlohmann::json result_to_json(const GroundingResult& r, Mode mode);

}  // namespace rvlm
