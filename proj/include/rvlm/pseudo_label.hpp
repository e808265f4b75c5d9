#pragma once

// Pseudo-label generation for the IoU-aware weighted cross-entropy loss:
// GIoU-thresholded perturbations of a ground-truth box and their log-scale
// loss weights, plus a distance-weighted variant for point prediction.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rvlm/geometry.hpp"
#include "rvlm/rng.hpp"

namespace rvlm {

struct GenConfig {
    std::size_t n_outputs = 4;
    std::size_t num_candidates = 100;
    double threshold = 0.3;
    std::uint64_t rng_seed = 0;
};

void validate(const GenConfig& cfg);

struct PseudoLabelSet {
    BBox gt;
    std::vector<BBox> boxes;
    std::vector<double> gious;
    std::vector<double> weights;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return boxes.size(); }
    bool operator==(const PseudoLabelSet&) const = default;
};

/// `count` perturbed copies of `gt`: corner shifts in [-2,2) times the box
/// width/height, recentred with width/height scales in [0.8,1.2), clamped to
/// [0,1] and rounded to 2 decimals. Draws every shift before any scale.
std::vector<BBox> perturb_candidates(const BBox& gt, std::size_t count, Rng& rng);

/// Keeps the first cfg.n_outputs candidates (in generation order) whose GIoU
/// with gt reaches cfg.threshold. Throws ShortfallError when too few survive.
PseudoLabelSet generate_pseudo_boxes(const BBox& gt, const GenConfig& cfg);

/// 1 + ln(g) / 2. Throws Error for g <= 0.
double iou_weight(double g);

inline constexpr double kPointSigma = 0.05;
inline constexpr double kPointRefDistance = 0.42426406871192851;  // 0.3 * sqrt(2)

struct PseudoPoint {
    PointCoord point;
    double distance = 0.0;
    double weight = 0.0;

    bool operator==(const PseudoPoint&) const = default;
};

struct PseudoPointSet {
    PointCoord gt;
    std::vector<PseudoPoint> points;
    std::uint64_t seed = 0;
};

/// 1 + ln(max(e^-2, 1 - d / d_ref)) / 2 with d_ref = 0.3 * sqrt(2).
double point_weight(double distance);

/// Gaussian jitter (sigma 0.05) around gt, clamped and rounded to 2 decimals.
/// Points at or beyond d_ref are discarded; cfg.threshold is not used.
PseudoPointSet generate_pseudo_points(const PointCoord& gt, const GenConfig& cfg);

}  // namespace rvlm
