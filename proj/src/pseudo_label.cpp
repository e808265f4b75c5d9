#include "rvlm/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rvlm/errors.hpp"
#include "rvlm/kernels.hpp"

namespace rvlm {

void validate(const GenConfig& cfg) {
    if (cfg.n_outputs < 1) throw Error("n_outputs must be at least 1");
    if (cfg.num_candidates < cfg.n_outputs) {
        throw Error("num_candidates (" + std::to_string(cfg.num_candidates) +
                    ") must be >= n_outputs (" + std::to_string(cfg.n_outputs) + ")");
    }
    if (!(cfg.threshold > -1.0 && cfg.threshold < 1.0)) {
        throw Error("threshold must lie in (-1, 1)");
    }
}

std::vector<BBox> perturb_candidates(const BBox& gt, std::size_t count, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<double> shifts(count * 4);
    for (auto& s : shifts) s = unit(rng) * 4.0 - 2.0;
    std::vector<double> scales(count * 2);
    for (auto& s : scales) s = unit(rng) * 0.4 + 0.8;

    const double w = gt.xmax - gt.xmin;
    const double h = gt.ymax - gt.ymin;

    std::vector<BBox> boxes;
    boxes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double* sh = &shifts[i * 4];
        const double x0 = gt.xmin + sh[0] * w;
        const double y0 = gt.ymin + sh[1] * h;
        const double x1 = gt.xmax + sh[2] * w;
        const double y1 = gt.ymax + sh[3] * h;

        const double cx = (x0 + x1) / 2;
        const double cy = (y0 + y1) / 2;
        const double nw = w * scales[i * 2];
        const double nh = h * scales[i * 2 + 1];

        BBox b{cx - nw / 2, cy - nh / 2, cx + nw / 2, cy + nh / 2, gt.space};
        boxes.push_back(quantize(clamp01(b), 2));
    }
    return boxes;
}

PseudoLabelSet generate_pseudo_boxes(const BBox& gt, const GenConfig& cfg) {
    validate(cfg);
    if (!is_valid(gt) || gt.area() <= 0.0) {
        throw GeometryError("pseudo-box generation needs a ground truth with positive area");
    }
    Rng rng{cfg.rng_seed};
    const auto candidates = perturb_candidates(gt, cfg.num_candidates, rng);
    std::vector<double> gious(candidates.size());
    kernels::giou_against_serial(gt, candidates, gious);

    PseudoLabelSet set;
    set.gt = gt;
    set.seed = cfg.rng_seed;
    for (std::size_t i = 0; i < candidates.size() && set.size() < cfg.n_outputs; ++i) {
        if (gious[i] >= cfg.threshold) {
            set.boxes.push_back(candidates[i]);
            set.gious.push_back(gious[i]);
            set.weights.push_back(iou_weight(gious[i]));
        }
    }
    if (set.size() < cfg.n_outputs) {
        const auto survivors = static_cast<std::size_t>(
            std::count_if(gious.begin(), gious.end(), [&](double g) { return g >= cfg.threshold; }));
        throw ShortfallError(survivors, cfg.n_outputs);
    }
    return set;
}

double iou_weight(double g) {
    if (!(g > 0.0)) {
        throw Error("iou_weight undefined for non-positive overlap " + std::to_string(g));
    }
    return 1.0 + 0.5 * std::log(g);
}

double point_weight(double distance) {
    const double floor_value = std::exp(-2.0);
    return 1.0 + 0.5 * std::log(std::max(floor_value, 1.0 - distance / kPointRefDistance));
}

PseudoPointSet generate_pseudo_points(const PointCoord& gt, const GenConfig& cfg) {
    validate(cfg);
    if (!(gt.x >= 0.0 && gt.x <= 1.0 && gt.y >= 0.0 && gt.y <= 1.0)) {
        throw GeometryError("pseudo-point ground truth must lie in [0,1]^2");
    }
    Rng rng{cfg.rng_seed};
    std::normal_distribution<double> jitter(0.0, kPointSigma);

    PseudoPointSet set;
    set.gt = gt;
    set.seed = cfg.rng_seed;
    std::size_t survivors = 0;
    for (std::size_t i = 0; i < cfg.num_candidates; ++i) {
        const double dx = jitter(rng);
        const double dy = jitter(rng);
        PointCoord p{quantize(std::clamp(gt.x + dx, 0.0, 1.0)),
                     quantize(std::clamp(gt.y + dy, 0.0, 1.0)), gt.space};
        const double d = std::hypot(p.x - gt.x, p.y - gt.y);
        if (d >= kPointRefDistance) continue;
        ++survivors;
        if (set.points.size() < cfg.n_outputs) {
            set.points.push_back(PseudoPoint{p, d, point_weight(d)});
        }
    }
    if (set.points.size() < cfg.n_outputs) throw ShortfallError(survivors, cfg.n_outputs);
    return set;
}

}  // namespace rvlm
