#pragma once

#include <algorithm>

#include "rvlm/geometry.hpp"

namespace rvlm::detail {

// Unchecked overlap math shared by the scalar API and the batch kernels.

inline double intersection_area(const BBox& a, const BBox& b) noexcept {
    const double iw = std::max(0.0, std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin));
    const double ih = std::max(0.0, std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin));
    return iw * ih;
}

inline bool same_extent(const BBox& a, const BBox& b) noexcept {
    return a.xmin == b.xmin && a.ymin == b.ymin && a.xmax == b.xmax && a.ymax == b.ymax;
}

inline double iou_unchecked(const BBox& a, const BBox& b) noexcept {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return same_extent(a, b) ? 1.0 : 0.0;
    return inter / uni;
}

inline double giou_unchecked(const BBox& a, const BBox& b) noexcept {
    if (same_extent(a, b)) return 1.0;
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    const double overlap = uni <= 0.0 ? 0.0 : inter / uni;
    const double hull = (std::max(a.xmax, b.xmax) - std::min(a.xmin, b.xmin)) *
                        (std::max(a.ymax, b.ymax) - std::min(a.ymin, b.ymin));
    if (hull <= 0.0) return overlap;
    return overlap - (hull - uni) / hull;
}

}  // namespace rvlm::detail
