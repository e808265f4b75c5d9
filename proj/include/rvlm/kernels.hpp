#pragma once

// Batch overlap kernels. Each parallel kernel has a serial twin with the same
// contract; tests compare the two and the benchmark target times them.

#include <span>

#include "rvlm/geometry.hpp"

namespace rvlm::kernels {

/// out[i] = iou(a[i], b[i]). Spans must have equal length.
void iou_pairs(std::span<const BBox> a, std::span<const BBox> b, std::span<double> out);
void iou_pairs_serial(std::span<const BBox> a, std::span<const BBox> b, std::span<double> out);

/// out[i] = giou(a[i], b[i]).
void giou_pairs(std::span<const BBox> a, std::span<const BBox> b, std::span<double> out);
void giou_pairs_serial(std::span<const BBox> a, std::span<const BBox> b, std::span<double> out);

/// out[i] = giou(boxes[i], ref).
void giou_against(const BBox& ref, std::span<const BBox> boxes, std::span<double> out);
void giou_against_serial(const BBox& ref, std::span<const BBox> boxes, std::span<double> out);

}  // namespace rvlm::kernels
