#include "rvlm/kernels.hpp"

#include <cstddef>

#include "rvlm/detail/box_math.hpp"
#include "rvlm/errors.hpp"

namespace rvlm::kernels {

namespace {

// Validation runs before any parallel region: exceptions must not escape OpenMP.
void check_pairs(std::span<const BBox> a, std::span<const BBox> b, std::span<double> out) {
    if (a.size() != b.size() || a.size() != out.size()) {
        throw GeometryError("batch kernel spans differ in length");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].space != b[i].space) {
            throw GeometryError("pair " + std::to_string(i) + " mixes coordinate spaces");
        }
        if (!is_valid(a[i]) || !is_valid(b[i])) {
            throw GeometryError("pair " + std::to_string(i) + " has an invalid box");
        }
    }
}

void check_against(const BBox& ref, std::span<const BBox> boxes, std::span<double> out) {
    if (boxes.size() != out.size()) throw GeometryError("batch kernel spans differ in length");
    if (!is_valid(ref)) throw GeometryError("reference box is invalid");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (boxes[i].space != ref.space || !is_valid(boxes[i])) {
            throw GeometryError("box " + std::to_string(i) + " is invalid or in another space");
        }
    }
}

}  // namespace

void iou_pairs(std::span<const BBox> a, std::span<const BBox> b, std::span<double> out) {
    check_pairs(a, b, out);
    const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = detail::iou_unchecked(a[i], b[i]);
    }
}

void iou_pairs_serial(std::span<const BBox> a, std::span<const BBox> b, std::span<double> out) {
    check_pairs(a, b, out);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = detail::iou_unchecked(a[i], b[i]);
}

void giou_pairs(std::span<const BBox> a, std::span<const BBox> b, std::span<double> out) {
    check_pairs(a, b, out);
    const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = detail::giou_unchecked(a[i], b[i]);
    }
}

void giou_pairs_serial(std::span<const BBox> a, std::span<const BBox> b, std::span<double> out) {
    check_pairs(a, b, out);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = detail::giou_unchecked(a[i], b[i]);
}

void giou_against(const BBox& ref, std::span<const BBox> boxes, std::span<double> out) {
    check_against(ref, boxes, out);
    const auto n = static_cast<std::ptrdiff_t>(boxes.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = detail::giou_unchecked(boxes[i], ref);
    }
}

void giou_against_serial(const BBox& ref, std::span<const BBox> boxes, std::span<double> out) {
    check_against(ref, boxes, out);
    for (std::size_t i = 0; i < boxes.size(); ++i) out[i] = detail::giou_unchecked(boxes[i], ref);
}

}  // namespace rvlm::kernels
