#pragma once

// Normalized box/point arithmetic and the mapping between an original
// screenshot and a zoomed view of one of its sub-rectangles.
//
// Every public coordinate is a fraction of some image: either the original
// screenshot (space == std::nullopt) or the crop a zoomed view was cut from
// (space == that CropSpec). Pixel rectangles only appear inside CropSpec.

#include <optional>
#include <span>

namespace rvlm {

struct ImageDims {
    int width = 1;
    int height = 1;

    bool operator==(const ImageDims&) const = default;
};

/// Pixel rectangle [xmin, xmax) x [ymin, ymax) in original-image pixels.
struct CropSpec {
    int xmin = 0;
    int ymin = 0;
    int xmax = 1;
    int ymax = 1;
    ImageDims source;

    int width() const noexcept { return xmax - xmin; }
    int height() const noexcept { return ymax - ymin; }
    bool operator==(const CropSpec&) const = default;
};

/// nullopt = original image; otherwise the view cut from that crop.
using CoordSpace = std::optional<CropSpec>;

struct BBox {
    double xmin = 0.0;
    double ymin = 0.0;
    double xmax = 0.0;
    double ymax = 0.0;
    CoordSpace space;

    double width() const noexcept { return xmax - xmin; }
    double height() const noexcept { return ymax - ymin; }
    double area() const noexcept { return width() * height(); }
    bool operator==(const BBox&) const = default;
};

struct PointCoord {
    double x = 0.0;
    double y = 0.0;
    CoordSpace space;

    bool operator==(const PointCoord&) const = default;
};

/// Checked constructors. Throw GeometryError on violated invariants.
ImageDims make_dims(int width, int height);
CropSpec make_crop(int xmin, int ymin, int xmax, int ymax, ImageDims source);
BBox make_box(double xmin, double ymin, double xmax, double ymax, CoordSpace space = std::nullopt);

bool is_valid(const BBox& b) noexcept;
bool is_valid(const CropSpec& c) noexcept;

double iou(const BBox& a, const BBox& b);

/// IoU minus the fraction of the smallest enclosing box not covered by the union.
double giou(const BBox& a, const BBox& b);

/// Crop of k times the prediction's width and height centered on it, clamped to
/// the image. Pixel conversion truncates like `int()` and clamps maxes with min().
/// A zero-width (or zero-height) prediction is first widened to 2% of the image.
CropSpec zoom_region(ImageDims dims, const BBox& pred, double k);

/// Fixed-size crop (fraction of each image dimension) centered on a point.
/// At a border the crop is shifted inward rather than shrunk.
CropSpec point_region(ImageDims dims, const PointCoord& pred, double fraction);

BBox to_view(const BBox& b, const CropSpec& crop);
PointCoord to_view(const PointCoord& p, const CropSpec& crop);
BBox from_view(const BBox& b, const CropSpec& crop);
PointCoord from_view(const PointCoord& p, const CropSpec& crop);

/// Grows the crop so every point outside it sits at least 2% of the image
/// dimension inside the new edge. Points already inside never cause growth.
CropSpec expand_to_include(const CropSpec& crop, std::span<const PointCoord> points);

PointCoord center(const BBox& b) noexcept;

/// Closed-interval membership.
bool contains(const BBox& b, const PointCoord& p) noexcept;

/// True when `inner` lies entirely inside the crop (in original pixels).
bool crop_contains(const CropSpec& crop, const BBox& inner) noexcept;

BBox clamp01(BBox b) noexcept;
PointCoord clamp01(PointCoord p) noexcept;

/// round(v * 10^decimals) / 10^decimals with ties to even, as torch.round does.
double quantize(double v, int decimals = 2) noexcept;
BBox quantize(BBox b, int decimals = 2) noexcept;

}  // namespace rvlm
