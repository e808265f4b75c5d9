#include "rvlm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "rvlm/detail/box_math.hpp"
#include "rvlm/errors.hpp"

namespace rvlm {

namespace {

constexpr double kMinProposalFraction = 0.02;
constexpr double kIncludeMarginFraction = 0.02;

void require_same_space(const BBox& a, const BBox& b) {
    if (a.space != b.space) {
        throw GeometryError("boxes are expressed in different coordinate spaces");
    }
    if (!is_valid(a) || !is_valid(b)) {
        throw GeometryError("box has inverted or non-finite coordinates");
    }
}

void require_crop(const CropSpec& crop) {
    if (!is_valid(crop)) {
        throw GeometryError("degenerate crop (" + std::to_string(crop.xmin) + "," +
                            std::to_string(crop.ymin) + "," + std::to_string(crop.xmax) + "," +
                            std::to_string(crop.ymax) + ")");
    }
}

// Listing-style truncation toward zero, then clamp into [0, limit].
int trunc_clamp(double v, int limit) {
    const double t = std::trunc(v);
    if (t <= 0.0) return 0;
    if (t >= limit) return limit;
    return static_cast<int>(t);
}

// Keeps at least one pixel when truncation collapses an axis.
void ensure_extent(int& lo, int& hi, int limit) {
    if (hi > lo) return;
    if (lo < limit) {
        hi = lo + 1;
    } else {
        lo = limit - 1;
        hi = limit;
    }
}

double view_x(double x, const CropSpec& c) {
    return (x * c.source.width - c.xmin) / c.width();
}
double view_y(double y, const CropSpec& c) {
    return (y * c.source.height - c.ymin) / c.height();
}
double orig_x(double x, const CropSpec& c) {
    return (c.xmin + x * c.width()) / c.source.width;
}
double orig_y(double y, const CropSpec& c) {
    return (c.ymin + y * c.height()) / c.source.height;
}

}  // namespace

ImageDims make_dims(int width, int height) {
    if (width < 1 || height < 1) {
        throw GeometryError("image dims must be positive, got " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
    return ImageDims{width, height};
}

CropSpec make_crop(int xmin, int ymin, int xmax, int ymax, ImageDims source) {
    CropSpec c{xmin, ymin, xmax, ymax, source};
    require_crop(c);
    return c;
}

BBox make_box(double xmin, double ymin, double xmax, double ymax, CoordSpace space) {
    BBox b{xmin, ymin, xmax, ymax, std::move(space)};
    if (!is_valid(b)) {
        throw GeometryError("invalid box (" + std::to_string(xmin) + "," + std::to_string(ymin) +
                            "," + std::to_string(xmax) + "," + std::to_string(ymax) + ")");
    }
    return b;
}

bool is_valid(const BBox& b) noexcept {
    return std::isfinite(b.xmin) && std::isfinite(b.ymin) && std::isfinite(b.xmax) &&
           std::isfinite(b.ymax) && b.xmin <= b.xmax && b.ymin <= b.ymax;
}

bool is_valid(const CropSpec& c) noexcept {
    return c.source.width >= 1 && c.source.height >= 1 && c.xmin >= 0 && c.ymin >= 0 &&
           c.xmin < c.xmax && c.ymin < c.ymax && c.xmax <= c.source.width &&
           c.ymax <= c.source.height;
}

double iou(const BBox& a, const BBox& b) {
    require_same_space(a, b);
    return detail::iou_unchecked(a, b);
}

double giou(const BBox& a, const BBox& b) {
    require_same_space(a, b);
    return detail::giou_unchecked(a, b);
}

CropSpec zoom_region(ImageDims dims, const BBox& pred, double k) {
    if (!(k > 1.0)) {
        throw GeometryError("zoom factor must exceed 1, got " + std::to_string(k));
    }
    if (pred.space) {
        throw GeometryError("zoom_region expects an original-space prediction");
    }
    if (!is_valid(pred)) {
        throw GeometryError("zoom_region got an invalid prediction box");
    }
    const double W = dims.width;
    const double H = dims.height;
    const double xmin = pred.xmin * W;
    const double ymin = pred.ymin * H;
    const double xmax = pred.xmax * W;
    const double ymax = pred.ymax * H;

    const double xc = (xmin + xmax) / 2;
    const double yc = (ymin + ymax) / 2;
    double bw = xmax - xmin;
    double bh = ymax - ymin;
    if (bw <= 0.0) bw = kMinProposalFraction * W;
    if (bh <= 0.0) bh = kMinProposalFraction * H;

    const double cw = k * bw;
    const double ch = k * bh;

    CropSpec c;
    c.source = dims;
    c.xmin = trunc_clamp(xc - cw / 2, dims.width);
    c.ymin = trunc_clamp(yc - ch / 2, dims.height);
    c.xmax = trunc_clamp(xc + cw / 2, dims.width);
    c.ymax = trunc_clamp(yc + ch / 2, dims.height);
    ensure_extent(c.xmin, c.xmax, dims.width);
    ensure_extent(c.ymin, c.ymax, dims.height);
    return c;
}

CropSpec point_region(ImageDims dims, const PointCoord& pred, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw GeometryError("point_region fraction must be in (0,1], got " +
                            std::to_string(fraction));
    }
    if (pred.space) {
        throw GeometryError("point_region expects an original-space point");
    }
    const auto place = [](double center_px, int limit, double frac) {
        const int size = std::clamp(static_cast<int>(std::lround(frac * limit)), 1, limit);
        int lo = static_cast<int>(std::floor(center_px - size / 2.0));
        lo = std::clamp(lo, 0, limit - size);
        return std::pair{lo, lo + size};
    };
    const auto [x0, x1] = place(pred.x * dims.width, dims.width, fraction);
    const auto [y0, y1] = place(pred.y * dims.height, dims.height, fraction);
    return CropSpec{x0, y0, x1, y1, dims};
}

BBox to_view(const BBox& b, const CropSpec& crop) {
    require_crop(crop);
    if (b.space) throw GeometryError("to_view expects an original-space box");
    return BBox{view_x(b.xmin, crop), view_y(b.ymin, crop), view_x(b.xmax, crop),
                view_y(b.ymax, crop), crop};
}

PointCoord to_view(const PointCoord& p, const CropSpec& crop) {
    require_crop(crop);
    if (p.space) throw GeometryError("to_view expects an original-space point");
    return PointCoord{view_x(p.x, crop), view_y(p.y, crop), crop};
}

BBox from_view(const BBox& b, const CropSpec& crop) {
    require_crop(crop);
    if (b.space && *b.space != crop) {
        throw GeometryError("from_view crop does not match the box's view");
    }
    return BBox{orig_x(b.xmin, crop), orig_y(b.ymin, crop), orig_x(b.xmax, crop),
                orig_y(b.ymax, crop), std::nullopt};
}

PointCoord from_view(const PointCoord& p, const CropSpec& crop) {
    require_crop(crop);
    if (p.space && *p.space != crop) {
        throw GeometryError("from_view crop does not match the point's view");
    }
    return PointCoord{orig_x(p.x, crop), orig_y(p.y, crop), std::nullopt};
}

CropSpec expand_to_include(const CropSpec& crop, std::span<const PointCoord> points) {
    require_crop(crop);
    CropSpec out = crop;
    const double mx = kIncludeMarginFraction * crop.source.width;
    const double my = kIncludeMarginFraction * crop.source.height;
    for (const auto& p : points) {
        if (p.space) throw GeometryError("expand_to_include expects original-space points");
        const double px = p.x * crop.source.width;
        const double py = p.y * crop.source.height;
        const bool inside = px >= crop.xmin && px <= crop.xmax && py >= crop.ymin && py <= crop.ymax;
        if (inside) continue;
        out.xmin = std::min(out.xmin, static_cast<int>(std::floor(px - mx)));
        out.ymin = std::min(out.ymin, static_cast<int>(std::floor(py - my)));
        out.xmax = std::max(out.xmax, static_cast<int>(std::ceil(px + mx)));
        out.ymax = std::max(out.ymax, static_cast<int>(std::ceil(py + my)));
    }
    out.xmin = std::max(out.xmin, 0);
    out.ymin = std::max(out.ymin, 0);
    out.xmax = std::min(out.xmax, crop.source.width);
    out.ymax = std::min(out.ymax, crop.source.height);
    return out;
}

PointCoord center(const BBox& b) noexcept {
    return PointCoord{(b.xmin + b.xmax) / 2, (b.ymin + b.ymax) / 2, b.space};
}

bool contains(const BBox& b, const PointCoord& p) noexcept {
    return p.x >= b.xmin && p.x <= b.xmax && p.y >= b.ymin && p.y <= b.ymax;
}

bool crop_contains(const CropSpec& crop, const BBox& inner) noexcept {
    const double W = crop.source.width;
    const double H = crop.source.height;
    return inner.xmin * W >= crop.xmin && inner.xmax * W <= crop.xmax &&
           inner.ymin * H >= crop.ymin && inner.ymax * H <= crop.ymax;
}

BBox clamp01(BBox b) noexcept {
    b.xmin = std::clamp(b.xmin, 0.0, 1.0);
    b.ymin = std::clamp(b.ymin, 0.0, 1.0);
    b.xmax = std::clamp(b.xmax, 0.0, 1.0);
    b.ymax = std::clamp(b.ymax, 0.0, 1.0);
    return b;
}

PointCoord clamp01(PointCoord p) noexcept {
    p.x = std::clamp(p.x, 0.0, 1.0);
    p.y = std::clamp(p.y, 0.0, 1.0);
    return p;
}

double quantize(double v, int decimals) noexcept {
    const double scale = std::pow(10.0, decimals);
    return std::nearbyint(v * scale) / scale;
}

BBox quantize(BBox b, int decimals) noexcept {
    b.xmin = quantize(b.xmin, decimals);
    b.ymin = quantize(b.ymin, decimals);
    b.xmax = quantize(b.xmax, decimals);
    b.ymax = quantize(b.ymax, decimals);
    return b;
}

}  // namespace rvlm
