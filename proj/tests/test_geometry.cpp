#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "rvlm/errors.hpp"
#include "rvlm/geometry.hpp"

using namespace rvlm;

namespace {

BBox box(double a, double b, double c, double d) { return BBox{a, b, c, d, std::nullopt}; }

const ImageDims k1000{1000, 1000};

}  // namespace

TEST(Iou, IdentityIsOne) {
    EXPECT_DOUBLE_EQ(iou(box(0.1, 0.1, 0.5, 0.5), box(0.1, 0.1, 0.5, 0.5)), 1.0);
}

TEST(Iou, QuarterOverlap) {
    // intersection 0.0625, union 0.4375
    EXPECT_NEAR(iou(box(0, 0, 0.5, 0.5), box(0.25, 0.25, 0.75, 0.75)), 1.0 / 7.0, 1e-12);
}

TEST(Iou, DisjointIsZero) {
    EXPECT_EQ(iou(box(0, 0, 0.1, 0.1), box(0.9, 0.9, 1, 1)), 0.0);
}

TEST(Iou, ZeroAreaInputs) {
    EXPECT_EQ(iou(box(0.2, 0.2, 0.2, 0.2), box(0.2, 0.2, 0.2, 0.2)), 1.0);
    EXPECT_EQ(iou(box(0.2, 0.2, 0.2, 0.5), box(0.3, 0.2, 0.3, 0.5)), 0.0);
    EXPECT_EQ(iou(box(0.2, 0.2, 0.2, 0.5), box(0.1, 0.1, 0.5, 0.5)), 0.0);
}

TEST(Iou, MixedSpacesRejected) {
    const CropSpec crop{0, 0, 500, 500, k1000};
    BBox v = box(0, 0, 1, 1);
    v.space = crop;
    EXPECT_THROW(iou(box(0, 0, 1, 1), v), GeometryError);
    EXPECT_THROW(giou(v, box(0, 0, 1, 1)), GeometryError);
}

TEST(Iou, InvertedBoxRejected) {
    EXPECT_THROW(iou(box(0.5, 0, 0.1, 1), box(0, 0, 1, 1)), GeometryError);
    EXPECT_THROW(make_box(0.5, 0, 0.1, 1), GeometryError);
}

TEST(Giou, IdentityIsOne) {
    EXPECT_EQ(giou(box(0.3, 0.2, 0.6, 0.9), box(0.3, 0.2, 0.6, 0.9)), 1.0);
}

TEST(Giou, HandCase) {
    // enclosing box 0.5625, union 0.4375
    const double expected = 1.0 / 7.0 - 0.125 / 0.5625;
    EXPECT_NEAR(giou(box(0, 0, 0.5, 0.5), box(0.25, 0.25, 0.75, 0.75)), expected, 1e-12);
    EXPECT_NEAR(expected, -0.0794, 1e-4);
}

TEST(Giou, DisjointIsNegative) {
    const double g = giou(box(0, 0, 0.1, 0.1), box(0.9, 0.9, 1, 1));
    EXPECT_LT(g, 0.0);
    EXPECT_GT(g, -1.0);
}

TEST(Giou, MatchesGridOracle) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 40; ++i) {
        const auto a = oracle::random_box(rng, 0.05);
        const auto b = oracle::random_box(rng, 0.05);
        EXPECT_NEAR(giou(a, b), oracle::grid_giou(a, b, 1000), 4e-3) << i;
    }
}

TEST(Giou, PropertiesOnRandomPairs) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 5000; ++i) {
        const auto a = oracle::random_box(rng, 0.001);
        const auto b = oracle::random_box(rng, 0.001);
        const double g = giou(a, b);
        const double o = iou(a, b);
        ASSERT_LE(g, o + 1e-15);
        ASSERT_GT(g, -1.0);
        ASSERT_LE(g, 1.0);
        ASSERT_GE(o, 0.0);
        ASSERT_LE(o, 1.0);
        ASSERT_EQ(g, giou(b, a));
        ASSERT_EQ(o, iou(b, a));
        ASSERT_EQ(giou(a, a), 1.0);
    }
}

TEST(ZoomRegion, CenteredExample) {
    const auto c = zoom_region(k1000, box(0.4, 0.4, 0.5, 0.5), 5);
    EXPECT_EQ(c, (CropSpec{200, 200, 700, 700, k1000}));
}

TEST(ZoomRegion, ClampedAtOrigin) {
    const auto c = zoom_region(k1000, box(0.0, 0.0, 0.1, 0.1), 5);
    EXPECT_EQ(c, (CropSpec{0, 0, 300, 300, k1000}));
}

TEST(ZoomRegion, SaturatesToFullImage) {
    const auto c = zoom_region(ImageDims{1920, 1080}, box(0, 0, 1, 1), 1.0 + 1e-9);
    EXPECT_EQ(c, (CropSpec{0, 0, 1920, 1080, ImageDims{1920, 1080}}));
}

TEST(ZoomRegion, RejectsSmallFactor) {
    EXPECT_THROW(zoom_region(k1000, box(0.4, 0.4, 0.5, 0.5), 1.0), GeometryError);
    EXPECT_THROW(zoom_region(k1000, box(0.4, 0.4, 0.5, 0.5), 0.5), GeometryError);
}

TEST(ZoomRegion, ZeroSizePredictionUsesMinimumProposal) {
    // 2% of 1000 = 20 px, times 5 = 100 px around (500, 500)
    const auto c = zoom_region(k1000, box(0.5, 0.5, 0.5, 0.5), 5);
    EXPECT_EQ(c, (CropSpec{450, 450, 550, 550, k1000}));
    const auto line = zoom_region(k1000, box(0.4, 0.5, 0.6, 0.5), 5);
    EXPECT_EQ(line.height(), 100);
    EXPECT_GT(line.width(), 0);
}

TEST(ZoomRegion, ContainsCenterAndIsMonotoneInK) {
    std::mt19937_64 rng(5);
    const ImageDims dims{1280, 720};
    for (int i = 0; i < 2000; ++i) {
        const auto b = oracle::random_box(rng, 0.001);
        const auto c3 = zoom_region(dims, b, 3);
        const auto c5 = zoom_region(dims, b, 5);
        const auto c7 = zoom_region(dims, b, 7);
        ASSERT_TRUE(is_valid(c5));
        const auto ctr = center(b);
        ASSERT_GE(ctr.x * dims.width, c5.xmin - 1e-9);
        ASSERT_LE(ctr.x * dims.width, c5.xmax + 1.0);
        ASSERT_GE(ctr.y * dims.height, c5.ymin - 1e-9);
        ASSERT_LE(ctr.y * dims.height, c5.ymax + 1.0);
        ASSERT_LE(c3.width(), c5.width());
        ASSERT_LE(c5.width(), c7.width());
        ASSERT_LE(c3.height(), c5.height());
        ASSERT_LE(c5.height(), c7.height());
    }
}

TEST(PointRegion, Centered) {
    const ImageDims d{1000, 800};
    EXPECT_EQ(point_region(d, PointCoord{0.5, 0.5, std::nullopt}, 0.3), (CropSpec{350, 280, 650, 520, d}));
}

TEST(PointRegion, ShiftedNotShrunkAtBorder) {
    const ImageDims d{1000, 800};
    EXPECT_EQ(point_region(d, PointCoord{0.0, 0.0, std::nullopt}, 0.3), (CropSpec{0, 0, 300, 240, d}));
    EXPECT_EQ(point_region(d, PointCoord{1.0, 1.0, std::nullopt}, 0.3), (CropSpec{700, 560, 1000, 800, d}));
}

TEST(PointRegion, FullFraction) {
    const ImageDims d{1000, 800};
    EXPECT_EQ(point_region(d, PointCoord{0.2, 0.9, std::nullopt}, 1.0), (CropSpec{0, 0, 1000, 800, d}));
    EXPECT_THROW(point_region(d, PointCoord{0.2, 0.9, std::nullopt}, 0.0), GeometryError);
}

TEST(ViewMapping, Examples) {
    const CropSpec crop{200, 200, 700, 700, k1000};
    const auto v = to_view(PointCoord{0.45, 0.45, std::nullopt}, crop);
    EXPECT_NEAR(v.x, 0.5, 1e-12);
    EXPECT_NEAR(v.y, 0.5, 1e-12);
    EXPECT_EQ(v.space, crop);

    const auto corner = to_view(PointCoord{0.2, 0.2, std::nullopt}, crop);
    EXPECT_NEAR(corner.x, 0.0, 1e-12);
    EXPECT_NEAR(corner.y, 0.0, 1e-12);

    const auto whole = to_view(box(0.2, 0.2, 0.7, 0.7), crop);
    EXPECT_NEAR(whole.xmin, 0.0, 1e-12);
    EXPECT_NEAR(whole.ymin, 0.0, 1e-12);
    EXPECT_NEAR(whole.xmax, 1.0, 1e-12);
    EXPECT_NEAR(whole.ymax, 1.0, 1e-12);

    const auto back = from_view(PointCoord{0.5, 0.5, crop}, crop);
    EXPECT_NEAR(back.x, 0.45, 1e-12);
    EXPECT_NEAR(back.y, 0.45, 1e-12);
    EXPECT_FALSE(back.space.has_value());

    const auto origin = from_view(PointCoord{0, 0, crop}, crop);
    EXPECT_NEAR(origin.x, 0.2, 1e-12);
    EXPECT_NEAR(origin.y, 0.2, 1e-12);
}

TEST(ViewMapping, OutsideCropNotClamped) {
    const CropSpec crop{200, 200, 700, 700, k1000};
    const auto v = to_view(PointCoord{0.1, 0.9, std::nullopt}, crop);
    EXPECT_LT(v.x, 0.0);
    EXPECT_GT(v.y, 1.0);
}

TEST(ViewMapping, DegenerateCropRejected) {
    const CropSpec bad{300, 300, 300, 400, k1000};
    EXPECT_THROW(to_view(PointCoord{0.5, 0.5, std::nullopt}, bad), GeometryError);
    EXPECT_THROW(from_view(box(0, 0, 1, 1), bad), GeometryError);
}

TEST(ViewMapping, RoundTripProperty) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const ImageDims dims{1366, 768};
    for (int i = 0; i < 10000; ++i) {
        const auto crop = oracle::random_crop(rng, dims);
        const PointCoord p{(crop.xmin + u(rng) * crop.width()) / dims.width,
                           (crop.ymin + u(rng) * crop.height()) / dims.height, std::nullopt};
        const auto r = from_view(to_view(p, crop), crop);
        ASSERT_NEAR(r.x, p.x, 1e-9);
        ASSERT_NEAR(r.y, p.y, 1e-9);
    }
}

TEST(ExpandToInclude, InsideUnchanged) {
    const CropSpec crop{200, 200, 700, 700, k1000};
    const std::vector<PointCoord> pts{{0.3, 0.3, std::nullopt}, {0.69, 0.21, std::nullopt}};
    EXPECT_EQ(expand_to_include(crop, pts), crop);
    EXPECT_EQ(expand_to_include(crop, {}), crop);
}

TEST(ExpandToInclude, GrowsWithMargin) {
    const CropSpec crop{200, 200, 700, 700, k1000};
    const std::vector<PointCoord> pts{{0.05, 0.05, std::nullopt}};
    // 50 px minus a 20 px margin
    EXPECT_EQ(expand_to_include(crop, pts), (CropSpec{30, 30, 700, 700, k1000}));
}

TEST(ExpandToInclude, ClampsAtFarCorner) {
    const CropSpec crop{200, 200, 700, 700, k1000};
    const std::vector<PointCoord> pts{{1.0, 1.0, std::nullopt}};
    const auto c = expand_to_include(crop, pts);
    EXPECT_EQ(c.xmax, 1000);
    EXPECT_EQ(c.ymax, 1000);
    EXPECT_EQ(c.xmin, 200);
}

TEST(CenterContains, Basics) {
    const auto c = center(box(0.2, 0.2, 0.4, 0.6));
    EXPECT_NEAR(c.x, 0.3, 1e-15);
    EXPECT_NEAR(c.y, 0.4, 1e-15);
    EXPECT_FALSE(contains(box(0, 0, 0.1, 0.1), PointCoord{0.2, 0.2, std::nullopt}));
    EXPECT_TRUE(contains(box(0, 0, 0.1, 0.1), PointCoord{0.1, 0.1, std::nullopt}));  // closed
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const auto b = oracle::random_box(rng, 0.0);
        ASSERT_TRUE(contains(b, center(b)));
    }
}

TEST(Quantize, TiesToEven) {
    EXPECT_EQ(quantize(0.125), 0.12);
    EXPECT_EQ(quantize(0.5), 0.5);
    EXPECT_EQ(quantize(0.994), 0.99);
}
