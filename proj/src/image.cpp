#include "rvlm/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "rvlm/errors.hpp"

namespace rvlm {

cv::Mat load_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError(path.string(), "image not found");
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw IoError(path.string(), "cannot decode image");
    return img;
}

void save_image(const cv::Mat& image, const std::filesystem::path& path) {
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), image);
    } catch (const cv::Exception& e) {
        throw IoError(path.string(), e.what());
    }
    if (!ok) throw IoError(path.string(), "cannot write image");
}

ImageDims dims_of(const cv::Mat& image) { return make_dims(image.cols, image.rows); }

cv::Mat zoom_view(const cv::Mat& original, const CropSpec& crop) {
    if (!is_valid(crop) || crop.source != dims_of(original)) {
        throw GeometryError("crop does not fit the image it is applied to");
    }
    const cv::Rect roi(crop.xmin, crop.ymin, crop.width(), crop.height());
    cv::Mat zoomed;
    cv::resize(original(roi), zoomed, cv::Size(original.cols, original.rows), 0, 0, cv::INTER_LINEAR);
    return zoomed;
}

std::vector<std::uint8_t> encode_png(const cv::Mat& image) {
    std::vector<std::uint8_t> buf;
    if (!cv::imencode(".png", image, buf)) throw Error("PNG encoding failed");
    return buf;
}

namespace {

cv::Rect to_pixels(const BBox& b, int w, int h) {
    const int x0 = static_cast<int>(std::floor(b.xmin * w));
    const int y0 = static_cast<int>(std::floor(b.ymin * h));
    const int x1 = std::max(x0, static_cast<int>(std::ceil(b.xmax * w)) - 1);
    const int y1 = std::max(y0, static_cast<int>(std::ceil(b.ymax * h)) - 1);
    return cv::Rect(cv::Point(x0, y0), cv::Point(x1, y1));
}

}  // namespace

cv::Mat annotate(const cv::Mat& image, const BBox& pred, const BBox& gt) {
    cv::Mat out = image.clone();
    const int thickness = std::max(1, std::min(image.cols, image.rows) / 200);
    cv::rectangle(out, to_pixels(gt, image.cols, image.rows), cv::Scalar(0, 200, 0), thickness);
    cv::rectangle(out, to_pixels(pred, image.cols, image.rows), cv::Scalar(0, 0, 230), thickness);
    return out;
}

std::uint64_t pixel_hash(const cv::Mat& image) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    };
    for (int v : {image.cols, image.rows, image.type()}) {
        for (int s = 0; s < 32; s += 8) mix(static_cast<std::uint8_t>((v >> s) & 0xFF));
    }
    const cv::Mat cont = image.isContinuous() ? image : image.clone();
    const auto* p = cont.ptr<std::uint8_t>();
    const std::size_t n = cont.total() * cont.elemSize();
    for (std::size_t i = 0; i < n; ++i) mix(p[i]);
    return h;
}

}  // namespace rvlm
