#pragma once

// Thin pixel layer over OpenCV: load/save, crop-and-zoom, PNG encoding and
// rectangle overlays for report figures.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "rvlm/geometry.hpp"

namespace rvlm {

/// Throws IoError when the file is missing or undecodable.
cv::Mat load_image(const std::filesystem::path& path);
void save_image(const cv::Mat& image, const std::filesystem::path& path);

ImageDims dims_of(const cv::Mat& image);

/// Cuts the crop out of the original and resizes it back to the original
/// width x height with bilinear interpolation (aspect ratio is not preserved).
cv::Mat zoom_view(const cv::Mat& original, const CropSpec& crop);

std::vector<std::uint8_t> encode_png(const cv::Mat& image);

/// Draws the ground truth in green and the prediction in red.
cv::Mat annotate(const cv::Mat& image, const BBox& pred, const BBox& gt);

/// FNV-1a over dims, type and pixel bytes; used to pin golden images.
std::uint64_t pixel_hash(const cv::Mat& image);

inline constexpr const char* kResampling = "bilinear";

}  // namespace rvlm
