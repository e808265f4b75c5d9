#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "oracles.hpp"
#include "rvlm/dataset.hpp"
#include "rvlm/image.hpp"

namespace rvlm::oracle {

/// Flat-colour "UI" with a few panels and buttons; deterministic per seed.
inline cv::Mat synthetic_screenshot(int width, int height, unsigned seed) {
    cv::Mat img(height, width, CV_8UC3, cv::Scalar(245, 245, 245));
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> col(40, 220);
    std::uniform_int_distribution<int> xs(0, width - 2);
    std::uniform_int_distribution<int> ys(0, height - 2);
    for (int i = 0; i < 12; ++i) {
        const int x0 = xs(rng);
        const int y0 = ys(rng);
        const int x1 = std::min(width - 1, x0 + 10 + xs(rng) / 4);
        const int y1 = std::min(height - 1, y0 + 6 + ys(rng) / 6);
        cv::rectangle(img, cv::Point(x0, y0), cv::Point(x1, y1), cv::Scalar(col(rng), col(rng), col(rng)),
                      cv::FILLED);
    }
    cv::line(img, cv::Point(0, height / 8), cv::Point(width - 1, height / 8), cv::Scalar(90, 90, 90), 2);
    return img;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / ("rvlm_test_" + name)) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

/// n samples on small synthetic screenshots written into dir.
inline std::vector<GroundingSample> synthetic_corpus(const std::filesystem::path& dir, std::size_t n,
                                                     unsigned seed, int width = 320, int height = 200) {
    std::mt19937_64 rng(seed);
    const Platform platforms[] = {Platform::mobile, Platform::desktop, Platform::web};
    const ElementType types[] = {ElementType::text, ElementType::icon};
    std::vector<GroundingSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        GroundingSample s;
        s.image_path = (dir / ("screen_" + std::to_string(i) + ".png")).string();
        save_image(synthetic_screenshot(width, height, static_cast<unsigned>(seed + i)), s.image_path);
        s.instruction = "open item " + std::to_string(i);
        s.gt = random_small_box(rng, 0.005, 0.05);
        s.platform = platforms[i % 3];
        s.element_type = types[i % 2];
        out.push_back(s);
    }
    return out;
}

}  // namespace rvlm::oracle
