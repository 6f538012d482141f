#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gsedit/error.hpp"

namespace gsedit {

using Rgb = Eigen::Vector3d;

/// Row-major 2D grid. Pixel (x, y) is column x, row y; row 0 is the top row.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, const T& fill = T{})
        : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
        require(width >= 0 && height >= 0, "grid dimensions must be non-negative");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& at(int x, int y) { return data_[index(x, y)]; }
    const T& at(int x, int y) const { return data_[index(x, y)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    bool same_shape(int width, int height) const { return width_ == width && height_ == height; }
    template <typename U>
    bool same_shape(const Grid<U>& other) const {
        return same_shape(other.width(), other.height());
    }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool operator==(const Grid& other) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using ScalarImage = Grid<double>;
using RgbImage = Grid<Rgb>;
using BinaryMask = Grid<std::uint8_t>;

// 8-bit PNG. Color values are clamped to [0,1] and rounded to the nearest code.
void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);

// 1-bit grayscale PNG for binary masks. Any nonzero value is written as 1.
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask_png(const std::filesystem::path& path);

// 32-bit float PFM, little-endian, rows stored bottom-to-top per the format.
void write_pfm(const std::filesystem::path& path, const ScalarImage& image);
void write_pfm(const std::filesystem::path& path, const RgbImage& image);
ScalarImage read_pfm_scalar(const std::filesystem::path& path);
RgbImage read_pfm_rgb(const std::filesystem::path& path);

/// Quantizes to what an 8-bit PNG would store (value / 255 after rounding).
RgbImage quantize_8bit(const RgbImage& image);

/// Mean squared error over all channels of the pixels where `region` is set
/// (every pixel when `region` is empty).
double mean_squared_error(const RgbImage& a, const RgbImage& b, const BinaryMask& region = {});

/// Peak signal-to-noise ratio for unit-range images. Infinite when identical.
double psnr(const RgbImage& a, const RgbImage& b, const BinaryMask& region = {});

/// Largest per-channel absolute difference over the pixels in `region`.
double max_abs_difference(const RgbImage& a, const RgbImage& b, const BinaryMask& region = {});

}  // namespace gsedit
