#pragma once

#include <refmap/common.hpp>

#include <Eigen/Core>

#include <cstdint>

namespace refmap {

/// Row-major RGB raster. Row 0 is the top row; pixel (i, j) lives at row i * width + j
/// of `pixels`, with interleaved channels.
template <typename Scalar>
class RgbImage {
public:
    using Pixels = Eigen::Array<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

    RgbImage() = default;
    RgbImage(int height, int width) : height_(height), width_(width) {
        if (height < 0 || width < 0) {
            throw ArgumentError("image dimensions must be non-negative");
        }
        pixels_ = Pixels::Zero(static_cast<Eigen::Index>(height) * width, 3);
    }
    RgbImage(int height, int width, Pixels pixels)
        : height_(height), width_(width), pixels_(std::move(pixels)) {
        if (pixels_.rows() != static_cast<Eigen::Index>(height) * width) {
            throw ArgumentError("pixel buffer does not match image dimensions");
        }
    }

    int height() const { return height_; }
    int width() const { return width_; }
    Eigen::Index size() const { return pixels_.rows(); }

    Eigen::Index index(int i, int j) const { return static_cast<Eigen::Index>(i) * width_ + j; }
    auto pixel(int i, int j) { return pixels_.row(index(i, j)); }
    auto pixel(int i, int j) const { return pixels_.row(index(i, j)); }

    Pixels& pixels() { return pixels_; }
    const Pixels& pixels() const { return pixels_; }

    template <typename Other>
    RgbImage<Other> cast() const {
        return RgbImage<Other>(height_, width_, pixels_.template cast<Other>());
    }

    bool operator==(const RgbImage& other) const {
        return height_ == other.height_ && width_ == other.width_ &&
               (pixels_ == other.pixels_).all();
    }

private:
    int height_ = 0;
    int width_ = 0;
    Pixels pixels_;
};

using HdrImage = RgbImage<float>;
using LdrImage = RgbImage<std::uint8_t>;

/// Per-pixel validity flags, same indexing as RgbImage rows.
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

} // namespace refmap
