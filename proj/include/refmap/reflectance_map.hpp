#pragma once

#include <refmap/image.hpp>

#include <optional>
#include <utility>

namespace refmap {

/// Radiance on the Gaussian sphere of camera-facing normals.
///
/// Pixel (i, j) of an N x N map has center (u, v) = (-1 + (2j+1)/N, 1 - (2i+1)/N) and, when
/// u^2 + v^2 <= 1, represents the normal n = (u, v, sqrt(1 - u^2 - v^2)). The mask marks
/// cells that carry data; it is always a subset of the unit disk.
class ReflectanceMap {
public:
    ReflectanceMap() = default;
    explicit ReflectanceMap(int resolution);

    /// All disk cells valid, zero radiance.
    static ReflectanceMap full_disk(int resolution);

    int resolution() const { return resolution_; }
    HdrImage& radiance() { return radiance_; }
    const HdrImage& radiance() const { return radiance_; }
    Mask& mask() { return mask_; }
    const Mask& mask() const { return mask_; }

    Eigen::Index valid_count() const { return mask_.count(); }

    static bool in_disk(int i, int j, int resolution);
    static Vec3 normal_at(int i, int j, int resolution);
    /// Cell containing normal n (nearest-cell binning), or nothing when the cell center
    /// falls outside the disk.
    static std::optional<std::pair<int, int>> cell_of(const Vec3& n, int resolution);

    /// Throws ValidationError if the mask leaves the disk or masked radiance is
    /// negative or non-finite.
    void validate() const;

    bool operator==(const ReflectanceMap& other) const {
        return resolution_ == other.resolution_ && radiance_ == other.radiance_ &&
               (mask_ == other.mask_).all();
    }

private:
    int resolution_ = 0;
    HdrImage radiance_;
    Mask mask_;
};

/// Masked-average downsampling by an integer factor. A coarse cell is valid when its
/// center is inside the disk and at least one child is valid.
ReflectanceMap downsample(const ReflectanceMap& map, int factor);

} // namespace refmap
