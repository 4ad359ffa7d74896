#pragma once

#include <refmap/image.hpp>
#include <refmap/reflectance_map.hpp>

#include <array>

namespace refmap {

/// Equirectangular map of distant linear-RGB radiance, width == 2 * height.
///
/// Direction convention (camera space, camera looking along -Z, +Y up):
///   theta = arccos(y) is the colatitude from +Y, phi = atan2(x, -z) in [0, 2 pi).
/// Pixel (i, j) has its center at theta = pi (i + 0.5) / H, phi = 2 pi (j + 0.5) / W.
class EnvironmentMap {
public:
    EnvironmentMap() = default;
    explicit EnvironmentMap(int height);
    explicit EnvironmentMap(HdrImage image);

    int height() const { return image_.height(); }
    int width() const { return image_.width(); }
    HdrImage& image() { return image_; }
    const HdrImage& image() const { return image_; }
    auto pixel(int i, int j) { return image_.pixel(i, j); }
    auto pixel(int i, int j) const { return image_.pixel(i, j); }

    /// Throws ValidationError unless every value is finite and >= 0.
    void validate_radiance() const;

    bool operator==(const EnvironmentMap& other) const { return image_ == other.image_; }

private:
    HdrImage image_;
};

/// Exact per-pixel solid angles: (2 pi / W) (cos theta_top - cos theta_bottom).
struct SolidAngleGrid {
    int height = 0;
    int width = 0;
    Eigen::ArrayXXd weights;  // height x width, steradians

    double weight(int i, int j) const { return weights(i, j); }
};

SolidAngleGrid solid_angles(int height, int width);

Vec3 direction_from_angles(double theta, double phi);
/// (theta, phi) with phi wrapped into [0, 2 pi).
std::pair<double, double> angles_from_direction(const Vec3& d);
Vec3 pixel_direction(int i, int j, int height, int width);

/// Bilinear footprint of a direction: four (pixel index, weight) taps with phi wraparound
/// and clamping at the poles. Weights sum to 1.
struct BilinearTaps {
    std::array<Eigen::Index, 4> index;
    std::array<double, 4> weight;
};
BilinearTaps bilinear_taps(const Vec3& direction, int height, int width);
Vec3 lookup(const EnvironmentMap& env, const Vec3& direction);

/// Solid-angle-weighted average of factor x factor blocks (factor must divide the height).
EnvironmentMap downsample(const EnvironmentMap& env, int factor);

/// Scales by 1 / (99th percentile of all channel values), clamps to [0, 1], applies
/// gamma 1/2.2 and quantizes. An all-zero map uses exposure 1.
LdrImage tonemap_ldr(const EnvironmentMap& env);
LdrImage tonemap_ldr(const EnvironmentMap& env, double exposure);
double percentile99(const EnvironmentMap& env);

/// Mirror reflectance map: each disk pixel looks up the environment along the reflection
/// of the view direction (0, 0, 1) about its normal.
ReflectanceMap mirror_warp(const EnvironmentMap& env, int resolution);

} // namespace refmap
