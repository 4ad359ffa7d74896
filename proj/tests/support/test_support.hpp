#pragma once

#include <refmap/brdf.hpp>
#include <refmap/envmap.hpp>
#include <refmap/scene.hpp>
#include <refmap/sh.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <unistd.h>

namespace refmap::test {

/// Positive band-limited environment of the given degree.
inline EnvironmentMap random_env(int degree, std::uint64_t seed, int height) {
    return sh::reconstruct(scene::random_band_limited(degree, seed), height, 2 * height);
}

inline EnvironmentMap constant_env(int height, double value) {
    EnvironmentMap env(height);
    env.image().pixels().setConstant(static_cast<float>(value));
    return env;
}

inline double relative_rmse(const Eigen::ArrayXXd& a, const Eigen::ArrayXXd& b) {
    return std::sqrt((a - b).square().sum() / b.square().sum());
}

/// Masked rows of a reflectance map's radiance.
inline Eigen::ArrayXXd masked_values(const ReflectanceMap& map, const Mask& mask) {
    Eigen::ArrayXXd out(mask.count(), 3);
    Eigen::Index r = 0;
    for (Eigen::Index k = 0; k < mask.size(); ++k) {
        if (mask(k)) {
            out.row(r++) = map.radiance().pixels().row(k).cast<double>();
        }
    }
    return out;
}

/// Directional-hemispherical reflectance for outgoing direction wo (n = +z) by midpoint
/// quadrature in (cos theta, phi).
inline Vec3 hemispherical_reflectance(const ReflectanceParams& psi, const Vec3& rho, const Vec3& wo,
                                      int n_mu = 512, int n_phi = 512) {
    const Vec3 n(0, 0, 1);
    Vec3 sum = Vec3::Zero();
    for (int a = 0; a < n_mu; ++a) {
        const double mu = (a + 0.5) / n_mu;
        const double s = std::sqrt(1.0 - mu * mu);
        for (int b = 0; b < n_phi; ++b) {
            const double phi = 2.0 * kPi * (b + 0.5) / n_phi;
            const Vec3 wi(s * std::cos(phi), s * std::sin(phi), mu);
            sum += brdf::eval_disney(psi, rho, wi, wo, n) * mu;
        }
    }
    return sum * (2.0 * kPi / (static_cast<double>(n_mu) * n_phi));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("refmap_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace refmap::test
