#pragma once

#include <refmap/brdf.hpp>
#include <refmap/envmap.hpp>
#include <refmap/normal_map.hpp>
#include <refmap/reflectance_map.hpp>

#include <Eigen/Core>

#include <span>

namespace refmap {

/// Numerical evaluation of L_r(n) = int f_r(w_i, w_o, n) L_i(w_i) max(w_i . n, 0) dw_i with a
/// fixed orthographic view w_o = (0, 0, 1) and no visibility term.
///
/// The diffuse lobes are summed over every environment pixel using the exact solid-angle
/// grid. The GGX lobe is integrated in half-vector space on a fixed stratified grid of
/// specular_samples^2 nodes distributed by the NDF, each node reading the environment
/// bilinearly; this keeps near-mirror lobes (narrower than an environment pixel) accurate.
/// Both rules are deterministic and linear in the environment.
struct RenderOptions {
    /// Integrate against the environment downsampled by this factor (1 = full grid).
    int env_stride = 1;
    /// Half-vector quadrature nodes per axis for the specular lobe.
    int specular_samples = 32;
};

/// Surface description used by the integrator.
struct Material {
    enum class Model { disney, lambert };

    Model model = Model::disney;
    ReflectanceParams psi;
    Vec3 rho_d = Vec3::Ones();

    static Material disney(const ReflectanceParams& psi, const Vec3& rho_d = Vec3::Ones()) {
        return {Model::disney, psi, rho_d};
    }
    static Material lambert(const Vec3& rho_d = Vec3::Ones()) {
        return {Model::lambert, ReflectanceParams{}, rho_d};
    }
};

namespace render {

inline const Vec3 kView{0.0, 0.0, 1.0};

/// Radiance leaving a surface with normal n toward kView.
Vec3 shade(const Material& material, const Vec3& n, const EnvironmentMap& env,
           const RenderOptions& options = {});

/// Reflectance map over the full unit disk.
ReflectanceMap render_reflectance_map(const ReflectanceParams& psi, const Vec3& rho_d,
                                      const EnvironmentMap& env, int resolution,
                                      const RenderOptions& options = {});
ReflectanceMap render_reflectance_map(const Material& material, const EnvironmentMap& env,
                                      int resolution, const RenderOptions& options = {});

/// Object image from a normal map and per-pixel albedo; background stays 0.
HdrImage render_object(const NormalMap& normals, const HdrImage& texture,
                       const ReflectanceParams& psi, const EnvironmentMap& env,
                       const RenderOptions& options = {});

/// Bins every foreground pixel into the reflectance-map cell containing its normal and
/// averages; untouched cells (and cells outside the disk) stay invalid.
ReflectanceMap lift_to_sphere(const HdrImage& image, const NormalMap& normals, int resolution);

/// Per-cell masked average of maps sharing one material.
ReflectanceMap merge_raw_maps(std::span<const ReflectanceMap> maps);

/// Linear operator from a (env_height x 2 env_height) grayscale environment (row-major
/// pixels) to the radiance of the masked cells of a resolution x resolution map, for the
/// material with white albedo. Row r corresponds to the r-th masked cell in raster order.
Eigen::MatrixXd transport_matrix(const ReflectanceParams& psi, const Mask& mask, int resolution,
                                 int env_height, const RenderOptions& options = {});

} // namespace render
} // namespace refmap
