#pragma once

#include <refmap/common.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

namespace refmap {

/// Spatially-uniform reflectance (metallic, roughness, specular), each in [0, 1].
struct ReflectanceParams {
    double metallic = 0.0;
    double roughness = 0.5;
    double specular = 0.5;

    /// The mirror state (1, 0, 1).
    static constexpr ReflectanceParams mirror() { return {1.0, 0.0, 1.0}; }

    Vec3 as_vector() const { return {metallic, roughness, specular}; }
    static ReflectanceParams from_vector(const Vec3& v) { return {v(0), v(1), v(2)}; }

    /// Throws ArgumentError when a component is outside [0, 1] or non-finite.
    void validate() const;

    bool operator==(const ReflectanceParams&) const = default;
};

/// Uniform diffuse albedo rho_d in [0, 1]^3.
struct DiffuseAlbedo {
    Vec3 rgb = Vec3::Ones();

    static DiffuseAlbedo white() { return {Vec3::Ones()}; }
    void validate() const;
};

namespace brdf {

/// Floor on the GGX width so the mirror state stays integrable.
inline constexpr double kAlphaMin = 1e-3;

/// Disney roughness remap alpha = max(r^2, alpha_min).
inline double ggx_alpha(double roughness) { return std::max(roughness * roughness, kAlphaMin); }

template <typename Scalar>
Scalar schlick_weight(Scalar cos_theta) {
    const Scalar m = std::clamp(Scalar(1) - cos_theta, Scalar(0), Scalar(1));
    const Scalar m2 = m * m;
    return m2 * m2 * m;
}

/// Isotropic GGX normal distribution D(h) for cos(theta_h) = n.h.
template <typename Scalar>
Scalar ggx_d(Scalar n_dot_h, Scalar alpha) {
    const Scalar a2 = alpha * alpha;
    const Scalar t = n_dot_h * n_dot_h * (a2 - Scalar(1)) + Scalar(1);
    return a2 / (Scalar(kPi) * t * t);
}

/// Separable Smith masking term for GGX.
template <typename Scalar>
Scalar smith_g1(Scalar n_dot_w, Scalar alpha) {
    using std::sqrt;
    const Scalar a2 = alpha * alpha;
    return Scalar(2) * n_dot_w / (n_dot_w + sqrt(a2 + (Scalar(1) - a2) * n_dot_w * n_dot_w));
}

/// Specular reflectance at normal incidence: 0.08 * specular for dielectrics, lerped to
/// the base color at metallic = 1.
template <typename Scalar>
Vector3<Scalar> specular_f0(const ReflectanceParams& psi, const Vector3<Scalar>& rho_d) {
    const Scalar g = Scalar(psi.metallic);
    return (Scalar(1) - g) * Vector3<Scalar>::Constant(Scalar(0.08 * psi.specular)) + g * rho_d;
}

/// Burley diffuse and retro-reflection factors, f_diff + f_retro:
///   f_diff  = (1 - F_L / 2)(1 - F_V / 2)
///   f_retro = R_R (F_L + F_V + F_L F_V (R_R - 1)),  R_R = 2 r cos^2(theta_d)
/// with F_x = (1 - cos theta_x)^5.
template <typename Scalar>
Scalar burley_diffuse_factor(Scalar n_dot_l, Scalar n_dot_v, Scalar h_dot_l, Scalar roughness) {
    const Scalar fl = schlick_weight(n_dot_l);
    const Scalar fv = schlick_weight(n_dot_v);
    const Scalar rr = Scalar(2) * roughness * h_dot_l * h_dot_l;
    const Scalar diff = (Scalar(1) - Scalar(0.5) * fl) * (Scalar(1) - Scalar(0.5) * fv);
    const Scalar retro = rr * (fl + fv + fl * fv * (rr - Scalar(1)));
    return diff + retro;
}

/// Disney BRDF restricted to its diffuse, retro-reflective and specular lobes:
///   f_r = (1 - metallic) rho_d / pi (f_diff + f_retro) + D F G / (4 n.l n.v)
/// with GGX D, separable Smith G and Schlick F from specular_f0. Directions below the
/// horizon yield 0. Units: 1/sr.
template <typename Scalar>
Vector3<Scalar> eval_disney(const ReflectanceParams& psi, const Vector3<Scalar>& rho_d,
                            const Vector3<Scalar>& wi, const Vector3<Scalar>& wo,
                            const Vector3<Scalar>& n) {
    const Scalar n_dot_l = n.dot(wi);
    const Scalar n_dot_v = n.dot(wo);
    if (!(n_dot_l > Scalar(0)) || !(n_dot_v > Scalar(0))) {
        return Vector3<Scalar>::Zero();
    }
    const Vector3<Scalar> h = (wi + wo).normalized();
    const Scalar h_dot_l = std::clamp(h.dot(wi), Scalar(0), Scalar(1));
    const Scalar n_dot_h = std::clamp(n.dot(h), Scalar(0), Scalar(1));

    Vector3<Scalar> out = Vector3<Scalar>::Zero();
    if (psi.metallic < 1.0) {
        out += (Scalar(1) - Scalar(psi.metallic)) * rho_d / Scalar(kPi) *
               burley_diffuse_factor(n_dot_l, n_dot_v, h_dot_l, Scalar(psi.roughness));
    }
    const Scalar alpha = Scalar(ggx_alpha(psi.roughness));
    const Vector3<Scalar> f0 = specular_f0(psi, rho_d);
    const Scalar fw = schlick_weight(h_dot_l);
    const Vector3<Scalar> fresnel = f0 + (Vector3<Scalar>::Ones() - f0) * fw;
    const Scalar dg = ggx_d(n_dot_h, alpha) * smith_g1(n_dot_l, alpha) * smith_g1(n_dot_v, alpha) /
                      (Scalar(4) * n_dot_l * n_dot_v);
    out += dg * fresnel;
    return out;
}

/// Lambertian reference BRDF rho_d / pi above the horizon.
template <typename Scalar>
Vector3<Scalar> eval_lambert(const Vector3<Scalar>& rho_d, const Vector3<Scalar>& wi,
                             const Vector3<Scalar>& wo, const Vector3<Scalar>& n) {
    if (!(n.dot(wi) > Scalar(0)) || !(n.dot(wo) > Scalar(0))) {
        return Vector3<Scalar>::Zero();
    }
    return rho_d / Scalar(kPi);
}

/// ||(psi - mirror) / sqrt(3)||^2, in [0, 1].
double distance_to_mirror(const ReflectanceParams& psi);

/// Dense BRDF table over Rusinkiewicz half/difference angles.
///
/// Cell (a, b, c) sits at theta_h = (a + 0.5) pi / (2 n_theta_h),
/// theta_d = (b + 0.5) pi / (2 n_theta_d), phi_d = (c + 0.5) pi / n_phi_d, phi_h = 0.
/// Values are RGB; cells with either direction below the horizon hold 0 and are masked out.
struct MerlTable {
    int n_theta_h = 0;
    int n_theta_d = 0;
    int n_phi_d = 0;
    std::vector<double> values;  // ((a * n_theta_d + b) * n_phi_d + c) * 3 + channel
    std::vector<bool> valid;     // per cell

    std::size_t cells() const { return static_cast<std::size_t>(n_theta_h) * n_theta_d * n_phi_d; }
    std::size_t cell(int a, int b, int c) const {
        return (static_cast<std::size_t>(a) * n_theta_d + b) * n_phi_d + c;
    }
};

/// Incident/outgoing directions (in the frame n = +z) of a Rusinkiewicz cell.
std::pair<Vec3, Vec3> rusinkiewicz_directions(double theta_h, double theta_d, double phi_d);

MerlTable tabulate_merl_style(const ReflectanceParams& psi, const DiffuseAlbedo& rho_d,
                              int n_theta_h, int n_theta_d, int n_phi_d);

/// Flat binary: magic "RMBT" + uint32 n_theta_h, n_theta_d, n_phi_d (16 bytes, little-endian),
/// then float64 RGB values in table order. A JSON sidecar <path>.json describes the axes.
void write_merl_table(const std::filesystem::path& path, const MerlTable& table);
MerlTable read_merl_table(const std::filesystem::path& path);

} // namespace brdf
} // namespace refmap
