#pragma once

#include <refmap/envmap.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace refmap {

/// Real spherical-harmonic expansion of an RGB function on the sphere.
///
/// Basis: orthonormal real SH without the Condon-Shortley phase,
///   Y_l0     = K_l0 P_l(cos theta)
///   Y_lm     = sqrt(2) K_lm P_l^m(cos theta) cos(m phi)     (m > 0)
///   Y_l,-m   = sqrt(2) K_lm P_l^m(cos theta) sin(m phi)     (m > 0)
/// with P_l^m >= 0 for theta in [0, pi] and K_lm = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!).
/// Coefficient (l, m) lives in row l*l + l + m.
struct ShCoefficients {
    int degree = 0;
    Eigen::Matrix<double, Eigen::Dynamic, 3> coeffs;

    ShCoefficients() = default;
    explicit ShCoefficients(int degree_)
        : degree(degree_), coeffs(Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(count(degree_), 3)) {
        if (degree_ < 0) {
            throw ArgumentError("SH degree must be >= 0");
        }
    }

    static constexpr Eigen::Index count(int degree) {
        return static_cast<Eigen::Index>(degree + 1) * (degree + 1);
    }
    static constexpr Eigen::Index index(int l, int m) { return static_cast<Eigen::Index>(l) * l + l + m; }

    auto at(int l, int m) { return coeffs.row(index(l, m)); }
    auto at(int l, int m) const { return coeffs.row(index(l, m)); }

    /// Copies into a basis of another degree (truncating or zero-padding).
    ShCoefficients resized(int new_degree) const;

    /// Row-major flattening (l, m) x channel, the feature vector used by the PCA metric.
    Eigen::VectorXd flatten() const;
};

/// Per-degree power p_l = sum_m sum_channel c_lm^2.
struct BandSpectrum {
    Eigen::ArrayXd power;
};

namespace sh {

/// Normalized associated Legendre values Pbar_lm(x) = K_lm P_l^m(x) for 0 <= m <= l <= degree,
/// stored at index(l, m) for m >= 0 (negative-m slots left zero). Uses the stable
/// three-term recurrence in l for each m.
template <typename Scalar>
void legendre(int degree, Scalar x, Eigen::Ref<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> out) {
    using std::sqrt;
    const Scalar s = sqrt(std::max(Scalar(0), Scalar(1) - x * x));
    out.setZero();
    Scalar pmm = Scalar(1) / sqrt(Scalar(4) * Scalar(kPi));
    for (int m = 0; m <= degree; ++m) {
        if (m > 0) {
            pmm *= sqrt(Scalar(2 * m + 1) / Scalar(2 * m)) * s;
        }
        out(ShCoefficients::index(m, m)) = pmm;
        if (m == degree) {
            break;
        }
        Scalar prev2 = pmm;
        Scalar prev1 = sqrt(Scalar(2 * m + 3)) * x * pmm;
        out(ShCoefficients::index(m + 1, m)) = prev1;
        for (int l = m + 2; l <= degree; ++l) {
            const Scalar a = sqrt(Scalar(4 * l * l - 1) / Scalar(l * l - m * m));
            const Scalar b = sqrt(Scalar((l - 1) * (l - 1) - m * m) /
                                  Scalar(4 * (l - 1) * (l - 1) - 1));
            const Scalar cur = a * (x * prev1 - b * prev2);
            out(ShCoefficients::index(l, m)) = cur;
            prev2 = prev1;
            prev1 = cur;
        }
    }
}

/// All (degree+1)^2 basis values at a direction.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> basis(int degree, const Vector3<Scalar>& direction) {
    const auto [theta, phi] = angles_from_direction(direction.template cast<double>());
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y(ShCoefficients::count(degree));
    legendre<Scalar>(degree, Scalar(std::cos(theta)), y);
    const Scalar root2 = std::sqrt(Scalar(2));
    for (int m = 1; m <= degree; ++m) {
        const Scalar c = Scalar(std::cos(m * phi));
        const Scalar s = Scalar(std::sin(m * phi));
        for (int l = m; l <= degree; ++l) {
            const Scalar p = y(ShCoefficients::index(l, m));
            y(ShCoefficients::index(l, m)) = root2 * p * c;
            y(ShCoefficients::index(l, -m)) = root2 * p * s;
        }
    }
    return y;
}

/// Quadrature weights for the equirect grid used by projection: Fejer's first rule in
/// cos(theta) on the row centers times 2 pi / W. They sum to 4 pi and integrate products of
/// basis functions exactly when l + l' < height and m + m' < width.
Eigen::ArrayXd projection_row_weights(int height, int width);

/// c_lm = sum_pixels env(i, j) Y_lm(theta_i, phi_j) w_i. Emits a warning (not an error) when
/// (degree+1)^2 exceeds the pixel count.
ShCoefficients project(const EnvironmentMap& env, int degree);

/// Evaluates the expansion at every pixel center. Negative values are kept.
EnvironmentMap reconstruct(const ShCoefficients& coeffs, int height, int width);

/// (height*width) x (degree+1)^2 matrix of basis values at pixel centers, row = i*width + j.
Eigen::MatrixXd basis_matrix(int degree, int height, int width);

Vec3 evaluate(const ShCoefficients& coeffs, const Vec3& direction);

BandSpectrum band_power(const ShCoefficients& coeffs);

/// Clamped-cosine kernel A_l for l = 0..degree.
Eigen::ArrayXd lambert_kernel(int degree);

/// Irradiance coefficients: c_lm scaled by A_l.
ShCoefficients lambert_convolve(const ShCoefficients& coeffs);

/// CSV with header "l,m,c_R,c_G,c_B".
void write_coefficients_csv(const std::filesystem::path& path, const ShCoefficients& coeffs);
/// CSV with header "l,power".
void write_spectrum_csv(const std::filesystem::path& path, const BandSpectrum& spectrum);

} // namespace sh
} // namespace refmap
