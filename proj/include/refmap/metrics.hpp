#pragma once

#include <refmap/brdf.hpp>
#include <refmap/envmap.hpp>
#include <refmap/sh.hpp>

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace refmap {
namespace metrics {

/// Floor applied before every logarithm.
inline constexpr double kLogEpsilon = 1e-6;

/// Population standard deviation of log(max(x, eps)) - log(max(y, eps)) over the masked
/// entries (all channels). Throws ArgumentError on size mismatch or an empty mask.
double si_log_rmse(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y);
double si_log_rmse(const HdrImage& x, const HdrImage& y, const Mask& mask);
double si_log_rmse(const HdrImage& x, const HdrImage& y);

/// RMSE of a x - y with the least-squares scale a = <x, y> / <x, x>.
double si_rmse(const HdrImage& x, const HdrImage& y, const Mask& mask);
double si_rmse(const HdrImage& x, const HdrImage& y);

/// 10 log10(1 / MSE) for values in [0, 1]; +infinity for identical inputs.
double psnr(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y);
double psnr(const LdrImage& x, const LdrImage& y);

/// Mean SSIM with an 11 x 11 Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2, over the
/// windows that fit inside the image. With a mask, only windows centered on masked pixels
/// are averaged. RGB inputs average the per-channel means.
double ssim(const Eigen::ArrayXXd& x, const Eigen::ArrayXXd& y);
double ssim(const Eigen::ArrayXXd& x, const Eigen::ArrayXXd& y, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask);
double ssim(const LdrImage& x, const LdrImage& y);
double ssim(const LdrImage& x, const LdrImage& y, const Mask& mask);

/// si_log_rmse between the masked MERL-style tables of two materials.
double brdf_log_rmse(const ReflectanceParams& psi_a, const DiffuseAlbedo& rho_a,
                     const ReflectanceParams& psi_b, const DiffuseAlbedo& rho_b, int n_theta_h = 16,
                     int n_theta_d = 16, int n_phi_d = 16);

/// Gaussian on the leading principal axes of a sample set.
struct PcaGaussianModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd axes;         // dimension x retained, orthonormal columns
    Eigen::VectorXd variances;    // retained, descending, floored
    double retained_ratio = 0.0;  // captured share of total variance
    double target_ratio = 0.99;

    Eigen::Index dimension() const { return mean.size(); }
    Eigen::Index retained() const { return variances.size(); }
    /// Coordinates of x on the retained axes.
    Eigen::VectorXd project(const Eigen::VectorXd& x) const;
};

/// Population covariance eigendecomposition (via SVD of the centered samples); keeps the
/// fewest axes whose cumulative variance reaches `ratio`. Axes are sorted by descending
/// variance with their first non-zero component positive; variances are floored at
/// 1e-8 times the largest. Needs at least 2 samples and non-zero total variance.
PcaGaussianModel fit_pca(const Eigen::MatrixXd& samples /* rows = samples */, double ratio = 0.99);
PcaGaussianModel fit_pca(std::span<const ShCoefficients> samples, double ratio = 0.99);

struct GaussianScore {
    double log_likelihood = 0.0;
    double mahalanobis = 0.0;
    /// Norm of the part of (x - mean) outside the retained subspace (diagnostic only).
    double residual_norm = 0.0;
};

GaussianScore gaussian_score(const PcaGaussianModel& model, const Eigen::VectorXd& x);
GaussianScore gaussian_score(const PcaGaussianModel& model, const ShCoefficients& gt);

enum class Direction { lower_better, higher_better };

/// Mean of the k best values.
double topk_aggregate(std::span<const double> values, int k = 3, Direction direction = Direction::lower_better);

/// Illumination quality of one sample against ground truth.
struct IlluminationScore {
    double si_log_rmse = 0.0;
    double si_rmse = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

/// HDR metrics on the clamped sample, then LDR metrics after scaling the sample by the
/// log-optimal factor and tone mapping both with the ground truth's exposure.
IlluminationScore score_illumination(const EnvironmentMap& sample, const EnvironmentMap& gt);

struct ScoreRow {
    std::string id;
    double nll = 0.0;
    IlluminationScore score;
};

/// One row per sample plus an AGGREGATE row (mean of the best 3 per column). LPIPS is
/// reported as unavailable.
struct ScoreReport {
    std::vector<ScoreRow> rows;

    void write_csv(const std::filesystem::path& path) const;
};

/// CSV "sample_id,source,pc1,pc2" of every sample projected on the first two axes.
struct PcaProjectionRow {
    std::string sample_id;
    std::string source;
    double pc1 = 0.0;
    double pc2 = 0.0;
};
void write_pca_projections(const std::filesystem::path& path, std::span<const PcaProjectionRow> rows);

/// Formats a double with 17 significant digits; infinities print as "inf" / "-inf".
std::string format_number(double v);

} // namespace metrics
} // namespace refmap
