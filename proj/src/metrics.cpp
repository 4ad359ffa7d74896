#include <refmap/metrics.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>

namespace refmap {
namespace metrics {

namespace {

Eigen::ArrayXd masked_values(const HdrImage& img, const Mask& mask) {
    if (mask.size() != img.size()) {
        throw ArgumentError("mask does not match the image size");
    }
    Eigen::ArrayXd out(mask.count() * 3);
    Eigen::Index n = 0;
    for (Eigen::Index k = 0; k < img.size(); ++k) {
        if (mask(k)) {
            for (int ch = 0; ch < 3; ++ch) {
                out(n++) = img.pixels()(k, ch);
            }
        }
    }
    return out;
}

void check_same_shape(const HdrImage& x, const HdrImage& y) {
    if (x.height() != y.height() || x.width() != y.width()) {
        throw ArgumentError("images differ in size");
    }
}

} // namespace

double si_log_rmse(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
    if (x.size() != y.size()) {
        throw ArgumentError("si_log_rmse inputs differ in size");
    }
    if (x.size() == 0) {
        throw ArgumentError("si_log_rmse is undefined on an empty mask");
    }
    const Eigen::ArrayXd d = x.max(kLogEpsilon).log() - y.max(kLogEpsilon).log();
    return std::sqrt((d - d.mean()).square().mean());
}

double si_log_rmse(const HdrImage& x, const HdrImage& y, const Mask& mask) {
    check_same_shape(x, y);
    return si_log_rmse(masked_values(x, mask), masked_values(y, mask));
}

double si_log_rmse(const HdrImage& x, const HdrImage& y) {
    return si_log_rmse(x, y, Mask::Constant(x.size(), true));
}

double si_rmse(const HdrImage& x, const HdrImage& y, const Mask& mask) {
    check_same_shape(x, y);
    const Eigen::ArrayXd a = masked_values(x, mask);
    const Eigen::ArrayXd b = masked_values(y, mask);
    if (a.size() == 0) {
        throw ArgumentError("si_rmse is undefined on an empty mask");
    }
    const double xx = a.square().sum();
    const double s = xx > 0.0 ? (a * b).sum() / xx : 0.0;
    return std::sqrt((s * a - b).square().mean());
}

double si_rmse(const HdrImage& x, const HdrImage& y) {
    return si_rmse(x, y, Mask::Constant(x.size(), true));
}

double psnr(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
    if (x.size() != y.size() || x.size() == 0) {
        throw ArgumentError("psnr needs equal, non-empty inputs");
    }
    const double mse = (x - y).square().mean();
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(1.0 / mse);
}

double psnr(const LdrImage& x, const LdrImage& y) {
    if (x.height() != y.height() || x.width() != y.width()) {
        throw ArgumentError("images differ in size");
    }
    const auto to_unit = [](const LdrImage& img) {
        return Eigen::Map<const Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>>(img.pixels().data(), img.pixels().size())
                   .cast<double>() / 255.0;
    };
    return psnr(Eigen::ArrayXd(to_unit(x)), Eigen::ArrayXd(to_unit(y)));
}

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
    std::array<double, kWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        w[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
        sum += w[i];
    }
    for (auto& v : w) {
        v /= sum;
    }
    return w;
}

// Separable "valid" filtering with the normalized Gaussian window.
Eigen::ArrayXXd filter_valid(const Eigen::ArrayXXd& img) {
    static const auto w = gaussian_window();
    const Eigen::Index oh = img.rows() - kWindow + 1;
    const Eigen::Index ow = img.cols() - kWindow + 1;
    Eigen::ArrayXXd tmp = Eigen::ArrayXXd::Zero(img.rows(), ow);
    for (Eigen::Index j = 0; j < ow; ++j) {
        for (int t = 0; t < kWindow; ++t) {
            tmp.col(j) += w[t] * img.col(j + t);
        }
    }
    Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(oh, ow);
    for (Eigen::Index i = 0; i < oh; ++i) {
        for (int t = 0; t < kWindow; ++t) {
            out.row(i) += w[t] * tmp.row(i + t);
        }
    }
    return out;
}

Eigen::ArrayXXd ssim_map(const Eigen::ArrayXXd& x, const Eigen::ArrayXXd& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
        throw ArgumentError("ssim inputs differ in size");
    }
    if (x.rows() < kWindow || x.cols() < kWindow) {
        throw ArgumentError("ssim needs images of at least 11 x 11 pixels");
    }
    const Eigen::ArrayXXd mx = filter_valid(x);
    const Eigen::ArrayXXd my = filter_valid(y);
    const Eigen::ArrayXXd sxx = (filter_valid(x * x) - mx * mx).max(0.0);
    const Eigen::ArrayXXd syy = (filter_valid(y * y) - my * my).max(0.0);
    const Eigen::ArrayXXd sxy = filter_valid(x * y) - mx * my;
    return ((2.0 * mx * my + kC1) * (2.0 * sxy + kC2)) /
           ((mx * mx + my * my + kC1) * (sxx + syy + kC2));
}

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

double masked_mean(const Eigen::ArrayXXd& map, const BoolGrid& mask) {
    const int half = kWindow / 2;
    double sum = 0.0;
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < map.rows(); ++i) {
        for (Eigen::Index j = 0; j < map.cols(); ++j) {
            if (mask(i + half, j + half)) {
                sum += map(i, j);
                ++n;
            }
        }
    }
    if (n == 0) {
        throw ArgumentError("no SSIM window is centered on a masked pixel");
    }
    return sum / static_cast<double>(n);
}

Eigen::ArrayXXd channel(const LdrImage& img, int ch) {
    Eigen::ArrayXXd out(img.height(), img.width());
    for (int i = 0; i < img.height(); ++i) {
        for (int j = 0; j < img.width(); ++j) {
            out(i, j) = img.pixel(i, j)(ch) / 255.0;
        }
    }
    return out;
}

} // namespace

double ssim(const Eigen::ArrayXXd& x, const Eigen::ArrayXXd& y) {
    return ssim_map(x, y).mean();
}

double ssim(const Eigen::ArrayXXd& x, const Eigen::ArrayXXd& y, const BoolGrid& mask) {
    if (mask.rows() != x.rows() || mask.cols() != x.cols()) {
        throw ArgumentError("ssim mask differs in size");
    }
    return masked_mean(ssim_map(x, y), mask);
}

double ssim(const LdrImage& x, const LdrImage& y) {
    double sum = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        sum += ssim(channel(x, ch), channel(y, ch));
    }
    return sum / 3.0;
}

double ssim(const LdrImage& x, const LdrImage& y, const Mask& mask) {
    if (mask.size() != x.size()) {
        throw ArgumentError("ssim mask differs in size");
    }
    BoolGrid grid(x.height(), x.width());
    for (int i = 0; i < x.height(); ++i) {
        for (int j = 0; j < x.width(); ++j) {
            grid(i, j) = mask(x.index(i, j));
        }
    }
    double sum = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        sum += ssim(channel(x, ch), channel(y, ch), grid);
    }
    return sum / 3.0;
}

double brdf_log_rmse(const ReflectanceParams& psi_a, const DiffuseAlbedo& rho_a,
                     const ReflectanceParams& psi_b, const DiffuseAlbedo& rho_b, int n_theta_h,
                     int n_theta_d, int n_phi_d) {
    const auto a = brdf::tabulate_merl_style(psi_a, rho_a, n_theta_h, n_theta_d, n_phi_d);
    const auto b = brdf::tabulate_merl_style(psi_b, rho_b, n_theta_h, n_theta_d, n_phi_d);
    std::vector<double> xa;
    std::vector<double> xb;
    for (std::size_t k = 0; k < a.cells(); ++k) {
        if (!a.valid[k]) {
            continue;
        }
        for (int ch = 0; ch < 3; ++ch) {
            xa.push_back(a.values[k * 3 + ch]);
            xb.push_back(b.values[k * 3 + ch]);
        }
    }
    const auto view = [](const std::vector<double>& v) {
        return Eigen::Map<const Eigen::ArrayXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    };
    return si_log_rmse(Eigen::ArrayXd(view(xa)), Eigen::ArrayXd(view(xb)));
}

Eigen::VectorXd PcaGaussianModel::project(const Eigen::VectorXd& x) const {
    if (x.size() != mean.size()) {
        throw ArgumentError("vector has dimension " + std::to_string(x.size()) + " but the model has " +
                            std::to_string(mean.size()));
    }
    return axes.transpose() * (x - mean);
}

PcaGaussianModel fit_pca(const Eigen::MatrixXd& samples, double ratio) {
    if (samples.rows() < 2) {
        throw InsufficientDataError("PCA needs at least 2 samples, got " + std::to_string(samples.rows()));
    }
    if (!(ratio > 0.0) || ratio > 1.0) {
        throw ArgumentError("retained variance ratio must lie in (0, 1]");
    }
    const double n = static_cast<double>(samples.rows());
    PcaGaussianModel model;
    model.target_ratio = ratio;
    model.mean = samples.colwise().mean().transpose();
    const Eigen::MatrixXd centered = samples.rowwise() - model.mean.transpose();
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd eig = svd.singularValues().array().square() / n;
    const double total = eig.sum();
    if (!(total > 0.0)) {
        throw InsufficientDataError("PCA samples have zero variance");
    }
    Eigen::Index k = 0;
    double captured = 0.0;
    while (k < eig.size()) {
        captured += eig(k++);
        if (captured >= ratio * total) {
            break;
        }
    }
    model.retained_ratio = captured / total;
    model.axes = svd.matrixV().leftCols(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const auto col = model.axes.col(c);
        const double tol = 1e-12 * col.cwiseAbs().maxCoeff();
        for (Eigen::Index r = 0; r < col.size(); ++r) {
            if (std::abs(col(r)) > tol) {
                if (col(r) < 0.0) {
                    model.axes.col(c) *= -1.0;
                }
                break;
            }
        }
    }
    model.variances = eig.head(k).cwiseMax(1e-8 * eig(0));
    return model;
}

PcaGaussianModel fit_pca(std::span<const ShCoefficients> samples, double ratio) {
    if (samples.size() < 2) {
        throw InsufficientDataError("PCA needs at least 2 samples, got " + std::to_string(samples.size()));
    }
    const Eigen::Index d = samples.front().flatten().size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), d);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Eigen::VectorXd f = samples[i].flatten();
        if (f.size() != d) {
            throw ArgumentError("PCA samples differ in SH degree");
        }
        x.row(static_cast<Eigen::Index>(i)) = f.transpose();
    }
    return fit_pca(x, ratio);
}

GaussianScore gaussian_score(const PcaGaussianModel& model, const Eigen::VectorXd& x) {
    const Eigen::VectorXd z = model.project(x);
    const Eigen::ArrayXd q = z.array().square() / model.variances.array();
    GaussianScore s;
    s.mahalanobis = std::sqrt(q.sum());
    s.log_likelihood = -0.5 * (q + (2.0 * kPi * model.variances.array()).log()).sum();
    s.residual_norm = ((x - model.mean) - model.axes * z).norm();
    return s;
}

GaussianScore gaussian_score(const PcaGaussianModel& model, const ShCoefficients& gt) {
    return gaussian_score(model, gt.flatten());
}

double topk_aggregate(std::span<const double> values, int k, Direction direction) {
    if (k < 1 || values.size() < static_cast<std::size_t>(k)) {
        throw ArgumentError("top-" + std::to_string(k) + " aggregate needs at least " + std::to_string(k) +
                            " values, got " + std::to_string(values.size()));
    }
    std::vector<double> v(values.begin(), values.end());
    if (direction == Direction::lower_better) {
        std::partial_sort(v.begin(), v.begin() + k, v.end());
    } else {
        std::partial_sort(v.begin(), v.begin() + k, v.end(), std::greater<>());
    }
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        sum += v[static_cast<std::size_t>(i)];
    }
    return sum / k;
}

IlluminationScore score_illumination(const EnvironmentMap& sample, const EnvironmentMap& gt) {
    if (sample.height() != gt.height() || sample.width() != gt.width()) {
        throw ArgumentError("sample and ground-truth environments differ in size");
    }
    HdrImage x = sample.image();
    x.pixels() = x.pixels().max(0.0f);
    const HdrImage& y = gt.image();

    IlluminationScore s;
    s.si_log_rmse = si_log_rmse(x, y);
    s.si_rmse = si_rmse(x, y);

    const Eigen::ArrayXd lx = Eigen::Map<const Eigen::ArrayXf>(x.pixels().data(), x.pixels().size()).cast<double>();
    const Eigen::ArrayXd ly = Eigen::Map<const Eigen::ArrayXf>(y.pixels().data(), y.pixels().size()).cast<double>();
    const double offset = (ly.max(kLogEpsilon).log() - lx.max(kLogEpsilon).log()).mean();
    EnvironmentMap scaled(x);
    scaled.image().pixels() *= static_cast<float>(std::exp(offset));
    const double p99 = percentile99(gt);
    const double exposure = p99 > 0.0 ? 1.0 / p99 : 1.0;
    const LdrImage a = tonemap_ldr(scaled, exposure);
    const LdrImage b = tonemap_ldr(gt, exposure);
    s.psnr = psnr(a, b);
    s.ssim = ssim(a, b);
    return s;
}

std::string format_number(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void ScoreReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "sample,nll,si_log_rmse,si_rmse,psnr,ssim,lpips\n";
    std::vector<double> nll, slr, sr, ps, ss;
    for (const auto& r : rows) {
        out << r.id << ',' << format_number(r.nll) << ',' << format_number(r.score.si_log_rmse) << ','
            << format_number(r.score.si_rmse) << ',' << format_number(r.score.psnr) << ','
            << format_number(r.score.ssim) << ",unavailable\n";
        nll.push_back(r.nll);
        slr.push_back(r.score.si_log_rmse);
        sr.push_back(r.score.si_rmse);
        ps.push_back(r.score.psnr);
        ss.push_back(r.score.ssim);
    }
    if (rows.size() >= 3) {
        out << "AGGREGATE," << format_number(topk_aggregate(nll)) << ',' << format_number(topk_aggregate(slr)) << ','
            << format_number(topk_aggregate(sr)) << ','
            << format_number(topk_aggregate(ps, 3, Direction::higher_better)) << ','
            << format_number(topk_aggregate(ss, 3, Direction::higher_better)) << ",unavailable\n";
    }
}

void write_pca_projections(const std::filesystem::path& path, std::span<const PcaProjectionRow> rows) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "sample_id,source,pc1,pc2\n";
    for (const auto& r : rows) {
        out << r.sample_id << ',' << r.source << ',' << format_number(r.pc1) << ',' << format_number(r.pc2) << '\n';
    }
}

} // namespace metrics
} // namespace refmap
