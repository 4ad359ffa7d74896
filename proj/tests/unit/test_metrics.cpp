#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <refmap/metrics.hpp>

#include "support/test_support.hpp"

#include <algorithm>
#include <limits>

using namespace refmap;
using namespace refmap::metrics;

namespace {

Eigen::ArrayXd arr(std::initializer_list<double> v) {
    Eigen::ArrayXd a(static_cast<Eigen::Index>(v.size()));
    std::copy(v.begin(), v.end(), a.data());
    return a;
}

Eigen::ArrayXXd smooth_image(int h, int w, double phase) {
    Eigen::ArrayXXd x(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) x(i, j) = 0.5 + 0.4 * std::sin(0.3 * i + phase) * std::cos(0.2 * j);
    return x;
}

} // namespace

TEST_CASE("si_log_rmse") {
    const Eigen::ArrayXd y = arr({0.3, 1.2, 4.0, 0.01});
    CHECK(si_log_rmse(y, y) == 0.0);
    CHECK(si_log_rmse(2.0 * y, y) < 1e-15);
    CHECK(si_log_rmse(arr({1.0, std::exp(2.0)}), arr({1.0, 1.0})) == doctest::Approx(1.0).epsilon(1e-14));

    const Eigen::ArrayXd x = arr({0.5, 0.2, 3.0, 0.07});
    const double base = si_log_rmse(x, y);
    for (const double a : {0.25, 3.0, 1e3}) CHECK(si_log_rmse(a * x, y) == doctest::Approx(base).epsilon(1e-12));
    CHECK_THROWS_AS(si_log_rmse(x, arr({1.0})), ArgumentError);

    HdrImage a(2, 2), b(2, 2);
    a.pixels().setConstant(1.0f);
    b.pixels().setConstant(2.0f);
    b.pixels()(0, 0) = 100.0f;
    Mask m = Mask::Constant(4, true);
    m(0) = false;
    CHECK(si_log_rmse(a, b, m) < 1e-12);
    CHECK(si_log_rmse(a, b) > 0.0);
    CHECK_THROWS_AS(si_log_rmse(a, b, Mask::Constant(4, false)), ArgumentError);
}

TEST_CASE("si_rmse removes the best scale") {
    HdrImage a(3, 3), b(3, 3);
    for (Eigen::Index k = 0; k < a.pixels().size(); ++k) a.pixels().data()[k] = 0.1f * static_cast<float>(k + 1);
    b.pixels() = 3.0f * a.pixels();
    CHECK(si_rmse(a, b) < 1e-6);
}

TEST_CASE("psnr") {
    const Eigen::ArrayXd x = Eigen::ArrayXd::Constant(100, 0.5);
    CHECK(psnr(x, x) == std::numeric_limits<double>::infinity());
    CHECK(psnr(x, x + 0.1) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(psnr(Eigen::ArrayXd::Zero(100), Eigen::ArrayXd::Ones(100)) == doctest::Approx(0.0));
    CHECK_THROWS_AS(psnr(x, Eigen::ArrayXd::Zero(3)), ArgumentError);
}

TEST_CASE("ssim") {
    const Eigen::ArrayXXd x = smooth_image(24, 30, 0.0);
    const Eigen::ArrayXXd y = smooth_image(24, 30, 0.7);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-14));
    CHECK(ssim(x, y) < 1.0);

    const double c1 = 0.01 * 0.01;
    const double want = (2 * 0.5 * 0.25 + c1) / (0.25 + 0.0625 + c1);
    const double got = ssim(Eigen::ArrayXXd::Constant(16, 16, 0.5), Eigen::ArrayXXd::Constant(16, 16, 0.25));
    CHECK(got == doctest::Approx(want).epsilon(1e-12));

    CHECK_THROWS_AS(ssim(Eigen::ArrayXXd::Zero(10, 30), Eigen::ArrayXXd::Zero(10, 30)), ArgumentError);
    CHECK_THROWS_AS(ssim(x, Eigen::ArrayXXd::Zero(24, 29)), ArgumentError);
}

TEST_CASE("brdf log rmse") {
    const ReflectanceParams psi{0.0, 0.5, 0.5};
    const DiffuseAlbedo rho{Vec3(0.3, 0.4, 0.5)};
    CHECK(brdf_log_rmse(psi, rho, psi, rho) == 0.0);
    CHECK(brdf_log_rmse(ReflectanceParams::mirror(), rho, {0.0, 1.0, 0.0}, rho) > 0.1);

    // Equals si_log_rmse over the valid cells of the two tables.
    const ReflectanceParams other{1.0, 0.3, 1.0};
    const auto ta = brdf::tabulate_merl_style(psi, rho, 8, 8, 8);
    const auto tb = brdf::tabulate_merl_style(other, rho, 8, 8, 8);
    std::vector<double> xa, xb;
    for (std::size_t k = 0; k < ta.cells(); ++k) {
        if (!ta.valid[k]) continue;
        for (int ch = 0; ch < 3; ++ch) {
            xa.push_back(ta.values[k * 3 + ch]);
            xb.push_back(tb.values[k * 3 + ch]);
        }
    }
    const Eigen::ArrayXd a = Eigen::Map<Eigen::ArrayXd>(xa.data(), static_cast<Eigen::Index>(xa.size()));
    const Eigen::ArrayXd b = Eigen::Map<Eigen::ArrayXd>(xb.data(), static_cast<Eigen::Index>(xb.size()));
    CHECK(brdf_log_rmse(psi, rho, other, rho, 8, 8, 8) == doctest::Approx(si_log_rmse(a, b)).epsilon(1e-12));
    CHECK(si_log_rmse(2.0 * a, a) < 1e-14);
}

TEST_CASE("pca: rank-one samples keep one axis") {
    Eigen::MatrixXd s(20, 5);
    const Eigen::RowVectorXd dir = (Eigen::RowVectorXd(5) << 1, -2, 0.5, 3, 1).finished();
    for (int i = 0; i < 20; ++i) s.row(i) = 0.7 * i * dir + Eigen::RowVectorXd::Constant(5, 2.0);
    const auto model = fit_pca(s);
    CHECK(model.retained() == 1);
    CHECK(model.dimension() == 5);
    CHECK(std::abs(std::abs(model.axes.col(0).dot(dir.transpose().normalized())) - 1.0) < 1e-12);
    CHECK(model.axes.col(0)(0) > 0.0);
}

TEST_CASE("pca: isotropic gaussian keeps every axis with the generating variance") {
    const CounterRng rng(3);
    Eigen::MatrixXd s(10000, 3);
    for (Eigen::Index r = 0; r < s.rows(); ++r)
        for (int c = 0; c < 3; ++c) s(r, c) = 2.0 * rng.normal(static_cast<std::uint64_t>(r) * 3 + c);
    const auto model = fit_pca(s);
    CHECK(model.retained() == 3);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(model.variances(k) / 4.0 - 1.0) < 0.05);
    CHECK(model.retained_ratio >= 0.99);
}

TEST_CASE("pca: duplicated samples give the same model, projection loses at most 1%") {
    const CounterRng rng(4);
    Eigen::MatrixXd s(30, 6);
    for (Eigen::Index r = 0; r < s.rows(); ++r)
        for (int c = 0; c < 6; ++c) s(r, c) = (c + 1) * rng.normal(static_cast<std::uint64_t>(r) * 6 + c);
    Eigen::MatrixXd twice(60, 6);
    twice << s, s;
    const auto a = fit_pca(s);
    const auto b = fit_pca(twice);
    REQUIRE(a.retained() == b.retained());
    CHECK((a.mean - b.mean).norm() < 1e-12);
    CHECK((a.variances - b.variances).norm() < 1e-10 * a.variances(0));
    CHECK((a.axes - b.axes).cwiseAbs().maxCoeff() < 1e-8);

    const Eigen::MatrixXd centered = s.rowwise() - a.mean.transpose();
    const Eigen::MatrixXd back = centered * a.axes * a.axes.transpose();
    CHECK(back.squaredNorm() >= 0.99 * centered.squaredNorm() * (1.0 - 1e-12));

    CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd(s.topRows(1))), InsufficientDataError);
    std::vector<ShCoefficients> one(1, ShCoefficients(2));
    CHECK_THROWS_AS(fit_pca(one), InsufficientDataError);
}

TEST_CASE("gaussian score") {
    PcaGaussianModel m;
    m.mean = Eigen::VectorXd::Constant(1, 3.0);
    m.axes = Eigen::MatrixXd::Identity(1, 1);
    m.variances = Eigen::VectorXd::Constant(1, 4.0);
    CHECK(gaussian_score(m, Eigen::VectorXd::Constant(1, 3.0)).mahalanobis == 0.0);
    CHECK(gaussian_score(m, Eigen::VectorXd::Constant(1, 7.0)).mahalanobis == doctest::Approx(2.0).epsilon(1e-15));

    for (const int d : {1, 4, 9}) {
        PcaGaussianModel u;
        u.mean = Eigen::VectorXd::Zero(d);
        u.axes = Eigen::MatrixXd::Identity(d, d);
        u.variances = Eigen::VectorXd::Ones(d);
        CHECK(gaussian_score(u, Eigen::VectorXd::Zero(d)).log_likelihood ==
              doctest::Approx(-0.5 * d * std::log(2.0 * kPi)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(gaussian_score(m, Eigen::VectorXd::Zero(2)), ArgumentError);
}

TEST_CASE("mahalanobis is invariant under an invertible affine map") {
    const CounterRng rng(5);
    const int n = 40, d = 4;
    Eigen::MatrixXd s(n, d);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) s(r, c) = rng.normal(static_cast<std::uint64_t>(r) * d + c) * (1.0 + c);
    Eigen::VectorXd gt(d);
    for (int c = 0; c < d; ++c) gt(c) = rng.fork(1).normal(c);
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = (i == j ? 2.0 : 0.0) + 0.3 * rng.fork(2).normal(i * d + j);
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(d, -1.0, 2.0);

    const auto m1 = fit_pca(s, 1.0);
    REQUIRE(m1.retained() == d);
    const Eigen::MatrixXd s2 = (s * a.transpose()).rowwise() + t.transpose();
    const auto m2 = fit_pca(s2, 1.0);
    REQUIRE(m2.retained() == d);
    const double d1 = gaussian_score(m1, gt).mahalanobis;
    const double d2 = gaussian_score(m2, Eigen::VectorXd(a * gt + t)).mahalanobis;
    CHECK(std::abs(d1 - d2) <= 1e-6 * d1);
}

TEST_CASE("top-k aggregate") {
    std::vector<double> v{4, 9, 1, 7, 3, 10, 2, 8, 6, 5};
    CHECK(topk_aggregate(v) == doctest::Approx(2.0));
    CHECK(topk_aggregate(v, 3, Direction::higher_better) == doctest::Approx(9.0));
    std::reverse(v.begin(), v.end());
    CHECK(topk_aggregate(v) == doctest::Approx(2.0));
    const std::vector<double> same(10, 0.7);
    CHECK(topk_aggregate(same) == doctest::Approx(0.7));
    const std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(topk_aggregate(two), ArgumentError);
}

TEST_CASE("illumination score of a scaled copy") {
    const EnvironmentMap gt = test::random_env(4, 2, 16);
    EnvironmentMap s = gt;
    s.image().pixels() *= 5.0f;
    const auto score = score_illumination(s, gt);
    CHECK(score.si_log_rmse < 1e-6);
    CHECK(score.ssim > 0.999);
    CHECK(score.psnr > 40.0);
}

TEST_CASE("score report and projection csv") {
    const auto dir = test::temp_dir("metrics_csv");
    ScoreReport report;
    for (int i = 0; i < 4; ++i) report.rows.push_back({"s" + std::to_string(i), double(i), {0.1 * i, 0.2, 30.0 + i, 0.5}});
    report.rows[0].score.psnr = std::numeric_limits<double>::infinity();
    report.write_csv(dir / "scores.csv");
    const std::string text = test::read_file(dir / "scores.csv");
    CHECK(text.rfind("sample,nll,si_log_rmse,si_rmse,psnr,ssim,lpips\n", 0) == 0);
    CHECK(text.find("s0,0,0,0.20000000000000001,inf,0.5,unavailable\n") != std::string::npos);
    CHECK(text.find("\nAGGREGATE,1,") != std::string::npos);

    ScoreReport small;
    small.rows.push_back({"a", 1.0, {}});
    small.write_csv(dir / "small.csv");
    CHECK(test::read_file(dir / "small.csv").find("AGGREGATE") == std::string::npos);

    const std::vector<PcaProjectionRow> rows{{"x_0", "multi", 1.5, -2.0}};
    write_pca_projections(dir / "p.csv", rows);
    CHECK(test::read_file(dir / "p.csv") == "sample_id,source,pc1,pc2\nx_0,multi,1.5,-2\n");
    CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
}
