#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <refmap/render.hpp>
#include <refmap/scene.hpp>
#include <refmap/sh.hpp>

#include "support/test_support.hpp"

#include <limits>

using namespace refmap;

namespace {

const RenderOptions kFast{1, 16};

HdrImage white_texture(int h, int w) {
    HdrImage t(h, w);
    t.pixels().setOnes();
    return t;
}

/// Environment with one bright disc of the given angular radius around d.
EnvironmentMap spot_env(int height, const Vec3& d, double radius) {
    EnvironmentMap env(height);
    for (int i = 0; i < env.height(); ++i)
        for (int j = 0; j < env.width(); ++j) {
            const double c = pixel_direction(i, j, env.height(), env.width()).dot(d);
            env.pixel(i, j).setConstant(c > std::cos(radius) ? 50.0f : 0.05f);
        }
    return env;
}

} // namespace

TEST_CASE("lambert under a constant environment returns rho * c") {
    const Vec3 rho(0.2, 0.5, 0.8);
    const EnvironmentMap env = test::constant_env(128, 2.0);
    for (const Vec3 n : {Vec3(0, 0, 1), Vec3(0.6, 0, 0.8), Vec3(-0.3, 0.5, 0.2).normalized()}) {
        const Vec3 out = render::shade(Material::lambert(rho), n, env);
        CHECK((out - 2.0 * rho).cwiseAbs().maxCoeff() < 1e-4 * 2.0);
    }
}

TEST_CASE("zero environment renders zero") {
    const EnvironmentMap env = test::constant_env(16, 0.0);
    const auto map = render::render_reflectance_map({0.0, 0.3, 0.5}, Vec3::Ones(), env, 8, kFast);
    CHECK((map.radiance().pixels() == 0.0f).all());
}

TEST_CASE("rendering is linear in the environment") {
    const EnvironmentMap a = test::random_env(4, 1, 16);
    const EnvironmentMap b = test::random_env(4, 2, 16);
    EnvironmentMap sum = a;
    sum.image().pixels() = 2.0f * a.image().pixels() + 3.0f * b.image().pixels();
    const Material mat = Material::disney({0.0, 0.35, 0.6}, Vec3(0.7, 0.4, 0.2));
    for (const Vec3 n : {Vec3(0, 0, 1), Vec3(0.5, -0.5, 0.7).normalized()}) {
        const Vec3 lhs = render::shade(mat, n, sum, kFast);
        const Vec3 rhs = 2.0 * render::shade(mat, n, a, kFast) + 3.0 * render::shade(mat, n, b, kFast);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-5 * rhs.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("lambert matches the spherical-harmonic irradiance within 1%") {
    const ShCoefficients c = scene::random_band_limited(6, 17);
    const EnvironmentMap env = sh::reconstruct(c, 128, 256);
    const ShCoefficients irradiance = sh::lambert_convolve(c);
    const auto map = render::render_reflectance_map(Material::lambert(), env, 16);
    Eigen::ArrayXXd got(map.valid_count(), 3), want(map.valid_count(), 3);
    Eigen::Index r = 0;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            if (!map.mask()(i * 16 + j)) continue;
            got.row(r) = map.radiance().pixel(i, j).cast<double>();
            want.row(r++) = (sh::evaluate(irradiance, ReflectanceMap::normal_at(i, j, 16)) / kPi).transpose().array();
        }
    CHECK(test::relative_rmse(got, want) < 0.01);
}

TEST_CASE("peak radiance of a point-like light falls as roughness grows") {
    const EnvironmentMap env = spot_env(128, Vec3(0, 0, 1), 0.05);
    double previous = std::numeric_limits<double>::infinity();
    for (const double r : {0.05, 0.2, 0.4, 0.7, 1.0}) {
        const Vec3 v = render::shade(Material::disney({1.0, r, 1.0}), Vec3(0, 0, 1), env, {1, 32});
        CHECK(v(0) < previous);
        previous = v(0);
    }
}

TEST_CASE("high-band power of the rendered map does not grow with roughness") {
    const int res = 32;
    // Embeds channel 0 of a map as an environment over the camera-facing hemisphere.
    const auto embed = [res](const ReflectanceMap& map) {
        EnvironmentMap env(64);
        for (int i = 0; i < env.height(); ++i)
            for (int j = 0; j < env.width(); ++j) {
                const Vec3 d = pixel_direction(i, j, env.height(), env.width());
                if (d.z() <= 0.0) continue;
                const auto cell = ReflectanceMap::cell_of(d, res);
                if (cell) env.pixel(i, j).setConstant(map.radiance().pixel(cell->first, cell->second)(0));
            }
        return env;
    };
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const EnvironmentMap env = test::random_env(12, 100 + seed, 32);
        double previous = std::numeric_limits<double>::infinity();
        for (const double r : {0.1, 0.3, 0.5, 0.8}) {
            const auto map = render::render_reflectance_map({1.0, r, 1.0}, Vec3::Ones(), env, res, kFast);
            const Eigen::ArrayXd power = sh::band_power(sh::project(embed(map), 16)).power;
            const double high = power.tail(power.size() - 4).sum();
            CHECK(high <= previous * (1.0 + 1e-9));
            previous = high;
        }
    }
}

TEST_CASE("a near-mirror metal reproduces the mirror warp of a smooth environment") {
    const int res = 128;
    const EnvironmentMap env = test::random_env(8, 31, 64);
    const auto map = render::render_reflectance_map(ReflectanceParams::mirror(), Vec3::Ones(), env, res, {1, 16});
    const auto warp = mirror_warp(env, res);
    Eigen::ArrayXXd a = Eigen::ArrayXXd::Zero(res, res), b = Eigen::ArrayXXd::Zero(res, res);
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(res, res);
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j) {
            const Eigen::Index k = static_cast<Eigen::Index>(i) * res + j;
            mask(i, j) = map.mask()(k) && warp.mask()(k);
            a(i, j) = map.radiance().pixels().row(k).cast<double>().mean();
            b(i, j) = warp.radiance().pixels().row(k).cast<double>().mean();
        }
    const double scale = b.maxCoeff();
    CHECK(metrics::ssim(a / scale, b / scale, mask) > 0.95);
}

TEST_CASE("object rendering of a sphere agrees with the reflectance map") {
    const int n = 16;
    const EnvironmentMap env = test::random_env(3, 4, 32);
    const ReflectanceParams psi{0.0, 0.5, 0.4};
    const HdrImage img = render::render_object(sphere_normal_map(n), white_texture(n, n), psi, env, kFast);
    const auto map = render::render_reflectance_map(psi, Vec3::Ones(), env, n, kFast);
    for (Eigen::Index k = 0; k < map.mask().size(); ++k) {
        if (!map.mask()(k)) {
            CHECK((img.pixels().row(k) == 0.0f).all());
            continue;
        }
        const auto a = img.pixels().row(k).cast<double>();
        const auto b = map.radiance().pixels().row(k).cast<double>();
        CHECK((a - b).abs().maxCoeff() <= 1e-6 * std::max(1.0, b.abs().maxCoeff()));
    }
}

TEST_CASE("object radiance is affine in the texture and zero on the background") {
    const int n = 12;
    const NormalMap normals = scene::synthetic_normal_map(scene::Shape::cap, n, 3);
    const EnvironmentMap env = test::random_env(3, 6, 16);
    const ReflectanceParams psi{0.0, 0.6, 0.2};
    HdrImage black(n, n), half(n, n);
    half.pixels().setConstant(0.5f);
    const HdrImage i0 = render::render_object(normals, black, psi, env, kFast);
    const HdrImage i1 = render::render_object(normals, half, psi, env, kFast);
    const HdrImage i2 = render::render_object(normals, white_texture(n, n), psi, env, kFast);
    const Eigen::ArrayXXf d = (i2.pixels() - i1.pixels()) - (i1.pixels() - i0.pixels());
    CHECK(d.abs().maxCoeff() <= 1e-5f * i2.pixels().abs().maxCoeff());
    for (Eigen::Index k = 0; k < normals.mask.size(); ++k) {
        if (!normals.mask(k)) CHECK((i2.pixels().row(k) == 0.0f).all());
    }
    CHECK_THROWS_AS(render::render_object(normals, HdrImage(n, n + 1), psi, env, kFast), ArgumentError);
}

TEST_CASE("object rendering scales with the environment") {
    const NormalMap normals = scene::synthetic_normal_map(scene::Shape::bumpy, 10, 2);
    const EnvironmentMap env = test::random_env(3, 9, 16);
    EnvironmentMap scaled = env;
    scaled.image().pixels() *= 4.0f;
    const ReflectanceParams psi{1.0, 0.4, 1.0};
    const HdrImage a = render::render_object(normals, white_texture(10, 10), psi, env, kFast);
    const HdrImage b = render::render_object(normals, white_texture(10, 10), psi, scaled, kFast);
    CHECK((b.pixels() - 4.0f * a.pixels()).abs().maxCoeff() <= 1e-5f * b.pixels().abs().maxCoeff());
}

TEST_CASE("lifting a rendered sphere reproduces the reflectance map within 2%") {
    const EnvironmentMap env = test::random_env(3, 8, 32);
    const ReflectanceParams psi{0.0, 0.7, 0.5};
    const HdrImage img = render::render_object(sphere_normal_map(128), white_texture(128, 128), psi, env, kFast);
    const auto lifted = render::lift_to_sphere(img, sphere_normal_map(128), 32);
    const auto direct = render::render_reflectance_map(psi, Vec3::Ones(), env, 32, kFast);
    Mask both = lifted.mask() && direct.mask();
    CHECK(both.count() > 0.9 * direct.valid_count());
    CHECK(test::relative_rmse(test::masked_values(lifted, both), test::masked_values(direct, both)) < 0.02);
}

TEST_CASE("a fronto-parallel plane fills exactly one cell") {
    const NormalMap plane = plane_normal_map(10, 14);
    HdrImage img(10, 14);
    img.pixels().setConstant(0.25f);
    for (const int res : {8, 9, 64}) {
        const auto map = render::lift_to_sphere(img, plane, res);
        CHECK(map.valid_count() == 1);
        for (Eigen::Index k = 0; k < map.mask().size(); ++k) {
            if (map.mask()(k)) CHECK(map.radiance().pixels()(k, 2) == doctest::Approx(0.25));
        }
    }
}

TEST_CASE("merging raw maps") {
    ReflectanceMap a(4), b(4);
    a.mask()(5) = true;
    a.radiance().pixels().row(5).setConstant(1.0f);
    b.mask()(5) = true;
    b.radiance().pixels().row(5).setConstant(3.0f);
    b.mask()(6) = true;
    b.radiance().pixels().row(6).setConstant(7.0f);

    const std::vector<ReflectanceMap> maps{a, b};
    const auto m = render::merge_raw_maps(maps);
    CHECK(m.valid_count() == 2);
    CHECK(m.radiance().pixels()(5, 0) == 2.0f);
    CHECK(m.radiance().pixels()(6, 1) == 7.0f);

    const std::vector<ReflectanceMap> single{a};
    CHECK(render::merge_raw_maps(single) == a);
    CHECK_THROWS_AS(render::merge_raw_maps({}), ArgumentError);
    const std::vector<ReflectanceMap> mixed{a, ReflectanceMap(8)};
    CHECK_THROWS_AS(render::merge_raw_maps(mixed), ArgumentError);
}

TEST_CASE("transport matrix reproduces the renderer") {
    const int res = 8, env_h = 8;
    const ReflectanceParams psi{1.0, 0.3, 1.0};
    const EnvironmentMap env = test::random_env(2, 12, env_h);
    EnvironmentMap gray(env_h);
    Eigen::VectorXd x(gray.image().size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        x(k) = env.image().pixels()(k, 0);
        gray.image().pixels().row(k).setConstant(env.image().pixels()(k, 0));
    }
    const auto map = render::render_reflectance_map(psi, Vec3::Ones(), gray, res, kFast);
    const Eigen::MatrixXd t = render::transport_matrix(psi, map.mask(), res, env_h, kFast);
    REQUIRE(t.rows() == map.valid_count());
    REQUIRE(t.cols() == x.size());
    const Eigen::VectorXd y = t * x;
    const Eigen::ArrayXXd want = test::masked_values(map, map.mask());
    CHECK((y.array() - want.col(0)).abs().maxCoeff() <= 1e-5 * want.abs().maxCoeff());
}
