#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <refmap/brdf.hpp>

#include "support/test_support.hpp"

using namespace refmap;

namespace {

Vec3 random_hemisphere(const CounterRng& rng, std::uint64_t k) {
    const double mu = rng.uniform(2 * k);
    const double phi = 2.0 * kPi * rng.uniform(2 * k + 1);
    const double s = std::sqrt(1.0 - mu * mu);
    return {s * std::cos(phi), s * std::sin(phi), mu};
}

ReflectanceParams random_psi(const CounterRng& rng, std::uint64_t k) {
    return {rng.uniform(3 * k), rng.uniform(3 * k + 1), rng.uniform(3 * k + 2)};
}

// GGX / Smith / Schlick specular lobe written out independently.
Vec3 reference_specular(const ReflectanceParams& psi, const Vec3& rho, const Vec3& wi, const Vec3& wo) {
    const double a = std::max(psi.roughness * psi.roughness, 1e-3);
    const Vec3 h = (wi + wo).normalized();
    const double nh = h.z(), nl = wi.z(), nv = wo.z();
    const double d = a * a / (kPi * std::pow(nh * nh * (a * a - 1) + 1, 2));
    const auto g1 = [a](double c) { return 2 * c / (c + std::sqrt(a * a + (1 - a * a) * c * c)); };
    const Vec3 f0 = (1 - psi.metallic) * Vec3::Constant(0.08 * psi.specular) + psi.metallic * rho;
    const Vec3 f = f0 + (Vec3::Ones() - f0) * std::pow(1 - h.dot(wi), 5);
    return d * g1(nl) * g1(nv) / (4 * nl * nv) * f;
}

const Vec3 kN(0, 0, 1);

} // namespace

TEST_CASE("normal incidence dielectric with zero specular is rho_d / pi") {
    const Vec3 rho(0.2, 0.5, 0.9);
    for (const double r : {0.0, 0.3, 0.7, 1.0}) {
        const Vec3 f = brdf::eval_disney(ReflectanceParams{0.0, r, 0.0}, rho, kN, kN, kN);
        CHECK((f - rho / kPi).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("metallic = 1 leaves only the specular lobe") {
    const CounterRng rng(5);
    const Vec3 rho(0.9, 0.6, 0.3);
    for (std::uint64_t k = 0; k < 200; ++k) {
        const ReflectanceParams psi{1.0, rng.uniform(1000 + k), rng.uniform(2000 + k)};
        const Vec3 wi = random_hemisphere(rng.fork(1), k);
        const Vec3 wo = random_hemisphere(rng.fork(2), k);
        const Vec3 f = brdf::eval_disney(psi, rho, wi, wo, kN);
        const Vec3 ref = reference_specular(psi, rho, wi, wo);
        CHECK((f - ref).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + ref.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("black zero-specular dielectric keeps only the Schlick grazing term") {
    const CounterRng rng(6);
    const ReflectanceParams psi{0.0, 0.4, 0.0};
    CHECK(brdf::eval_disney(psi, Vec3(Vec3::Zero()), kN, kN, kN).isZero());
    for (std::uint64_t k = 0; k < 100; ++k) {
        const Vec3 wi = random_hemisphere(rng.fork(1), k);
        const Vec3 wo = random_hemisphere(rng.fork(2), k);
        const Vec3 f = brdf::eval_disney(psi, Vec3(Vec3::Zero()), wi, wo, kN);
        CHECK((f - reference_specular(psi, Vec3::Zero(), wi, wo)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("directions below the horizon give zero") {
    const ReflectanceParams psi{0.0, 0.5, 0.5};
    CHECK(brdf::eval_disney(psi, Vec3(Vec3::Ones()), Vec3(0, 0, -1), kN, kN).isZero());
    CHECK(brdf::eval_disney(psi, Vec3(Vec3::Ones()), kN, Vec3(Vec3(1, 0, -0.1).normalized()), kN).isZero());
}

TEST_CASE("reciprocity and nonnegativity on random pairs") {
    const CounterRng rng(7);
    for (std::uint64_t k = 0; k < 2000; ++k) {
        const ReflectanceParams psi = random_psi(rng.fork(3), k);
        const Vec3 rho(rng.uniform(10 * k + 1), rng.uniform(10 * k + 2), rng.uniform(10 * k + 3));
        const Vec3 wi = random_hemisphere(rng.fork(1), k);
        const Vec3 wo = random_hemisphere(rng.fork(2), k);
        const Vec3 a = brdf::eval_disney(psi, rho, wi, wo, kN);
        const Vec3 b = brdf::eval_disney(psi, rho, wo, wi, kN);
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, a.cwiseAbs().maxCoeff()));
        CHECK((a.array() >= 0.0).all());
    }
}

TEST_CASE("finite and smooth in the interior of the parameter cube") {
    const CounterRng rng(8);
    const double h = 1e-6;
    for (std::uint64_t k = 0; k < 200; ++k) {
        ReflectanceParams psi = random_psi(rng.fork(3), k);
        psi.metallic = 0.05 + 0.9 * psi.metallic;
        psi.roughness = 0.05 + 0.9 * psi.roughness;
        psi.specular = 0.05 + 0.9 * psi.specular;
        const Vec3 wi = random_hemisphere(rng.fork(1), k);
        const Vec3 wo = random_hemisphere(rng.fork(2), k);
        for (int c = 0; c < 3; ++c) {
            Vec3 p = psi.as_vector(), q = psi.as_vector();
            p(c) += h;
            q(c) -= h;
            const Vec3 d = (brdf::eval_disney(ReflectanceParams::from_vector(p), Vec3(Vec3::Ones()), wi, wo, kN) -
                            brdf::eval_disney(ReflectanceParams::from_vector(q), Vec3(Vec3::Ones()), wi, wo, kN)) /
                           (2 * h);
            CHECK(d.allFinite());
        }
    }
}

TEST_CASE("lambert model") {
    const Vec3 rho(0.3, 0.6, 0.9);
    CHECK((brdf::eval_lambert(rho, Vec3(0.6, 0, 0.8), kN, kN) - rho / kPi).norm() < 1e-15);
    CHECK(brdf::eval_lambert(rho, Vec3(0, 0, -1), kN, kN).isZero());
}

TEST_CASE("distance to mirror") {
    CHECK(brdf::distance_to_mirror({0.0, 1.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(brdf::distance_to_mirror(ReflectanceParams::mirror()) == 0.0);
    CHECK(brdf::distance_to_mirror({1.0, 0.5, 1.0}) == doctest::Approx(0.25 / 3.0).epsilon(1e-15));
}

TEST_CASE("parameter validation") {
    CHECK_NOTHROW((ReflectanceParams{0.0, 1.0, 0.5}.validate()));
    CHECK_THROWS_AS((ReflectanceParams{1.5, 0.5, 0.5}.validate()), ArgumentError);
    CHECK_THROWS_AS((ReflectanceParams{0.0, std::nan(""), 0.5}.validate()), ArgumentError);
    CHECK_THROWS_AS((DiffuseAlbedo{Vec3(0.5, -0.1, 0.2)}.validate()), ArgumentError);
}

TEST_CASE("merl-style table") {
    const ReflectanceParams psi{0.0, 0.6, 0.3};
    const DiffuseAlbedo rho{Vec3(0.4, 0.5, 0.6)};
    const auto t = brdf::tabulate_merl_style(psi, rho, 8, 8, 8);
    CHECK(t.cells() == 512);
    CHECK(t.values.size() == 512 * 3);
    CHECK(t.values == brdf::tabulate_merl_style(psi, rho, 8, 8, 8).values);

    // At theta_h = theta_d = 0 both directions coincide with the normal.
    const auto [wi, wo] = brdf::rusinkiewicz_directions(0.0, 0.0, 0.0);
    CHECK((wi - kN).norm() < 1e-12);
    CHECK((wo - kN).norm() < 1e-12);
    const ReflectanceParams diffuse{0.0, 0.6, 0.0};
    CHECK((brdf::eval_disney(diffuse, rho.rgb, wi, wo, kN) - rho.rgb / kPi).cwiseAbs().maxCoeff() < 1e-12);
    // The first cell approaches that limit on a fine grid.
    const auto fine = brdf::tabulate_merl_style(diffuse, rho, 90, 90, 4);
    for (int c = 0; c < 3; ++c) CHECK(fine.values[static_cast<std::size_t>(c)] == doctest::Approx(rho.rgb(c) / kPi).epsilon(1e-3));

    // Affine in rho_d: T(rho) - T(rho / 2) = T(rho / 2) - T(0).
    const auto t0 = brdf::tabulate_merl_style(diffuse, DiffuseAlbedo{Vec3::Zero()}, 6, 6, 6);
    const auto t1 = brdf::tabulate_merl_style(diffuse, DiffuseAlbedo{0.5 * rho.rgb}, 6, 6, 6);
    const auto t2 = brdf::tabulate_merl_style(diffuse, rho, 6, 6, 6);
    for (std::size_t k = 0; k < t1.values.size(); ++k) {
        CHECK(t2.values[k] - t1.values[k] == doctest::Approx(t1.values[k] - t0.values[k]).epsilon(1e-9));
    }
}

TEST_CASE("merl-style table file round trip") {
    const auto dir = test::temp_dir("merl");
    const auto t = brdf::tabulate_merl_style({1.0, 0.3, 1.0}, DiffuseAlbedo{Vec3(0.9, 0.5, 0.1)}, 4, 5, 6);
    brdf::write_merl_table(dir / "t.bin", t);
    const std::string bytes = test::read_file(dir / "t.bin");
    CHECK(bytes.size() == 16 + t.values.size() * 8);
    CHECK(std::filesystem::exists(dir / "t.bin.json"));
    const auto back = brdf::read_merl_table(dir / "t.bin");
    CHECK(back.n_theta_h == 4);
    CHECK(back.n_theta_d == 5);
    CHECK(back.n_phi_d == 6);
    CHECK(back.values == t.values);
}
