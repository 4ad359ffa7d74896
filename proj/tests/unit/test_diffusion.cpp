#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <refmap/diffusion.hpp>
#include <refmap/metrics.hpp>
#include <refmap/scene.hpp>

#include "support/test_support.hpp"

#include <cstdlib>
#include <limits>

using namespace refmap;
using namespace refmap::diffusion;

namespace {

/// Observation rendered with the same discretization the likelihood uses.
ReflectanceMap render_obs(const ReflectanceParams& psi, const ShCoefficients& c, const LikelihoodConfig& cfg) {
    const EnvironmentMap env = sh::reconstruct(c, cfg.env_height, 2 * cfg.env_height);
    return render::render_reflectance_map(psi, Vec3::Ones(), env, cfg.map_resolution, {1, cfg.specular_samples});
}

LikelihoodConfig small_config() {
    LikelihoodConfig cfg;
    cfg.degree = 3;
    cfg.env_height = 8;
    cfg.map_resolution = 8;
    cfg.specular_samples = 8;
    cfg.sigma = 0.1;
    return cfg;
}

ReflectanceMap shifted(ReflectanceMap map, float offset) {
    for (Eigen::Index k = 0; k < map.mask().size(); ++k) {
        if (map.mask()(k)) map.radiance().pixels().row(k) += offset * (1.0f + 0.1f * static_cast<float>(k % 7));
    }
    return map;
}

} // namespace

TEST_CASE("compute_K") {
    const std::vector<ReflectanceParams> rough{{0.0, 1.0, 0.0}};
    CHECK(compute_K(rough, 150) == 150);
    const std::vector<ReflectanceParams> mirror{ReflectanceParams::mirror()};
    CHECK(compute_K(mirror, 150) == 1);
    const std::vector<ReflectanceParams> three{{1.0, 0.0, 1.0}, {0.0, 1.0, 0.0}, {1.0, 0.5, 1.0}};
    CHECK(compute_K(three, 150) == 54);
    CHECK_THROWS_AS(compute_K({}, 150), ArgumentError);
}

TEST_CASE("schedule endpoints are exact and the path is affine") {
    const ReflectanceParams end{0.3, 0.77, 0.123456789};
    for (const int K : {1, 3, 7, 150}) {
        CHECK(schedule_psi(end, 0, K) == ReflectanceParams::mirror());
        CHECK(schedule_psi(end, K, K) == end);
    }
    const ReflectanceParams mid = schedule_psi({0.0, 1.0, 0.0}, 1, 2);
    CHECK(mid == ReflectanceParams{0.5, 0.5, 0.5});
    const Vec3 a = schedule_psi(end, 2, 8).as_vector(), b = schedule_psi(end, 4, 8).as_vector(),
               c = schedule_psi(end, 6, 8).as_vector();
    CHECK((c - b - (b - a)).norm() < 1e-15);
    CHECK_THROWS_AS(schedule_psi(end, -1, 4), ArgumentError);
    CHECK_THROWS_AS(schedule_psi(end, 5, 4), ArgumentError);

    const std::vector<ReflectanceParams> psis{{0.0, 1.0, 0.0}, {1.0, 0.5, 1.0}};
    const Schedule s = Schedule::build(psis, 40);
    CHECK(s.K == compute_K(psis, 40));
    CHECK(s.at(1, 0) == ReflectanceParams::mirror());
    CHECK(s.at(1, s.K) == psis[1]);
}

TEST_CASE("forward process without noise is the noiseless render") {
    const EnvironmentMap env = test::random_env(3, 2, 8);
    const std::vector<ReflectanceParams> psis{{0.0, 0.6, 0.3}, {1.0, 0.4, 1.0}};
    const RenderOptions opt{1, 4};
    const auto traj = forward_sample(env, psis, 0.0, 1, 8, 10, opt);
    REQUIRE(traj.slices.size() == 2);
    for (std::size_t m = 0; m < 2; ++m) {
        REQUIRE(traj.slices[m].size() == static_cast<std::size_t>(traj.schedule.K + 1));
        for (int k = 0; k <= traj.schedule.K; ++k) {
            const auto want = render::render_reflectance_map(traj.schedule.at(m, k), Vec3::Ones(), env, 8, opt);
            CHECK(traj.at(m, k) == want);
        }
    }
    // Every object starts from the same mirror map.
    CHECK(traj.at(0, 0) == traj.at(1, 0));
}

TEST_CASE("forward noise has the requested standard deviation") {
    const EnvironmentMap env = test::random_env(2, 3, 4);
    const std::vector<ReflectanceParams> psis{{0.0, 1.0, 0.0}};
    const RenderOptions opt{1, 2};
    const auto clean = forward_sample(env, psis, 0.0, 9, 128, 30, opt);
    const auto noisy = forward_sample(env, psis, 0.1, 9, 128, 30, opt);
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (int k = 0; k <= clean.schedule.K; ++k) {
        const auto& a = clean.at(0, k);
        const auto& b = noisy.at(0, k);
        CHECK((a.mask() == b.mask()).all());
        for (Eigen::Index c = 0; c < a.mask().size(); ++c) {
            if (!a.mask()(c)) continue;
            for (int ch = 0; ch < 3; ++ch) {
                const double e = static_cast<double>(b.radiance().pixels()(c, ch)) - a.radiance().pixels()(c, ch);
                sum += e;
                sq += e * e;
                ++n;
            }
        }
    }
    REQUIRE(n >= 1000000);
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(sd - 0.1) < 0.002);
    CHECK(std::abs(mean) < 1e-3);

    // Same seed, same trajectory; different seed, different noise.
    CHECK(forward_sample(env, psis, 0.1, 9, 16, 5, opt).at(0, 2) == forward_sample(env, psis, 0.1, 9, 16, 5, opt).at(0, 2));
    CHECK_FALSE(forward_sample(env, psis, 0.1, 9, 16, 5, opt).at(0, 2) == forward_sample(env, psis, 0.1, 10, 16, 5, opt).at(0, 2));
}

TEST_CASE("joint nll: zero residual leaves only the normalization constant") {
    const LikelihoodConfig cfg = small_config();
    const ShCoefficients c = scene::random_band_limited(3, 4);
    const std::vector<ReflectanceParams> psis{{0.0, 0.5, 0.5}};
    const std::vector<ReflectanceMap> obs{render_obs(psis[0], c, cfg)};
    const double n = static_cast<double>(obs[0].valid_count()) * 3;
    const double constant = 0.5 * n * std::log(2.0 * kPi * cfg.sigma * cfg.sigma);
    CHECK(joint_nll(c, obs, psis, cfg.sigma, cfg) == doctest::Approx(constant).epsilon(1e-6));
    CHECK_THROWS_AS(joint_nll(ShCoefficients(4), obs, psis, cfg.sigma, cfg), ArgumentError);
}

TEST_CASE("joint nll: doubling residuals increases it, objects add") {
    const LikelihoodConfig cfg = small_config();
    const ShCoefficients c = scene::random_band_limited(3, 5);
    const ReflectanceParams p0{0.0, 0.5, 0.5}, p1{1.0, 0.3, 1.0};
    const ReflectanceMap clean0 = render_obs(p0, c, cfg);
    const ReflectanceMap clean1 = render_obs(p1, c, cfg);
    const std::vector<ReflectanceParams> one{p0}, two{p0, p1};

    const std::vector<ReflectanceMap> small{shifted(clean0, 0.05f)}, big{shifted(clean0, 0.1f)};
    CHECK(joint_nll(c, big, one, cfg.sigma, cfg) > joint_nll(c, small, one, cfg.sigma, cfg));

    // A second object with zero residual adds only its constant term.
    const std::vector<ReflectanceMap> pair{small[0], clean1};
    const double extra = 0.5 * static_cast<double>(clean1.valid_count()) * 3 * std::log(2.0 * kPi * cfg.sigma * cfg.sigma);
    CHECK(joint_nll(c, pair, two, cfg.sigma, cfg) ==
          doctest::Approx(joint_nll(c, small, one, cfg.sigma, cfg) + extra).epsilon(1e-6));

    // The joint value is the sum of the single-object values.
    const ShCoefficients other = scene::random_band_limited(3, 6);
    const std::vector<ReflectanceMap> pair2{small[0], shifted(clean1, -0.02f)};
    const std::vector<ReflectanceMap> only1{pair2[1]};
    const std::vector<ReflectanceParams> psi1{p1};
    const double joint = joint_nll(other, pair2, two, cfg.sigma, cfg);
    const double split = joint_nll(other, small, one, cfg.sigma, cfg) + joint_nll(other, only1, psi1, cfg.sigma, cfg);
    CHECK(joint == doctest::Approx(split).epsilon(1e-12));
    const LikelihoodModel model(pair2, two, cfg);
    const auto parts = model.object_nll(other);
    CHECK(parts[0] + parts[1] == doctest::Approx(joint).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central differences") {
    const LikelihoodConfig cfg = small_config();
    const ShCoefficients truth = scene::random_band_limited(3, 7);
    const std::vector<ReflectanceParams> psis{{0.0, 0.4, 0.5}, {1.0, 0.2, 1.0}};
    const std::vector<ReflectanceMap> obs{render_obs(psis[0], truth, cfg), render_obs(psis[1], truth, cfg)};
    const LikelihoodModel model(obs, psis, cfg);
    const CounterRng rng(11);
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
        ShCoefficients c = truth;
        for (Eigen::Index r = 0; r < c.coeffs.rows(); ++r)
            for (int ch = 0; ch < 3; ++ch) c.coeffs(r, ch) += 0.3 * rng.fork(trial).normal(r * 3 + ch);
        Eigen::MatrixXd grad;
        model.nll(c, grad);
        REQUIRE(grad.rows() == c.coeffs.rows());
        const double h = 1e-6;
        for (Eigen::Index r = 0; r < c.coeffs.rows(); r += 3) {
            for (int ch = 0; ch < 3; ++ch) {
                ShCoefficients p = c, q = c;
                p.coeffs(r, ch) += h;
                q.coeffs(r, ch) -= h;
                const double fd = (model.nll(p) - model.nll(q)) / (2 * h);
                CHECK(std::abs(fd - grad(r, ch)) <= 1e-4 * std::max(1.0, std::abs(grad(r, ch))));
            }
        }
    }
}

TEST_CASE("reflectance estimate recovers a grid point under a known environment") {
    const EstimateConfig cfg;
    const ShCoefficients c = scene::random_band_limited(2, 8);
    const EnvironmentMap env = sh::reconstruct(c, cfg.env_height, 2 * cfg.env_height);
    for (const ReflectanceParams psi : {ReflectanceParams{0.0, 0.35, 0.6}, ReflectanceParams{1.0, 0.7, 1.0},
                                        ReflectanceParams{0.0, 0.9, 0.1}}) {
        const auto obs = render::render_reflectance_map(psi, Vec3::Ones(), env, cfg.map_resolution,
                                                        {1, cfg.specular_samples});
        const ReflectanceParams got = estimate_reflectance(obs, c, cfg);
        CHECK(got.metallic == psi.metallic);
        CHECK(got.roughness == doctest::Approx(psi.roughness).epsilon(1e-12));
        CHECK(got.specular == doctest::Approx(psi.specular).epsilon(1e-12));
    }
}

TEST_CASE("reflectance estimate: ties go to the roughest candidate") {
    const EstimateConfig cfg;
    ReflectanceMap obs = ReflectanceMap::full_disk(cfg.map_resolution);
    const ReflectanceParams got = estimate_reflectance(obs, ShCoefficients(2), cfg);
    CHECK(got.roughness == 1.0);

    obs.radiance().pixels().setConstant(1.0f);
    ShCoefficients constant(2);
    constant.at(0, 0).setConstant(2.0 * std::sqrt(kPi));
    // Constant light is reproduced best by a smooth white metal; the pick is the argmin.
    const auto scores = reflectance_search(obs, constant, cfg);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : scores) best = std::min(best, s.residual);
    const ReflectanceParams pick = estimate_reflectance(obs, constant, cfg);
    bool found = false;
    for (const auto& s : scores) {
        if (s.psi == pick) {
            found = true;
            CHECK(s.residual == best);
        }
    }
    CHECK(found);
    CHECK(pick.metallic == 1.0);
}

TEST_CASE("reflectance estimate: too few valid cells") {
    CHECK_THROWS_AS(estimate_reflectance(ReflectanceMap(16), std::nullopt), InsufficientDataError);
    ReflectanceMap few(16);
    for (int k = 0; k < 31; ++k) few.mask()(16 * 8 + k % 16 + 16 * (k / 16)) = true;
    CHECK_THROWS_AS(estimate_reflectance(few, std::nullopt), InsufficientDataError);
}

TEST_CASE("sampler config json") {
    const SamplerConfig d;
    const SamplerConfig parsed = SamplerConfig::from_json(d.to_json());
    CHECK(parsed.to_json() == d.to_json());
    const SamplerConfig c = SamplerConfig::from_json(R"({"degree": 4, "jitter": "coefficients", "delta": 0.5})");
    CHECK(c.degree == 4);
    CHECK(c.jitter == SamplerConfig::Jitter::coefficients);
    CHECK(c.delta == 0.5);
    CHECK(c.n_samples == d.n_samples);
    CHECK_THROWS_AS(SamplerConfig::from_json(R"({"degre": 4})"), ConfigError);
    CHECK_THROWS_AS(SamplerConfig::from_json(R"({"degree": "four"})"), ConfigError);
    CHECK_THROWS_AS(SamplerConfig::from_json(R"({"jitter": "sideways"})"), ConfigError);
    CHECK_THROWS_AS(SamplerConfig::from_json(R"({"n_samples": 0})"), ConfigError);
    CHECK_THROWS_AS(SamplerConfig::from_json("[1, 2"), ConfigError);
}

namespace {

SamplerConfig small_sampler() {
    SamplerConfig cfg;
    cfg.degree = 4;
    cfg.env_height = 16;
    cfg.map_resolution = 16;
    cfg.specular_samples = 16;
    cfg.K_max = 20;
    cfg.min_total_steps = 100;
    return cfg;
}

} // namespace

TEST_CASE("sampler is deterministic across runs and thread counts") {
    SamplerConfig cfg = small_sampler();
    cfg.n_samples = 3;
    cfg.seed = 42;
    const ShCoefficients c = scene::random_band_limited(3, 9);
    const ReflectanceParams psi{0.0, 0.5, 0.5};
    const std::vector<ReflectanceParams> psis{psi};
    const std::vector<ReflectanceMap> obs{render::render_reflectance_map(
        psi, Vec3::Ones(), sh::reconstruct(c, 16, 32), 16, {1, 16})};

    ::setenv("REFMAP_THREADS", "1", 1);
    const auto a = sample_illumination(obs, psis, cfg);
    ::setenv("REFMAP_THREADS", "4", 1);
    const auto b = sample_illumination(obs, psis, cfg);
    ::unsetenv("REFMAP_THREADS");
    const auto c2 = sample_illumination(obs, psis, cfg);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].coeffs.coeffs == b[i].coeffs.coeffs);
        CHECK(a[i].coeffs.coeffs == c2[i].coeffs.coeffs);
        CHECK(a[i].nll == b[i].nll);
        CHECK(std::isfinite(a[i].nll));
        CHECK(a[i].chain == static_cast<int>(i));
    }
    CHECK_FALSE(a[0].coeffs.coeffs == a[1].coeffs.coeffs);
}

TEST_CASE("sampler on all-zero observations returns near-zero illumination") {
    SamplerConfig cfg = small_sampler();
    cfg.n_samples = 2;
    const std::vector<ReflectanceParams> psis{{0.0, 0.5, 0.5}};
    const std::vector<ReflectanceMap> obs{ReflectanceMap::full_disk(16)};
    for (const auto& s : sample_illumination(obs, psis, cfg)) {
        const auto env = sh::reconstruct(s.coeffs, 32, 64);
        CHECK(env.image().pixels().max(0.0f).mean() < 1e-3);
    }
}

TEST_CASE("near-mirror object: the best of 16 samples matches the environment") {
    SamplerConfig cfg;
    cfg.degree = 4;
    cfg.n_samples = 16;
    cfg.seed = 0;
    cfg.env_height = 32;
    cfg.map_resolution = 32;
    cfg.specular_samples = 32;
    const ShCoefficients c = scene::random_band_limited(4, 0);
    const EnvironmentMap gt = sh::reconstruct(c, 32, 64);
    const ReflectanceParams psi{1.0, 0.05, 1.0};
    const std::vector<ReflectanceParams> psis{psi};
    const std::vector<ReflectanceMap> obs{render::render_reflectance_map(psi, Vec3::Ones(), gt, 32, {1, 32})};
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : sample_illumination(obs, psis, cfg)) {
        EnvironmentMap env = sh::reconstruct(s.coeffs, 32, 64);
        env.image().pixels() = env.image().pixels().max(0.0f);
        best = std::min(best, metrics::si_log_rmse(env.image(), gt.image()));
    }
    CHECK(best < 0.3);
}
