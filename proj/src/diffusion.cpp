#include <refmap/diffusion.hpp>

#include <refmap/io.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <json.hpp>

#include <array>
#include <cmath>
#include <limits>

namespace refmap {
namespace diffusion {

int compute_K(std::span<const ReflectanceParams> psis, int k_max) {
    if (psis.empty()) {
        throw ArgumentError("compute_K needs at least one reflectance");
    }
    if (k_max < 1) {
        throw ArgumentError("K_max must be >= 1");
    }
    double sum = 0.0;
    for (const auto& psi : psis) {
        psi.validate();
        sum += brdf::distance_to_mirror(psi);
    }
    const double raw = static_cast<double>(k_max) / static_cast<double>(psis.size()) * sum;
    return static_cast<int>(std::clamp<long long>(std::llround(raw), 1, k_max));
}

ReflectanceParams schedule_psi(const ReflectanceParams& psi_K, int k, int K) {
    if (K < 1 || k < 0 || k > K) {
        throw ArgumentError("schedule step " + std::to_string(k) + " outside [0, " + std::to_string(K) + "]");
    }
    const double t = static_cast<double>(k) / static_cast<double>(K);
    const ReflectanceParams m = ReflectanceParams::mirror();
    const auto lerp = [t](double end, double start) { return t * end + (1.0 - t) * start; };
    return {lerp(psi_K.metallic, m.metallic), lerp(psi_K.roughness, m.roughness),
            lerp(psi_K.specular, m.specular)};
}

Schedule Schedule::build(std::span<const ReflectanceParams> psis, int k_max) {
    Schedule s;
    s.K = compute_K(psis, k_max);
    s.K_max = k_max;
    s.endpoints.assign(psis.begin(), psis.end());
    return s;
}

ForwardTrajectory forward_sample(const EnvironmentMap& env, std::span<const ReflectanceParams> psis,
                                 double sigma, std::uint64_t seed, int resolution, int k_max,
                                 const RenderOptions& options) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw ArgumentError("sigma must be finite and >= 0");
    }
    ForwardTrajectory traj{Schedule::build(psis, k_max), sigma, seed, {}};
    const int K = traj.schedule.K;
    const CounterRng root(seed);

    // Renders are shared between slices with identical reflectance (every k = 0 slice).
    std::vector<std::pair<ReflectanceParams, ReflectanceMap>> cache;
    const auto clean = [&](const ReflectanceParams& psi) -> const ReflectanceMap& {
        for (const auto& [p, map] : cache) {
            if (p == psi) {
                return map;
            }
        }
        cache.emplace_back(psi, render::render_reflectance_map(psi, Vec3::Ones(), env, resolution, options));
        return cache.back().second;
    };

    traj.slices.resize(psis.size());
    for (std::size_t m = 0; m < psis.size(); ++m) {
        traj.slices[m].reserve(static_cast<std::size_t>(K) + 1);
        for (int k = 0; k <= K; ++k) {
            ReflectanceMap slice = clean(traj.schedule.at(m, k));
            if (sigma > 0.0) {
                const CounterRng rng = root.fork(m).fork(static_cast<std::uint64_t>(k));
                auto& px = slice.radiance().pixels();
                for (Eigen::Index c = 0; c < px.rows(); ++c) {
                    if (!slice.mask()(c)) {
                        continue;
                    }
                    for (int ch = 0; ch < 3; ++ch) {
                        const double noise = sigma * rng.normal(static_cast<std::uint64_t>(c) * 3 + ch);
                        px(c, ch) = static_cast<float>(px(c, ch) + noise);
                    }
                }
            }
            traj.slices[m].push_back(std::move(slice));
        }
    }
    return traj;
}

void write_trajectory(const std::filesystem::path& dir, const ForwardTrajectory& trajectory) {
    std::filesystem::create_directories(dir);
    for (std::size_t m = 0; m < trajectory.slices.size(); ++m) {
        for (std::size_t k = 0; k < trajectory.slices[m].size(); ++k) {
            const auto name = "m" + std::to_string(m) + "_k" + std::to_string(k) + ".pfm";
            io::write_pfm(dir / name, trajectory.slices[m][k].radiance());
        }
    }
}

namespace {

ReflectanceMap to_resolution(const ReflectanceMap& obs, int resolution) {
    if (resolution == 0 || resolution == obs.resolution()) {
        return obs;
    }
    if (resolution < 0 || obs.resolution() % resolution != 0) {
        throw ArgumentError("observation resolution " + std::to_string(obs.resolution()) +
                            " is not a multiple of " + std::to_string(resolution));
    }
    return downsample(obs, obs.resolution() / resolution);
}

Eigen::MatrixXd masked_targets(const ReflectanceMap& map) {
    Eigen::MatrixXd t(map.valid_count(), 3);
    Eigen::Index r = 0;
    for (Eigen::Index c = 0; c < map.mask().size(); ++c) {
        if (map.mask()(c)) {
            t.row(r++) = map.radiance().pixels().row(c).cast<double>().matrix();
        }
    }
    return t;
}

} // namespace

LikelihoodModel::LikelihoodModel(std::span<const ReflectanceMap> observations,
                                 std::span<const ReflectanceParams> psis, const LikelihoodConfig& config)
    : config_(config) {
    if (observations.empty()) {
        throw ArgumentError("likelihood needs at least one observation");
    }
    if (observations.size() != psis.size()) {
        throw ArgumentError("need one reflectance per observation");
    }
    if (config.degree < 0 || config.env_height < 1 || !(config.sigma > 0.0)) {
        throw ArgumentError("likelihood needs degree >= 0, env_height >= 1 and sigma > 0");
    }
    basis_ = sh::basis_matrix(config.degree, config.env_height, 2 * config.env_height);
    const RenderOptions options{1, config.specular_samples};
    for (std::size_t m = 0; m < observations.size(); ++m) {
        const ReflectanceMap obs = to_resolution(observations[m], config.map_resolution);
        Object o;
        o.transport = render::transport_matrix(psis[m], obs.mask(), obs.resolution(), config.env_height, options);
        o.projected = o.transport * basis_;
        o.target = masked_targets(obs);
        objects_.push_back(std::move(o));
    }
}

Eigen::Index LikelihoodModel::observation_count() const {
    Eigen::Index n = 0;
    for (const auto& o : objects_) {
        n += o.target.size();
    }
    return n;
}

void LikelihoodModel::check_degree(const ShCoefficients& c) const {
    if (c.degree != config_.degree || c.coeffs.rows() != basis_.cols()) {
        throw ArgumentError("candidate has SH degree " + std::to_string(c.degree) +
                            " but the likelihood is configured for degree " + std::to_string(config_.degree));
    }
}

// max(0, Y c) = Y c - min(0, Y c), so T max(0, Y c) = (T Y) c minus the transport columns
// of the (usually few) clamped pixels. The gradient uses the same split.
std::vector<double> LikelihoodModel::residuals(const ShCoefficients& c, Eigen::MatrixXd* gradient,
                                               std::span<const Eigen::MatrixXd> offsets) const {
    check_degree(c);
    if (!offsets.empty() && offsets.size() != objects_.size()) {
        throw ArgumentError("need one target offset per object");
    }
    const Eigen::MatrixXd raw = basis_ * c.coeffs;
    std::array<std::vector<Eigen::Index>, 3> clamped;
    for (int ch = 0; ch < 3; ++ch) {
        for (Eigen::Index p = 0; p < raw.rows(); ++p) {
            if (!(raw(p, ch) > 0.0)) {
                clamped[ch].push_back(p);
            }
        }
    }
    if (gradient) {
        gradient->setZero(c.coeffs.rows(), 3);
    }
    const double s2 = config_.sigma * config_.sigma;
    std::vector<double> out;
    out.reserve(objects_.size());
    for (std::size_t m = 0; m < objects_.size(); ++m) {
        const Object& o = objects_[m];
        Eigen::MatrixXd r = o.projected * c.coeffs - o.target;
        if (!offsets.empty()) {
            r -= offsets[m];
        }
        for (int ch = 0; ch < 3; ++ch) {
            for (const Eigen::Index p : clamped[ch]) {
                if (raw(p, ch) < 0.0) {
                    r.col(ch) -= raw(p, ch) * o.transport.col(p);
                }
            }
        }
        out.push_back(r.squaredNorm());
        if (gradient) {
            Eigen::MatrixXd g = o.projected.transpose() * r;
            for (int ch = 0; ch < 3; ++ch) {
                for (const Eigen::Index p : clamped[ch]) {
                    g.col(ch) -= basis_.row(p).transpose() * o.transport.col(p).dot(r.col(ch));
                }
            }
            *gradient += g / s2;
        }
    }
    return out;
}

double LikelihoodModel::nll(const ShCoefficients& candidate) const {
    double total = 0.0;
    for (const double v : object_nll(candidate)) {
        total += v;
    }
    return total;
}

std::vector<double> LikelihoodModel::object_nll(const ShCoefficients& candidate) const {
    const double s2 = config_.sigma * config_.sigma;
    const double log_term = 0.5 * std::log(2.0 * kPi * s2);
    std::vector<double> out = residuals(candidate, nullptr);
    for (std::size_t m = 0; m < out.size(); ++m) {
        out[m] = out[m] / (2.0 * s2) + static_cast<double>(objects_[m].target.size()) * log_term;
    }
    return out;
}

double LikelihoodModel::nll(const ShCoefficients& candidate, Eigen::MatrixXd& gradient) const {
    return nll(candidate, gradient, {});
}

double LikelihoodModel::nll(const ShCoefficients& candidate, Eigen::MatrixXd& gradient,
                            std::span<const Eigen::MatrixXd> target_offsets) const {
    const double s2 = config_.sigma * config_.sigma;
    double sse = 0.0;
    for (const double v : residuals(candidate, &gradient, target_offsets)) {
        sse += v;
    }
    return sse / (2.0 * s2) + static_cast<double>(observation_count()) * 0.5 * std::log(2.0 * kPi * s2);
}

LikelihoodModel LikelihoodModel::scaled(double factor) const {
    LikelihoodModel out = *this;
    for (auto& o : out.objects_) {
        o.target *= factor;
    }
    return out;
}

double LikelihoodModel::mean_observation() const {
    double sum = 0.0;
    Eigen::Index n = 0;
    for (const auto& o : objects_) {
        sum += o.target.sum();
        n += o.target.size();
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

ShCoefficients LikelihoodModel::least_squares(int degree, double ridge) const {
    degree = std::clamp(degree, 0, config_.degree);
    const Eigen::Index nc = ShCoefficients::count(degree);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nc, nc);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(nc, 3);
    for (const auto& o : objects_) {
        const auto ty = o.projected.leftCols(nc);
        a.noalias() += ty.transpose() * ty;
        b.noalias() += ty.transpose() * o.target;
    }
    const double scale = a.trace() / static_cast<double>(nc);
    a.diagonal().array() += ridge * (scale > 0.0 ? scale : 1.0);
    ShCoefficients out(config_.degree);
    out.coeffs.topRows(nc) = a.ldlt().solve(b);
    return out;
}

double LikelihoodModel::lipschitz() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(basis_.cols(), basis_.cols());
    for (const auto& o : objects_) {
        a.noalias() += o.projected.transpose() * o.projected;
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff() / (config_.sigma * config_.sigma);
}

double joint_nll(const ShCoefficients& candidate, std::span<const ReflectanceMap> observations,
                 std::span<const ReflectanceParams> psis, double sigma, const LikelihoodConfig& config) {
    LikelihoodConfig cfg = config;
    cfg.sigma = sigma;
    if (candidate.degree != cfg.degree) {
        throw ArgumentError("candidate has SH degree " + std::to_string(candidate.degree) +
                            " but the likelihood is configured for degree " + std::to_string(cfg.degree));
    }
    return LikelihoodModel(observations, psis, cfg).nll(candidate);
}

std::vector<ReflectanceParams> reflectance_grid() {
    std::vector<ReflectanceParams> grid;
    for (int g = 0; g <= 1; ++g) {
        for (int r = 1; r <= 20; ++r) {
            if (g == 1) {
                grid.push_back({1.0, r / 20.0, 1.0});
                continue;
            }
            for (int s = 0; s <= 10; ++s) {
                grid.push_back({0.0, r / 20.0, s / 10.0});
            }
        }
    }
    return grid;
}

namespace {

constexpr Eigen::Index kMinValidCells = 32;

ReflectanceMap prepare_estimate_target(const ReflectanceMap& obs, const EstimateConfig& config) {
    if (obs.valid_count() < kMinValidCells) {
        throw InsufficientDataError("reflectance estimation needs at least " + std::to_string(kMinValidCells) +
                                    " valid cells, got " + std::to_string(obs.valid_count()));
    }
    if (obs.resolution() < config.map_resolution) {
        return obs;
    }
    return to_resolution(obs, config.map_resolution);
}

} // namespace

std::vector<ReflectanceScore> reflectance_search(const ReflectanceMap& obs,
                                                 const std::optional<ShCoefficients>& env_guess,
                                                 const EstimateConfig& config) {
    const ReflectanceMap map = prepare_estimate_target(obs, config);
    const Eigen::MatrixXd target = masked_targets(map);
    const int h = config.env_height;

    Eigen::MatrixXd env;
    Eigen::MatrixXd y2;
    if (env_guess) {
        env = (sh::basis_matrix(env_guess->degree, h, 2 * h) * env_guess->coeffs).cwiseMax(0.0);
    } else {
        y2 = sh::basis_matrix(2, h, 2 * h);
    }

    const auto grid = reflectance_grid();
    std::vector<ReflectanceScore> scores(grid.size());
    const RenderOptions options{1, config.specular_samples};
    parallel_for(0, static_cast<std::ptrdiff_t>(grid.size()), [&](std::ptrdiff_t g) {
        const Eigen::MatrixXd t = render::transport_matrix(grid[g], map.mask(), map.resolution(), h, options);
        double residual = 0.0;
        if (env_guess) {
            residual = (t * env - target).squaredNorm();
        } else {
            const Eigen::MatrixXd ty = t * y2;
            Eigen::MatrixXd a = ty.transpose() * ty;
            const double scale = a.trace() / static_cast<double>(a.rows());
            a.diagonal().array() += 1e-9 * (scale > 0.0 ? scale : 1.0);
            const Eigen::MatrixXd c = a.ldlt().solve(ty.transpose() * target);
            residual = (ty * c - target).squaredNorm();
        }
        scores[g] = {grid[g], residual};
    });
    return scores;
}

ReflectanceParams estimate_reflectance(const ReflectanceMap& obs,
                                       const std::optional<ShCoefficients>& env_guess,
                                       const EstimateConfig& config) {
    const auto scores = reflectance_search(obs, env_guess, config);
    const double energy = masked_targets(prepare_estimate_target(obs, config)).squaredNorm();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : scores) {
        best = std::min(best, s.residual);
    }
    const double tol = 1e-9 * (best + energy) + std::numeric_limits<double>::min();
    const ReflectanceScore* pick = nullptr;
    for (const auto& s : scores) {
        if (s.residual <= best + tol && (!pick || s.psi.roughness > pick->psi.roughness)) {
            pick = &s;
        }
    }
    return pick->psi;
}

void SamplerConfig::validate() const {
    const auto fail = [](const std::string& what) { throw ConfigError("invalid sampler config: " + what); };
    if (degree < 0 || degree > 32) fail("degree must lie in [0, 32]");
    if (n_samples < 1) fail("n_samples must be >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) fail("sigma must be > 0");
    if (!(delta >= 0.0) || !std::isfinite(delta)) fail("delta must be >= 0");
    if (K_max < 1) fail("K_max must be >= 1");
    if (steps_per_k < 1) fail("steps_per_k must be >= 1");
    if (!(step_size > 0.0) || step_size > 2.0) fail("step_size must lie in (0, 2]");
    if (min_total_steps < 0) fail("min_total_steps must be >= 0");
    if (env_height < 2) fail("env_height must be >= 2");
    if (map_resolution < 0) fail("map_resolution must be >= 0");
    if (specular_samples < 1) fail("specular_samples must be >= 1");
}

LikelihoodConfig SamplerConfig::likelihood() const {
    return {degree, env_height, map_resolution, specular_samples, sigma};
}

SamplerConfig SamplerConfig::from_json(const std::string& text, const SamplerConfig& defaults) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("sampler config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("sampler config must be a JSON object");
    }
    SamplerConfig c = defaults;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "degree") c.degree = value.get<int>();
            else if (key == "n_samples") c.n_samples = value.get<int>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "sigma") c.sigma = value.get<double>();
            else if (key == "delta") c.delta = value.get<double>();
            else if (key == "K_max") c.K_max = value.get<int>();
            else if (key == "steps_per_k") c.steps_per_k = value.get<int>();
            else if (key == "step_size") c.step_size = value.get<double>();
            else if (key == "min_total_steps") c.min_total_steps = value.get<int>();
            else if (key == "env_height") c.env_height = value.get<int>();
            else if (key == "map_resolution") c.map_resolution = value.get<int>();
            else if (key == "specular_samples") c.specular_samples = value.get<int>();
            else if (key == "jitter") {
                const auto v = value.get<std::string>();
                if (v == "coefficients") c.jitter = Jitter::coefficients;
                else if (v == "observations") c.jitter = Jitter::observations;
                else throw ConfigError("sampler config 'jitter' must be \"coefficients\" or \"observations\"");
            }
            else throw ConfigError("unknown sampler config key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("sampler config key '" + key + "' has the wrong type");
        }
    }
    c.validate();
    return c;
}

SamplerConfig SamplerConfig::from_json(const std::string& text) {
    return from_json(text, SamplerConfig{});
}

std::string SamplerConfig::to_json() const {
    nlohmann::ordered_json j;
    j["degree"] = degree;
    j["n_samples"] = n_samples;
    j["seed"] = seed;
    j["sigma"] = sigma;
    j["delta"] = delta;
    j["K_max"] = K_max;
    j["steps_per_k"] = steps_per_k;
    j["step_size"] = step_size;
    j["min_total_steps"] = min_total_steps;
    j["env_height"] = env_height;
    j["map_resolution"] = map_resolution;
    j["specular_samples"] = specular_samples;
    j["jitter"] = jitter == Jitter::coefficients ? "coefficients" : "observations";
    return j.dump(2);
}

namespace {

constexpr int kMaxRestarts = 3;

void add_noise(ShCoefficients& c, const CounterRng& rng, double scale) {
    if (scale == 0.0) {
        return;
    }
    for (Eigen::Index r = 0; r < c.coeffs.rows(); ++r) {
        for (int ch = 0; ch < 3; ++ch) {
            c.coeffs(r, ch) += scale * rng.normal(static_cast<std::uint64_t>(r) * 3 + ch);
        }
    }
}

struct ChainResult {
    ShCoefficients start;
    ShCoefficients end;
    bool ok = false;
};

// One annealed chain in normalized units.
ChainResult run_chain(const LikelihoodModel& model, const ShCoefficients& init, const SamplerConfig& cfg,
                      int K, int steps_per_k, double step, const CounterRng& rng) {
    ChainResult res;
    ShCoefficients c = init;
    add_noise(c, rng.fork(0), cfg.delta);
    res.start = c;
    Eigen::MatrixXd grad(c.coeffs.rows(), 3);
    const bool on_observations = cfg.jitter == SamplerConfig::Jitter::observations;
    std::vector<Eigen::MatrixXd> offsets(on_observations ? model.objects() : 0);
    for (int k = K; k >= 1; --k) {
        const CounterRng step_rng = rng.fork(static_cast<std::uint64_t>(k));
        const double jitter = cfg.delta * k / K;
        if (on_observations) {
            for (std::size_t m = 0; m < offsets.size(); ++m) {
                const CounterRng obj_rng = step_rng.fork(m);
                offsets[m].resize(model.cells(m), 3);
                for (Eigen::Index r = 0; r < offsets[m].rows(); ++r) {
                    for (int ch = 0; ch < 3; ++ch) {
                        offsets[m](r, ch) = jitter * obj_rng.normal(static_cast<std::uint64_t>(r) * 3 + ch);
                    }
                }
            }
        } else {
            add_noise(c, step_rng, jitter);
        }
        // Nesterov momentum with gradient-based restart.
        ShCoefficients y = c;
        double t = 1.0;
        for (int s = 0; s < steps_per_k; ++s) {
            const double f = model.nll(y, grad, offsets);
            if (!std::isfinite(f) || !grad.allFinite()) {
                return res;
            }
            Eigen::MatrixXd next = y.coeffs - step * grad;
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            const Eigen::MatrixXd delta = next - c.coeffs;
            if ((grad.array() * delta.array()).sum() > 0.0) {
                t = 1.0;
                y.coeffs = next;
            } else {
                y.coeffs = next + ((t - 1.0) / t_next) * delta;
                t = t_next;
            }
            c.coeffs = std::move(next);
        }
    }
    if (!c.coeffs.allFinite() || !std::isfinite(model.nll(c))) {
        return res;
    }
    res.end = std::move(c);
    res.ok = true;
    return res;
}

} // namespace

std::vector<IlluminationSample> sample_illumination(std::span<const ReflectanceMap> observations,
                                                    std::span<const ReflectanceParams> psis,
                                                    const SamplerConfig& config) {
    config.validate();
    if (observations.empty()) {
        throw ArgumentError("sampling needs at least one observation");
    }
    const LikelihoodModel model(observations, psis, config.likelihood());
    const double scale = model.mean_observation();
    std::vector<IlluminationSample> out(static_cast<std::size_t>(config.n_samples));

    if (!(scale > 0.0)) {
        // Nothing to explain: relative noise collapses every chain onto zero light.
        const ShCoefficients zero(config.degree);
        const double nll = model.nll(zero);
        for (int i = 0; i < config.n_samples; ++i) {
            out[i] = {zero, nll, nll, i, 1, false};
        }
        return out;
    }

    const LikelihoodModel norm = model.scaled(1.0 / scale);
    const int K = compute_K(psis, config.K_max);
    const int steps_per_k = std::max(config.steps_per_k, (config.min_total_steps + K - 1) / K);
    const double step = config.step_size / norm.lipschitz();
    const ShCoefficients init = norm.least_squares(std::min(2, config.degree));
    const CounterRng root(config.seed);

    parallel_for(0, config.n_samples, [&](std::ptrdiff_t i) {
        IlluminationSample& s = out[static_cast<std::size_t>(i)];
        s.chain = static_cast<int>(i);
        for (int attempt = 0; attempt <= kMaxRestarts; ++attempt) {
            const ChainResult r = run_chain(norm, init, config, K, steps_per_k, step,
                                            root.fork(static_cast<std::uint64_t>(i)).fork(static_cast<std::uint64_t>(attempt)));
            s.attempts = attempt + 1;
            if (r.ok) {
                s.coeffs = r.end;
                s.coeffs.coeffs *= scale;
                ShCoefficients start = r.start;
                start.coeffs *= scale;
                s.nll = model.nll(s.coeffs);
                s.initial_nll = model.nll(start);
                s.failed = false;
                return;
            }
        }
        s.coeffs = ShCoefficients(config.degree);
        s.nll = std::numeric_limits<double>::quiet_NaN();
        s.initial_nll = std::numeric_limits<double>::quiet_NaN();
        s.failed = true;
    });
    return out;
}

} // namespace diffusion
} // namespace refmap
