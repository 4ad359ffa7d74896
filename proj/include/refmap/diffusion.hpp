#pragma once

#include <refmap/brdf.hpp>
#include <refmap/envmap.hpp>
#include <refmap/reflectance_map.hpp>
#include <refmap/render.hpp>
#include <refmap/sh.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace refmap {
namespace diffusion {

inline constexpr int kDefaultKMax = 150;
inline constexpr double kDefaultSigma = 0.1;
inline constexpr double kDefaultDelta = 0.125;

/// K = round(K_max / M * sum_m ||(psi_m - mirror) / sqrt(3)||^2), clamped to [1, K_max].
int compute_K(std::span<const ReflectanceParams> psis, int k_max = kDefaultKMax);

/// (k / K) psi_K + (1 - k / K) mirror, exact at both ends.
ReflectanceParams schedule_psi(const ReflectanceParams& psi_K, int k, int K);

/// Per-object linear paths from the mirror state (k = 0) to each endpoint (k = K).
struct Schedule {
    int K = 1;
    int K_max = kDefaultKMax;
    std::vector<ReflectanceParams> endpoints;

    static Schedule build(std::span<const ReflectanceParams> psis, int k_max = kDefaultKMax);

    std::size_t objects() const { return endpoints.size(); }
    ReflectanceParams at(std::size_t m, int k) const { return schedule_psi(endpoints.at(m), k, K); }
};

/// Noisy reflectance maps L_r^(m,k) for every object and step.
struct ForwardTrajectory {
    Schedule schedule;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::vector<ReflectanceMap>> slices;  // [m][k], k = 0..K

    const ReflectanceMap& at(std::size_t m, int k) const { return slices.at(m).at(static_cast<std::size_t>(k)); }
};

/// L_r^(m,k) = render(psi^(m,k), white, env) + N(0, sigma^2) on every disk cell and channel.
/// Each draw is keyed on (seed, m, k, cell, channel), so the result does not depend on the
/// evaluation order. Noisy values may be negative.
ForwardTrajectory forward_sample(const EnvironmentMap& env, std::span<const ReflectanceParams> psis,
                                 double sigma, std::uint64_t seed, int resolution,
                                 int k_max = kDefaultKMax, const RenderOptions& options = {});

/// Writes one PFM per slice, named m{m}_k{k}.pfm.
void write_trajectory(const std::filesystem::path& dir, const ForwardTrajectory& trajectory);

/// Discretization of the likelihood.
struct LikelihoodConfig {
    int degree = 8;
    /// Environment grid of height env_height and width 2 * env_height.
    int env_height = 32;
    /// Observations are masked-average downsampled to this resolution (it must divide
    /// theirs); 0 keeps the observation resolution.
    int map_resolution = 32;
    int specular_samples = 32;
    double sigma = kDefaultSigma;
};

/// Joint Gaussian likelihood of M raw reflectance maps given an SH illumination:
///   E(c) = sum_m sum_cells sum_ch (T_m max(0, Y c_ch) - obs_m,ch)^2 / (2 sigma^2)
///          + N/2 log(2 pi sigma^2)
/// where T_m is the white-albedo transport of object m and Y the SH basis sampled on the
/// environment grid.
class LikelihoodModel {
public:
    LikelihoodModel(std::span<const ReflectanceMap> observations,
                    std::span<const ReflectanceParams> psis, const LikelihoodConfig& config);

    const LikelihoodConfig& config() const { return config_; }
    std::size_t objects() const { return objects_.size(); }
    /// Number of scalar observations (masked cells times 3).
    Eigen::Index observation_count() const;

    double nll(const ShCoefficients& candidate) const;
    /// Value and gradient with respect to the coefficients (same layout as coeffs).
    double nll(const ShCoefficients& candidate, Eigen::MatrixXd& gradient) const;
    /// Same with every object's observations shifted by target_offsets[m] (cells x 3).
    double nll(const ShCoefficients& candidate, Eigen::MatrixXd& gradient,
               std::span<const Eigen::MatrixXd> target_offsets) const;
    /// Masked cells of object m.
    Eigen::Index cells(std::size_t m) const { return objects_.at(m).target.rows(); }
    /// Per-object NLL terms; they sum to nll().
    std::vector<double> object_nll(const ShCoefficients& candidate) const;

    /// Copy with every observation multiplied by `factor`.
    LikelihoodModel scaled(double factor) const;
    /// Mean of all masked observation values (0 when every value is 0).
    double mean_observation() const;

    /// Unclamped least-squares illumination of the given degree (<= config degree),
    /// returned in the configured degree with higher bands zero.
    ShCoefficients least_squares(int degree, double ridge = 1e-9) const;

    /// Upper bound on the curvature of the data term, for step-size normalization.
    double lipschitz() const;

    const Eigen::MatrixXd& basis() const { return basis_; }

private:
    struct Object {
        Eigen::MatrixXd transport;  // cells x env pixels
        Eigen::MatrixXd projected;  // transport * basis
        Eigen::MatrixXd target;     // cells x 3
    };

    void check_degree(const ShCoefficients& c) const;
    // Per-object data terms (sum of squared residuals); accumulates the gradient of
    // sum(sse) / (2 sigma^2) when `gradient` is non-null.
    std::vector<double> residuals(const ShCoefficients& c, Eigen::MatrixXd* gradient,
                                  std::span<const Eigen::MatrixXd> offsets = {}) const;

    LikelihoodConfig config_;
    Eigen::MatrixXd basis_;  // env pixels x (degree+1)^2
    std::vector<Object> objects_;
};

/// Convenience wrapper: builds a LikelihoodModel with `config` (whose sigma is replaced by
/// `sigma`) and evaluates it. Throws ArgumentError when the candidate degree differs from
/// config.degree.
double joint_nll(const ShCoefficients& candidate, std::span<const ReflectanceMap> observations,
                 std::span<const ReflectanceParams> psis, double sigma,
                 const LikelihoodConfig& config = {});

/// Grid-search discretization used by estimate_reflectance.
struct EstimateConfig {
    int map_resolution = 16;
    int env_height = 16;
    int specular_samples = 16;
};

/// The candidate grid: metallic {0, 1} x roughness {0.05, 0.10, ..., 1} x specular
/// {0, 0.1, ..., 1}. Metals only use specular = 1 since specular has no effect on them.
std::vector<ReflectanceParams> reflectance_grid();

struct ReflectanceScore {
    ReflectanceParams psi;
    double residual = 0.0;  // masked sum of squared errors
};

/// Residual of every grid candidate against `obs`: rendered under reconstruct(env_guess)
/// when given, otherwise under the best degree-2 least-squares illumination per candidate.
std::vector<ReflectanceScore> reflectance_search(const ReflectanceMap& obs,
                                                 const std::optional<ShCoefficients>& env_guess,
                                                 const EstimateConfig& config = {});

/// Argmin of reflectance_search. Candidates within a relative tolerance of the best residual
/// count as tied; ties go to the larger roughness. Throws InsufficientDataError when obs has
/// fewer than 32 valid cells.
ReflectanceParams estimate_reflectance(const ReflectanceMap& obs,
                                       const std::optional<ShCoefficients>& env_guess,
                                       const EstimateConfig& config = {});

struct SamplerConfig {
    /// Where the per-step jitter is injected: on the chain's SH coefficients, or on the
    /// observed reflectance-map values the step is fitted to.
    enum class Jitter { coefficients, observations };

    int degree = 8;
    int n_samples = 10;
    std::uint64_t seed = 0;
    double sigma = kDefaultSigma;
    double delta = kDefaultDelta;
    int K_max = kDefaultKMax;
    int steps_per_k = 4;
    /// Gradient step as a fraction of 1 / Lipschitz.
    double step_size = 1.0;
    /// Lower bound on the total number of gradient steps of a chain.
    int min_total_steps = 400;
    int env_height = 32;
    int map_resolution = 32;
    int specular_samples = 32;
    Jitter jitter = Jitter::observations;

    void validate() const;
    LikelihoodConfig likelihood() const;

    /// Parses a JSON object; unknown keys and wrong types raise ConfigError.
    static SamplerConfig from_json(const std::string& text, const SamplerConfig& defaults);
    static SamplerConfig from_json(const std::string& text);
    std::string to_json() const;
};

struct IlluminationSample {
    ShCoefficients coeffs;
    double nll = 0.0;          // joint NLL of the final state
    double initial_nll = 0.0;  // joint NLL of the chain's starting point
    int chain = 0;
    int attempts = 1;
    bool failed = false;
};

/// Independent annealed chains over SH coefficients. Each chain starts at the degree-2
/// least-squares fit plus N(0, delta^2) noise and, for k = K..1, draws N(0, (delta k / K)^2)
/// jitter (on the observations or the coefficients, see SamplerConfig::jitter) followed by
/// accelerated gradient steps on the joint NLL. Observations are
/// normalized by their mean masked value so sigma and delta are relative quantities;
/// returned coefficients and NLLs are in the original units.
std::vector<IlluminationSample> sample_illumination(std::span<const ReflectanceMap> observations,
                                                    std::span<const ReflectanceParams> psis,
                                                    const SamplerConfig& config);

} // namespace diffusion
} // namespace refmap
