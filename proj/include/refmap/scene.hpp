#pragma once

#include <refmap/brdf.hpp>
#include <refmap/diffusion.hpp>
#include <refmap/envmap.hpp>
#include <refmap/metrics.hpp>
#include <refmap/normal_map.hpp>
#include <refmap/render.hpp>
#include <refmap/sh.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace refmap {

struct SceneObject {
    NormalMap normals;
    HdrImage texture;
    ReflectanceParams psi;
    // Asset paths as written in the manifest (relative to it); empty for in-memory objects.
    std::string normal_map_path;
    std::string texture_path;
};

/// M objects lit by one shared environment.
struct Scene {
    std::uint64_t seed = 0;
    std::vector<SceneObject> objects;
    EnvironmentMap env;
    std::string envmap_path;
    std::string notes;

    void validate() const;
};

/// Sampling rules for synthetic scenes.
struct DatasetSpec {
    int count = 0;
    int objects_per_scene = 3;
    std::vector<std::filesystem::path> normal_maps;
    std::vector<std::filesystem::path> env_maps;
    std::vector<std::filesystem::path> textures;
    /// Probability that an object uses an asset texture instead of a uniform random color
    /// (ignored when no texture assets are given).
    double texture_mix = 0.5;
    /// Probability that roughness is drawn from [roughness_floor, 1] instead of [0, 1].
    double floor_probability = 0.5;
    double roughness_floor = 0.4;

    /// Throws ConfigError on empty asset lists or out-of-range probabilities.
    void validate() const;
};

namespace scene {

/// Asset choices and reflectance of one object, before any file is read.
struct ObjectDraw {
    ReflectanceParams psi;
    std::size_t normal_map = 0;
    std::optional<std::size_t> texture;  // asset index, or a uniform color
    Vec3 color = Vec3::Ones();
};

struct SceneDraw {
    std::uint64_t seed = 0;
    std::size_t env_map = 0;
    std::vector<ObjectDraw> objects;
};

/// metallic in {0, 1}; roughness from U[floor, 1] with floor_probability, else U[0, 1];
/// specular from U[0, 1]. Pure function of (rng, object index).
ReflectanceParams sample_reflectance(const CounterRng& rng, const DatasetSpec& spec);

/// All random choices of a scene; a pure function of (seed, spec).
SceneDraw draw_scene(std::uint64_t seed, const DatasetSpec& spec);

/// Draws a scene and loads its assets (asset textures are resampled to the normal map size).
Scene sample_scene(std::uint64_t seed, const DatasetSpec& spec);

/// Manifest JSON: {seed, objects: [{normal_map, texture, psi: {metallic, roughness,
/// specular}}], envmap, notes}, asset paths relative to the manifest.
Scene load_scene(const std::filesystem::path& manifest);
std::string manifest_json(const Scene& scene);
/// Writes manifest.json plus every asset (normal_m.pfm, texture_m.pfm, envmap.pfm) into dir.
void save_scene(const std::filesystem::path& dir, Scene scene);

/// Object images of the scene rendered with its ground truth.
std::vector<HdrImage> render_scene(const Scene& scene, const RenderOptions& options = {});

struct TextureEstimate {
    HdrImage texture;
    Mask mask;  // foreground pixels with usable shading
};

/// Closed-form albedo for dielectrics: (image - specular) / diffuse shading, both rendered
/// under reconstruct(env) with the given material; clamped to [0, 1]. Pixels whose shading
/// is below 1e-4 are masked out and left at 0.
TextureEstimate estimate_texture(const HdrImage& image, const NormalMap& normals, const ShCoefficients& env,
                                 const ReflectanceParams& psi, int env_height = 32,
                                 const RenderOptions& options = {});

struct PipelineConfig {
    diffusion::SamplerConfig sampler;
    /// Resolution of the lifted raw reflectance maps.
    int map_resolution = 128;
    /// Height of the exported sample environments (and of the scoring grid).
    int env_height = 128;
    RenderOptions render;
    diffusion::EstimateConfig estimate;
    /// Use the ground-truth reflectance instead of estimating it.
    bool use_gt_psi = false;
    /// Minimum number of object channels; fewer objects are duplicated.
    int min_objects = 3;
    /// Subset of objects fed to the sampler (all when empty).
    std::vector<int> objects;

    std::string to_json() const;
    std::string hash() const;
};

struct ObjectResult {
    ReflectanceMap raw_map;
    ReflectanceParams psi;
    std::optional<TextureEstimate> texture;
    std::string texture_status;  // "ok" or the reason it was skipped
};

struct PipelineResult {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<ObjectResult> objects;
    std::vector<int> sampled_objects;
    std::vector<diffusion::IlluminationSample> samples;
    std::vector<EnvironmentMap> sample_envs;  // clamped reconstructions
    std::optional<metrics::ScoreReport> report;
};

/// Raised when a stage after the per-object stage fails; carries what was computed so far.
class PipelineFailure : public Error {
public:
    PipelineFailure(const std::string& what, PipelineResult partial, std::exception_ptr cause)
        : Error(what), partial_(std::move(partial)), cause_(std::move(cause)) {}
    const PipelineResult& partial() const { return partial_; }
    [[noreturn]] void rethrow_cause() const { std::rethrow_exception(cause_); }

private:
    PipelineResult partial_;
    std::exception_ptr cause_;
};

/// texture stage (white-texture appearance under the scene's own environment) -> lift ->
/// reflectance -> illumination samples -> texture re-solve under the lowest-NLL sample ->
/// scores against `gt` when given.
PipelineResult run_pipeline(const Scene& scene, const std::vector<HdrImage>& images,
                            const PipelineConfig& config, const std::optional<EnvironmentMap>& gt);
/// Renders the scene's images and scores against the scene environment.
PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& config);

/// Writes raw maps, reflectance estimates, sample environments, samples.csv, textures,
/// scores.csv (when scored) and bundle.json.
void write_bundle(const std::filesystem::path& dir, const PipelineResult& result);

// Synthetic assets.

/// Band-limited random sky plus a few sharp bright lobes; values > 0.
EnvironmentMap synthetic_environment(int height, std::uint64_t seed);
/// Random degree-`degree` SH illumination shifted so its minimum over a 64 x 128 grid is
/// floor_fraction of its range per channel.
ShCoefficients random_band_limited(int degree, std::uint64_t seed, double floor_fraction = 0.1);

enum class Shape { sphere, cylinder, cap, bumpy, plane };
/// Object normal maps of size x size; `cap` keeps sphere normals within 60 degrees of a
/// seed-dependent tilted axis, `bumpy` adds a smooth height field to a sphere.
NormalMap synthetic_normal_map(Shape shape, int size, std::uint64_t seed = 0);
std::optional<Shape> shape_from_string(const std::string& name);
std::string to_string(Shape shape);
/// Checkerboard of two random colors.
HdrImage synthetic_texture(int size, std::uint64_t seed);

} // namespace scene
} // namespace refmap
