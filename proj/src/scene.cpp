#include <refmap/scene.hpp>

#include <refmap/io.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace refmap {

void Scene::validate() const {
    if (objects.empty()) {
        throw ArgumentError("scene has no objects");
    }
    if (env.height() < 1) {
        throw ArgumentError("scene has no environment map");
    }
    for (const auto& o : objects) {
        o.psi.validate();
        if (o.texture.height() != o.normals.height() || o.texture.width() != o.normals.width()) {
            throw ArgumentError("texture and normal map of an object differ in size");
        }
    }
}

void DatasetSpec::validate() const {
    if (count < 0) {
        throw ConfigError("dataset count must be >= 0");
    }
    if (objects_per_scene < 1) {
        throw ConfigError("objects_per_scene must be >= 1");
    }
    if (normal_maps.empty()) {
        throw ConfigError("dataset needs at least one normal map asset");
    }
    if (env_maps.empty()) {
        throw ConfigError("dataset needs at least one environment map asset");
    }
    const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(texture_mix) || !prob(floor_probability) || !prob(roughness_floor)) {
        throw ConfigError("dataset probabilities and the roughness floor must lie in [0, 1]");
    }
}

namespace scene {

ReflectanceParams sample_reflectance(const CounterRng& rng, const DatasetSpec& spec) {
    ReflectanceParams psi;
    psi.metallic = rng.uniform(0) < 0.5 ? 0.0 : 1.0;
    const double u = rng.uniform(2);
    if (rng.uniform(1) < spec.floor_probability) {
        psi.roughness = spec.roughness_floor + (1.0 - spec.roughness_floor) * u;
    } else {
        psi.roughness = u;
    }
    psi.specular = rng.uniform(3);
    return psi;
}

SceneDraw draw_scene(std::uint64_t seed, const DatasetSpec& spec) {
    spec.validate();
    const CounterRng rng(seed);
    SceneDraw d;
    d.seed = seed;
    d.env_map = static_cast<std::size_t>(rng.bits(0) % spec.env_maps.size());
    for (int m = 0; m < spec.objects_per_scene; ++m) {
        const CounterRng r = rng.fork(static_cast<std::uint64_t>(m) + 1);
        ObjectDraw o;
        o.psi = sample_reflectance(r.fork(0), spec);
        o.normal_map = static_cast<std::size_t>(r.bits(10) % spec.normal_maps.size());
        if (!spec.textures.empty() && r.uniform(11) < spec.texture_mix) {
            o.texture = static_cast<std::size_t>(r.bits(12) % spec.textures.size());
        } else {
            o.color = Vec3(r.uniform(13), r.uniform(14), r.uniform(15));
        }
        d.objects.push_back(o);
    }
    return d;
}

namespace {

HdrImage load_any_image(const std::filesystem::path& path) {
    // Textures need not have the 2:1 environment aspect.
    const auto ext = path.extension().string();
    if (ext == ".pfm" || ext == ".PFM") {
        return io::read_pfm(path);
    }
    return io::read_rgbe(path);
}

// Nearest-neighbour resampling to a target size.
HdrImage resample(const HdrImage& src, int height, int width) {
    if (src.height() == height && src.width() == width) {
        return src;
    }
    HdrImage out(height, width);
    for (int i = 0; i < height; ++i) {
        const int si = std::min(src.height() - 1, static_cast<int>((i + 0.5) * src.height() / height));
        for (int j = 0; j < width; ++j) {
            const int sj = std::min(src.width() - 1, static_cast<int>((j + 0.5) * src.width() / width));
            out.pixel(i, j) = src.pixel(si, sj);
        }
    }
    return out;
}

HdrImage uniform_texture(int height, int width, const Vec3& color) {
    HdrImage out(height, width);
    out.pixels().rowwise() = color.cast<float>().transpose().array();
    return out;
}

} // namespace

Scene sample_scene(std::uint64_t seed, const DatasetSpec& spec) {
    const SceneDraw d = draw_scene(seed, spec);
    Scene s;
    s.seed = seed;
    s.envmap_path = spec.env_maps[d.env_map].string();
    s.env = io::load_hdr(spec.env_maps[d.env_map]);
    for (const auto& o : d.objects) {
        SceneObject obj;
        obj.normal_map_path = spec.normal_maps[o.normal_map].string();
        obj.normals = io::load_normal_map(spec.normal_maps[o.normal_map]);
        obj.psi = o.psi;
        if (o.texture) {
            obj.texture_path = spec.textures[*o.texture].string();
            obj.texture = resample(load_any_image(spec.textures[*o.texture]), obj.normals.height(), obj.normals.width());
        } else {
            obj.texture = uniform_texture(obj.normals.height(), obj.normals.width(), o.color);
        }
        s.objects.push_back(std::move(obj));
    }
    s.notes = "synthetic scene";
    return s;
}

Scene load_scene(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) {
        throw ConfigError("cannot open manifest " + manifest.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(manifest.string() + ": invalid JSON: " + e.what());
    }
    const auto base = manifest.parent_path();
    const auto need = [&](const nlohmann::json& obj, const char* key, auto check, const std::string& where) {
        if (!obj.is_object() || !obj.contains(key) || !check(obj.at(key))) {
            throw ConfigError(manifest.string() + ": " + where + " needs a valid '" + key + "' field");
        }
        return obj.at(key);
    };
    const auto is_string = [](const nlohmann::json& v) { return v.is_string(); };
    const auto is_unit = [](const nlohmann::json& v) {
        return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0;
    };

    Scene s;
    if (!j.is_object()) {
        throw ConfigError(manifest.string() + ": manifest must be a JSON object");
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) {
            throw ConfigError(manifest.string() + ": 'seed' must be a non-negative integer");
        }
        s.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("notes")) {
        if (!j["notes"].is_string()) {
            throw ConfigError(manifest.string() + ": 'notes' must be a string");
        }
        s.notes = j["notes"].get<std::string>();
    }
    s.envmap_path = need(j, "envmap", is_string, "manifest").get<std::string>();
    const auto objects = need(j, "objects", [](const nlohmann::json& v) { return v.is_array() && !v.empty(); }, "manifest");

    struct Pending {
        std::string normal_map;
        std::string texture;
        ReflectanceParams psi;
    };
    std::vector<Pending> pending;
    for (std::size_t m = 0; m < objects.size(); ++m) {
        const auto& o = objects[m];
        const std::string where = "object " + std::to_string(m);
        Pending p;
        p.normal_map = need(o, "normal_map", is_string, where).get<std::string>();
        p.texture = need(o, "texture", is_string, where).get<std::string>();
        const auto psi = need(o, "psi", [](const nlohmann::json& v) { return v.is_object(); }, where);
        p.psi.metallic = need(psi, "metallic", is_unit, where + " psi").get<double>();
        p.psi.roughness = need(psi, "roughness", is_unit, where + " psi").get<double>();
        p.psi.specular = need(psi, "specular", is_unit, where + " psi").get<double>();
        pending.push_back(p);
    }

    const auto resolve = [&](const std::string& rel) {
        const std::filesystem::path p(rel);
        const auto full = p.is_absolute() ? p : base / p;
        if (!std::filesystem::exists(full)) {
            throw Error("missing asset: " + full.string());
        }
        return full;
    };
    s.env = io::load_hdr(resolve(s.envmap_path));
    for (const auto& p : pending) {
        SceneObject obj;
        obj.normal_map_path = p.normal_map;
        obj.texture_path = p.texture;
        obj.normals = io::load_normal_map(resolve(p.normal_map));
        obj.texture = load_any_image(resolve(p.texture));
        obj.psi = p.psi;
        if (obj.texture.height() != obj.normals.height() || obj.texture.width() != obj.normals.width()) {
            throw ConfigError(manifest.string() + ": texture " + p.texture + " does not match normal map " +
                              p.normal_map + " in size");
        }
        s.objects.push_back(std::move(obj));
    }
    return s;
}

std::string manifest_json(const Scene& scene) {
    nlohmann::ordered_json j;
    j["seed"] = scene.seed;
    j["objects"] = nlohmann::ordered_json::array();
    for (const auto& o : scene.objects) {
        nlohmann::ordered_json e;
        e["normal_map"] = o.normal_map_path;
        e["texture"] = o.texture_path;
        e["psi"] = {{"metallic", o.psi.metallic}, {"roughness", o.psi.roughness}, {"specular", o.psi.specular}};
        j["objects"].push_back(e);
    }
    j["envmap"] = scene.envmap_path;
    j["notes"] = scene.notes;
    return j.dump(2) + "\n";
}

void save_scene(const std::filesystem::path& dir, Scene scene) {
    std::filesystem::create_directories(dir);
    scene.envmap_path = "envmap.pfm";
    io::save_pfm(dir / scene.envmap_path, scene.env);
    for (std::size_t m = 0; m < scene.objects.size(); ++m) {
        auto& o = scene.objects[m];
        o.normal_map_path = "normal_" + std::to_string(m) + ".pfm";
        o.texture_path = "texture_" + std::to_string(m) + ".pfm";
        io::save_normal_map(dir / o.normal_map_path, o.normals);
        io::write_pfm(dir / o.texture_path, o.texture);
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) {
        throw Error("cannot write " + (dir / "manifest.json").string());
    }
    out << manifest_json(scene);
}

std::vector<HdrImage> render_scene(const Scene& scene, const RenderOptions& options) {
    scene.validate();
    std::vector<HdrImage> images;
    for (const auto& o : scene.objects) {
        images.push_back(render::render_object(o.normals, o.texture, o.psi, scene.env, options));
    }
    return images;
}

TextureEstimate estimate_texture(const HdrImage& image, const NormalMap& normals, const ShCoefficients& env,
                                 const ReflectanceParams& psi, int env_height, const RenderOptions& options) {
    if (psi.metallic != 0.0) {
        throw UnsupportedMaterialError("closed-form texture estimation needs a dielectric (metallic = 0)");
    }
    if (image.height() != normals.height() || image.width() != normals.width()) {
        throw ArgumentError("image and normal map dimensions differ");
    }
    if (normals.mask.count() == 0) {
        throw ArgumentError("texture estimation needs a non-empty foreground");
    }
    EnvironmentMap light = sh::reconstruct(env, env_height, 2 * env_height);
    light.image().pixels() = light.image().pixels().max(0.0f);
    const int h = normals.height();
    const int w = normals.width();
    const HdrImage spec = render::render_object(normals, uniform_texture(h, w, Vec3::Zero()), psi, light, options);
    const HdrImage full = render::render_object(normals, uniform_texture(h, w, Vec3::Ones()), psi, light, options);

    TextureEstimate out{HdrImage(h, w), Mask::Constant(normals.mask.size(), false)};
    for (Eigen::Index k = 0; k < image.size(); ++k) {
        if (!normals.mask(k)) {
            continue;
        }
        const Eigen::Array3d s = spec.pixels().row(k).transpose().cast<double>();
        const Eigen::Array3d shading = full.pixels().row(k).transpose().cast<double>() - s;
        if (shading.minCoeff() < 1e-4) {
            continue;
        }
        const Eigen::Array3d rho = (image.pixels().row(k).transpose().cast<double>() - s) / shading;
        out.texture.pixels().row(k) = rho.max(0.0).min(1.0).cast<float>().transpose();
        out.mask(k) = true;
    }
    return out;
}

std::string PipelineConfig::to_json() const {
    nlohmann::ordered_json j;
    j["sampler"] = nlohmann::ordered_json::parse(sampler.to_json());
    j["map_resolution"] = map_resolution;
    j["env_height"] = env_height;
    j["render"] = {{"env_stride", render.env_stride}, {"specular_samples", render.specular_samples}};
    j["estimate"] = {{"map_resolution", estimate.map_resolution},
                     {"env_height", estimate.env_height},
                     {"specular_samples", estimate.specular_samples}};
    j["use_gt_psi"] = use_gt_psi;
    j["min_objects"] = min_objects;
    j["objects"] = objects;
    return j.dump(2);
}

std::string PipelineConfig::hash() const {
    return hex64(fnv1a(to_json()));
}

PipelineResult run_pipeline(const Scene& scene, const std::vector<HdrImage>& images, const PipelineConfig& config,
                            const std::optional<EnvironmentMap>& gt) {
    scene.validate();
    config.sampler.validate();
    if (images.size() != scene.objects.size()) {
        throw ArgumentError("need one image per scene object");
    }
    PipelineResult res;
    res.config_hash = config.hash();
    res.seed = config.sampler.seed;

    const auto context = [](std::size_t m, const std::exception& e) {
        return "object " + std::to_string(m) + ": " + e.what();
    };

    // Texture stage: the white-texture appearance stands in for the learned texture remover.
    for (std::size_t m = 0; m < scene.objects.size(); ++m) {
        const auto& o = scene.objects[m];
        ObjectResult r;
        try {
            const HdrImage white = uniform_texture(o.normals.height(), o.normals.width(), Vec3::Ones());
            const HdrImage appearance = render::render_object(o.normals, white, o.psi, scene.env, config.render);
            r.raw_map = render::lift_to_sphere(appearance, o.normals, config.map_resolution);
            r.psi = config.use_gt_psi ? o.psi : diffusion::estimate_reflectance(r.raw_map, std::nullopt, config.estimate);
        } catch (const InsufficientDataError& e) {
            throw InsufficientDataError(context(m, e));
        } catch (const ArgumentError& e) {
            throw ArgumentError(context(m, e));
        } catch (const Error& e) {
            throw Error(context(m, e));
        }
        res.objects.push_back(std::move(r));
    }

    try {
        res.sampled_objects = config.objects;
        if (res.sampled_objects.empty()) {
            for (std::size_t m = 0; m < scene.objects.size(); ++m) {
                res.sampled_objects.push_back(static_cast<int>(m));
            }
        }
        std::vector<ReflectanceMap> maps;
        std::vector<ReflectanceParams> psis;
        for (const int m : res.sampled_objects) {
            if (m < 0 || static_cast<std::size_t>(m) >= scene.objects.size()) {
                throw ArgumentError("object index " + std::to_string(m) + " out of range");
            }
            maps.push_back(res.objects[static_cast<std::size_t>(m)].raw_map);
            psis.push_back(res.objects[static_cast<std::size_t>(m)].psi);
        }
        for (std::size_t i = 0; maps.size() < static_cast<std::size_t>(config.min_objects); ++i) {
            maps.push_back(maps[i]);
            psis.push_back(psis[i]);
        }
        res.samples = diffusion::sample_illumination(maps, psis, config.sampler);

        const diffusion::IlluminationSample* best = nullptr;
        for (const auto& s : res.samples) {
            EnvironmentMap e = sh::reconstruct(s.coeffs, config.env_height, 2 * config.env_height);
            e.image().pixels() = e.image().pixels().max(0.0f);
            res.sample_envs.push_back(std::move(e));
            if (!s.failed && (!best || s.nll < best->nll)) {
                best = &s;
            }
        }

        for (std::size_t m = 0; m < scene.objects.size(); ++m) {
            auto& r = res.objects[m];
            if (!best) {
                r.texture_status = "skipped: every chain failed";
            } else if (r.psi.metallic != 0.0) {
                r.texture_status = "skipped: metallic material";
            } else {
                r.texture = estimate_texture(images[m], scene.objects[m].normals, best->coeffs, r.psi,
                                             config.sampler.env_height, config.render);
                r.texture_status = "ok";
            }
        }
    } catch (const std::exception& e) {
        throw PipelineFailure(e.what(), res, std::current_exception());
    }

    if (gt) {
        gt->validate_radiance();
        metrics::ScoreReport report;
        for (std::size_t i = 0; i < res.samples.size(); ++i) {
            const EnvironmentMap e = sh::reconstruct(res.samples[i].coeffs, gt->height(), gt->width());
            report.rows.push_back({std::to_string(i), res.samples[i].nll, metrics::score_illumination(e, *gt)});
        }
        res.report = std::move(report);
    }
    return res;
}

PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& config) {
    return run_pipeline(scene, render_scene(scene, config.render), config, scene.env);
}

void write_bundle(const std::filesystem::path& dir, const PipelineResult& result) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json j;
    j["config_hash"] = result.config_hash;
    j["seed"] = result.seed;
    std::vector<std::string> artifacts;

    std::ofstream psi_csv(dir / "reflectance.csv");
    psi_csv << "object,metallic,roughness,specular,texture\n";
    artifacts.push_back("reflectance.csv");
    for (std::size_t m = 0; m < result.objects.size(); ++m) {
        const auto& o = result.objects[m];
        const std::string stem = "obj" + std::to_string(m);
        io::save_reflectance_map(dir / (stem + "_raw"), o.raw_map);
        artifacts.push_back(stem + "_raw.pfm");
        artifacts.push_back(stem + "_raw_mask.png");
        if (o.texture) {
            io::write_pfm(dir / (stem + "_texture.pfm"), o.texture->texture);
            io::write_mask_png(dir / (stem + "_texture_mask.png"), o.texture->mask, o.texture->texture.height(),
                               o.texture->texture.width());
            artifacts.push_back(stem + "_texture.pfm");
            artifacts.push_back(stem + "_texture_mask.png");
        }
        psi_csv << m << ',' << metrics::format_number(o.psi.metallic) << ',' << metrics::format_number(o.psi.roughness)
                << ',' << metrics::format_number(o.psi.specular) << ',' << o.texture_status << '\n';
    }

    std::ofstream samples_csv(dir / "samples.csv");
    samples_csv << "sample,chain,attempts,failed,nll,initial_nll\n";
    artifacts.push_back("samples.csv");
    for (std::size_t i = 0; i < result.samples.size(); ++i) {
        const auto& s = result.samples[i];
        samples_csv << i << ',' << s.chain << ',' << s.attempts << ',' << (s.failed ? 1 : 0) << ','
                    << metrics::format_number(s.nll) << ',' << metrics::format_number(s.initial_nll) << '\n';
        const std::string name = "sample_" + std::to_string(i);
        if (i < result.sample_envs.size()) {
            io::save_pfm(dir / (name + ".pfm"), result.sample_envs[i]);
            artifacts.push_back(name + ".pfm");
        }
        sh::write_coefficients_csv(dir / (name + "_sh.csv"), s.coeffs);
        artifacts.push_back(name + "_sh.csv");
    }
    if (result.report) {
        result.report->write_csv(dir / "scores.csv");
        artifacts.push_back("scores.csv");
    }
    j["sampled_objects"] = result.sampled_objects;
    j["artifacts"] = artifacts;
    std::ofstream out(dir / "bundle.json");
    out << j.dump(2) << '\n';
}

// Synthetic assets.

ShCoefficients random_band_limited(int degree, std::uint64_t seed, double floor_fraction) {
    const CounterRng rng(seed);
    ShCoefficients c(degree);
    for (int l = 0; l <= degree; ++l) {
        for (int m = -l; m <= l; ++m) {
            for (int ch = 0; ch < 3; ++ch) {
                c.at(l, m)(ch) = rng.normal(static_cast<std::uint64_t>(ShCoefficients::index(l, m)) * 3 + ch) / (1.0 + l);
            }
        }
    }
    const EnvironmentMap probe = sh::reconstruct(c, 64, 128);
    for (int ch = 0; ch < 3; ++ch) {
        const double lo = probe.image().pixels().col(ch).minCoeff();
        const double hi = probe.image().pixels().col(ch).maxCoeff();
        const double shift = -lo + floor_fraction * std::max(hi - lo, 1e-3);
        c.at(0, 0)(ch) += shift * 2.0 * std::sqrt(kPi);
    }
    return c;
}

EnvironmentMap synthetic_environment(int height, std::uint64_t seed) {
    EnvironmentMap env = sh::reconstruct(random_band_limited(6, seed, 0.2), height, 2 * height);
    const CounterRng rng = CounterRng(seed).fork(7);
    const int lobes = 2 + static_cast<int>(rng.bits(0) % 2);
    for (int k = 0; k < lobes; ++k) {
        const double theta = std::acos(1.0 - 1.2 * rng.uniform(10 * k + 1));  // mostly upper sky
        const double phi = 2.0 * kPi * rng.uniform(10 * k + 2);
        const Vec3 axis = direction_from_angles(theta, phi);
        const double width = 0.05 + 0.1 * rng.uniform(10 * k + 3);
        const Eigen::Array3d tint(0.8 + 0.2 * rng.uniform(10 * k + 4), 0.8 + 0.2 * rng.uniform(10 * k + 5),
                                  0.8 + 0.2 * rng.uniform(10 * k + 6));
        const double amp = 5.0 + 15.0 * rng.uniform(10 * k + 7);
        for (int i = 0; i < env.height(); ++i) {
            for (int j = 0; j < env.width(); ++j) {
                const double c = pixel_direction(i, j, env.height(), env.width()).dot(axis);
                const double v = amp * std::exp((c - 1.0) / (width * width));
                env.pixel(i, j) += (v * tint).cast<float>().transpose();
            }
        }
    }
    return env;
}

NormalMap synthetic_normal_map(Shape shape, int size, std::uint64_t seed) {
    if (size < 1) {
        throw ArgumentError("normal map size must be >= 1");
    }
    if (shape == Shape::sphere) {
        return sphere_normal_map(size);
    }
    if (shape == Shape::plane) {
        return plane_normal_map(size, size);
    }
    NormalMap out{HdrImage(size, size), Mask::Constant(static_cast<Eigen::Index>(size) * size, false)};
    const CounterRng rng(seed);
    Vec3 axis(2.0 * rng.uniform(0) - 1.0, 2.0 * rng.uniform(1) - 1.0, 0.0);
    axis = (axis.normalized() * 0.6 + Vec3(0, 0, 0.8)).normalized();
    const double fx = 4.0 + 6.0 * rng.uniform(2);
    const double fy = 4.0 + 6.0 * rng.uniform(3);
    const double px = 2.0 * kPi * rng.uniform(4);
    const double py = 2.0 * kPi * rng.uniform(5);
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            const double u = -1.0 + (2.0 * j + 1.0) / size;
            const double v = 1.0 - (2.0 * i + 1.0) / size;
            Vec3 n;
            if (shape == Shape::cylinder) {
                if (std::abs(v) > 0.8) {
                    continue;
                }
                n = Vec3(u, 0.0, std::sqrt(1.0 - u * u));
            } else {
                const double r2 = u * u + v * v;
                if (r2 >= 1.0) {
                    continue;
                }
                n = Vec3(u, v, std::sqrt(1.0 - r2));
                if (shape == Shape::cap && n.dot(axis) < 0.5) {
                    continue;
                }
                if (shape == Shape::bumpy) {
                    const double a = 0.25;
                    const Vec3 grad(a * fx * std::cos(fx * u + px) * std::sin(fy * v + py),
                                    a * fy * std::sin(fx * u + px) * std::cos(fy * v + py), 0.0);
                    n = (n - grad * n.z()).normalized();
                    if (n.z() < 0.05) {
                        continue;
                    }
                }
            }
            out.normals.pixel(i, j) = n.cast<float>().transpose().array();
            out.mask(out.normals.index(i, j)) = true;
        }
    }
    return out;
}

std::optional<Shape> shape_from_string(const std::string& name) {
    if (name == "sphere") return Shape::sphere;
    if (name == "cylinder") return Shape::cylinder;
    if (name == "cap") return Shape::cap;
    if (name == "bumpy") return Shape::bumpy;
    if (name == "plane") return Shape::plane;
    return std::nullopt;
}

std::string to_string(Shape shape) {
    switch (shape) {
    case Shape::sphere: return "sphere";
    case Shape::cylinder: return "cylinder";
    case Shape::cap: return "cap";
    case Shape::bumpy: return "bumpy";
    case Shape::plane: return "plane";
    }
    return "sphere";
}

HdrImage synthetic_texture(int size, std::uint64_t seed) {
    const CounterRng rng(seed);
    const Eigen::Array3f a(float(rng.uniform(0)), float(rng.uniform(1)), float(rng.uniform(2)));
    const Eigen::Array3f b(float(rng.uniform(3)), float(rng.uniform(4)), float(rng.uniform(5)));
    const int cell = std::max(1, size / 8);
    HdrImage out(size, size);
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            out.pixel(i, j) = (((i / cell) + (j / cell)) % 2 == 0 ? a : b).transpose();
        }
    }
    return out;
}

} // namespace scene
} // namespace refmap
