#include <refmap/diffusion.hpp>
#include <refmap/envmap.hpp>
#include <refmap/io.hpp>
#include <refmap/metrics.hpp>
#include <refmap/render.hpp>
#include <refmap/scene.hpp>
#include <refmap/sh.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace refmap;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Built-in defaults; a config file may only override keys that exist here.
json default_config() {
    json sampler = json::parse(diffusion::SamplerConfig{}.to_json());
    sampler.erase("seed");
    json j;
    j["seed"] = 0;
    j["resolution"] = 128;
    j["env_height"] = 128;
    j["render"] = {{"env_stride", 1}, {"specular_samples", 32}};
    j["sampler"] = sampler;
    const diffusion::EstimateConfig est;
    j["estimate"] = {{"map_resolution", est.map_resolution},
                     {"env_height", est.env_height},
                     {"specular_samples", est.specular_samples}};
    j["use_gt_psi"] = false;
    j["min_objects"] = 3;
    j["forward"] = {{"sigma", diffusion::kDefaultSigma}, {"K_max", diffusion::kDefaultKMax}};
    j["metrics"] = {{"sh_degree", 32}, {"pca_ratio", 0.99}};
    const DatasetSpec ds;
    j["dataset"] = {{"objects_per_scene", ds.objects_per_scene},
                    {"texture_mix", ds.texture_mix},
                    {"floor_probability", ds.floor_probability},
                    {"roughness_floor", ds.roughness_floor}};
    return j;
}

void merge(json& base, const json& overlay, const std::string& path) {
    if (!overlay.is_object()) {
        throw ConfigError("config" + (path.empty() ? std::string() : " section '" + path + "'") +
                          " must be a JSON object");
    }
    for (const auto& [key, value] : overlay.items()) {
        const std::string name = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) {
            throw ConfigError("unknown config key '" + name + "'");
        }
        json& slot = base[key];
        bool ok = false;
        if (slot.is_object()) {
            merge(slot, value, name);
            continue;
        }
        if (slot.is_boolean()) {
            ok = value.is_boolean();
        } else if (slot.is_number_integer()) {
            ok = value.is_number_integer() && (!slot.is_number_unsigned() || value.get<long long>() >= 0);
        } else if (slot.is_number()) {
            ok = value.is_number();
        } else if (slot.is_string()) {
            ok = value.is_string();
        }
        if (!ok) {
            throw ConfigError("config key '" + name + "' has the wrong type");
        }
        slot = value;
    }
}

json load_config(const std::string& path) {
    json j = default_config();
    if (path.empty()) {
        return j;
    }
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    json overlay;
    try {
        overlay = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    merge(j, overlay, "");
    return j;
}

diffusion::SamplerConfig sampler_config(const json& j) {
    json s = j["sampler"];
    s["seed"] = j["seed"];
    return diffusion::SamplerConfig::from_json(s.dump());
}

RenderOptions render_options(const json& j) {
    RenderOptions o;
    o.env_stride = j["render"]["env_stride"].get<int>();
    o.specular_samples = j["render"]["specular_samples"].get<int>();
    if (o.env_stride < 1 || o.specular_samples < 1) {
        throw ConfigError("render.env_stride and render.specular_samples must be >= 1");
    }
    return o;
}

int positive(const json& j, const char* key) {
    const int v = j[key].get<int>();
    if (v < 1) {
        throw ConfigError(std::string(key) + " must be >= 1");
    }
    return v;
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) {
        throw ArgumentError(std::string(flag) + " is required");
    }
}

// Orders "sample_2" before "sample_10".
bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0, k = 0;
    while (i < a.size() && k < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
        const bool db = std::isdigit(static_cast<unsigned char>(b[k])) != 0;
        if (da && db) {
            std::size_t ie = i, ke = k;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (ke < b.size() && std::isdigit(static_cast<unsigned char>(b[ke]))) ++ke;
            const std::string na = a.substr(i, ie - i), nb = b.substr(k, ke - k);
            const std::string ta = na.substr(std::min(na.find_first_not_of('0'), na.size()));
            const std::string tb = nb.substr(std::min(nb.find_first_not_of('0'), nb.size()));
            if (ta.size() != tb.size()) return ta.size() < tb.size();
            if (ta != tb) return ta < tb;
            i = ie;
            k = ke;
        } else {
            if (a[i] != b[k]) return a[i] < b[k];
            ++i;
            ++k;
        }
    }
    return a.size() - i < b.size() - k || (a.size() - i == b.size() - k && a < b);
}

std::vector<fs::path> list_files(const fs::path& dir, std::initializer_list<const char*> extensions) {
    if (!fs::is_directory(dir)) {
        throw ArgumentError("not a directory: " + dir.string());
    }
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        for (const char* e : extensions) {
            if (ext == e) {
                out.push_back(entry.path());
                break;
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
        return natural_less(a.filename().string(), b.filename().string());
    });
    return out;
}

// Equirectangular maps of a directory; other images are skipped.
std::vector<std::pair<std::string, EnvironmentMap>> load_env_dir(const fs::path& dir) {
    std::vector<std::pair<std::string, EnvironmentMap>> out;
    for (const auto& p : list_files(dir, {".pfm", ".hdr"})) {
        HdrImage image = p.extension() == ".pfm" ? io::read_pfm(p) : io::read_rgbe(p);
        if (image.width() != 2 * image.height()) {
            continue;
        }
        EnvironmentMap env(std::move(image));
        env.validate_radiance();
        out.emplace_back(p.stem().string(), std::move(env));
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << text;
}

std::string fmt(double v) { return metrics::format_number(v); }

// Subcommands.

struct Common {
    std::string config;
    bool print_config = false;
    std::string scene;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> resolution;
    std::optional<int> env_height;
    std::optional<int> env_stride;
    std::optional<int> specular_samples;
};

// Applies flags over the file/default config (flags win).
json effective(const Common& c) {
    json j = load_config(c.config);
    if (c.seed) j["seed"] = *c.seed;
    if (c.resolution) j["resolution"] = *c.resolution;
    if (c.env_height) j["env_height"] = *c.env_height;
    if (c.env_stride) j["render"]["env_stride"] = *c.env_stride;
    if (c.specular_samples) j["render"]["specular_samples"] = *c.specular_samples;
    return j;
}

void add_common(CLI::App* sub, Common& c, bool scene_io) {
    sub->add_option("--config", c.config, "JSON config file (flags override it)");
    sub->add_flag("--print-config", c.print_config, "Print the effective config and exit");
    if (scene_io) {
        sub->add_option("--scene", c.scene, "Scene manifest.json");
        sub->add_option("--out", c.out, "Output directory");
    }
}

void add_render_flags(CLI::App* sub, Common& c) {
    sub->add_option("--resolution", c.resolution, "Reflectance map resolution");
    sub->add_option("--env-stride", c.env_stride, "Integrate against the environment downsampled by this factor");
    sub->add_option("--specular-samples", c.specular_samples, "Specular quadrature nodes per axis");
}

bool maybe_print(const Common& c, const json& j) {
    if (c.print_config) {
        std::cout << j.dump(2) << '\n';
    }
    return c.print_config;
}

int cmd_render(const Common& c) {
    const json j = effective(c);
    if (maybe_print(c, j)) return 0;
    require(c.scene, "--scene");
    require(c.out, "--out");
    const int res = positive(j, "resolution");
    const RenderOptions opts = render_options(j);
    const Scene scene = scene::load_scene(c.scene);
    const auto images = scene::render_scene(scene, opts);
    const fs::path out(c.out);
    fs::create_directories(out);
    for (std::size_t m = 0; m < scene.objects.size(); ++m) {
        const auto& o = scene.objects[m];
        const std::string stem = "obj" + std::to_string(m);
        io::write_pfm(out / (stem + ".pfm"), images[m]);
        io::write_mask_png(out / (stem + "_mask.png"), o.normals.mask, o.normals.height(), o.normals.width());
        io::save_reflectance_map(out / (stem + "_map"),
                                 render::render_reflectance_map(o.psi, Vec3::Ones(), scene.env, res, opts));
        io::save_reflectance_map(out / (stem + "_raw"), render::lift_to_sphere(images[m], o.normals, res));
    }
    return 0;
}

int cmd_diffuse(const Common& c, std::optional<double> sigma, std::optional<int> k_max) {
    json j = effective(c);
    if (sigma) j["forward"]["sigma"] = *sigma;
    if (k_max) j["forward"]["K_max"] = *k_max;
    if (maybe_print(c, j)) return 0;
    require(c.scene, "--scene");
    require(c.out, "--out");
    const double s = j["forward"]["sigma"].get<double>();
    if (!(s >= 0.0)) {
        throw ConfigError("forward.sigma must be >= 0");
    }
    const int kmax = j["forward"]["K_max"].get<int>();
    const Scene scene = scene::load_scene(c.scene);
    std::vector<ReflectanceParams> psis;
    for (const auto& o : scene.objects) psis.push_back(o.psi);
    const auto traj = diffusion::forward_sample(scene.env, psis, s, j["seed"].get<std::uint64_t>(),
                                                positive(j, "resolution"), kmax, render_options(j));
    const fs::path out(c.out);
    diffusion::write_trajectory(out, traj);
    std::ostringstream csv;
    csv << "object,k,metallic,roughness,specular\n";
    for (std::size_t m = 0; m < traj.schedule.objects(); ++m) {
        for (int k = 0; k <= traj.schedule.K; ++k) {
            const auto p = traj.schedule.at(m, k);
            csv << m << ',' << k << ',' << fmt(p.metallic) << ',' << fmt(p.roughness) << ',' << fmt(p.specular) << '\n';
        }
    }
    write_text(out / "schedule.csv", csv.str());
    return 0;
}

struct InvertFlags {
    std::string images;
    std::string gt;
    std::string objects = "multi";
    std::optional<int> samples;
    std::optional<double> sigma;
    bool use_gt_psi = false;
};

scene::PipelineConfig pipeline_config(const json& j) {
    scene::PipelineConfig p;
    p.sampler = sampler_config(j);
    p.map_resolution = positive(j, "resolution");
    p.env_height = positive(j, "env_height");
    p.render = render_options(j);
    p.estimate.map_resolution = j["estimate"]["map_resolution"].get<int>();
    p.estimate.env_height = j["estimate"]["env_height"].get<int>();
    p.estimate.specular_samples = j["estimate"]["specular_samples"].get<int>();
    p.use_gt_psi = j["use_gt_psi"].get<bool>();
    p.min_objects = positive(j, "min_objects");
    return p;
}

scene::PipelineResult run_and_write(const Scene& scene, const std::vector<HdrImage>& images,
                                    const scene::PipelineConfig& config, const std::optional<EnvironmentMap>& gt,
                                    const fs::path& dir) {
    try {
        auto result = scene::run_pipeline(scene, images, config, gt);
        scene::write_bundle(dir, result);
        return result;
    } catch (const scene::PipelineFailure& f) {
        scene::write_bundle(dir, f.partial());
        f.rethrow_cause();
    }
}

Eigen::VectorXd feature(const EnvironmentMap& env, int degree) {
    return sh::project(env, degree).flatten();
}

int cmd_invert(const Common& c, const InvertFlags& f) {
    json j = effective(c);
    if (f.samples) j["sampler"]["n_samples"] = *f.samples;
    if (f.sigma) j["sampler"]["sigma"] = *f.sigma;
    if (f.use_gt_psi) j["use_gt_psi"] = true;
    if (maybe_print(c, j)) return 0;
    require(c.scene, "--scene");
    require(c.out, "--out");

    std::optional<int> single;
    if (f.objects.rfind("single:", 0) == 0) {
        try {
            std::size_t used = 0;
            single = std::stoi(f.objects.substr(7), &used);
            if (used != f.objects.size() - 7) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ArgumentError("--objects must be 'multi' or 'single:<index>'");
        }
    } else if (f.objects != "multi") {
        throw ArgumentError("--objects must be 'multi' or 'single:<index>'");
    }

    const scene::PipelineConfig config = pipeline_config(j);
    const Scene scene = scene::load_scene(c.scene);
    if (single && (*single < 0 || static_cast<std::size_t>(*single) >= scene.objects.size())) {
        throw ArgumentError("--objects index out of range");
    }
    std::vector<HdrImage> images;
    if (f.images.empty()) {
        images = scene::render_scene(scene, config.render);
    } else {
        for (std::size_t m = 0; m < scene.objects.size(); ++m) {
            const fs::path p = fs::path(f.images) / ("obj" + std::to_string(m) + ".pfm");
            if (!fs::exists(p)) {
                throw Error("missing observation: " + p.string());
            }
            HdrImage img = io::read_pfm(p);
            if (img.height() != scene.objects[m].normals.height() || img.width() != scene.objects[m].normals.width()) {
                throw ArgumentError("observation " + p.string() + " does not match its normal map");
            }
            images.push_back(std::move(img));
        }
    }
    std::optional<EnvironmentMap> gt;
    if (!f.gt.empty()) {
        gt = io::load_hdr(f.gt);
    }

    const fs::path out(c.out);
    if (!single) {
        run_and_write(scene, images, config, gt, out);
        return 0;
    }

    // Single-object and all-object distributions over the same scene.
    scene::PipelineConfig single_cfg = config;
    single_cfg.objects = {*single};
    const std::string single_name = "single_" + std::to_string(*single);
    const auto single_res = run_and_write(scene, images, single_cfg, gt, out / single_name);
    const auto multi_res = run_and_write(scene, images, config, gt, out / "multi");
    if (gt && config.sampler.n_samples >= 2) {
        const int degree = j["metrics"]["sh_degree"].get<int>();
        const double ratio = j["metrics"]["pca_ratio"].get<double>();
        const Eigen::VectorXd gt_feature = feature(*gt, degree);
        std::ostringstream csv;
        csv << "distribution,mahalanobis,log_likelihood,retained\n";
        for (const auto* r : {&single_res, &multi_res}) {
            Eigen::MatrixXd x(static_cast<Eigen::Index>(r->sample_envs.size()), gt_feature.size());
            for (std::size_t i = 0; i < r->sample_envs.size(); ++i) {
                x.row(static_cast<Eigen::Index>(i)) = feature(r->sample_envs[i], degree).transpose();
            }
            const auto model = metrics::fit_pca(x, ratio);
            const auto score = metrics::gaussian_score(model, gt_feature);
            csv << (r == &single_res ? single_name : std::string("multi")) << ',' << fmt(score.mahalanobis) << ','
                << fmt(score.log_likelihood) << ',' << model.retained() << '\n';
        }
        write_text(out / "comparison.csv", csv.str());
    }
    return 0;
}

// nll per sample id from a samples.csv written by invert, when present.
std::optional<double> lookup_nll(const fs::path& dir, const std::string& stem) {
    const fs::path p = dir / "samples.csv";
    if (stem.rfind("sample_", 0) != 0 || !fs::exists(p)) {
        return std::nullopt;
    }
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string col; std::getline(ss, col, ',');) cols.push_back(col);
        if (cols.size() >= 5 && "sample_" + cols[0] == stem) {
            return std::strtod(cols[4].c_str(), nullptr);
        }
    }
    return std::nullopt;
}

int cmd_eval(const Common& c, const std::vector<std::string>& samples, const std::string& dir,
             const std::string& gt_path, const std::string& gaussian_out) {
    const json j = effective(c);
    if (maybe_print(c, j)) return 0;
    require(gt_path, "--gt");
    require(c.out, "--out");
    const EnvironmentMap gt = io::load_hdr(gt_path);
    std::vector<std::pair<std::string, EnvironmentMap>> envs;
    std::vector<std::optional<double>> nlls;
    if (!dir.empty()) {
        for (auto& e : load_env_dir(dir)) {
            nlls.push_back(lookup_nll(dir, e.first));
            envs.push_back(std::move(e));
        }
    }
    for (const auto& s : samples) {
        envs.emplace_back(fs::path(s).stem().string(), io::load_hdr(s));
        nlls.push_back(std::nullopt);
    }
    if (envs.empty()) {
        throw ArgumentError("no samples given (use --sample or --samples-dir)");
    }
    metrics::ScoreReport report;
    for (std::size_t i = 0; i < envs.size(); ++i) {
        const auto& [id, env] = envs[i];
        if (env.height() != gt.height()) {
            throw ArgumentError("sample " + id + " does not match the ground-truth resolution");
        }
        EnvironmentMap clamped = env;
        clamped.image().pixels() = clamped.image().pixels().max(0.0f);
        report.rows.push_back({id, nlls[i].value_or(std::numeric_limits<double>::quiet_NaN()),
                               metrics::score_illumination(clamped, gt)});
    }
    const fs::path out(c.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    report.write_csv(out);

    if (!gaussian_out.empty()) {
        const int degree = j["metrics"]["sh_degree"].get<int>();
        const Eigen::VectorXd g = feature(gt, degree);
        Eigen::MatrixXd x(static_cast<Eigen::Index>(envs.size()), g.size());
        for (std::size_t i = 0; i < envs.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = feature(envs[i].second, degree).transpose();
        }
        const auto model = metrics::fit_pca(x, j["metrics"]["pca_ratio"].get<double>());
        const auto score = metrics::gaussian_score(model, g);
        std::ostringstream csv;
        csv << "samples,retained,mahalanobis,log_likelihood\n"
            << envs.size() << ',' << model.retained() << ',' << fmt(score.mahalanobis) << ','
            << fmt(score.log_likelihood) << '\n';
        write_text(gaussian_out, csv.str());
    }
    return 0;
}

int cmd_spectrum(const Common& c, const std::vector<std::string>& inputs, std::optional<int> degree_flag) {
    json j = effective(c);
    if (degree_flag) j["metrics"]["sh_degree"] = *degree_flag;
    if (maybe_print(c, j)) return 0;
    require(c.out, "--out");
    if (inputs.empty()) {
        throw ArgumentError("--env is required");
    }
    const int degree = j["metrics"]["sh_degree"].get<int>();
    if (degree < 0) {
        throw ConfigError("metrics.sh_degree must be >= 0");
    }
    const fs::path out(c.out);
    fs::create_directories(out);
    for (const auto& in : inputs) {
        const EnvironmentMap env = io::load_hdr(in);
        sh::write_spectrum_csv(out / (fs::path(in).stem().string() + "_spectrum.csv"),
                               sh::band_power(sh::project(env, degree)));
    }
    return 0;
}

int cmd_pca(const Common& c, const std::vector<std::string>& dirs, const std::string& gt_path,
            std::optional<int> degree_flag) {
    json j = effective(c);
    if (degree_flag) j["metrics"]["sh_degree"] = *degree_flag;
    if (maybe_print(c, j)) return 0;
    require(c.out, "--out");
    if (dirs.empty()) {
        throw ArgumentError("--dir is required");
    }
    const int degree = j["metrics"]["sh_degree"].get<int>();
    std::vector<metrics::PcaProjectionRow> rows;
    std::vector<Eigen::VectorXd> features;
    std::vector<std::string> sources;
    for (std::size_t d = 0; d < dirs.size(); ++d) {
        const fs::path norm = fs::path(dirs[d]).lexically_normal();
        std::string source = norm.has_filename() ? norm.filename().string() : norm.parent_path().filename().string();
        if (std::find(sources.begin(), sources.end(), source) != sources.end()) {
            source += "_" + std::to_string(d);
        }
        sources.push_back(source);
        for (const auto& [id, env] : load_env_dir(dirs[d])) {
            rows.push_back({id, source, 0.0, 0.0});
            features.push_back(feature(env, degree));
        }
    }
    if (features.size() < 2) {
        throw InsufficientDataError("PCA needs at least 2 samples, found " + std::to_string(features.size()));
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), features[0].size());
    for (std::size_t i = 0; i < features.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = features[i].transpose();
    const auto model = metrics::fit_pca(x, j["metrics"]["pca_ratio"].get<double>());
    const auto coords = [&](const Eigen::VectorXd& f, metrics::PcaProjectionRow& row) {
        const Eigen::VectorXd p = model.project(f);
        row.pc1 = p.size() > 0 ? p(0) : 0.0;
        row.pc2 = p.size() > 1 ? p(1) : 0.0;
    };
    for (std::size_t i = 0; i < rows.size(); ++i) coords(features[i], rows[i]);
    if (!gt_path.empty()) {
        metrics::PcaProjectionRow row{"gt", "gt", 0.0, 0.0};
        coords(feature(io::load_hdr(gt_path), degree), row);
        rows.push_back(row);
    }
    const fs::path out(c.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    metrics::write_pca_projections(out, rows);
    return 0;
}

struct DatasetFlags {
    std::string normal_maps;
    std::string env_maps;
    std::string textures;
    int count = 0;
    std::optional<int> objects_per_scene;
    std::optional<double> texture_mix;
};

int cmd_gen_dataset(const Common& c, const DatasetFlags& f) {
    json j = effective(c);
    if (f.objects_per_scene) j["dataset"]["objects_per_scene"] = *f.objects_per_scene;
    if (f.texture_mix) j["dataset"]["texture_mix"] = *f.texture_mix;
    if (maybe_print(c, j)) return 0;
    require(c.out, "--out");
    require(f.normal_maps, "--normal-maps");
    require(f.env_maps, "--env-maps");
    if (f.count < 0) {
        throw ConfigError("--count must be >= 0");
    }
    DatasetSpec spec;
    spec.count = f.count;
    spec.objects_per_scene = j["dataset"]["objects_per_scene"].get<int>();
    spec.texture_mix = j["dataset"]["texture_mix"].get<double>();
    spec.floor_probability = j["dataset"]["floor_probability"].get<double>();
    spec.roughness_floor = j["dataset"]["roughness_floor"].get<double>();
    spec.normal_maps = list_files(f.normal_maps, {".pfm"});
    spec.env_maps = list_files(f.env_maps, {".pfm", ".hdr"});
    if (!f.textures.empty()) spec.textures = list_files(f.textures, {".pfm"});
    spec.validate();

    const std::uint64_t seed = j["seed"].get<std::uint64_t>();
    const CounterRng rng(seed);
    std::vector<Scene> scenes;
    for (int i = 0; i < f.count; ++i) {
        scenes.push_back(scene::sample_scene(rng.bits(static_cast<std::uint64_t>(i)), spec));
    }
    const fs::path out(c.out);
    fs::create_directories(out / "scenes");
    for (int i = 0; i < f.count; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "%04d", i);
        scene::save_scene(out / "scenes" / id, scenes[static_cast<std::size_t>(i)]);
    }
    json meta;
    meta["seed"] = seed;
    meta["count"] = f.count;
    meta["dataset"] = j["dataset"];
    write_text(out / "dataset.json", meta.dump(2) + "\n");
    return 0;
}

int cmd_assets(const Common& c, int size) {
    const json j = effective(c);
    if (maybe_print(c, j)) return 0;
    require(c.out, "--out");
    if (size < 8) {
        throw ArgumentError("--size must be >= 8");
    }
    const std::uint64_t seed = j["seed"].get<std::uint64_t>();
    const int env_height = positive(j, "env_height");
    const fs::path out(c.out);
    fs::create_directories(out / "normal_maps");
    fs::create_directories(out / "env_maps");
    fs::create_directories(out / "textures");
    const scene::Shape shapes[] = {scene::Shape::sphere, scene::Shape::cylinder, scene::Shape::cap, scene::Shape::bumpy};
    std::vector<NormalMap> normals;
    for (const auto s : shapes) {
        normals.push_back(scene::synthetic_normal_map(s, size, seed));
        io::save_normal_map(out / "normal_maps" / (scene::to_string(s) + ".pfm"), normals.back());
    }
    std::vector<EnvironmentMap> envs;
    for (int i = 0; i < 3; ++i) {
        envs.push_back(scene::synthetic_environment(env_height, seed + static_cast<std::uint64_t>(i)));
        io::save_pfm(out / "env_maps" / ("env_" + std::to_string(i) + ".pfm"), envs.back());
    }
    std::vector<HdrImage> textures;
    for (int i = 0; i < 3; ++i) {
        textures.push_back(scene::synthetic_texture(size, seed + static_cast<std::uint64_t>(i)));
        io::write_pfm(out / "textures" / ("checker_" + std::to_string(i) + ".pfm"), textures.back());
    }
    Scene demo;
    demo.seed = seed;
    demo.env = envs[0];
    demo.notes = "demo scene: sphere, cylinder and cap under env_0";
    const ReflectanceParams psis[] = {{0.0, 0.3, 0.5}, {1.0, 0.15, 1.0}, {0.0, 0.7, 0.2}};
    for (int m = 0; m < 3; ++m) {
        SceneObject o;
        o.normals = normals[static_cast<std::size_t>(m)];
        o.texture = textures[static_cast<std::size_t>(m)];
        o.psi = psis[m];
        demo.objects.push_back(std::move(o));
    }
    scene::save_scene(out / "demo", demo);
    return 0;
}

void print_error(const char* kind, const std::string& message) {
    json e;
    e["error"] = {{"kind", kind}, {"message", message}};
    std::cerr << e.dump() << std::endl;
}

int classify(const std::exception_ptr& ep) {
    try {
        std::rethrow_exception(ep);
    } catch (const ConfigError& e) {
        print_error("config", e.what());
        return kExitUsage;
    } catch (const ArgumentError& e) {
        print_error("usage", e.what());
        return kExitUsage;
    } catch (const ParseError& e) {
        print_error("parse", e.what());
        return kExitRuntime;
    } catch (const ValidationError& e) {
        print_error("validation", e.what());
        return kExitRuntime;
    } catch (const InsufficientDataError& e) {
        print_error("insufficient_data", e.what());
        return kExitRuntime;
    } catch (const UnsupportedMaterialError& e) {
        print_error("unsupported_material", e.what());
        return kExitRuntime;
    } catch (const Error& e) {
        print_error("runtime", e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        print_error("runtime", e.what());
        return kExitRuntime;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Illumination estimation from reflectance maps of multiple objects"};
    app.require_subcommand(1);

    Common common;
    std::optional<double> sigma;
    std::optional<int> k_max;
    InvertFlags invert;
    std::vector<std::string> eval_samples;
    std::string eval_dir, eval_gt, eval_gaussian;
    std::vector<std::string> spectrum_inputs;
    std::optional<int> degree;
    std::vector<std::string> pca_dirs;
    std::string pca_gt;
    DatasetFlags dataset;
    int asset_size = 128;

    auto* render = app.add_subcommand("render", "Render object images and reflectance maps of a scene");
    add_common(render, common, true);
    add_render_flags(render, common);

    auto* diffuse = app.add_subcommand("diffuse", "Dump the forward trajectory of a scene");
    add_common(diffuse, common, true);
    add_render_flags(diffuse, common);
    diffuse->add_option("--seed", common.seed, "Noise seed");
    diffuse->add_option("--sigma", sigma, "Forward noise standard deviation");
    diffuse->add_option("--K-max", k_max, "Maximum number of steps");

    auto* inv = app.add_subcommand("invert", "Sample illuminations from a scene's object images");
    add_common(inv, common, true);
    add_render_flags(inv, common);
    inv->add_option("--seed", common.seed, "Sampler seed");
    inv->add_option("--env-height", common.env_height, "Height of the exported sample environments");
    inv->add_option("--samples", invert.samples, "Number of illumination samples");
    inv->add_option("--sigma", invert.sigma, "Observation noise (relative)");
    inv->add_option("--images", invert.images, "Directory of obj<m>.pfm observations (default: render the scene)");
    inv->add_option("--gt", invert.gt, "Ground-truth environment for scoring");
    inv->add_option("--objects", invert.objects, "'multi' or 'single:<index>' (also runs multi for comparison)");
    inv->add_flag("--use-gt-psi", invert.use_gt_psi, "Use the manifest reflectance instead of estimating it");

    auto* eval = app.add_subcommand("eval", "Score illumination samples against ground truth");
    add_common(eval, common, false);
    eval->add_option("--sample", eval_samples, "Sample environment (repeatable)");
    eval->add_option("--samples-dir", eval_dir, "Directory of sample environments");
    eval->add_option("--gt", eval_gt, "Ground-truth environment");
    eval->add_option("--out", common.out, "Output scores.csv");
    eval->add_option("--gaussian", eval_gaussian, "Also write the PCA-Gaussian score of the ground truth here");

    auto* spectrum = app.add_subcommand("spectrum", "Band power of environment maps");
    add_common(spectrum, common, false);
    spectrum->add_option("--env", spectrum_inputs, "Environment map (repeatable)");
    spectrum->add_option("--degree", degree, "SH degree");
    spectrum->add_option("--out", common.out, "Output directory");

    auto* pca = app.add_subcommand("pca", "2D PCA projection of sample directories");
    add_common(pca, common, false);
    pca->add_option("--dir", pca_dirs, "Sample directory, one distribution each (repeatable)");
    pca->add_option("--gt", pca_gt, "Ground-truth environment to project as well");
    pca->add_option("--degree", degree, "SH degree of the features");
    pca->add_option("--out", common.out, "Output CSV");

    auto* gen = app.add_subcommand("gen-dataset", "Sample synthetic scenes from asset directories");
    add_common(gen, common, false);
    gen->add_option("--normal-maps", dataset.normal_maps, "Directory of normal-map PFMs");
    gen->add_option("--env-maps", dataset.env_maps, "Directory of environment maps");
    gen->add_option("--textures", dataset.textures, "Directory of texture PFMs");
    gen->add_option("--count", dataset.count, "Number of scenes");
    gen->add_option("--seed", common.seed, "Dataset seed");
    gen->add_option("--objects-per-scene", dataset.objects_per_scene, "Objects per scene");
    gen->add_option("--texture-mix", dataset.texture_mix, "Probability of an asset texture");
    gen->add_option("--out", common.out, "Output directory");

    auto* assets = app.add_subcommand("assets", "Write synthetic normal maps, environments, textures and a demo scene");
    add_common(assets, common, false);
    assets->add_option("--out", common.out, "Output directory");
    assets->add_option("--size", asset_size, "Normal map and texture size");
    assets->add_option("--env-height", common.env_height, "Environment height");
    assets->add_option("--seed", common.seed, "Seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        print_error("usage", e.what());
        return kExitUsage;
    }

    try {
        if (render->parsed()) return cmd_render(common);
        if (diffuse->parsed()) return cmd_diffuse(common, sigma, k_max);
        if (inv->parsed()) return cmd_invert(common, invert);
        if (eval->parsed()) return cmd_eval(common, eval_samples, eval_dir, eval_gt, eval_gaussian);
        if (spectrum->parsed()) return cmd_spectrum(common, spectrum_inputs, degree);
        if (pca->parsed()) return cmd_pca(common, pca_dirs, pca_gt, degree);
        if (gen->parsed()) return cmd_gen_dataset(common, dataset);
        if (assets->parsed()) return cmd_assets(common, asset_size);
    } catch (...) {
        return classify(std::current_exception());
    }
    return kExitUsage;
}
