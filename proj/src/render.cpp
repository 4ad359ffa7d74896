#include <refmap/render.hpp>

#include <cmath>
#include <vector>

namespace refmap {

NormalMap NormalMap::from_vectors(HdrImage normals) {
    NormalMap out{std::move(normals), {}};
    out.mask = (out.normals.pixels() != 0.0f).rowwise().any();
    return out;
}

void NormalMap::validate() const {
    if (mask.size() != normals.size()) {
        throw ValidationError("normal map mask does not match the image size");
    }
    for (Eigen::Index k = 0; k < normals.size(); ++k) {
        if (!mask(k)) {
            continue;
        }
        const Vec3 n = normals.pixels().row(k).transpose().cast<double>().matrix();
        if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-3 || !(n.z() > 0.0)) {
            throw ValidationError("normal map holds a non-unit or back-facing normal at pixel " +
                                  std::to_string(k));
        }
    }
}

NormalMap sphere_normal_map(int size) {
    if (size < 1) {
        throw ArgumentError("sphere normal map size must be >= 1");
    }
    NormalMap out{HdrImage(size, size), Mask::Constant(static_cast<Eigen::Index>(size) * size, false)};
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            const double u = -1.0 + (2.0 * j + 1.0) / size;
            const double v = 1.0 - (2.0 * i + 1.0) / size;
            const double r2 = u * u + v * v;
            if (r2 >= 1.0) {
                continue;
            }
            out.normals.pixel(i, j) << float(u), float(v), float(std::sqrt(1.0 - r2));
            out.mask(out.normals.index(i, j)) = true;
        }
    }
    return out;
}

NormalMap plane_normal_map(int height, int width) {
    if (height < 1 || width < 1) {
        throw ArgumentError("plane normal map needs positive dimensions");
    }
    NormalMap out{HdrImage(height, width), Mask::Constant(static_cast<Eigen::Index>(height) * width, true)};
    out.normals.pixels().col(2).setOnes();
    return out;
}

namespace render {
namespace {

// Geometry of an equirect grid flattened in pixel order.
struct EnvGrid {
    int height = 0;
    int width = 0;
    std::vector<Vec3> dirs;
    std::vector<double> solid_angle;
};

EnvGrid make_grid(int height, int width) {
    EnvGrid g{height, width, {}, {}};
    const auto sa = solid_angles(height, width);
    g.dirs.reserve(static_cast<std::size_t>(height) * width);
    g.solid_angle.reserve(g.dirs.capacity());
    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            g.dirs.push_back(pixel_direction(i, j, height, width));
            g.solid_angle.push_back(sa.weight(i, j));
        }
    }
    return g;
}

// Half-vector nodes in the local frame (z = normal), distributed by D(h) (n.h).
std::vector<Vec3> ggx_nodes(double alpha, int n) {
    std::vector<Vec3> nodes;
    nodes.reserve(static_cast<std::size_t>(n) * n);
    const double a2 = alpha * alpha;
    for (int a = 0; a < n; ++a) {
        const double u1 = (a + 0.5) / n;
        const double c2 = (1.0 - u1) / (1.0 + (a2 - 1.0) * u1);
        const double c = std::sqrt(c2);
        const double s = std::sqrt(std::max(0.0, 1.0 - c2));
        for (int b = 0; b < n; ++b) {
            const double phi = 2.0 * kPi * (b + 0.5) / n;
            nodes.emplace_back(s * std::cos(phi), s * std::sin(phi), c);
        }
    }
    return nodes;
}

// Branchless orthonormal basis around a unit vector.
std::pair<Vec3, Vec3> tangent_frame(const Vec3& n) {
    const double sign = std::copysign(1.0, n.z());
    const double a = -1.0 / (sign + n.z());
    const double b = n.x() * n.y() * a;
    return {Vec3(1.0 + sign * n.x() * n.x() * a, sign * b, -sign * n.x()),
            Vec3(b, sign + n.y() * n.y() * a, -n.y())};
}

class Integrator {
public:
    Integrator(const Material& material, int env_height, int specular_samples)
        : material_(material), grid_(make_grid(env_height, 2 * env_height)) {
        if (specular_samples < 1) {
            throw ArgumentError("specular_samples must be >= 1");
        }
        if (material.model == Material::Model::disney) {
            material.psi.validate();
            alpha_ = brdf::ggx_alpha(material.psi.roughness);
            nodes_ = ggx_nodes(alpha_, specular_samples);
        }
    }

    const EnvGrid& grid() const { return grid_; }

    // Calls visit(env_pixel, rgb_weight) for every term of the quadrature at normal n, so
    // radiance = sum weight * env[env_pixel].
    template <typename Visit>
    void integrate(const Vec3& n, const Vec3& rho_d, Visit&& visit) const {
        const double n_dot_v = n.dot(kView);
        if (!(n_dot_v > 0.0)) {
            return;
        }
        const Eigen::Array3d rho = rho_d.array();
        const auto count = static_cast<Eigen::Index>(grid_.dirs.size());

        if (material_.model == Material::Model::lambert) {
            const Eigen::Array3d k = rho / kPi;
            for (Eigen::Index p = 0; p < count; ++p) {
                const double c = grid_.dirs[p].dot(n);
                if (c > 0.0) {
                    visit(p, k * (c * grid_.solid_angle[p]));
                }
            }
            return;
        }

        const ReflectanceParams& psi = material_.psi;
        if (psi.metallic < 1.0) {
            const Eigen::Array3d k = (1.0 - psi.metallic) * rho / kPi;
            for (Eigen::Index p = 0; p < count; ++p) {
                const Vec3& l = grid_.dirs[p];
                const double n_dot_l = l.dot(n);
                if (!(n_dot_l > 0.0)) {
                    continue;
                }
                const Vec3 h = (l + kView).normalized();
                const double h_dot_l = std::clamp(h.dot(l), 0.0, 1.0);
                const double f = brdf::burley_diffuse_factor(n_dot_l, n_dot_v, h_dot_l, psi.roughness);
                visit(p, k * (f * n_dot_l * grid_.solid_angle[p]));
            }
        }

        const Eigen::Array3d f0 = brdf::specular_f0<double>(psi, rho_d).array();
        const double g1v = brdf::smith_g1(n_dot_v, alpha_);
        const double inv_nodes = 1.0 / static_cast<double>(nodes_.size());
        const auto [t, b] = tangent_frame(n);
        for (const Vec3& local : nodes_) {
            const Vec3 h = local.x() * t + local.y() * b + local.z() * n;
            const double h_dot_v = h.dot(kView);
            if (!(h_dot_v > 0.0)) {
                continue;
            }
            const Vec3 l = 2.0 * h_dot_v * h - kView;
            const double n_dot_l = n.dot(l);
            if (!(n_dot_l > 0.0)) {
                continue;
            }
            const double fw = brdf::schlick_weight(h_dot_v);
            const Eigen::Array3d fresnel = f0 + (1.0 - f0) * fw;
            const double w = brdf::smith_g1(n_dot_l, alpha_) * g1v * h_dot_v / (n_dot_v * local.z()) *
                             inv_nodes;
            const BilinearTaps taps = bilinear_taps(l, grid_.height, grid_.width);
            for (int q = 0; q < 4; ++q) {
                if (taps.weight[q] != 0.0) {
                    visit(taps.index[q], fresnel * (w * taps.weight[q]));
                }
            }
        }
    }

    Vec3 shade(const Vec3& n, const Vec3& rho_d, const HdrImage::Pixels& env) const {
        Eigen::Array3d acc = Eigen::Array3d::Zero();
        integrate(n, rho_d, [&](Eigen::Index p, const Eigen::Array3d& w) {
            acc += w * env.row(p).transpose().cast<double>();
        });
        return acc.matrix();
    }

private:
    Material material_;
    EnvGrid grid_;
    double alpha_ = 0.0;
    std::vector<Vec3> nodes_;
};

EnvironmentMap prepare_env(const EnvironmentMap& env, const RenderOptions& options) {
    if (env.height() < 1) {
        throw ArgumentError("environment map is empty");
    }
    env.validate_radiance();
    return downsample(env, options.env_stride);
}

} // namespace

Vec3 shade(const Material& material, const Vec3& n, const EnvironmentMap& env,
           const RenderOptions& options) {
    const EnvironmentMap e = prepare_env(env, options);
    const Integrator integ(material, e.height(), options.specular_samples);
    return integ.shade(n, material.rho_d, e.image().pixels());
}

ReflectanceMap render_reflectance_map(const Material& material, const EnvironmentMap& env,
                                      int resolution, const RenderOptions& options) {
    if (resolution < 1) {
        throw ArgumentError("reflectance map resolution must be >= 1");
    }
    const EnvironmentMap e = prepare_env(env, options);
    const Integrator integ(material, e.height(), options.specular_samples);
    ReflectanceMap out = ReflectanceMap::full_disk(resolution);
    const auto& px = e.image().pixels();
    parallel_for(0, static_cast<std::ptrdiff_t>(resolution) * resolution, [&](std::ptrdiff_t k) {
        const int i = static_cast<int>(k / resolution);
        const int j = static_cast<int>(k % resolution);
        if (!out.mask()(k)) {
            return;
        }
        const Vec3 n = ReflectanceMap::normal_at(i, j, resolution);
        out.radiance().pixel(i, j) = integ.shade(n, material.rho_d, px).cast<float>().transpose().array();
    });
    return out;
}

ReflectanceMap render_reflectance_map(const ReflectanceParams& psi, const Vec3& rho_d,
                                      const EnvironmentMap& env, int resolution,
                                      const RenderOptions& options) {
    return render_reflectance_map(Material::disney(psi, rho_d), env, resolution, options);
}

HdrImage render_object(const NormalMap& normals, const HdrImage& texture,
                       const ReflectanceParams& psi, const EnvironmentMap& env,
                       const RenderOptions& options) {
    if (texture.height() != normals.height() || texture.width() != normals.width()) {
        throw ArgumentError("texture is " + std::to_string(texture.height()) + "x" +
                            std::to_string(texture.width()) + " but the normal map is " +
                            std::to_string(normals.height()) + "x" + std::to_string(normals.width()));
    }
    if (normals.mask.size() != normals.normals.size()) {
        throw ArgumentError("normal map mask does not match the image size");
    }
    const EnvironmentMap e = prepare_env(env, options);
    const Integrator integ(Material::disney(psi), e.height(), options.specular_samples);
    HdrImage out(normals.height(), normals.width());
    const auto& px = e.image().pixels();
    parallel_for(0, normals.normals.size(), [&](std::ptrdiff_t k) {
        if (!normals.mask(k)) {
            return;
        }
        const Vec3 n = normals.normals.pixels().row(k).transpose().cast<double>().matrix().normalized();
        const Vec3 rho = texture.pixels().row(k).transpose().cast<double>().matrix();
        out.pixels().row(k) = integ.shade(n, rho, px).cast<float>().transpose().array();
    });
    return out;
}

ReflectanceMap lift_to_sphere(const HdrImage& image, const NormalMap& normals, int resolution) {
    if (image.height() != normals.height() || image.width() != normals.width()) {
        throw ArgumentError("image and normal map dimensions differ");
    }
    if (resolution < 1) {
        throw ArgumentError("reflectance map resolution must be >= 1");
    }
    const Eigen::Index cells = static_cast<Eigen::Index>(resolution) * resolution;
    Eigen::Array<double, Eigen::Dynamic, 3> sum = Eigen::Array<double, Eigen::Dynamic, 3>::Zero(cells, 3);
    Eigen::ArrayXi count = Eigen::ArrayXi::Zero(cells);
    for (Eigen::Index k = 0; k < image.size(); ++k) {
        if (!normals.mask(k)) {
            continue;
        }
        const Vec3 n = normals.normals.pixels().row(k).transpose().cast<double>().matrix();
        const auto cell = ReflectanceMap::cell_of(n, resolution);
        if (!cell) {
            continue;
        }
        const Eigen::Index c = static_cast<Eigen::Index>(cell->first) * resolution + cell->second;
        sum.row(c) += image.pixels().row(k).cast<double>();
        ++count(c);
    }
    ReflectanceMap out(resolution);
    for (Eigen::Index c = 0; c < cells; ++c) {
        if (count(c) > 0) {
            out.radiance().pixels().row(c) = (sum.row(c) / count(c)).cast<float>();
            out.mask()(c) = true;
        }
    }
    return out;
}

ReflectanceMap merge_raw_maps(std::span<const ReflectanceMap> maps) {
    if (maps.empty()) {
        throw ArgumentError("no reflectance maps to merge");
    }
    const int resolution = maps.front().resolution();
    const Eigen::Index cells = static_cast<Eigen::Index>(resolution) * resolution;
    Eigen::Array<double, Eigen::Dynamic, 3> sum = Eigen::Array<double, Eigen::Dynamic, 3>::Zero(cells, 3);
    Eigen::ArrayXi count = Eigen::ArrayXi::Zero(cells);
    for (const auto& m : maps) {
        if (m.resolution() != resolution) {
            throw ArgumentError("cannot merge reflectance maps of different resolutions");
        }
        for (Eigen::Index c = 0; c < cells; ++c) {
            if (m.mask()(c)) {
                sum.row(c) += m.radiance().pixels().row(c).cast<double>();
                ++count(c);
            }
        }
    }
    ReflectanceMap out(resolution);
    for (Eigen::Index c = 0; c < cells; ++c) {
        if (count(c) > 0) {
            out.radiance().pixels().row(c) = (sum.row(c) / count(c)).cast<float>();
            out.mask()(c) = true;
        }
    }
    return out;
}

Eigen::MatrixXd transport_matrix(const ReflectanceParams& psi, const Mask& mask, int resolution,
                                 int env_height, const RenderOptions& options) {
    if (mask.size() != static_cast<Eigen::Index>(resolution) * resolution) {
        throw ArgumentError("mask size does not match the map resolution");
    }
    if (env_height < 1) {
        throw ArgumentError("environment height must be >= 1");
    }
    const Integrator integ(Material::disney(psi), env_height, options.specular_samples);
    std::vector<Eigen::Index> cells;
    for (Eigen::Index c = 0; c < mask.size(); ++c) {
        if (mask(c)) {
            cells.push_back(c);
        }
    }
    const Eigen::Index env_pixels = static_cast<Eigen::Index>(env_height) * 2 * env_height;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells.size()), env_pixels);
    const Vec3 white = Vec3::Ones();
    parallel_for(0, static_cast<std::ptrdiff_t>(cells.size()), [&](std::ptrdiff_t r) {
        const int i = static_cast<int>(cells[r] / resolution);
        const int j = static_cast<int>(cells[r] % resolution);
        const Vec3 n = ReflectanceMap::normal_at(i, j, resolution);
        integ.integrate(n, white, [&](Eigen::Index p, const Eigen::Array3d& w) { t(r, p) += w(0); });
    });
    return t;
}

} // namespace render
} // namespace refmap
