#include <refmap/envmap.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace refmap {

// ---------------------------------------------------------------------------------------
// ReflectanceMap
// ---------------------------------------------------------------------------------------

ReflectanceMap::ReflectanceMap(int resolution) : resolution_(resolution) {
    if (resolution < 1) {
        throw ArgumentError("reflectance map resolution must be >= 1");
    }
    radiance_ = HdrImage(resolution, resolution);
    mask_ = Mask::Constant(static_cast<Eigen::Index>(resolution) * resolution, false);
}

ReflectanceMap ReflectanceMap::full_disk(int resolution) {
    ReflectanceMap map(resolution);
    for (int i = 0; i < resolution; ++i) {
        for (int j = 0; j < resolution; ++j) {
            map.mask_(map.radiance_.index(i, j)) = in_disk(i, j, resolution);
        }
    }
    return map;
}

namespace {

double cell_u(int j, int n) { return -1.0 + (2.0 * j + 1.0) / n; }
double cell_v(int i, int n) { return 1.0 - (2.0 * i + 1.0) / n; }

} // namespace

bool ReflectanceMap::in_disk(int i, int j, int resolution) {
    const double u = cell_u(j, resolution);
    const double v = cell_v(i, resolution);
    return u * u + v * v <= 1.0;
}

Vec3 ReflectanceMap::normal_at(int i, int j, int resolution) {
    const double u = cell_u(j, resolution);
    const double v = cell_v(i, resolution);
    return {u, v, std::sqrt(std::max(0.0, 1.0 - u * u - v * v))};
}

std::optional<std::pair<int, int>> ReflectanceMap::cell_of(const Vec3& n, int resolution) {
    const int j = std::clamp(static_cast<int>(std::floor((n.x() + 1.0) * 0.5 * resolution)), 0,
                             resolution - 1);
    const int i = std::clamp(static_cast<int>(std::floor((1.0 - n.y()) * 0.5 * resolution)), 0,
                             resolution - 1);
    if (!in_disk(i, j, resolution)) {
        return std::nullopt;
    }
    return std::pair{i, j};
}

void ReflectanceMap::validate() const {
    for (int i = 0; i < resolution_; ++i) {
        for (int j = 0; j < resolution_; ++j) {
            const auto idx = radiance_.index(i, j);
            if (!mask_(idx)) {
                continue;
            }
            if (!in_disk(i, j, resolution_)) {
                throw ValidationError("reflectance map mask extends outside the unit disk");
            }
            const auto px = radiance_.pixels().row(idx);
            if (!px.isFinite().all() || (px < 0.0f).any()) {
                throw ValidationError("reflectance map radiance must be finite and >= 0");
            }
        }
    }
}

ReflectanceMap downsample(const ReflectanceMap& map, int factor) {
    if (factor < 1 || map.resolution() % factor != 0) {
        throw ArgumentError("downsample factor must divide the map resolution");
    }
    if (factor == 1) {
        return map;
    }
    const int n = map.resolution() / factor;
    ReflectanceMap out(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!ReflectanceMap::in_disk(i, j, n)) {
                continue;
            }
            Eigen::Array3d sum = Eigen::Array3d::Zero();
            int count = 0;
            for (int a = 0; a < factor; ++a) {
                for (int b = 0; b < factor; ++b) {
                    const auto idx = map.radiance().index(i * factor + a, j * factor + b);
                    if (map.mask()(idx)) {
                        sum += map.radiance().pixels().row(idx).transpose().cast<double>();
                        ++count;
                    }
                }
            }
            if (count > 0) {
                const auto idx = out.radiance().index(i, j);
                out.radiance().pixels().row(idx) = (sum / count).cast<float>().transpose();
                out.mask()(idx) = true;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------------
// EnvironmentMap
// ---------------------------------------------------------------------------------------

EnvironmentMap::EnvironmentMap(int height) : EnvironmentMap(HdrImage(height, 2 * height)) {}

EnvironmentMap::EnvironmentMap(HdrImage image) : image_(std::move(image)) {
    if (image_.height() < 1 || image_.width() != 2 * image_.height()) {
        throw ArgumentError("environment map must be non-empty with width == 2 * height (got " +
                            std::to_string(image_.height()) + "x" +
                            std::to_string(image_.width()) + ")");
    }
}

void EnvironmentMap::validate_radiance() const {
    const auto& px = image_.pixels();
    if (!px.isFinite().all()) {
        throw ValidationError("environment map contains NaN or infinite radiance");
    }
    if ((px < 0.0f).any()) {
        throw ValidationError("environment map contains negative radiance");
    }
}

SolidAngleGrid solid_angles(int height, int width) {
    if (height < 1 || width < 1) {
        throw ArgumentError("solid angle grid needs height >= 1 and width >= 1");
    }
    SolidAngleGrid grid{height, width, Eigen::ArrayXXd(height, width)};
    const double dphi = 2.0 * kPi / width;
    for (int i = 0; i < height; ++i) {
        const double top = kPi * i / height;
        const double bottom = kPi * (i + 1) / height;
        grid.weights.row(i).setConstant(dphi * (std::cos(top) - std::cos(bottom)));
    }
    return grid;
}

Vec3 direction_from_angles(double theta, double phi) {
    const double s = std::sin(theta);
    return {s * std::sin(phi), std::cos(theta), -s * std::cos(phi)};
}

std::pair<double, double> angles_from_direction(const Vec3& d) {
    const double theta = std::acos(std::clamp(d.y(), -1.0, 1.0));
    double phi = std::atan2(d.x(), -d.z());
    if (phi < 0.0) {
        phi += 2.0 * kPi;
    }
    return {theta, phi};
}

Vec3 pixel_direction(int i, int j, int height, int width) {
    return direction_from_angles(kPi * (i + 0.5) / height, 2.0 * kPi * (j + 0.5) / width);
}

BilinearTaps bilinear_taps(const Vec3& direction, int height, int width) {
    const auto [theta, phi] = angles_from_direction(direction);
    const double x = phi / (2.0 * kPi) * width - 0.5;
    const double y = theta / kPi * height - 0.5;
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    const double tx = x - fx0;
    const double ty = y - fy0;
    const int j0 = ((static_cast<int>(fx0) % width) + width) % width;
    const int j1 = (j0 + 1) % width;
    const int i0 = std::clamp(static_cast<int>(fy0), 0, height - 1);
    const int i1 = std::clamp(static_cast<int>(fy0) + 1, 0, height - 1);
    const auto at = [width](int i, int j) { return static_cast<Eigen::Index>(i) * width + j; };
    return {{at(i0, j0), at(i0, j1), at(i1, j0), at(i1, j1)},
            {(1 - ty) * (1 - tx), (1 - ty) * tx, ty * (1 - tx), ty * tx}};
}

Vec3 lookup(const EnvironmentMap& env, const Vec3& direction) {
    const auto taps = bilinear_taps(direction, env.height(), env.width());
    Vec3 out = Vec3::Zero();
    for (int t = 0; t < 4; ++t) {
        out += taps.weight[t] *
               env.image().pixels().row(taps.index[t]).transpose().cast<double>().matrix();
    }
    return out;
}

EnvironmentMap downsample(const EnvironmentMap& env, int factor) {
    if (factor < 1 || env.height() % factor != 0) {
        throw ArgumentError("environment stride must divide the map height");
    }
    if (factor == 1) {
        return env;
    }
    const auto sa = solid_angles(env.height(), env.width());
    EnvironmentMap out(env.height() / factor);
    for (int i = 0; i < out.height(); ++i) {
        for (int j = 0; j < out.width(); ++j) {
            Eigen::Array3d sum = Eigen::Array3d::Zero();
            double wsum = 0.0;
            for (int a = 0; a < factor; ++a) {
                for (int b = 0; b < factor; ++b) {
                    const int si = i * factor + a;
                    const int sj = j * factor + b;
                    const double w = sa.weight(si, sj);
                    sum += w * env.pixel(si, sj).transpose().cast<double>();
                    wsum += w;
                }
            }
            out.pixel(i, j) = (sum / wsum).cast<float>().transpose();
        }
    }
    return out;
}

double percentile99(const EnvironmentMap& env) {
    const auto& px = env.image().pixels();
    std::vector<float> values(px.data(), px.data() + px.size());
    if (values.empty()) {
        return 0.0;
    }
    const auto rank = static_cast<std::size_t>(std::ceil(0.99 * values.size())) - 1;
    std::nth_element(values.begin(), values.begin() + rank, values.end());
    return values[rank];
}

LdrImage tonemap_ldr(const EnvironmentMap& env) {
    const double p = percentile99(env);
    return tonemap_ldr(env, p > 0.0 ? 1.0 / p : 1.0);
}

LdrImage tonemap_ldr(const EnvironmentMap& env, double exposure) {
    LdrImage out(env.height(), env.width());
    const auto& src = env.image().pixels();
    auto& dst = out.pixels();
    for (Eigen::Index r = 0; r < src.rows(); ++r) {
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(static_cast<double>(src(r, c)) * exposure, 0.0, 1.0);
            dst(r, c) = static_cast<std::uint8_t>(std::lround(255.0 * std::pow(v, 1.0 / 2.2)));
        }
    }
    return out;
}

ReflectanceMap mirror_warp(const EnvironmentMap& env, int resolution) {
    if (resolution < 2) {
        throw ArgumentError("mirror_warp resolution must be >= 2");
    }
    auto map = ReflectanceMap::full_disk(resolution);
    const Vec3 view(0.0, 0.0, 1.0);
    for (int i = 0; i < resolution; ++i) {
        for (int j = 0; j < resolution; ++j) {
            const auto idx = map.radiance().index(i, j);
            if (!map.mask()(idx)) {
                continue;
            }
            const Vec3 n = ReflectanceMap::normal_at(i, j, resolution);
            const Vec3 r = 2.0 * n.dot(view) * n - view;
            map.radiance().pixels().row(idx) = lookup(env, r).cast<float>().transpose().array();
        }
    }
    return map;
}

} // namespace refmap
