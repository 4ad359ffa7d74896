#include <refmap/brdf.hpp>

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace refmap {

void ReflectanceParams::validate() const {
    const auto ok = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!ok(metallic) || !ok(roughness) || !ok(specular)) {
        throw ArgumentError("reflectance parameters must lie in [0, 1]");
    }
}

void DiffuseAlbedo::validate() const {
    if (!rgb.allFinite() || (rgb.array() < 0.0).any() || (rgb.array() > 1.0).any()) {
        throw ArgumentError("diffuse albedo channels must lie in [0, 1]");
    }
}

namespace brdf {

double distance_to_mirror(const ReflectanceParams& psi) {
    return ((psi.as_vector() - ReflectanceParams::mirror().as_vector()) / std::sqrt(3.0)).squaredNorm();
}

std::pair<Vec3, Vec3> rusinkiewicz_directions(double theta_h, double theta_d, double phi_d) {
    const Vec3 d(std::sin(theta_d) * std::cos(phi_d), std::sin(theta_d) * std::sin(phi_d),
                 std::cos(theta_d));
    const Vec3 d_mirror(-d.x(), -d.y(), d.z());
    // Rotate the half-vector frame about +y by theta_h (phi_h = 0).
    const double c = std::cos(theta_h);
    const double s = std::sin(theta_h);
    const auto rot = [c, s](const Vec3& v) { return Vec3(c * v.x() + s * v.z(), v.y(), -s * v.x() + c * v.z()); };
    return {rot(d), rot(d_mirror)};
}

MerlTable tabulate_merl_style(const ReflectanceParams& psi, const DiffuseAlbedo& rho_d,
                              int n_theta_h, int n_theta_d, int n_phi_d) {
    if (n_theta_h < 2 || n_theta_d < 2 || n_phi_d < 2) {
        throw ArgumentError("MERL-style table needs at least 2 cells per axis");
    }
    psi.validate();
    rho_d.validate();
    MerlTable t{n_theta_h, n_theta_d, n_phi_d, {}, {}};
    t.values.assign(t.cells() * 3, 0.0);
    t.valid.assign(t.cells(), false);
    const Vec3 n(0, 0, 1);
    for (int a = 0; a < n_theta_h; ++a) {
        const double th = (a + 0.5) * kPi / (2.0 * n_theta_h);
        for (int b = 0; b < n_theta_d; ++b) {
            const double td = (b + 0.5) * kPi / (2.0 * n_theta_d);
            for (int c = 0; c < n_phi_d; ++c) {
                const double pd = (c + 0.5) * kPi / n_phi_d;
                const auto [wi, wo] = rusinkiewicz_directions(th, td, pd);
                if (wi.z() <= 0.0 || wo.z() <= 0.0) {
                    continue;
                }
                const std::size_t k = t.cell(a, b, c);
                const Vec3 f = eval_disney<double>(psi, rho_d.rgb, wi, wo, n);
                for (int ch = 0; ch < 3; ++ch) {
                    t.values[k * 3 + ch] = f(ch);
                }
                t.valid[k] = true;
            }
        }
    }
    return t;
}

namespace {

constexpr char kMagic[4] = {'R', 'M', 'B', 'T'};

template <typename T>
void put_le(std::ostream& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(b, b + sizeof(T));
    }
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, std::size_t offset) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) {
        throw ParseError("truncated BRDF table", offset);
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(b, b + sizeof(T));
    }
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

} // namespace

void write_merl_table(const std::filesystem::path& path, const MerlTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, table.n_theta_h);
    put_le<std::uint32_t>(out, table.n_theta_d);
    put_le<std::uint32_t>(out, table.n_phi_d);
    for (const double v : table.values) {
        put_le<double>(out, v);
    }

    nlohmann::ordered_json side;
    side["format"] = "refmap-brdf-table";
    side["header_bytes"] = 16;
    side["value_type"] = "float64 little-endian";
    side["layout"] = "[theta_h][theta_d][phi_d][rgb]";
    side["axes"] = {
        {{"name", "theta_h"}, {"cells", table.n_theta_h}, {"range", {0.0, kPi / 2}}, {"sampling", "cell centers, uniform"}},
        {{"name", "theta_d"}, {"cells", table.n_theta_d}, {"range", {0.0, kPi / 2}}, {"sampling", "cell centers, uniform"}},
        {{"name", "phi_d"}, {"cells", table.n_phi_d}, {"range", {0.0, kPi}}, {"sampling", "cell centers, uniform"}},
    };
    side["below_horizon"] = "stored as 0";
    std::ofstream js(path.string() + ".json");
    js << side.dump(2) << '\n';
}

MerlTable read_merl_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError(path.string() + ": bad BRDF table magic", 0);
    }
    MerlTable t;
    t.n_theta_h = static_cast<int>(get_le<std::uint32_t>(in, 4));
    t.n_theta_d = static_cast<int>(get_le<std::uint32_t>(in, 8));
    t.n_phi_d = static_cast<int>(get_le<std::uint32_t>(in, 12));
    t.values.resize(t.cells() * 3);
    t.valid.assign(t.cells(), false);
    for (std::size_t k = 0; k < t.values.size(); ++k) {
        t.values[k] = get_le<double>(in, 16 + 8 * k);
    }
    for (int a = 0; a < t.n_theta_h; ++a) {
        for (int b = 0; b < t.n_theta_d; ++b) {
            for (int c = 0; c < t.n_phi_d; ++c) {
                const auto [wi, wo] = rusinkiewicz_directions((a + 0.5) * kPi / (2.0 * t.n_theta_h),
                                                              (b + 0.5) * kPi / (2.0 * t.n_theta_d),
                                                              (c + 0.5) * kPi / t.n_phi_d);
                t.valid[t.cell(a, b, c)] = wi.z() > 0.0 && wo.z() > 0.0;
            }
        }
    }
    return t;
}

} // namespace brdf
} // namespace refmap
