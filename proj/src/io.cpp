#include <refmap/io.hpp>

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace refmap::io {

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

/// Cursor over an in-memory file that reports byte offsets in parse errors.
class Reader {
public:
    Reader(const std::vector<unsigned char>& bytes, std::string name)
        : bytes_(bytes), name_(std::move(name)) {}

    std::size_t offset() const { return pos_; }
    bool eof() const { return pos_ >= bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(name_ + ": " + what, pos_);
    }

    unsigned char byte() {
        if (eof()) {
            fail("unexpected end of file");
        }
        return bytes_[pos_++];
    }

    void skip_space() {
        while (!eof() && std::isspace(bytes_[pos_])) {
            ++pos_;
        }
    }

    std::string token() {
        skip_space();
        std::string out;
        while (!eof() && !std::isspace(bytes_[pos_])) {
            out.push_back(static_cast<char>(bytes_[pos_++]));
        }
        if (out.empty()) {
            fail("expected a header token");
        }
        return out;
    }

    std::string line() {
        std::string out;
        while (true) {
            const unsigned char c = byte();
            if (c == '\n') {
                return out;
            }
            out.push_back(static_cast<char>(c));
        }
    }

    const unsigned char* take(std::size_t n) {
        if (remaining() < n) {
            fail("truncated pixel data: need " + std::to_string(n) + " bytes, have " +
                 std::to_string(remaining()));
        }
        const unsigned char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

private:
    const std::vector<unsigned char>& bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

int parse_positive(Reader& r, const std::string& what) {
    const std::size_t at = r.offset();
    const std::string tok = r.token();
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used == tok.size() && v > 0) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ParseError("invalid " + what + " '" + tok + "'", at);
}

} // namespace

// ---------------------------------------------------------------------------------------
// PFM
// ---------------------------------------------------------------------------------------

HdrImage read_pfm(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    Reader r(bytes, path.string());
    const std::string magic = r.token();
    if (magic != "PF" && magic != "Pf") {
        throw ParseError(path.string() + ": not a PFM file (magic '" + magic + "')", 0);
    }
    const int channels = magic == "PF" ? 3 : 1;
    const int width = parse_positive(r, "PFM width");
    const int height = parse_positive(r, "PFM height");
    const std::size_t scale_at = r.offset();
    const std::string scale_tok = r.token();
    double scale = 0.0;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception&) {
        throw ParseError(path.string() + ": invalid PFM scale '" + scale_tok + "'", scale_at);
    }
    if (scale == 0.0 || !std::isfinite(scale)) {
        throw ParseError(path.string() + ": PFM scale must be non-zero", scale_at);
    }
    if (!std::isspace(r.byte())) {
        r.fail("expected a single whitespace byte after the PFM header");
    }
    const bool little = scale < 0.0;
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    const unsigned char* data = r.take(count * 4);

    HdrImage img(height, width);
    const bool swap = little != (std::endian::native == std::endian::little);
    for (int row = 0; row < height; ++row) {
        const int i = height - 1 - row;  // bottom row first
        for (int j = 0; j < width; ++j) {
            for (int c = 0; c < 3; ++c) {
                const int src_c = channels == 3 ? c : 0;
                const std::size_t k =
                    (static_cast<std::size_t>(row) * width + j) * channels + src_c;
                unsigned char b[4];
                std::memcpy(b, data + 4 * k, 4);
                if (swap) {
                    std::swap(b[0], b[3]);
                    std::swap(b[1], b[2]);
                }
                float v;
                std::memcpy(&v, b, 4);
                img.pixel(i, j)(c) = v;
            }
        }
    }
    return img;
}

void write_pfm(const std::filesystem::path& path, const HdrImage& image) {
    auto out = open_out(path);
    out << "PF\n" << image.width() << ' ' << image.height() << "\n-1.0\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(image.width()) * 12);
    for (int r = image.height() - 1; r >= 0; --r) {
        for (int j = 0; j < image.width(); ++j) {
            for (int c = 0; c < 3; ++c) {
                const float v = image.pixel(r, j)(c);
                unsigned char b[4];
                std::memcpy(b, &v, 4);
                if constexpr (std::endian::native == std::endian::big) {
                    std::swap(b[0], b[3]);
                    std::swap(b[1], b[2]);
                }
                std::memcpy(row.data() + (static_cast<std::size_t>(j) * 3 + c) * 4, b, 4);
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

// ---------------------------------------------------------------------------------------
// Radiance RGBE
// ---------------------------------------------------------------------------------------

namespace {

void rgbe_to_float(const unsigned char* rgbe, float* rgb) {
    if (rgbe[3] == 0) {
        rgb[0] = rgb[1] = rgb[2] = 0.0f;
        return;
    }
    const double f = std::ldexp(1.0, static_cast<int>(rgbe[3]) - 128) / 256.0;
    for (int c = 0; c < 3; ++c) {
        rgb[c] = static_cast<float>(rgbe[c] * f);
    }
}

void float_to_rgbe(const float* rgb, unsigned char* rgbe) {
    const double v = std::max({static_cast<double>(rgb[0]), static_cast<double>(rgb[1]),
                               static_cast<double>(rgb[2])});
    if (!(v > 1e-32)) {
        rgbe[0] = rgbe[1] = rgbe[2] = rgbe[3] = 0;
        return;
    }
    int e = 0;
    const double m = std::frexp(v, &e);  // v = m * 2^e, m in [0.5, 1)
    const double scale = m * 256.0 / v;
    for (int c = 0; c < 3; ++c) {
        rgbe[c] = static_cast<unsigned char>(
            std::clamp(std::floor(std::max(0.0, static_cast<double>(rgb[c])) * scale), 0.0, 255.0));
    }
    rgbe[3] = static_cast<unsigned char>(e + 128);
}

void read_scanline(Reader& r, int width, std::vector<unsigned char>& line) {
    line.assign(static_cast<std::size_t>(width) * 4, 0);
    if (width < 8 || width > 0x7fff || r.remaining() < 4) {
        std::memcpy(line.data(), r.take(line.size()), line.size());
        return;
    }
    const unsigned char* head = r.take(4);
    if (head[0] != 2 || head[1] != 2 || (head[2] & 0x80)) {
        // Flat scanline: the four bytes already consumed are the first pixel.
        std::memcpy(line.data(), head, 4);
        std::memcpy(line.data() + 4, r.take(line.size() - 4), line.size() - 4);
        return;
    }
    if (((head[2] << 8) | head[3]) != width) {
        r.fail("RLE scanline width mismatch");
    }
    for (int c = 0; c < 4; ++c) {
        int x = 0;
        while (x < width) {
            int count = r.byte();
            if (count > 128) {
                count -= 128;
                if (x + count > width) {
                    r.fail("RLE run overflows scanline");
                }
                const unsigned char v = r.byte();
                for (int k = 0; k < count; ++k) {
                    line[static_cast<std::size_t>(x++) * 4 + c] = v;
                }
            } else {
                if (count == 0 || x + count > width) {
                    r.fail("bad RLE literal count");
                }
                for (int k = 0; k < count; ++k) {
                    line[static_cast<std::size_t>(x++) * 4 + c] = r.byte();
                }
            }
        }
    }
}

} // namespace

HdrImage read_rgbe(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    Reader r(bytes, path.string());
    const std::string first = r.line();
    if (first.rfind("#?", 0) != 0) {
        throw ParseError(path.string() + ": missing #? Radiance signature", 0);
    }
    while (true) {
        const std::size_t at = r.offset();
        const std::string l = r.line();
        if (l.empty()) {
            break;
        }
        if (l.rfind("FORMAT=", 0) == 0 && l != "FORMAT=32-bit_rle_rgbe") {
            throw ParseError(path.string() + ": unsupported " + l, at);
        }
    }
    const std::size_t res_at = r.offset();
    std::istringstream res(r.line());
    std::string ya, xa;
    int height = 0;
    int width = 0;
    if (!(res >> ya >> height >> xa >> width) || ya != "-Y" || xa != "+X" || height <= 0 ||
        width <= 0) {
        throw ParseError(path.string() + ": unsupported resolution line (expected -Y H +X W)",
                         res_at);
    }
    HdrImage img(height, width);
    std::vector<unsigned char> line;
    for (int i = 0; i < height; ++i) {
        read_scanline(r, width, line);
        for (int j = 0; j < width; ++j) {
            float rgb[3];
            rgbe_to_float(line.data() + static_cast<std::size_t>(j) * 4, rgb);
            img.pixel(i, j) << rgb[0], rgb[1], rgb[2];
        }
    }
    return img;
}

void write_rgbe(const std::filesystem::path& path, const HdrImage& image) {
    auto out = open_out(path);
    out << "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " << image.height() << " +X "
        << image.width() << "\n";
    std::vector<unsigned char> line(static_cast<std::size_t>(image.width()) * 4);
    for (int i = 0; i < image.height(); ++i) {
        for (int j = 0; j < image.width(); ++j) {
            const float rgb[3] = {image.pixel(i, j)(0), image.pixel(i, j)(1), image.pixel(i, j)(2)};
            float_to_rgbe(rgb, line.data() + static_cast<std::size_t>(j) * 4);
        }
        out.write(reinterpret_cast<const char*>(line.data()), static_cast<std::streamsize>(line.size()));
    }
}

EnvironmentMap load_hdr(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    char magic[2] = {0, 0};
    in.read(magic, 2);
    in.close();
    HdrImage img;
    if (magic[0] == 'P' && (magic[1] == 'F' || magic[1] == 'f')) {
        img = read_pfm(path);
    } else if (magic[0] == '#' && magic[1] == '?') {
        img = read_rgbe(path);
    } else {
        throw ParseError(path.string() + ": neither PFM nor Radiance RGBE", 0);
    }
    EnvironmentMap env(std::move(img));
    env.validate_radiance();
    return env;
}

void save_pfm(const std::filesystem::path& path, const EnvironmentMap& env) {
    write_pfm(path, env.image());
}

void save_hdr(const std::filesystem::path& path, const EnvironmentMap& env) {
    write_rgbe(path, env.image());
}

// ---------------------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------------------

namespace {

void write_png_rows(const std::filesystem::path& path, int height, int width, int color_type,
                    const std::vector<unsigned char>& data, int channels) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) {
        throw Error("cannot write " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int i = 0; i < height; ++i) {
        png_write_row(png, const_cast<png_bytep>(data.data() + static_cast<std::size_t>(i) * width * channels));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace

void write_png(const std::filesystem::path& path, const LdrImage& image) {
    const auto& px = image.pixels();
    std::vector<unsigned char> data(px.data(), px.data() + px.size());
    write_png_rows(path, image.height(), image.width(), PNG_COLOR_TYPE_RGB, data, 3);
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask, int height, int width) {
    if (mask.size() != static_cast<Eigen::Index>(height) * width) {
        throw ArgumentError("mask size does not match PNG dimensions");
    }
    std::vector<unsigned char> data(mask.size());
    for (Eigen::Index k = 0; k < mask.size(); ++k) {
        data[k] = mask(k) ? 255 : 0;
    }
    write_png_rows(path, height, width, PNG_COLOR_TYPE_GRAY, data, 1);
}

Mask read_mask_png(const std::filesystem::path& path, int height, int width) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw ParseError(path.string() + ": " + image.message, 0);
    }
    image.format = PNG_FORMAT_GRAY;
    std::vector<unsigned char> data(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
        throw ParseError(path.string() + ": " + image.message, 0);
    }
    if (static_cast<int>(image.height) != height || static_cast<int>(image.width) != width) {
        throw ValidationError(path.string() + ": mask dimensions do not match radiance");
    }
    Mask mask(static_cast<Eigen::Index>(height) * width);
    for (Eigen::Index k = 0; k < mask.size(); ++k) {
        mask(k) = data[k] >= 128;
    }
    return mask;
}

// ---------------------------------------------------------------------------------------
// Composite formats
// ---------------------------------------------------------------------------------------

void save_reflectance_map(const std::filesystem::path& stem, const ReflectanceMap& map) {
    write_pfm(stem.string() + ".pfm", map.radiance());
    write_mask_png(stem.string() + "_mask.png", map.mask(), map.resolution(), map.resolution());
}

ReflectanceMap load_reflectance_map(const std::filesystem::path& stem) {
    auto radiance = read_pfm(stem.string() + ".pfm");
    if (radiance.height() != radiance.width()) {
        throw ValidationError(stem.string() + ".pfm: reflectance maps must be square");
    }
    ReflectanceMap map(radiance.height());
    map.radiance() = std::move(radiance);
    map.mask() = read_mask_png(stem.string() + "_mask.png", map.resolution(), map.resolution());
    map.validate();
    return map;
}

NormalMap load_normal_map(const std::filesystem::path& path) {
    auto normals = NormalMap::from_vectors(read_pfm(path));
    normals.validate();
    return normals;
}

void save_normal_map(const std::filesystem::path& path, const NormalMap& normals) {
    HdrImage img = normals.normals;
    for (Eigen::Index k = 0; k < img.size(); ++k) {
        if (!normals.mask(k)) {
            img.pixels().row(k).setZero();
        }
    }
    write_pfm(path, img);
}

} // namespace refmap::io
