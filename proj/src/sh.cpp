#include <refmap/sh.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

namespace refmap {

ShCoefficients ShCoefficients::resized(int new_degree) const {
    ShCoefficients out(new_degree);
    const Eigen::Index n = std::min(count(degree), count(new_degree));
    out.coeffs.topRows(n) = coeffs.topRows(n);
    return out;
}

Eigen::VectorXd ShCoefficients::flatten() const {
    Eigen::VectorXd v(coeffs.size());
    for (Eigen::Index r = 0; r < coeffs.rows(); ++r) {
        for (int c = 0; c < 3; ++c) {
            v(3 * r + c) = coeffs(r, c);
        }
    }
    return v;
}

namespace sh {

namespace {

struct TrigTable {
    Eigen::MatrixXd cos;  // width x (degree+1)
    Eigen::MatrixXd sin;
};

TrigTable trig_table(int degree, int width) {
    TrigTable t{Eigen::MatrixXd(width, degree + 1), Eigen::MatrixXd(width, degree + 1)};
    for (int j = 0; j < width; ++j) {
        const double phi = 2.0 * kPi * (j + 0.5) / width;
        for (int m = 0; m <= degree; ++m) {
            t.cos(j, m) = std::cos(m * phi);
            t.sin(j, m) = std::sin(m * phi);
        }
    }
    return t;
}

double row_theta(int i, int height) { return kPi * (i + 0.5) / height; }

} // namespace

Eigen::ArrayXd projection_row_weights(int height, int width) {
    if (height < 1 || width < 1) {
        throw ArgumentError("projection grid needs height >= 1 and width >= 1");
    }
    Eigen::ArrayXd w(height);
    const int half = height / 2;
    for (int k = 0; k < height; ++k) {
        const double theta = row_theta(k, height);
        double sum = 0.0;
        for (int j = 1; j <= half; ++j) {
            sum += std::cos(2.0 * j * theta) / (4.0 * j * j - 1.0);
        }
        w(k) = 2.0 / height * (1.0 - 2.0 * sum) * (2.0 * kPi / width);
    }
    return w;
}

ShCoefficients project(const EnvironmentMap& env, int degree) {
    if (degree < 0) {
        throw ArgumentError("SH degree must be >= 0");
    }
    const int h = env.height();
    const int w = env.width();
    if (ShCoefficients::count(degree) > static_cast<Eigen::Index>(h) * w) {
        warn("SH degree " + std::to_string(degree) + " exceeds the resolution of a " +
             std::to_string(h) + "x" + std::to_string(w) + " map; coefficients will alias");
    }
    const auto weights = projection_row_weights(h, w);
    const auto trig = trig_table(degree, w);
    const double root2 = std::sqrt(2.0);

    ShCoefficients out(degree);
    Eigen::VectorXd p(ShCoefficients::count(degree));
    Eigen::MatrixXd fc(degree + 1, 3);
    Eigen::MatrixXd fs(degree + 1, 3);
    for (int i = 0; i < h; ++i) {
        legendre<double>(degree, std::cos(row_theta(i, h)), p);
        const auto row = env.image().pixels().middleRows(static_cast<Eigen::Index>(i) * w, w)
                             .cast<double>().matrix();
        fc.noalias() = trig.cos.transpose() * row;
        fs.noalias() = trig.sin.transpose() * row;
        for (int l = 0; l <= degree; ++l) {
            out.coeffs.row(ShCoefficients::index(l, 0)) +=
                weights(i) * p(ShCoefficients::index(l, 0)) * fc.row(0);
            for (int m = 1; m <= l; ++m) {
                const double s = weights(i) * root2 * p(ShCoefficients::index(l, m));
                out.coeffs.row(ShCoefficients::index(l, m)) += s * fc.row(m);
                out.coeffs.row(ShCoefficients::index(l, -m)) += s * fs.row(m);
            }
        }
    }
    return out;
}

EnvironmentMap reconstruct(const ShCoefficients& coeffs, int height, int width) {
    EnvironmentMap env(HdrImage(height, width));
    const int degree = coeffs.degree;
    const auto trig = trig_table(degree, width);
    const double root2 = std::sqrt(2.0);
    Eigen::VectorXd p(ShCoefficients::count(degree));
    Eigen::MatrixXd ac(degree + 1, 3);
    Eigen::MatrixXd as(degree + 1, 3);
    for (int i = 0; i < height; ++i) {
        legendre<double>(degree, std::cos(row_theta(i, height)), p);
        ac.setZero();
        as.setZero();
        for (int l = 0; l <= degree; ++l) {
            ac.row(0) += p(ShCoefficients::index(l, 0)) * coeffs.coeffs.row(ShCoefficients::index(l, 0));
            for (int m = 1; m <= l; ++m) {
                const double s = root2 * p(ShCoefficients::index(l, m));
                ac.row(m) += s * coeffs.coeffs.row(ShCoefficients::index(l, m));
                as.row(m) += s * coeffs.coeffs.row(ShCoefficients::index(l, -m));
            }
        }
        const Eigen::MatrixXd row = trig.cos * ac + trig.sin * as;
        env.image().pixels().middleRows(static_cast<Eigen::Index>(i) * width, width) =
            row.cast<float>().array();
    }
    return env;
}

Eigen::MatrixXd basis_matrix(int degree, int height, int width) {
    const auto trig = trig_table(degree, width);
    const double root2 = std::sqrt(2.0);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(height) * width, ShCoefficients::count(degree));
    Eigen::VectorXd p(ShCoefficients::count(degree));
    for (int i = 0; i < height; ++i) {
        legendre<double>(degree, std::cos(row_theta(i, height)), p);
        for (int j = 0; j < width; ++j) {
            const Eigen::Index r = static_cast<Eigen::Index>(i) * width + j;
            for (int l = 0; l <= degree; ++l) {
                y(r, ShCoefficients::index(l, 0)) = p(ShCoefficients::index(l, 0));
                for (int m = 1; m <= l; ++m) {
                    const double s = root2 * p(ShCoefficients::index(l, m));
                    y(r, ShCoefficients::index(l, m)) = s * trig.cos(j, m);
                    y(r, ShCoefficients::index(l, -m)) = s * trig.sin(j, m);
                }
            }
        }
    }
    return y;
}

Vec3 evaluate(const ShCoefficients& coeffs, const Vec3& direction) {
    const Eigen::VectorXd y = basis<double>(coeffs.degree, direction);
    return coeffs.coeffs.transpose() * y;
}

BandSpectrum band_power(const ShCoefficients& coeffs) {
    BandSpectrum out{Eigen::ArrayXd::Zero(coeffs.degree + 1)};
    for (int l = 0; l <= coeffs.degree; ++l) {
        out.power(l) = coeffs.coeffs.middleRows(ShCoefficients::index(l, -l), 2 * l + 1).squaredNorm();
    }
    return out;
}

Eigen::ArrayXd lambert_kernel(int degree) {
    Eigen::ArrayXd a = Eigen::ArrayXd::Zero(degree + 1);
    for (int l = 0; l <= degree; ++l) {
        if (l == 0) {
            a(l) = kPi;
        } else if (l == 1) {
            a(l) = 2.0 * kPi / 3.0;
        } else if (l % 2 == 0) {
            // l! / (2^l ((l/2)!)^2), in log space to survive large l
            const double central = std::exp(std::lgamma(l + 1.0) - l * std::log(2.0) -
                                            2.0 * std::lgamma(l / 2 + 1.0));
            const double sign = (l / 2 - 1) % 2 == 0 ? 1.0 : -1.0;
            a(l) = 2.0 * kPi * sign / ((l + 2.0) * (l - 1.0)) * central;
        }
    }
    return a;
}

ShCoefficients lambert_convolve(const ShCoefficients& coeffs) {
    ShCoefficients out = coeffs;
    const auto a = lambert_kernel(coeffs.degree);
    for (int l = 0; l <= coeffs.degree; ++l) {
        out.coeffs.middleRows(ShCoefficients::index(l, -l), 2 * l + 1) *= a(l);
    }
    return out;
}

void write_coefficients_csv(const std::filesystem::path& path, const ShCoefficients& coeffs) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "l,m,c_R,c_G,c_B\n";
    char buf[160];
    for (int l = 0; l <= coeffs.degree; ++l) {
        for (int m = -l; m <= l; ++m) {
            const auto c = coeffs.at(l, m);
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", l, m, c(0), c(1), c(2));
            out << buf;
        }
    }
}

void write_spectrum_csv(const std::filesystem::path& path, const BandSpectrum& spectrum) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "l,power\n";
    char buf[64];
    for (Eigen::Index l = 0; l < spectrum.power.size(); ++l) {
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", static_cast<int>(l), spectrum.power(l));
        out << buf;
    }
}

} // namespace sh
} // namespace refmap
