#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace refmap {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
using Vec3 = Vector3<double>;

inline constexpr double kPi = std::numbers::pi;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument or configuration supplied by the caller (CLI exit code 2).
class ArgumentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

/// Malformed file. `offset()` is the byte position where decoding failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset);
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Well-formed data that violates a domain invariant (negative radiance, NaN, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class UnsupportedMaterialError : public Error {
public:
    using Error::Error;
};

// Warnings go to stderr unless a handler is installed.
using WarningHandler = std::function<void(std::string_view)>;
void set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

/// Worker count: REFMAP_THREADS when set and positive, otherwise hardware concurrency.
int thread_count();

/// Runs fn(i) for i in [begin, end) on up to thread_count() threads using static
/// contiguous chunks. fn must only write state owned by index i.
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end,
                  const std::function<void(std::ptrdiff_t)>& fn);

/// Stateless counter-based generator. Every draw is a pure function of
/// (seed, stream ids, counter), so results do not depend on evaluation order.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

    /// Derives an independent stream keyed by a logical index.
    CounterRng fork(std::uint64_t id) const {
        CounterRng out(0);
        out.key_ = mix(key_ ^ mix(id + 0x9e3779b97f4a7c15ULL));
        return out;
    }

    std::uint64_t bits(std::uint64_t counter) const {
        return mix(key_ + mix(counter ^ 0xbb67ae8584caa73bULL));
    }

    /// Uniform on the open interval (0, 1).
    double uniform(std::uint64_t counter) const {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on two consecutive counters.
    double normal(std::uint64_t counter) const;

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
};

/// 64-bit FNV-1a, used to stamp outputs with a config hash.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t value);

} // namespace refmap
