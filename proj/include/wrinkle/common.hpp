#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wrinkle {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Error types. Every contract violation maps to one of these so the CLI can
// report a stable error kind and tests can assert on it.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidConfigError : Error { using Error::Error; };
struct OutOfRangeError : Error { using Error::Error; };
struct InternalInconsistencyError : Error { using Error::Error; };
struct InfeasibleGeometryError : Error { using Error::Error; };
struct DomainMismatchError : Error { using Error::Error; };
struct AliasingError : Error { using Error::Error; };
struct InvalidMeasureError : Error { using Error::Error; };
struct ParameterError : Error { using Error::Error; };
struct DegenerateConstructionError : Error { using Error::Error; };
struct ConstructionDefectError : Error { using Error::Error; };

struct ConvergenceFailureError : Error {
    double last_gradient_norm = 0.0;
    long iterations = 0;
    ConvergenceFailureError(const std::string& what, double grad_norm, long iters)
        : Error(what), last_gradient_norm(grad_norm), iterations(iters) {}
};

// ---------------------------------------------------------------------------
// Small numerics helpers.
// ---------------------------------------------------------------------------

inline double sq(double x) { return x * x; }
inline double pos(double x) { return x > 0.0 ? x : 0.0; }

inline bool is_finite(double x) { return std::isfinite(x); }

// Row-major dense table, row = radial index, col = frequency/theta index.
class Array2D {
  public:
    Array2D() = default;
    Array2D(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

  private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

// Deterministic splitmix64 generator. std::random distributions are
// implementation-defined, so seeded artifacts roll their own uniforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  private:
    std::uint64_t state_;
};

}  // namespace wrinkle
