#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace fedbba {

using Vector = std::vector<double>;

// Dense row-major matrix. Entries are expected to stay finite; check_finite()
// enforces that at API boundaries.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, Vector data);

    static Matrix from_rows(const std::vector<Vector>& rows);
    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    Vector col(std::size_t c) const;
    void set_col(std::size_t c, std::span<const double> v);

    const Vector& data() const { return data_; }
    Vector& data() { return data_; }

    Matrix transpose() const;
    bool all_finite() const;
    void check_finite(const char* what) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
// aᵀ·x without materializing the transpose.
Vector matvec_t(const Matrix& a, std::span<const double> x);
double frobenius_norm(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double mean(std::span<const double> v);
// Population variance (1/n).
double variance(std::span<const double> v);

struct Centered {
    Matrix centered;
    Vector column_means;
};

Centered mean_center(const Matrix& x);

// Thin SVD: x (n×d) = U·diag(σ)·Vᵀ with r = min(n, d).
struct SvdResult {
    Matrix u;
    Vector singular_values;
    Matrix v;
};

SvdResult svd(const Matrix& x);

// E[(X−μ)⁴]/σ⁴ with population moments.
double kurtosis(std::span<const double> v);

// Deterministic random stream. The engine is std::mt19937_64 (its output is
// fixed by the standard); the distributions below are written out by hand
// because libstdc++/libc++ distributions are not bit-compatible.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n).
    std::size_t below(std::size_t n);
    // Uniform integer in [lo, hi].
    std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
    double normal();

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

    // Child stream derived from this stream's identity; never consumes draws.
    RngStream derive(std::uint64_t sub_id) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace fedbba
