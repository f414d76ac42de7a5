#include "fedbba/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fedbba/errors.hpp"

namespace fedbba {

Matrix::Matrix(std::size_t rows, std::size_t cols, Vector data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw InvalidInput("matrix data length " + std::to_string(data_.size()) + " != " +
                           std::to_string(rows_) + "x" + std::to_string(cols_));
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) throw InvalidInput("ragged rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vector Matrix::col(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void Matrix::set_col(std::size_t c, std::span<const double> v) {
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void Matrix::check_finite(const char* what) const {
    if (!all_finite()) throw InvalidInput(std::string(what) + " contains non-finite entries");
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw InvalidInput("matmul shape mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw InvalidInput("matvec shape mismatch");
    Vector out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
    return out;
}

Vector matvec_t(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw InvalidInput("matvec_t shape mismatch");
    Vector out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += r[j] * x[i];
    }
    return out;
}

double frobenius_norm(const Matrix& a) { return norm2(a.data()); }

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double mean(std::span<const double> v) {
    if (v.empty()) throw InvalidInput("mean of empty vector");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
    const double mu = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.size());
}

Centered mean_center(const Matrix& x) {
    if (x.empty()) throw InvalidInput("mean_center of empty matrix");
    Centered out{x, Vector(x.cols(), 0.0)};
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out.column_means[c] += x(r, c);
    for (double& m : out.column_means) m /= static_cast<double>(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out.centered(r, c) -= out.column_means[c];
    return out;
}

namespace {

// One-sided Jacobi on the columns of a tall matrix (m ≥ k). On return the
// columns of `cols` are mutually orthogonal and `v` holds the accumulated
// rotations, so original = cols·vᵀ.
void jacobi_orthogonalize(std::vector<Vector>& cols, std::vector<Vector>& v) {
    const std::size_t k = cols.size();
    constexpr double kTol = 1e-15;
    for (int sweep = 0; sweep < 80; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < k; ++p) {
            for (std::size_t q = p + 1; q < k; ++q) {
                const double alpha = dot(cols[p], cols[p]);
                const double beta = dot(cols[q], cols[q]);
                const double gamma = dot(cols[p], cols[q]);
                if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                auto rotate = [c, s](Vector& a, Vector& b) {
                    for (std::size_t i = 0; i < a.size(); ++i) {
                        const double ai = a[i];
                        const double bi = b[i];
                        a[i] = c * ai - s * bi;
                        b[i] = s * ai + c * bi;
                    }
                };
                rotate(cols[p], cols[q]);
                rotate(v[p], v[q]);
            }
        }
        if (!rotated) return;
    }
}

// Fills columns flagged in `missing` with unit vectors orthogonal to the rest.
void complete_orthonormal(std::vector<Vector>& basis, const std::vector<bool>& missing) {
    const std::size_t m = basis.empty() ? 0 : basis.front().size();
    std::size_t candidate = 0;
    for (std::size_t j = 0; j < basis.size(); ++j) {
        if (!missing[j]) continue;
        while (candidate < m) {
            Vector e(m, 0.0);
            e[candidate++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t i = 0; i < basis.size(); ++i) {
                    if (i == j || (missing[i] && i > j)) continue;
                    const double proj = dot(e, basis[i]);
                    for (std::size_t t = 0; t < m; ++t) e[t] -= proj * basis[i][t];
                }
            }
            const double n = norm2(e);
            if (n > 1e-6) {
                for (double& x : e) x /= n;
                basis[j] = std::move(e);
                break;
            }
        }
    }
}

} // namespace

SvdResult svd(const Matrix& x) {
    x.check_finite("svd input");
    if (x.empty()) throw InvalidInput("svd of empty matrix");
    const bool wide = x.rows() < x.cols();
    const Matrix a = wide ? x.transpose() : x;  // a is m×k with m ≥ k
    const std::size_t m = a.rows();
    const std::size_t k = a.cols();

    std::vector<Vector> cols(k, Vector(m));
    for (std::size_t j = 0; j < k; ++j) cols[j] = a.col(j);
    std::vector<Vector> rot(k, Vector(k, 0.0));
    for (std::size_t j = 0; j < k; ++j) rot[j][j] = 1.0;

    jacobi_orthogonalize(cols, rot);

    std::vector<double> sigma(k);
    for (std::size_t j = 0; j < k; ++j) sigma[j] = norm2(cols[j]);
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return sigma[l] > sigma[r]; });

    const double smax = sigma[order.front()];
    const double floor = smax * static_cast<double>(m) * std::numeric_limits<double>::epsilon();
    std::vector<Vector> left(k);
    std::vector<Vector> right(k);
    std::vector<bool> missing(k, false);
    Vector sv(k);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t src = order[j];
        sv[j] = sigma[src];
        right[j] = rot[src];
        left[j] = cols[src];
        if (sv[j] > floor && sv[j] > 0.0) {
            for (double& e : left[j]) e /= sv[j];
        } else {
            missing[j] = true;
        }
    }
    complete_orthonormal(left, missing);

    Matrix lm(m, k);
    Matrix rm(k, k);
    for (std::size_t j = 0; j < k; ++j) {
        lm.set_col(j, left[j]);
        rm.set_col(j, right[j]);
    }
    if (wide) return {std::move(rm), std::move(sv), std::move(lm)};
    return {std::move(lm), std::move(sv), std::move(rm)};
}

double kurtosis(std::span<const double> v) {
    if (v.size() < 2) throw InvalidInput("kurtosis needs at least 2 values");
    const double mu = mean(v);
    double m2 = 0.0;
    double m4 = 0.0;
    for (double x : v) {
        const double d2 = (x - mu) * (x - mu);
        m2 += d2;
        m4 += d2 * d2;
    }
    const double n = static_cast<double>(v.size());
    m2 /= n;
    m4 /= n;
    if (m2 <= 1e-12) throw DegenerateDistribution("variance " + std::to_string(m2) + " below 1e-12");
    return m4 / (m2 * m2);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(splitmix64(seed ^ splitmix64(stream_id + 0x5851f42d4c957f2dULL))) {}

double RngStream::uniform() {
    // 53 random mantissa bits.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t RngStream::below(std::size_t n) {
    if (n == 0) throw InvalidInput("RngStream::below(0)");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Marsaglia polar method.
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

RngStream RngStream::derive(std::uint64_t sub_id) const {
    return RngStream(splitmix64(seed_ + 0x632be59bd9b4e019ULL * (stream_id_ + 1)), sub_id);
}

} // namespace fedbba
