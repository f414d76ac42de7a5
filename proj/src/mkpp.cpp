#include "fedbba/mkpp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedbba/errors.hpp"

namespace fedbba {

void MkppConfig::validate() const {
    if (p < 1) throw InvalidConfig("mkpp.p must be >= 1");
    if (guess < 1) throw InvalidConfig("mkpp.guess must be >= 1");
    if (maxcount < 1) throw InvalidConfig("mkpp.maxcount must be >= 1");
    if (!(tol > 0.0)) throw InvalidConfig("mkpp.tol must be > 0");
}

namespace {

void project_out(Vector& u, const std::vector<Vector>& basis) {
    for (const auto& b : basis) {
        const double c = dot(u, b);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] -= c * b[i];
    }
}

bool normalize(Vector& u) {
    const double n = norm2(u);
    if (!(n > 1e-300) || !std::isfinite(n)) return false;
    for (double& x : u) x /= n;
    return true;
}

struct Restart {
    Vector direction;
    double kurt = 0.0;
    bool converged = false;
};

class Pursuit {
public:
    Pursuit(const Matrix& whitened, const MkppConfig& cfg) : y_(whitened), cfg_(cfg) {
        // Upper bound on the spectral norm of the Hessian of E[(yᵀu)⁴]/4 over
        // the unit sphere; shifting by it turns minimization into a
        // monotone power iteration.
        double m4 = 0.0;
        for (std::size_t j = 0; j < y_.rows(); ++j) {
            const double r2 = dot(y_.row(j), y_.row(j));
            m4 += r2 * r2;
        }
        shift_ = 3.0 * m4 / static_cast<double>(y_.rows()) + 1.0;
    }

    Restart run(Vector u, const std::vector<Vector>& basis) const {
        Restart out;
        for (std::size_t count = 0; count < cfg_.maxcount; ++count) {
            Vector w = step(u);
            project_out(w, basis);
            if (!normalize(w)) break;
            double plus = 0.0;
            double minus = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                plus += (w[i] - u[i]) * (w[i] - u[i]);
                minus += (w[i] + u[i]) * (w[i] + u[i]);
            }
            u = std::move(w);
            if (std::sqrt(std::min(plus, minus)) < cfg_.tol) {
                out.converged = true;
                break;
            }
        }
        const Vector s = matvec(y_, u);
        // Orient so the heavier tail sits on the positive side.
        double skew = 0.0;
        for (double x : s) skew += x * x * x;
        if (skew < 0.0)
            for (double& x : u) x = -x;
        out.kurt = kurtosis(s);
        out.direction = std::move(u);
        return out;
    }

private:
    // (1/n) Σ_j y_j (y_jᵀu)³
    Vector cubic_moment(const Vector& u) const {
        Vector m(u.size(), 0.0);
        for (std::size_t j = 0; j < y_.rows(); ++j) {
            auto yj = y_.row(j);
            const double s = dot(yj, u);
            const double s3 = s * s * s;
            for (std::size_t i = 0; i < m.size(); ++i) m[i] += s3 * yj[i];
        }
        for (double& x : m) x /= static_cast<double>(y_.rows());
        return m;
    }

    Vector step(const Vector& u) const {
        Vector m = cubic_moment(u);
        const bool shifted = cfg_.st_sh == UpdateVariant::Shifted;
        if (cfg_.max_min == SearchType::MaximizeKurtosis) {
            if (shifted)
                for (std::size_t i = 0; i < m.size(); ++i) m[i] -= 3.0 * u[i];
            return m;
        }
        const double s = shifted ? shift_ + 3.0 : shift_;
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = s * u[i] - m[i];
        return m;
    }

    const Matrix& y_;
    const MkppConfig& cfg_;
    double shift_ = 0.0;
};

bool better(SearchType t, double candidate, double incumbent) {
    return t == SearchType::MaximizeKurtosis ? candidate > incumbent : candidate < incumbent;
}

void check_shape(const Matrix& x, std::size_t p) {
    if (x.rows() < 2) throw InvalidInput("projection pursuit needs at least 2 rows");
    if (p < 1 || p > std::min(x.rows() - 1, x.cols()))
        throw InvalidInput("p=" + std::to_string(p) + " exceeds min(rows-1, cols)");
    x.check_finite("projection pursuit input");
}

} // namespace

MkppResult mkpp(const Matrix& x, const MkppConfig& cfg, RngStream& rng) {
    cfg.validate();
    check_shape(x, cfg.p);
    const std::size_t n = x.rows();
    const Centered c = mean_center(x);
    const SvdResult dec = svd(c.centered);

    const double smax = dec.singular_values.front();
    if (smax * smax / static_cast<double>(n) <= 1e-12)
        throw DegenerateDistribution("data has no variance in any direction");
    std::size_t k = 0;
    while (k < dec.singular_values.size() && dec.singular_values[k] > 1e-9 * smax) ++k;
    if (cfg.reduce_dim > 0) k = std::min(k, cfg.reduce_dim);
    if (k < cfg.p)
        throw DegenerateDistribution("retained rank " + std::to_string(k) + " < p=" + std::to_string(cfg.p));

    // Whitened scores: columns have zero mean and unit population variance.
    Matrix y(n, k);
    const double root_n = std::sqrt(static_cast<double>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < k; ++j) y(r, j) = root_n * dec.u(r, j);

    const Pursuit pursuit(y, cfg);
    MkppResult out;
    out.projections = Matrix(x.cols(), cfg.p);
    out.scores = Matrix(n, cfg.p);
    std::vector<Vector> basis;

    for (std::size_t comp = 0; comp < cfg.p; ++comp) {
        Restart best;
        for (std::size_t g = 0; g < cfg.guess; ++g) {
            Vector u(k);
            do {
                for (double& e : u) e = rng.normal();
                project_out(u, basis);
            } while (!normalize(u));
            Restart r = pursuit.run(std::move(u), basis);
            if (comp == 0) {
                out.kurt_per_guess.push_back(r.kurt);
                out.converged_flags.push_back(r.converged);
            }
            if (g == 0 || better(cfg.max_min, r.kurt, best.kurt)) best = std::move(r);
        }
        out.component_kurtosis.push_back(best.kurt);

        // Back to the original coordinates: v ∝ V_k · Σ_k⁻¹ · u.
        Vector v(x.cols(), 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            const double coef = best.direction[j] / dec.singular_values[j];
            for (std::size_t i = 0; i < v.size(); ++i) v[i] += coef * dec.v(i, j);
        }
        normalize(v);
        out.projections.set_col(comp, v);
        out.scores.set_col(comp, matvec(c.centered, v));
        basis.push_back(std::move(best.direction));
    }
    return out;
}

Matrix pca_scores(const Matrix& x, std::size_t p) {
    check_shape(x, p);
    const Centered c = mean_center(x);
    const SvdResult dec = svd(c.centered);
    Matrix top(x.cols(), p);
    for (std::size_t j = 0; j < p; ++j) top.set_col(j, dec.v.col(j));
    return matmul(c.centered, top);
}

} // namespace fedbba
