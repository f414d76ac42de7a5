#include "fedbba/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

#include "fedbba/errors.hpp"

namespace fedbba {

void DbscanParams::validate() const {
    if (!(eps > 0.0)) throw InvalidConfig("dbscan.eps must be > 0");
    if (min_pts < 1) throw InvalidConfig("dbscan.min_pts must be >= 1");
}

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

} // namespace

ClusterLabels dbscan(const Matrix& points, const DbscanParams& params) {
    params.validate();
    if (points.empty()) throw InvalidInput("dbscan needs at least one point");
    const std::size_t n = points.rows();

    std::vector<std::vector<std::size_t>> neighbors(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (distance(points.row(i), points.row(j)) <= params.eps) neighbors[i].push_back(j);

    constexpr int kUnvisited = -2;
    ClusterLabels out{std::vector<int>(n, kUnvisited), 0};
    for (std::size_t i = 0; i < n; ++i) {
        if (out.labels[i] != kUnvisited) continue;
        if (neighbors[i].size() < params.min_pts) {
            out.labels[i] = kNoise;
            continue;
        }
        const int id = out.cluster_count++;
        out.labels[i] = id;
        std::deque<std::size_t> frontier(neighbors[i].begin(), neighbors[i].end());
        while (!frontier.empty()) {
            const std::size_t j = frontier.front();
            frontier.pop_front();
            if (out.labels[j] == kNoise) out.labels[j] = id;  // border point
            if (out.labels[j] != kUnvisited) continue;
            out.labels[j] = id;
            if (neighbors[j].size() >= params.min_pts)
                frontier.insert(frontier.end(), neighbors[j].begin(), neighbors[j].end());
        }
    }
    return out;
}

SuspicionResult identify_suspicious(const ClusterLabels& labels, const Matrix& scores) {
    const std::size_t n = labels.labels.size();
    if (scores.rows() != n) throw InvalidInput("labels and scores are not aligned");

    std::map<int, std::size_t> size;
    std::map<int, double> norm_sum;
    for (std::size_t i = 0; i < n; ++i) {
        const int l = labels.labels[i];
        if (l == kNoise) continue;
        ++size[l];
        norm_sum[l] += norm2(scores.row(i));
    }

    SuspicionResult out;
    if (size.empty()) {
        out.no_confidence = true;
        return out;
    }
    double best_mean = std::numeric_limits<double>::infinity();
    std::size_t best_size = 0;
    for (const auto& [label, count] : size) {
        const double m = norm_sum[label] / static_cast<double>(count);
        if (count > best_size || (count == best_size && m < best_mean)) {
            out.benign_cluster = label;
            best_size = count;
            best_mean = m;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (labels.labels[i] != out.benign_cluster) out.suspicious.push_back(i);
    return out;
}

Matrix standardize_columns(const Matrix& x) {
    Matrix out = mean_center(x).centered;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double ss = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) ss += out(r, c) * out(r, c);
        const double sd = std::sqrt(ss / static_cast<double>(x.rows()));
        for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) = sd > 1e-300 ? out(r, c) / sd : 0.0;
    }
    return out;
}

double silhouette(const Matrix& points, const std::vector<int>& labels) {
    const std::size_t n = points.rows();
    if (labels.size() != n) throw InvalidInput("silhouette labels not aligned");
    std::map<int, std::size_t> count;
    for (int l : labels) ++count[l];
    if (count.size() < 2) throw InvalidInput("silhouette needs at least two groups");

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (count[labels[i]] < 2) continue;
        std::map<int, double> sum;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sum[labels[j]] += distance(points.row(i), points.row(j));
        const double a = sum[labels[i]] / static_cast<double>(count[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [l, s] : sum)
            if (l != labels[i]) b = std::min(b, s / static_cast<double>(count[l]));
        const double m = std::max(a, b);
        total += m > 0.0 ? (b - a) / m : 0.0;
    }
    return total / static_cast<double>(n);
}

} // namespace fedbba
