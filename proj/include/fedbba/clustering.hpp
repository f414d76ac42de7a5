#pragma once

#include <cstddef>
#include <vector>

#include "fedbba/numerics.hpp"

namespace fedbba {

struct DbscanParams {
    double eps = 0.6;
    std::size_t min_pts = 5;

    void validate() const;
};

inline constexpr int kNoise = -1;

struct ClusterLabels {
    std::vector<int> labels;  // kNoise or 0..cluster_count-1
    int cluster_count = 0;
};

// Euclidean DBSCAN. A core point has at least min_pts points (itself
// included) within distance eps, inclusive. Clusters are seeded in index
// order, so a border point joins the first cluster that reaches it.
ClusterLabels dbscan(const Matrix& points, const DbscanParams& params);

struct SuspicionResult {
    std::vector<std::size_t> suspicious;  // ascending point indices
    int benign_cluster = kNoise;          // kNoise when no_confidence
    bool no_confidence = false;           // every point was noise
};

// The largest cluster is benign; everything else is suspicious. Equal-size
// largest clusters are resolved in favour of the one whose members have the
// smaller mean L2 score norm.
SuspicionResult identify_suspicious(const ClusterLabels& labels, const Matrix& scores);

// Per-column z-scores (population std). Columns with zero spread become 0.
Matrix standardize_columns(const Matrix& x);

// Mean silhouette coefficient of a labelling; points in singleton groups
// contribute 0. Needs at least two distinct labels.
double silhouette(const Matrix& points, const std::vector<int>& labels);

} // namespace fedbba
