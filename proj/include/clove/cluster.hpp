#pragma once

#include <vector>

#include "clove/rng.hpp"
#include "clove/types.hpp"

namespace clove {

struct ClusterResult {
    std::vector<int> labels;  // length M, values in [0, k)
    Matrix centers;           // k x dim (k-means only)
    double inertia = 0.0;     // sum of squared distances to assigned centers
    int iterations = 0;
};

struct KMeansOptions {
    int restarts = 10;
    int max_iter = 100;
    double tol = 1e-6;
};

/// Best-inertia result over `restarts` independent k-means++ initializations.
/// Ties in point-to-center assignment break to the lowest center index;
/// an emptied cluster is reseeded to the point farthest from its center.
ClusterResult kmeans(const Matrix& points, int k, const KMeansOptions& opts,
                     RngStream& rng);
ClusterResult kmeans(const Matrix& points, int k, RngStream& rng);

/// One Lloyd run from the given initial centers. `inertia_trace`, when
/// non-null, receives the post-assignment inertia of every iteration.
ClusterResult lloyd(const Matrix& points, Matrix centers, int max_iter, double tol,
                    std::vector<double>* inertia_trace = nullptr);

/// Ward-linkage hierarchical merge cut at k clusters. Deterministic: merge
/// ties break on the smallest pair of cluster indices; output labels are
/// numbered by each cluster's smallest member index. No centers.
ClusterResult agglomerative(const Matrix& points, int k);

}  // namespace clove
