#include "clove/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace clove {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// k-means++ seeding: first center uniform, then D^2-weighted picks.
Matrix kmeanspp_init(const Matrix& points, int k, RngStream& rng) {
    const std::size_t m = points.rows;
    Matrix centers(static_cast<std::size_t>(k), points.cols);
    std::size_t first = rng.uniform_index(m);
    std::copy_n(points.row(first).data(), points.cols, centers.row(0).data());

    std::vector<double> d2(m);
    for (std::size_t i = 0; i < m; ++i) d2[i] = sq_dist(points.row(i), centers.row(0));

    for (int c = 1; c < k; ++c) {
        double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_index(m);  // all remaining points coincide
        } else {
            double target = rng.uniform() * total;
            double acc = 0.0;
            pick = m - 1;
            for (std::size_t i = 0; i < m; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        std::copy_n(points.row(pick).data(), points.cols,
                    centers.row(static_cast<std::size_t>(c)).data());
        for (std::size_t i = 0; i < m; ++i)
            d2[i] = std::min(d2[i], sq_dist(points.row(i),
                                            centers.row(static_cast<std::size_t>(c))));
    }
    return centers;
}

void assign_points(const Matrix& points, const Matrix& centers,
                   std::vector<int>& labels, double& inertia) {
    inertia = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (std::size_t c = 0; c < centers.rows; ++c) {
            double d = sq_dist(points.row(i), centers.row(c));
            if (d < best) {
                best = d;
                best_c = static_cast<int>(c);
            }
        }
        labels[i] = best_c;
        inertia += best;
    }
}

}  // namespace

ClusterResult lloyd(const Matrix& points, Matrix centers, int max_iter, double tol,
                    std::vector<double>* inertia_trace) {
    const std::size_t m = points.rows;
    const std::size_t k = centers.rows;
    ClusterResult res;
    res.labels.assign(m, 0);

    for (int it = 0; it < max_iter; ++it) {
        assign_points(points, centers, res.labels, res.inertia);
        res.iterations = it + 1;

        // reseed any emptied cluster to the point farthest from its center
        std::vector<std::size_t> counts(k, 0);
        for (int l : res.labels) ++counts[static_cast<std::size_t>(l)];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            double worst = -1.0;
            std::size_t worst_i = 0;
            for (std::size_t i = 0; i < m; ++i) {
                double d = sq_dist(points.row(i),
                                   centers.row(static_cast<std::size_t>(res.labels[i])));
                if (d > worst) {
                    worst = d;
                    worst_i = i;
                }
            }
            std::copy_n(points.row(worst_i).data(), points.cols, centers.row(c).data());
            res.labels[worst_i] = static_cast<int>(c);
            assign_points(points, centers, res.labels, res.inertia);
            for (auto& v : counts) v = 0;
            for (int l : res.labels) ++counts[static_cast<std::size_t>(l)];
        }
        if (inertia_trace) inertia_trace->push_back(res.inertia);

        Matrix next(k, points.cols, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            auto dst = next.row(static_cast<std::size_t>(res.labels[i]));
            auto src = points.row(i);
            for (std::size_t j = 0; j < points.cols; ++j) dst[j] += src[j];
        }
        double movement = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            auto dst = next.row(c);
            if (counts[c] == 0) {  // unfillable (duplicate points); keep old center
                std::copy_n(centers.row(c).data(), points.cols, dst.data());
                continue;
            }
            for (std::size_t j = 0; j < points.cols; ++j)
                dst[j] /= static_cast<double>(counts[c]);
            movement = std::max(movement, std::sqrt(sq_dist(dst, centers.row(c))));
        }
        centers = next;
        if (movement < tol) break;
    }
    assign_points(points, centers, res.labels, res.inertia);
    res.centers = std::move(centers);
    return res;
}

ClusterResult kmeans(const Matrix& points, int k, const KMeansOptions& opts,
                     RngStream& rng) {
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (points.rows < static_cast<std::size_t>(k))
        throw std::invalid_argument("kmeans: fewer points than clusters");
    if (!points.all_finite()) throw std::invalid_argument("kmeans: non-finite input");

    ClusterResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < opts.restarts; ++r) {
        Matrix init = kmeanspp_init(points, k, rng);
        ClusterResult cand = lloyd(points, std::move(init), opts.max_iter, opts.tol);
        if (cand.inertia < best.inertia) best = std::move(cand);
    }
    return best;
}

ClusterResult kmeans(const Matrix& points, int k, RngStream& rng) {
    return kmeans(points, k, KMeansOptions{}, rng);
}

ClusterResult agglomerative(const Matrix& points, int k) {
    const std::size_t m = points.rows;
    if (k < 1) throw std::invalid_argument("agglomerative: k must be >= 1");
    if (m < static_cast<std::size_t>(k))
        throw std::invalid_argument("agglomerative: fewer points than clusters");

    // Active clusters keep the smallest member index as their id.
    // Lance-Williams update of squared-Euclidean Ward distances.
    std::vector<bool> active(m, true);
    std::vector<std::size_t> size(m, 1);
    std::vector<int> parent(m);
    std::iota(parent.begin(), parent.end(), 0);

    Matrix dist(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            double d = sq_dist(points.row(i), points.row(j)) / 2.0;
            dist.at(i, j) = d;
            dist.at(j, i) = d;
        }

    std::size_t clusters = m;
    while (clusters > static_cast<std::size_t>(k)) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < m; ++j) {
                if (!active[j]) continue;
                if (dist.at(i, j) < best) {
                    best = dist.at(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        // merge bj into bi (bi < bj keeps the smallest id)
        for (std::size_t h = 0; h < m; ++h) {
            if (!active[h] || h == bi || h == bj) continue;
            double nh = static_cast<double>(size[h]);
            double ni = static_cast<double>(size[bi]);
            double nj = static_cast<double>(size[bj]);
            double d = ((ni + nh) * dist.at(bi, h) + (nj + nh) * dist.at(bj, h) -
                        nh * dist.at(bi, bj)) /
                       (ni + nj + nh);
            dist.at(bi, h) = d;
            dist.at(h, bi) = d;
        }
        size[bi] += size[bj];
        active[bj] = false;
        for (std::size_t h = 0; h < m; ++h)
            if (parent[h] == static_cast<int>(bj)) parent[h] = static_cast<int>(bi);
        --clusters;
    }

    // relabel by ascending smallest member index
    std::vector<int> roots;
    for (std::size_t i = 0; i < m; ++i)
        if (active[i]) roots.push_back(static_cast<int>(i));
    std::sort(roots.begin(), roots.end());

    ClusterResult res;
    res.labels.assign(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        auto it = std::lower_bound(roots.begin(), roots.end(), parent[i]);
        res.labels[i] = static_cast<int>(it - roots.begin());
    }

    // inertia relative to cluster means, for parity with k-means reporting
    Matrix means(static_cast<std::size_t>(k), points.cols, 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < m; ++i) {
        auto dst = means.row(static_cast<std::size_t>(res.labels[i]));
        auto src = points.row(i);
        for (std::size_t j = 0; j < points.cols; ++j) dst[j] += src[j];
        ++counts[static_cast<std::size_t>(res.labels[i])];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
        auto dst = means.row(c);
        for (std::size_t j = 0; j < points.cols; ++j)
            dst[j] /= static_cast<double>(counts[c]);
    }
    res.inertia = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        res.inertia += sq_dist(points.row(i),
                               means.row(static_cast<std::size_t>(res.labels[i])));
    res.iterations = static_cast<int>(m) - k;
    return res;
}

}  // namespace clove
