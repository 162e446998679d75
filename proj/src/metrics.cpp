#include "clove/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace clove {

namespace {

__int128 choose2(long long n) {
    return static_cast<__int128>(n) * (n - 1) / 2;
}

}  // namespace

double ari(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
    const std::size_t m = labels_a.size();
    if (labels_b.size() != m) throw std::invalid_argument("ari: length mismatch");
    if (m < 2) throw std::invalid_argument("ari: need at least two items");

    std::map<std::pair<int, int>, long long> cells;
    std::map<int, long long> row_sum, col_sum;
    for (std::size_t i = 0; i < m; ++i) {
        ++cells[{labels_a[i], labels_b[i]}];
        ++row_sum[labels_a[i]];
        ++col_sum[labels_b[i]];
    }

    __int128 index = 0;
    for (const auto& [cell, n] : cells) index += choose2(n);
    __int128 sum_a = 0, sum_b = 0;
    for (const auto& [l, n] : row_sum) sum_a += choose2(n);
    for (const auto& [l, n] : col_sum) sum_b += choose2(n);
    const __int128 pairs = choose2(static_cast<long long>(m));

    // ARI = (pairs*index - sum_a*sum_b) / (pairs*(sum_a+sum_b)/2 - sum_a*sum_b),
    // kept in integers (doubled) until the final division.
    __int128 num = 2 * (pairs * index - sum_a * sum_b);
    __int128 den = pairs * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if (den == 0) return num == 0 ? 1.0 : 0.0;  // e.g. one cluster vs itself
    return static_cast<double>(static_cast<long double>(num) /
                               static_cast<long double>(den));
}

ModelDistances model_distances(const std::vector<ModelParams>& models,
                               const TrueWorld& world) {
    const std::size_t k = models.size();
    if (world.optima.size() != k)
        throw std::invalid_argument("model_distances: model/optimum count mismatch");

    Matrix dist(k, k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        if (models[i].size() != world.optima[0].size())
            throw std::invalid_argument("model_distances: dimension mismatch");
        for (std::size_t j = 0; j < k; ++j)
            dist.at(i, j) = euclidean_distance(models[i].values, world.optima[j].values);
    }

    ModelDistances out;
    out.model_to_optimum = min_cost_matching(dist);
    out.distances.resize(k);
    for (std::size_t i = 0; i < k; ++i)
        out.distances[i] = dist.at(i, static_cast<std::size_t>(out.model_to_optimum[i]));
    return out;
}

SeparationCheck loss_gap_separation_check(const Matrix& loss_matrix) {
    const std::size_t m = loss_matrix.rows, k = loss_matrix.cols;
    SeparationCheck res;
    if (k < 2 || m == 0) {
        res.min_cross_distance = std::numeric_limits<double>::infinity();
        res.holds = true;
        return res;
    }

    std::vector<int> argmin(m);
    res.delta_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        double best = std::numeric_limits<double>::infinity();
        double second = std::numeric_limits<double>::infinity();
        int best_j = 0;
        for (std::size_t j = 0; j < k; ++j) {
            double v = loss_matrix.at(i, j);
            if (v < best) {
                second = best;
                best = v;
                best_j = static_cast<int>(j);
            } else if (v < second) {
                second = v;
            }
        }
        argmin[i] = best_j;
        res.delta_gap = std::min(res.delta_gap, second - best);
    }

    res.min_cross_distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            if (argmin[i] == argmin[j]) continue;
            res.min_cross_distance = std::min(
                res.min_cross_distance,
                euclidean_distance(loss_matrix.row(i), loss_matrix.row(j)));
        }

    res.holds = res.min_cross_distance >= std::sqrt(2.0) * res.delta_gap - 1e-12;
    return res;
}

ConvergenceStats convergence_stats(const std::vector<double>& ari_series) {
    if (ari_series.empty())
        throw std::invalid_argument("convergence_stats: empty series");
    ConvergenceStats s;
    const int t = static_cast<int>(ari_series.size());
    s.final_ari = ari_series.back();
    double at10 = ari_series[static_cast<std::size_t>(std::min(10, t)) - 1];
    s.pct_final_ari_at_10 = s.final_ari == 0.0 ? 0.0 : 100.0 * at10 / s.final_ari;
    for (int i = 0; i < t; ++i) {
        if (!s.first_round_ari_90 && ari_series[static_cast<std::size_t>(i)] >= 0.9)
            s.first_round_ari_90 = i + 1;
        if (!s.rounds_to_full_recovery && ari_series[static_cast<std::size_t>(i)] == 1.0)
            s.rounds_to_full_recovery = i + 1;
    }
    return s;
}

}  // namespace clove
