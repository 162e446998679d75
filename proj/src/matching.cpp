#include "clove/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace clove {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Hungarian algorithm with potentials on the submatrix formed by the row
// suffix [row_start, K) and the given column subset. Returns the optimal
// assignment cost only.
double hungarian_value(const Matrix& costs, std::size_t row_start,
                       const std::vector<int>& cols) {
    const int n = static_cast<int>(cols.size());
    if (n == 0) return 0.0;
    auto cost = [&](int i, int j) {
        return costs.at(row_start + static_cast<std::size_t>(i),
                        static_cast<std::size_t>(cols[static_cast<std::size_t>(j)]));
    };

    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            int i0 = p[j0], j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    double total = 0.0;
    for (int j = 1; j <= n; ++j) total += cost(p[j] - 1, j - 1);
    return total;
}

}  // namespace

Matrix build_cost_matrix(const std::vector<int>& labels, const Matrix& loss_matrix,
                         CostMode mode, const std::vector<int>* prev_assignment) {
    const std::size_t m = loss_matrix.rows;
    const int k = static_cast<int>(loss_matrix.cols);
    if (labels.size() != m)
        throw std::invalid_argument("build_cost_matrix: labels/loss size mismatch");

    std::vector<std::size_t> group_sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) {
        if (l < 0 || l >= k)
            throw std::invalid_argument("build_cost_matrix: label out of range");
        ++group_sizes[static_cast<std::size_t>(l)];
    }
    for (std::size_t g = 0; g < group_sizes.size(); ++g)
        if (group_sizes[g] == 0)
            throw std::invalid_argument("build_cost_matrix: fewer than K non-empty groups");

    Matrix cost(static_cast<std::size_t>(k), static_cast<std::size_t>(k), 0.0);
    if (mode == CostMode::SumLoss) {
        for (std::size_t i = 0; i < m; ++i) {
            auto g = static_cast<std::size_t>(labels[i]);
            for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j)
                cost.at(g, j) += loss_matrix.at(i, j);
        }
    } else {
        if (!prev_assignment || prev_assignment->size() != m)
            throw std::invalid_argument("build_cost_matrix: overlap mode needs prev assignment");
        for (std::size_t i = 0; i < m; ++i) {
            int prev = (*prev_assignment)[i];
            if (prev < 0 || prev >= k) continue;
            cost.at(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(prev)) -= 1.0;
        }
    }
    return cost;
}

Permutation min_cost_matching(const Matrix& costs) {
    const std::size_t k = costs.rows;
    if (k == 0 || costs.cols != k)
        throw std::invalid_argument("min_cost_matching: matrix must be square and non-empty");
    if (!costs.all_finite())
        throw std::invalid_argument("min_cost_matching: non-finite cost");

    // Fix rows top-down, always taking the smallest column that still admits
    // an optimal completion: yields the lexicographically smallest argmin.
    Permutation pi(k, -1);
    std::vector<int> cols_left(k);
    std::iota(cols_left.begin(), cols_left.end(), 0);
    for (std::size_t r = 0; r < k; ++r) {
        double best_total = kInf;
        std::size_t best_idx = 0;
        for (std::size_t ci = 0; ci < cols_left.size(); ++ci) {
            std::vector<int> rest;
            rest.reserve(cols_left.size() - 1);
            for (std::size_t cj = 0; cj < cols_left.size(); ++cj)
                if (cj != ci) rest.push_back(cols_left[cj]);
            double total = costs.at(r, static_cast<std::size_t>(cols_left[ci])) +
                           hungarian_value(costs, r + 1, rest);
            if (total < best_total) {
                best_total = total;
                best_idx = ci;
            }
        }
        pi[r] = cols_left[best_idx];
        cols_left.erase(cols_left.begin() + static_cast<std::ptrdiff_t>(best_idx));
    }
    return pi;
}

double matching_cost(const Matrix& costs, const Permutation& pi) {
    double total = 0.0;
    for (std::size_t r = 0; r < costs.rows; ++r)
        total += costs.at(r, static_cast<std::size_t>(pi[r]));
    return total;
}

Permutation ordered_assignment(const std::vector<int>& labels) {
    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    std::vector<int> min_id(static_cast<std::size_t>(k),
                            std::numeric_limits<int>::max());
    for (std::size_t i = 0; i < labels.size(); ++i)
        min_id[static_cast<std::size_t>(labels[i])] =
            std::min(min_id[static_cast<std::size_t>(labels[i])], static_cast<int>(i));
    for (int g = 0; g < k; ++g)
        if (min_id[static_cast<std::size_t>(g)] == std::numeric_limits<int>::max())
            throw std::invalid_argument("ordered_assignment: empty group");

    std::vector<int> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return min_id[static_cast<std::size_t>(a)] < min_id[static_cast<std::size_t>(b)];
    });
    Permutation pi(static_cast<std::size_t>(k));
    for (int rank = 0; rank < k; ++rank)
        pi[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] = rank;
    return pi;
}

}  // namespace clove
