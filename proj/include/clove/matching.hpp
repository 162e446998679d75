#pragma once

#include <vector>

#include "clove/types.hpp"

namespace clove {

using Permutation = std::vector<int>;

enum class CostMode { SumLoss, Overlap };

/// K x K cost matrix from cluster labels and an M x K loss matrix.
/// SumLoss: cost(g, j) = sum of loss_matrix[i][j] over clients i in group g.
/// Overlap: cost(g, j) = -|{i in group g with prev_assignment[i] == j}|.
/// Throws when fewer than K groups are non-empty (degenerate clustering).
Matrix build_cost_matrix(const std::vector<int>& labels, const Matrix& loss_matrix,
                         CostMode mode,
                         const std::vector<int>* prev_assignment = nullptr);

/// Minimum-cost perfect matching of a square cost matrix (Hungarian solve).
/// Returns pi with pi[row] = column; among cost ties the lexicographically
/// smallest permutation is returned.
Permutation min_cost_matching(const Matrix& costs);

/// Total cost of a permutation, summed in row order.
double matching_cost(const Matrix& costs, const Permutation& pi);

/// Assigns the group with the g-th smallest minimum client id to model g.
Permutation ordered_assignment(const std::vector<int>& labels);

}  // namespace clove
