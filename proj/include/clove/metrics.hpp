#pragma once

#include <optional>
#include <vector>

#include "clove/matching.hpp"
#include "clove/types.hpp"

namespace clove {

/// Adjusted Rand Index between two partitions given as label vectors.
/// 1 iff the partitions are identical up to relabeling; symmetric; invariant
/// to label permutation. Degenerate case (chance-corrected denominator 0):
/// 1 for identical partitions, 0 otherwise.
double ari(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

struct ModelDistances {
    std::vector<double> distances;  // per model, under the matched bijection
    Permutation model_to_optimum;

    double max() const {
        double m = 0.0;
        for (double d : distances) m = std::max(m, d);
        return m;
    }
};

/// Distance of each model to its optimum under the cost-minimizing
/// model-to-optimum bijection (models are exchangeable).
ModelDistances model_distances(const std::vector<ModelParams>& models,
                               const TrueWorld& world);

struct SeparationCheck {
    double delta_gap = 0.0;            // min over clients of (2nd best - best)
    double min_cross_distance = 0.0;   // min row distance across argmin groups
    bool holds = false;                // min_cross_distance >= sqrt(2) * delta_gap
};

/// Diagnostic for the loss-gap separation property: clients whose best models
/// differ must have loss vectors at least sqrt(2) * delta apart. With no
/// cross pair, min_cross_distance is +infinity and the check holds vacuously.
SeparationCheck loss_gap_separation_check(const Matrix& loss_matrix);

struct ConvergenceStats {
    double pct_final_ari_at_10 = 0.0;
    std::optional<int> first_round_ari_90;       // 1-based
    double final_ari = 0.0;
    std::optional<int> rounds_to_full_recovery;  // 1-based, first ARI == 1.0
};

ConvergenceStats convergence_stats(const std::vector<double>& ari_series);

}  // namespace clove
