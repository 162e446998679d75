#pragma once

#include <vector>

#include "clove/rng.hpp"
#include "clove/types.hpp"

namespace clove {

/// Mean per-sample loss of `params` on `data`.
/// Squared error for linear regression, cross-entropy for softmax
/// regression, squared reconstruction error for the linear autoencoder.
double loss(const TaskSpec& task, const ModelParams& params, const ClientDataset& data);

/// Exact analytic gradient of loss() at `params`, length param_dim().
std::vector<double> gradient(const TaskSpec& task, const ModelParams& params,
                             const ClientDataset& data);

/// Runs `epochs` passes of mini-batch gradient descent and returns the new
/// parameters. Batch membership is reshuffled once per epoch from `rng`;
/// within a batch, per-sample gradients accumulate in ascending row order,
/// so a full batch with epochs=1 equals exactly params - lr * gradient().
ModelParams local_update(const TaskSpec& task, const ModelParams& params,
                         const ClientDataset& data, double lr, int epochs,
                         int batch_size, RngStream& rng);

/// Element-wise square root; rejects negative entries.
std::vector<double> sqrt_transform(const std::vector<double>& loss_vector);

/// Top-1 accuracy on a labeled dataset (softmax task only).
double classification_accuracy(const TaskSpec& task, const ModelParams& params,
                               const ClientDataset& data);

}  // namespace clove
