#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clove/rng.hpp"
#include "clove/types.hpp"

namespace clove {

struct WorldConfig {
    TaskSpec task;
    int clusters = 1;            // K
    int clients_per_cluster = 1; // m
    int samples_per_client = 1;  // n
    double delta = 1.0;
    double sigma = 0.0;
    bool fresh_data_per_round = true;
    uint64_t seed = 0;

    int total_clients() const { return clusters * clients_per_cluster; }
};

void validate_world(const WorldConfig& cfg);

/// Mixed linear regression world: K unit-norm optima with pairwise distances
/// in [delta, 5*delta], and per-client i.i.d. samples y = <theta*, x> + eps.
/// Deterministic given cfg.seed. Throws when rejection sampling of the
/// optima exhausts its draw budget (default 10,000).
std::pair<TrueWorld, std::vector<ClientDataset>> gen_mixed_linear(const WorldConfig& cfg);

/// Fresh i.i.d. round data from the same per-cluster models; streams keyed by
/// (seed, round, client) so every round replays identically. Round 1 equals
/// the datasets returned by gen_mixed_linear.
std::vector<ClientDataset> resample_round_data(const TrueWorld& world,
                                               const WorldConfig& cfg, int round);

/// Held-out evaluation datasets, same size as training data.
std::vector<ClientDataset> gen_linear_test_data(const TrueWorld& world,
                                                const WorldConfig& cfg);

/// Sampler for the K optima alone (exposed for tests).
std::vector<ModelParams> sample_separated_optima(int k, int d, double delta,
                                                 RngStream& rng,
                                                 int draw_budget = 10000);

// ---------------------------------------------------------------------------
// Softmax worlds: shared class-conditional Gaussians (unit variance, mean =
// scaled one-hot prototype), with per-cluster class availability or label
// permutation per the skew.

struct SkewSpec {
    enum class Kind { DisjointLabels, OverlapLabels, ConceptShift, DominantClass };
    Kind kind = Kind::DisjointLabels;
    int labels_per_cluster = 2;  // u (disjoint) or U (overlap)
    int shared_labels = 0;       // V (overlap)
    double uniform_share = 1.0 / 3.0;  // dominant-class skew: fraction drawn from all classes
    // Concept shift: explicit per-cluster label permutations; empty selects
    // the default scheme of two cluster-unique pair swaps.
    std::vector<std::vector<int>> permutations;
};

struct SoftmaxWorld {
    std::vector<int> assignment;                   // client -> cluster
    int classes = 0;
    double proto_scale = 3.0;
    std::vector<std::vector<int>> cluster_classes; // available classes per cluster
    std::vector<std::vector<int>> label_maps;      // concept shift permutation per cluster
    Matrix client_class_weights;                   // M x C sampling distribution per client
};

std::pair<SoftmaxWorld, std::vector<ClientDataset>> gen_softmax_world(
    const WorldConfig& cfg, const SkewSpec& skew);

std::vector<ClientDataset> softmax_round_data(const SoftmaxWorld& world,
                                              const WorldConfig& cfg, int round);
std::vector<ClientDataset> gen_softmax_test_data(const SoftmaxWorld& world,
                                                 const WorldConfig& cfg);

// ---------------------------------------------------------------------------
// Autoencoder worlds: per-cluster data x = B_k z + sigma * noise with a
// cluster-specific random orthonormal rank-r basis B_k.

struct SubspaceWorld {
    std::vector<int> assignment;
    std::vector<Matrix> bases;  // K bases, each d x r
};

std::pair<SubspaceWorld, std::vector<ClientDataset>> gen_autoencoder_world(
    const WorldConfig& cfg);

std::vector<ClientDataset> autoencoder_round_data(const SubspaceWorld& world,
                                                  const WorldConfig& cfg, int round);
std::vector<ClientDataset> gen_autoencoder_test_data(const SubspaceWorld& world,
                                                     const WorldConfig& cfg);

// ---------------------------------------------------------------------------
// Dataset CSV exchange: header row, feature columns, then the target column
// for supervised data.

void save_dataset_csv(const ClientDataset& data, const std::string& path,
                      bool supervised);
ClientDataset load_dataset_csv(const std::string& path, bool supervised,
                               int client_id);

}  // namespace clove
