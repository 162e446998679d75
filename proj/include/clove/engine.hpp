#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clove/cluster.hpp"
#include "clove/datagen.hpp"
#include "clove/matching.hpp"
#include "clove/types.hpp"

namespace clove {

enum class Algorithm { CLoVE, IFCA, FedAvg, LocalOnly, KFedLite };
enum class Averaging { ModelAvg, GradAvg };
enum class Embedding { Loss, SqrtLoss };
enum class Clusterer { KMeans, Agglomerative };
enum class MatchingRule { MinCost, Ordered, Overlap };
enum class InitPolicy { Orthonormal, SameRandom, IndependentRandom };
enum class FirstRound { Evaluate, Random };

struct FederationConfig {
    Algorithm algorithm = Algorithm::CLoVE;
    int k_models = 1;
    int rounds = 1;        // T
    int local_epochs = 1;  // tau
    double lr = 1e-3;
    int batch_size = 100;
    Averaging averaging = Averaging::ModelAvg;
    Embedding embedding = Embedding::Loss;
    Clusterer clusterer = Clusterer::KMeans;
    MatchingRule matching = MatchingRule::MinCost;
    InitPolicy init = InitPolicy::Orthonormal;
    FirstRound first_round_assignment = FirstRound::Evaluate;
    double participation_fraction = 1.0;
    uint64_t seed = 0;
};

/// Checks config invariants; FedAvg normalizes k_models to 1.
void validate_federation(FederationConfig& cfg, const TaskSpec& task);

struct RoundRecord {
    int round = 0;                     // 1-based
    std::vector<int> assignment;       // latest per-client model index (-1 = never)
    std::vector<int> group_sizes;      // per-model participating client counts
    double ari = 0.0;
    double mean_test_loss = 0.0;
    std::optional<double> test_accuracy;
    std::optional<std::vector<double>> model_distances;
    bool degenerate_clustering = false;
    int64_t wall_ms = 0;
};

/// Everything the federation loop needs about one synthetic world:
/// training data (resampleable per round), held-out test data, ground truth.
struct SimWorld {
    WorldConfig cfg;
    std::optional<SkewSpec> skew;
    std::vector<ClientDataset> initial_train;  // round-1 data
    std::vector<ClientDataset> test;
    std::vector<int> true_assignment;
    std::optional<TrueWorld> linear_truth;
    std::optional<SoftmaxWorld> softmax_world;
    std::optional<SubspaceWorld> subspace_world;

    const TaskSpec& task() const { return cfg.task; }
    int clients() const { return cfg.total_clients(); }
    std::vector<ClientDataset> round_data(int round) const;
};

SimWorld build_sim_world(const WorldConfig& cfg,
                         const std::optional<SkewSpec>& skew = std::nullopt);

// --- federation steps -------------------------------------------------------

/// K initial models. Orthonormal: rows of an orthonormalized seeded Gaussian
/// matrix. SameRandom: one seeded N(0, 1/p) vector copied K times.
/// IndependentRandom: K independent such vectors.
std::vector<ModelParams> init_models(const FederationConfig& cfg, const TaskSpec& task);

/// Loss matrix over the given clients: row i, column j = loss of model j on
/// client i's data, optionally sqrt-transformed. Row order follows `clients`.
Matrix collect_loss_matrix(const std::vector<ModelParams>& models,
                           const std::vector<const ClientDataset*>& clients,
                           const TaskSpec& task, Embedding embedding);

/// Clustering step: group loss-vector rows into K clusters, match clusters to
/// models, return per-row model index. `raw_losses` must be untransformed;
/// the embedding transform applies to clustering only, matching costs stay in
/// loss units. Degenerate clustering (fewer than K non-empty groups) falls
/// back to ordered assignment over the available groups.
std::vector<int> clove_assign(const Matrix& raw_losses, const FederationConfig& cfg,
                              const std::vector<int>* prev_assignment, int round,
                              bool* degenerate = nullptr);

/// Per-row argmin model, ties to the lowest index.
std::vector<int> ifca_assign(const Matrix& losses);

struct ClientPayload {
    int client_id = 0;
    std::size_t n = 0;
    std::vector<double> values;  // updated params (ModelAvg) or gradient (GradAvg)
};

/// Weighted aggregation of client payloads into the K models; weights n_i,
/// summation in payload order (callers keep ascending client id). Models with
/// no contributors are returned unchanged. GradAvg steps by -lr * average.
std::vector<ModelParams> aggregate(Averaging option,
                                   const std::vector<ModelParams>& models,
                                   const std::vector<ClientPayload>& payloads,
                                   const std::vector<int>& payload_assignment,
                                   double lr);

// --- driving loops ----------------------------------------------------------

struct EngineState {
    std::vector<ModelParams> models;
    std::vector<int> last_assignment;  // all clients; -1 until first participation
    int round = 1;
};

/// One federated round (CLoVE / IFCA / FedAvg): participation sampling, loss
/// collection, assignment, local compute, aggregation, telemetry.
RoundRecord run_round(EngineState& state, const SimWorld& sim,
                      const FederationConfig& cfg);

struct FederationResult {
    std::vector<RoundRecord> records;
    std::vector<ModelParams> final_models;      // K models (per-client for LocalOnly)
    std::vector<double> ari_series;
};

/// Runs the configured algorithm for cfg.rounds rounds (LocalOnly and
/// KFedLite produce their own record shapes).
FederationResult run_federation(const SimWorld& sim, const FederationConfig& cfg);

/// tau * T epochs of purely local training per client, no communication.
std::vector<ModelParams> run_local_only(const SimWorld& sim, const FederationConfig& cfg);

/// One-shot clustering baseline: local k-means per client on raw features,
/// server k-means over the pooled centers, client label by majority vote.
std::vector<int> run_kfed_lite(const std::vector<ClientDataset>& clients,
                               const TaskSpec& task, int k, int k_local,
                               uint64_t seed);

}  // namespace clove
