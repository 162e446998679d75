#include "clove/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "clove/metrics.hpp"
#include "clove/task.hpp"

namespace clove {

namespace {

std::vector<double> scaled_gaussian(int p, double scale, RngStream& rng) {
    std::vector<double> v(static_cast<std::size_t>(p));
    for (double& x : v) x = scale * rng.normal();
    return v;
}

// participating client ids for a round: ceil(f*M) sampled without replacement
std::vector<int> sample_participants(const SimWorld& sim, const FederationConfig& cfg,
                                     int round) {
    const int m = sim.clients();
    int count = static_cast<int>(
        std::ceil(cfg.participation_fraction * static_cast<double>(m)));
    count = std::clamp(count, 1, m);
    std::vector<int> ids(static_cast<std::size_t>(m));
    std::iota(ids.begin(), ids.end(), 0);
    if (count < m) {
        RngStream rng(cfg.seed, {stream::kParticipation, static_cast<uint64_t>(round)});
        for (int i = 0; i < count; ++i) {
            std::size_t j = static_cast<std::size_t>(i) +
                            rng.uniform_index(static_cast<std::size_t>(m - i));
            std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
        }
        ids.resize(static_cast<std::size_t>(count));
        std::sort(ids.begin(), ids.end());
    }
    return ids;
}

double mean_test_loss(const SimWorld& sim, const std::vector<ModelParams>& models,
                      const std::vector<int>& assignment) {
    double total = 0.0;
    for (int c = 0; c < sim.clients(); ++c) {
        int model = assignment[static_cast<std::size_t>(c)];
        if (model < 0) model = 0;
        total += loss(sim.task(), models[static_cast<std::size_t>(model)],
                      sim.test[static_cast<std::size_t>(c)]);
    }
    return total / static_cast<double>(sim.clients());
}

std::optional<double> mean_test_accuracy(const SimWorld& sim,
                                         const std::vector<ModelParams>& models,
                                         const std::vector<int>& assignment) {
    if (sim.task().kind != TaskKind::SoftmaxRegression) return std::nullopt;
    double total = 0.0;
    for (int c = 0; c < sim.clients(); ++c) {
        int model = assignment[static_cast<std::size_t>(c)];
        if (model < 0) model = 0;
        total += classification_accuracy(sim.task(),
                                         models[static_cast<std::size_t>(model)],
                                         sim.test[static_cast<std::size_t>(c)]);
    }
    return total / static_cast<double>(sim.clients());
}

void fill_telemetry(RoundRecord& rec, const SimWorld& sim, const EngineState& state,
                    int k_models, const std::vector<int>& round_assignment) {
    rec.assignment = state.last_assignment;
    rec.group_sizes.assign(static_cast<std::size_t>(k_models), 0);
    for (int a : round_assignment) ++rec.group_sizes[static_cast<std::size_t>(a)];
    rec.ari = ari(state.last_assignment, sim.true_assignment);
    rec.mean_test_loss = mean_test_loss(sim, state.models, state.last_assignment);
    rec.test_accuracy = mean_test_accuracy(sim, state.models, state.last_assignment);
    if (sim.linear_truth && sim.linear_truth->k() == k_models)
        rec.model_distances = model_distances(state.models, *sim.linear_truth).distances;
}

}  // namespace

std::vector<ClientDataset> SimWorld::round_data(int round) const {
    if (round <= 1 || !cfg.fresh_data_per_round) return initial_train;
    if (linear_truth) return resample_round_data(*linear_truth, cfg, round);
    if (softmax_world) return softmax_round_data(*softmax_world, cfg, round);
    return autoencoder_round_data(*subspace_world, cfg, round);
}

SimWorld build_sim_world(const WorldConfig& cfg, const std::optional<SkewSpec>& skew) {
    SimWorld sim;
    sim.cfg = cfg;
    sim.skew = skew;
    switch (cfg.task.kind) {
        case TaskKind::LinearRegression: {
            auto [world, data] = gen_mixed_linear(cfg);
            sim.test = gen_linear_test_data(world, cfg);
            sim.true_assignment = world.assignment;
            sim.initial_train = std::move(data);
            sim.linear_truth = std::move(world);
            break;
        }
        case TaskKind::SoftmaxRegression: {
            if (!skew)
                throw std::invalid_argument("softmax world requires a skew spec");
            auto [world, data] = gen_softmax_world(cfg, *skew);
            sim.test = gen_softmax_test_data(world, cfg);
            sim.true_assignment = world.assignment;
            sim.initial_train = std::move(data);
            sim.softmax_world = std::move(world);
            break;
        }
        case TaskKind::LinearAutoencoder: {
            auto [world, data] = gen_autoencoder_world(cfg);
            sim.test = gen_autoencoder_test_data(world, cfg);
            sim.true_assignment = world.assignment;
            sim.initial_train = std::move(data);
            sim.subspace_world = std::move(world);
            break;
        }
    }
    return sim;
}

void validate_federation(FederationConfig& cfg, const TaskSpec& task) {
    if (cfg.algorithm == Algorithm::FedAvg) cfg.k_models = 1;
    if (cfg.k_models < 1) throw std::invalid_argument("federation: K_models must be >= 1");
    if (cfg.rounds < 1) throw std::invalid_argument("federation: rounds must be >= 1");
    if (cfg.local_epochs < 1) throw std::invalid_argument("federation: local_epochs must be >= 1");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("federation: lr must be > 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("federation: batch_size must be >= 1");
    if (!(cfg.participation_fraction > 0.0) || cfg.participation_fraction > 1.0)
        throw std::invalid_argument("federation: participation_fraction must be in (0, 1]");
    if (cfg.init == InitPolicy::Orthonormal && cfg.k_models > task.param_dim())
        throw std::invalid_argument("federation: orthonormal init needs K <= param dim");
}

std::vector<ModelParams> init_models(const FederationConfig& cfg, const TaskSpec& task) {
    const int p = task.param_dim();
    const int k = cfg.k_models;
    RngStream rng(cfg.seed, {stream::kInit});
    std::vector<ModelParams> models;
    models.reserve(static_cast<std::size_t>(k));

    switch (cfg.init) {
        case InitPolicy::Orthonormal: {
            if (k > p)
                throw std::invalid_argument("init_models: orthonormal needs K <= param dim");
            // modified Gram-Schmidt with one reorthogonalization pass
            for (int i = 0; i < k; ++i) {
                std::vector<double> v = scaled_gaussian(p, 1.0, rng);
                for (int pass = 0; pass < 2; ++pass) {
                    for (int j = 0; j < i; ++j) {
                        const auto& u = models[static_cast<std::size_t>(j)].values;
                        double dot = 0.0;
                        for (int t = 0; t < p; ++t)
                            dot += v[static_cast<std::size_t>(t)] * u[static_cast<std::size_t>(t)];
                        for (int t = 0; t < p; ++t)
                            v[static_cast<std::size_t>(t)] -= dot * u[static_cast<std::size_t>(t)];
                    }
                }
                double norm = std::sqrt(squared_norm(v));
                for (double& x : v) x /= norm;
                models.emplace_back(std::move(v));
            }
            break;
        }
        case InitPolicy::SameRandom: {
            ModelParams one(scaled_gaussian(p, 1.0 / std::sqrt(static_cast<double>(p)), rng));
            models.assign(static_cast<std::size_t>(k), one);
            break;
        }
        case InitPolicy::IndependentRandom: {
            for (int i = 0; i < k; ++i)
                models.emplace_back(
                    scaled_gaussian(p, 1.0 / std::sqrt(static_cast<double>(p)), rng));
            break;
        }
    }
    return models;
}

Matrix collect_loss_matrix(const std::vector<ModelParams>& models,
                           const std::vector<const ClientDataset*>& clients,
                           const TaskSpec& task, Embedding embedding) {
    if (models.empty()) throw std::invalid_argument("collect_loss_matrix: no models");
    Matrix out(clients.size(), models.size());
    for (std::size_t i = 0; i < clients.size(); ++i)
        for (std::size_t j = 0; j < models.size(); ++j) {
            double l = loss(task, models[j], *clients[i]);
            out.at(i, j) = embedding == Embedding::SqrtLoss ? std::sqrt(l) : l;
        }
    return out;
}

std::vector<int> clove_assign(const Matrix& raw_losses, const FederationConfig& cfg,
                              const std::vector<int>* prev_assignment, int round,
                              bool* degenerate) {
    const std::size_t m = raw_losses.rows;
    const int k = static_cast<int>(raw_losses.cols);
    if (degenerate) *degenerate = false;
    if (static_cast<int>(m) < k)
        throw std::invalid_argument("clove_assign: fewer participants than models");

    if (round == 1 && cfg.first_round_assignment == FirstRound::Random) {
        RngStream rng(cfg.seed, {stream::kFirstRandom});
        std::vector<int> assignment(m);
        for (auto& a : assignment) a = static_cast<int>(rng.uniform_index(
            static_cast<std::size_t>(k)));
        return assignment;
    }

    Matrix points = raw_losses;
    if (cfg.embedding == Embedding::SqrtLoss)
        for (double& v : points.data) v = std::sqrt(v);

    ClusterResult clusters;
    if (cfg.clusterer == Clusterer::KMeans) {
        RngStream rng(cfg.seed, {stream::kCluster, static_cast<uint64_t>(round)});
        clusters = kmeans(points, k, rng);
    } else {
        clusters = agglomerative(points, k);
    }

    std::vector<std::size_t> group_sizes(static_cast<std::size_t>(k), 0);
    for (int l : clusters.labels) ++group_sizes[static_cast<std::size_t>(l)];
    const bool full = std::all_of(group_sizes.begin(), group_sizes.end(),
                                  [](std::size_t s) { return s > 0; });

    Permutation group_to_model;
    if (!full) {
        // degenerate clustering: ordered assignment over non-empty groups,
        // remaining models untouched
        if (degenerate) *degenerate = true;
        std::vector<int> present;
        for (int g = 0; g < k; ++g)
            if (group_sizes[static_cast<std::size_t>(g)] > 0) present.push_back(g);
        std::vector<int> compact(clusters.labels.size());
        for (std::size_t i = 0; i < clusters.labels.size(); ++i)
            compact[i] = static_cast<int>(
                std::lower_bound(present.begin(), present.end(), clusters.labels[i]) -
                present.begin());
        Permutation compact_perm = ordered_assignment(compact);
        group_to_model.assign(static_cast<std::size_t>(k), 0);
        for (std::size_t ci = 0; ci < present.size(); ++ci)
            group_to_model[static_cast<std::size_t>(present[ci])] = compact_perm[ci];
    } else if (cfg.matching == MatchingRule::Ordered) {
        group_to_model = ordered_assignment(clusters.labels);
    } else if (cfg.matching == MatchingRule::Overlap && prev_assignment) {
        Matrix cost = build_cost_matrix(clusters.labels, raw_losses, CostMode::Overlap,
                                        prev_assignment);
        group_to_model = min_cost_matching(cost);
    } else {
        Matrix cost = build_cost_matrix(clusters.labels, raw_losses, CostMode::SumLoss);
        group_to_model = min_cost_matching(cost);
    }

    std::vector<int> assignment(m);
    for (std::size_t i = 0; i < m; ++i)
        assignment[i] = group_to_model[static_cast<std::size_t>(clusters.labels[i])];
    return assignment;
}

std::vector<int> ifca_assign(const Matrix& losses) {
    std::vector<int> assignment(losses.rows);
    for (std::size_t i = 0; i < losses.rows; ++i) {
        auto row = losses.row(i);
        int best = 0;
        for (std::size_t j = 1; j < row.size(); ++j)
            if (row[j] < row[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
        assignment[i] = best;
    }
    return assignment;
}

std::vector<ModelParams> aggregate(Averaging option,
                                   const std::vector<ModelParams>& models,
                                   const std::vector<ClientPayload>& payloads,
                                   const std::vector<int>& payload_assignment,
                                   double lr) {
    if (payloads.size() != payload_assignment.size())
        throw std::invalid_argument("aggregate: payload/assignment size mismatch");
    const std::size_t k = models.size();
    const std::size_t p = models.empty() ? 0 : models[0].size();

    std::vector<std::vector<double>> sums(k, std::vector<double>(p, 0.0));
    std::vector<double> weights(k, 0.0);
    for (std::size_t i = 0; i < payloads.size(); ++i) {
        int j = payload_assignment[i];
        if (j < 0 || j >= static_cast<int>(k))
            throw std::invalid_argument("aggregate: assignment out of range");
        if (payloads[i].values.size() != p)
            throw std::invalid_argument("aggregate: payload dimension mismatch");
        double w = static_cast<double>(payloads[i].n);
        auto& dst = sums[static_cast<std::size_t>(j)];
        for (std::size_t t = 0; t < p; ++t) dst[t] += w * payloads[i].values[t];
        weights[static_cast<std::size_t>(j)] += w;
    }

    std::vector<ModelParams> next = models;  // empty groups stay unchanged
    for (std::size_t j = 0; j < k; ++j) {
        if (weights[j] == 0.0) continue;
        if (option == Averaging::ModelAvg) {
            for (std::size_t t = 0; t < p; ++t) next[j].values[t] = sums[j][t] / weights[j];
        } else {
            for (std::size_t t = 0; t < p; ++t)
                next[j].values[t] = models[j].values[t] - lr * (sums[j][t] / weights[j]);
        }
    }
    return next;
}

RoundRecord run_round(EngineState& state, const SimWorld& sim,
                      const FederationConfig& cfg) {
    if (cfg.algorithm == Algorithm::LocalOnly || cfg.algorithm == Algorithm::KFedLite)
        throw std::invalid_argument("run_round: algorithm has no federated round");
    const auto t0 = std::chrono::steady_clock::now();
    const int round = state.round;

    std::vector<int> participants = sample_participants(sim, cfg, round);
    std::vector<ClientDataset> data = sim.round_data(round);
    std::vector<const ClientDataset*> active;
    active.reserve(participants.size());
    for (int id : participants) active.push_back(&data[static_cast<std::size_t>(id)]);

    Matrix raw = collect_loss_matrix(state.models, active, sim.task(), Embedding::Loss);

    RoundRecord rec;
    rec.round = round;
    std::vector<int> assignment;
    switch (cfg.algorithm) {
        case Algorithm::CLoVE: {
            std::vector<int> prev_active(participants.size());
            for (std::size_t i = 0; i < participants.size(); ++i)
                prev_active[i] =
                    state.last_assignment[static_cast<std::size_t>(participants[i])];
            assignment = clove_assign(raw, cfg, round > 1 ? &prev_active : nullptr,
                                      round, &rec.degenerate_clustering);
            break;
        }
        case Algorithm::IFCA: {
            if (round == 1 && cfg.first_round_assignment == FirstRound::Random) {
                RngStream rng(cfg.seed, {stream::kFirstRandom});
                assignment.resize(participants.size());
                for (auto& a : assignment)
                    a = static_cast<int>(
                        rng.uniform_index(static_cast<std::size_t>(cfg.k_models)));
            } else {
                assignment = ifca_assign(raw);
            }
            break;
        }
        default:  // FedAvg
            assignment.assign(participants.size(), 0);
            break;
    }

    std::vector<ClientPayload> payloads(participants.size());
    for (std::size_t i = 0; i < participants.size(); ++i) {
        const int id = participants[i];
        const ClientDataset& ds = *active[i];
        const ModelParams& model = state.models[static_cast<std::size_t>(assignment[i])];
        ClientPayload& pl = payloads[i];
        pl.client_id = id;
        pl.n = ds.n();
        if (cfg.averaging == Averaging::ModelAvg) {
            RngStream rng(cfg.seed, {stream::kLocalShuffle, static_cast<uint64_t>(round),
                                     static_cast<uint64_t>(id)});
            int batch = std::min<int>(cfg.batch_size, static_cast<int>(ds.n()));
            pl.values = local_update(sim.task(), model, ds, cfg.lr, cfg.local_epochs,
                                     batch, rng)
                            .values;
        } else {
            pl.values = gradient(sim.task(), model, ds);
        }
    }

    state.models = aggregate(cfg.averaging, state.models, payloads, assignment, cfg.lr);
    for (std::size_t i = 0; i < participants.size(); ++i)
        state.last_assignment[static_cast<std::size_t>(participants[i])] = assignment[i];
    state.round = round + 1;

    fill_telemetry(rec, sim, state, cfg.k_models, assignment);
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return rec;
}

FederationResult run_federation(const SimWorld& sim, const FederationConfig& cfg_in) {
    FederationConfig cfg = cfg_in;
    validate_federation(cfg, sim.task());
    FederationResult result;

    if (cfg.algorithm == Algorithm::LocalOnly) {
        // per-round telemetry of independent local trajectories
        std::vector<ModelParams> models;
        models.reserve(static_cast<std::size_t>(sim.clients()));
        const int p = sim.task().param_dim();
        for (int c = 0; c < sim.clients(); ++c) {
            RngStream rng(cfg.seed, {stream::kLocalOnlyInit, static_cast<uint64_t>(c)});
            models.emplace_back(
                scaled_gaussian(p, 1.0 / std::sqrt(static_cast<double>(p)), rng));
        }
        std::vector<int> singleton(static_cast<std::size_t>(sim.clients()));
        std::iota(singleton.begin(), singleton.end(), 0);
        for (int t = 1; t <= cfg.rounds; ++t) {
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<ClientDataset> data = sim.round_data(t);
            for (int c = 0; c < sim.clients(); ++c) {
                const ClientDataset& ds = data[static_cast<std::size_t>(c)];
                RngStream rng(cfg.seed, {stream::kLocalShuffle, static_cast<uint64_t>(t),
                                         static_cast<uint64_t>(c)});
                int batch = std::min<int>(cfg.batch_size, static_cast<int>(ds.n()));
                models[static_cast<std::size_t>(c)] =
                    local_update(sim.task(), models[static_cast<std::size_t>(c)], ds,
                                 cfg.lr, cfg.local_epochs, batch, rng);
            }
            RoundRecord rec;
            rec.round = t;
            rec.assignment = singleton;
            rec.group_sizes.assign(static_cast<std::size_t>(sim.clients()), 1);
            rec.ari = ari(singleton, sim.true_assignment);
            double total = 0.0, acc = 0.0;
            for (int c = 0; c < sim.clients(); ++c) {
                total += loss(sim.task(), models[static_cast<std::size_t>(c)],
                              sim.test[static_cast<std::size_t>(c)]);
                if (sim.task().kind == TaskKind::SoftmaxRegression)
                    acc += classification_accuracy(sim.task(),
                                                   models[static_cast<std::size_t>(c)],
                                                   sim.test[static_cast<std::size_t>(c)]);
            }
            rec.mean_test_loss = total / static_cast<double>(sim.clients());
            if (sim.task().kind == TaskKind::SoftmaxRegression)
                rec.test_accuracy = acc / static_cast<double>(sim.clients());
            rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
            result.ari_series.push_back(rec.ari);
            result.records.push_back(std::move(rec));
        }
        result.final_models = std::move(models);
        return result;
    }

    if (cfg.algorithm == Algorithm::KFedLite) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<int> labels = run_kfed_lite(sim.initial_train, sim.task(),
                                                cfg.k_models, cfg.k_models, cfg.seed);
        RoundRecord rec;
        rec.round = 1;
        rec.assignment = labels;
        rec.group_sizes.assign(static_cast<std::size_t>(cfg.k_models), 0);
        for (int l : labels) ++rec.group_sizes[static_cast<std::size_t>(l)];
        rec.ari = ari(labels, sim.true_assignment);
        rec.mean_test_loss = std::numeric_limits<double>::quiet_NaN();
        rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        result.ari_series.push_back(rec.ari);
        result.records.push_back(std::move(rec));
        return result;
    }

    EngineState state;
    state.models = init_models(cfg, sim.task());
    state.last_assignment.assign(static_cast<std::size_t>(sim.clients()), -1);
    for (int t = 1; t <= cfg.rounds; ++t) {
        RoundRecord rec = run_round(state, sim, cfg);
        result.ari_series.push_back(rec.ari);
        result.records.push_back(std::move(rec));
    }
    result.final_models = std::move(state.models);
    return result;
}

std::vector<ModelParams> run_local_only(const SimWorld& sim,
                                        const FederationConfig& cfg_in) {
    FederationConfig cfg = cfg_in;
    cfg.algorithm = Algorithm::LocalOnly;
    return run_federation(sim, cfg).final_models;
}

std::vector<int> run_kfed_lite(const std::vector<ClientDataset>& clients,
                               const TaskSpec& task, int k, int k_local,
                               uint64_t seed) {
    if (k < 1) throw std::invalid_argument("run_kfed_lite: k must be >= 1");
    const std::size_t m = clients.size();
    if (k == 1) return std::vector<int>(m, 0);

    const std::size_t d = static_cast<std::size_t>(task.d);
    Matrix pooled(m * static_cast<std::size_t>(k_local), d);
    for (std::size_t c = 0; c < m; ++c) {
        int kl = std::min<int>(k_local, static_cast<int>(clients[c].n()));
        RngStream rng(seed, {stream::kKFedLocal, static_cast<uint64_t>(c)});
        ClusterResult local = kmeans(clients[c].features, kl, KMeansOptions{4, 50, 1e-6}, rng);
        for (int j = 0; j < k_local; ++j) {
            auto dst = pooled.row(c * static_cast<std::size_t>(k_local) +
                                  static_cast<std::size_t>(j));
            auto src = local.centers.row(static_cast<std::size_t>(std::min(j, kl - 1)));
            std::copy(src.begin(), src.end(), dst.begin());
        }
    }

    RngStream rng(seed, {stream::kKFedServer});
    ClusterResult server = kmeans(pooled, k, rng);

    std::vector<int> labels(m, 0);
    for (std::size_t c = 0; c < m; ++c) {
        std::vector<int> votes(static_cast<std::size_t>(k), 0);
        for (int j = 0; j < k_local; ++j)
            ++votes[static_cast<std::size_t>(
                server.labels[c * static_cast<std::size_t>(k_local) +
                              static_cast<std::size_t>(j)])];
        labels[c] = static_cast<int>(
            std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return labels;
}

}  // namespace clove
