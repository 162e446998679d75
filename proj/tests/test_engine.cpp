#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "clove/engine.hpp"
#include "clove/metrics.hpp"
#include "clove/task.hpp"

using namespace clove;

namespace {

WorldConfig tiny_linear_world(int k = 2) {
    WorldConfig w;
    w.task = TaskSpec::linear_regression(12);
    w.clusters = k;
    w.clients_per_cluster = 4;
    w.samples_per_client = 150;
    w.delta = 1.0;
    w.sigma = 0.05;
    w.fresh_data_per_round = true;
    w.seed = 9;
    return w;
}

FederationConfig base_federation(int k) {
    FederationConfig f;
    f.algorithm = Algorithm::CLoVE;
    f.k_models = k;
    f.rounds = 5;
    f.local_epochs = 3;
    f.lr = 0.1;
    f.batch_size = 50;
    f.embedding = Embedding::SqrtLoss;
    f.init = InitPolicy::Orthonormal;
    f.seed = 9;
    return f;
}

}  // namespace

TEST_CASE("orthonormal init has an identity Gram matrix") {
    FederationConfig cfg = base_federation(4);
    cfg.k_models = 4;
    TaskSpec task = TaskSpec::linear_regression(10);
    auto models = init_models(cfg, task);
    REQUIRE(models.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double dot = 0.0;
            for (std::size_t t = 0; t < models[i].size(); ++t)
                dot += models[i][t] * models[j][t];
            CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-9);
        }
    cfg.k_models = 11;
    CHECK_THROWS_AS(init_models(cfg, task), std::invalid_argument);
}

TEST_CASE("same-random init copies one vector; independent differs") {
    TaskSpec task = TaskSpec::linear_regression(8);
    FederationConfig cfg = base_federation(3);
    cfg.init = InitPolicy::SameRandom;
    auto same = init_models(cfg, task);
    CHECK(same[0].values == same[1].values);
    CHECK(same[1].values == same[2].values);

    cfg.init = InitPolicy::IndependentRandom;
    auto indep = init_models(cfg, task);
    CHECK(indep[0].values != indep[1].values);
}

TEST_CASE("loss matrix equals composed per-client loss calls") {
    WorldConfig w = tiny_linear_world();
    SimWorld sim = build_sim_world(w);
    FederationConfig cfg = base_federation(2);
    auto models = init_models(cfg, sim.task());
    std::vector<const ClientDataset*> clients;
    for (const auto& ds : sim.initial_train) clients.push_back(&ds);

    Matrix m = collect_loss_matrix(models, clients, sim.task(), Embedding::Loss);
    for (std::size_t i = 0; i < clients.size(); ++i)
        for (std::size_t j = 0; j < models.size(); ++j)
            CHECK(m.at(i, j) == loss(sim.task(), models[j], *clients[i]));

    Matrix s = collect_loss_matrix(models, clients, sim.task(), Embedding::SqrtLoss);
    CHECK(s.at(0, 0) == std::sqrt(m.at(0, 0)));

    // identical models produce identical columns
    std::vector<ModelParams> twins = {models[0], models[0]};
    Matrix t = collect_loss_matrix(twins, clients, sim.task(), Embedding::Loss);
    for (std::size_t i = 0; i < clients.size(); ++i) CHECK(t.at(i, 0) == t.at(i, 1));
}

TEST_CASE("toy loss vectors: clove separates where ifca collapses") {
    Matrix losses(10, 2);
    for (std::size_t i = 0; i < 5; ++i) {
        losses.at(i, 0) = 1.0;
        losses.at(i, 1) = 5.1;
    }
    for (std::size_t i = 5; i < 10; ++i) {
        losses.at(i, 0) = 2.1;
        losses.at(i, 1) = 3.5;
    }

    std::vector<int> ifca = ifca_assign(losses);
    for (int a : ifca) CHECK(a == 0);  // every client picks the argmin model

    FederationConfig cfg = base_federation(2);
    cfg.embedding = Embedding::Loss;
    std::vector<int> clove = clove_assign(losses, cfg, nullptr, 2);
    std::vector<int> truth = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    CHECK(ari(clove, truth) == doctest::Approx(1.0));
    // min-cost matching sends the low-loss group to model 0
    CHECK(clove[0] == 0);
    CHECK(clove[5] == 1);
}

TEST_CASE("ifca argmin matches a per-row oracle and breaks ties low") {
    RngStream rng(12);
    Matrix losses(9, 4);
    for (double& v : losses.data) v = std::abs(rng.normal());
    auto got = ifca_assign(losses);
    for (std::size_t i = 0; i < losses.rows; ++i) {
        auto row = losses.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j)
            if (row[j] < row[best]) best = j;
        CHECK(got[i] == static_cast<int>(best));
    }
    Matrix tie(1, 3, 7.0);
    CHECK(ifca_assign(tie)[0] == 0);
}

TEST_CASE("clove_assign K=1 sends everyone to model 0") {
    Matrix losses(4, 1);
    for (double& v : losses.data) v = 1.0;
    FederationConfig cfg = base_federation(1);
    for (int a : clove_assign(losses, cfg, nullptr, 1)) CHECK(a == 0);
}

TEST_CASE("aggregate: weighted mean, one-client group, empty group") {
    std::vector<ModelParams> models = {ModelParams(2, 9.0), ModelParams(2, -3.0)};
    std::vector<ClientPayload> payloads(2);
    payloads[0] = {0, 100, {0.0, 0.0}};
    payloads[1] = {1, 300, {4.0, 4.0}};
    std::vector<int> assignment = {0, 0};

    auto next = aggregate(Averaging::ModelAvg, models, payloads, assignment, 0.1);
    CHECK(next[0].values == std::vector<double>{3.0, 3.0});
    CHECK(next[1].values == models[1].values);  // empty group untouched

    std::vector<int> split = {0, 1};
    auto single = aggregate(Averaging::ModelAvg, models, payloads, split, 0.1);
    CHECK(single[0].values == payloads[0].values);
    CHECK(single[1].values == payloads[1].values);

    // gradient averaging steps against the weighted mean gradient
    auto grad = aggregate(Averaging::GradAvg, models, payloads, assignment, 0.5);
    CHECK(grad[0].values[0] == doctest::Approx(9.0 - 0.5 * 3.0));
    CHECK(grad[1].values == models[1].values);

    CHECK_THROWS_AS(aggregate(Averaging::ModelAvg, models, payloads, {0, 5}, 0.1),
                    std::invalid_argument);
}

TEST_CASE("aggregated model is a convex combination of payloads") {
    RngStream rng(15);
    std::vector<ModelParams> models = {ModelParams(3, 0.0)};
    std::vector<ClientPayload> payloads;
    std::vector<int> assignment;
    double weight_total = 0.0;
    for (int i = 0; i < 5; ++i) {
        ClientPayload p;
        p.client_id = i;
        p.n = 10 + static_cast<std::size_t>(rng.uniform_index(90));
        p.values = {rng.normal(), rng.normal(), rng.normal()};
        weight_total += static_cast<double>(p.n);
        payloads.push_back(p);
        assignment.push_back(0);
    }
    auto next = aggregate(Averaging::ModelAvg, models, payloads, assignment, 0.1);
    for (std::size_t t = 0; t < 3; ++t) {
        double expect = 0.0;
        for (const auto& p : payloads)
            expect += static_cast<double>(p.n) / weight_total * p.values[t];
        CHECK(next[0].values[t] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("clove with K=1 matches fedavg bitwise over 20 rounds") {
    WorldConfig w = tiny_linear_world(1);
    SimWorld sim = build_sim_world(w);

    FederationConfig clove_cfg = base_federation(1);
    clove_cfg.rounds = 20;
    FederationConfig fedavg_cfg = clove_cfg;
    fedavg_cfg.algorithm = Algorithm::FedAvg;

    EngineState a{init_models(clove_cfg, sim.task()),
                  std::vector<int>(static_cast<std::size_t>(sim.clients()), -1), 1};
    EngineState b = a;
    for (int t = 1; t <= 20; ++t) {
        run_round(a, sim, clove_cfg);
        run_round(b, sim, fedavg_cfg);
        REQUIRE(a.models.size() == b.models.size());
        for (std::size_t k = 0; k < a.models.size(); ++k)
            CHECK(a.models[k].values == b.models[k].values);  // bitwise
    }
}

TEST_CASE("same seed replays an identical record stream") {
    WorldConfig w = tiny_linear_world();
    SimWorld sim = build_sim_world(w);
    FederationConfig cfg = base_federation(2);
    cfg.participation_fraction = 0.75;

    FederationResult r1 = run_federation(sim, cfg);
    FederationResult r2 = run_federation(sim, cfg);
    REQUIRE(r1.records.size() == r2.records.size());
    for (std::size_t t = 0; t < r1.records.size(); ++t) {
        CHECK(r1.records[t].assignment == r2.records[t].assignment);
        CHECK(r1.records[t].ari == r2.records[t].ari);
        CHECK(r1.records[t].mean_test_loss == r2.records[t].mean_test_loss);
        CHECK(r1.records[t].group_sizes == r2.records[t].group_sizes);
    }
    for (std::size_t k = 0; k < r1.final_models.size(); ++k)
        CHECK(r1.final_models[k].values == r2.final_models[k].values);
}

TEST_CASE("participation fraction bounds the per-round group sizes") {
    WorldConfig w = tiny_linear_world();
    SimWorld sim = build_sim_world(w);
    FederationConfig cfg = base_federation(2);
    cfg.participation_fraction = 0.5;
    cfg.rounds = 4;
    FederationResult res = run_federation(sim, cfg);
    for (const auto& rec : res.records) {
        int active = std::accumulate(rec.group_sizes.begin(), rec.group_sizes.end(), 0);
        CHECK(active == 4);  // ceil(0.5 * 8) participants each round
    }

    cfg.participation_fraction = 1.0;
    FederationResult full = run_federation(sim, cfg);
    int active = std::accumulate(full.records[0].group_sizes.begin(),
                                 full.records[0].group_sizes.end(), 0);
    CHECK(active == 8);
}

TEST_CASE("same-random init: round-1 clove groups by cluster, ifca collapses") {
    WorldConfig w = tiny_linear_world(3);
    w.clients_per_cluster = 5;
    SimWorld sim = build_sim_world(w);

    FederationConfig cfg = base_federation(3);
    cfg.init = InitPolicy::SameRandom;
    cfg.rounds = 1;
    FederationResult clove_run = run_federation(sim, cfg);
    CHECK(clove_run.records[0].ari == doctest::Approx(1.0));

    FederationConfig icfg = cfg;
    icfg.algorithm = Algorithm::IFCA;
    FederationResult ifca_run = run_federation(sim, icfg);
    for (int a : ifca_run.records[0].assignment) CHECK(a == 0);
    CHECK(ifca_run.records[0].ari == doctest::Approx(0.0));
}

TEST_CASE("local-only trajectories are independent and match composition") {
    WorldConfig w = tiny_linear_world();
    w.fresh_data_per_round = false;
    SimWorld sim = build_sim_world(w);
    FederationConfig cfg = base_federation(2);
    cfg.algorithm = Algorithm::LocalOnly;
    cfg.rounds = 3;

    auto finals = run_local_only(sim, cfg);
    REQUIRE(finals.size() == static_cast<std::size_t>(sim.clients()));

    // composition oracle: T rounds of tau epochs from the same init
    for (int c : {0, 5}) {
        RngStream init_rng(cfg.seed, {stream::kLocalOnlyInit, static_cast<uint64_t>(c)});
        ModelParams model(static_cast<std::size_t>(sim.task().param_dim()));
        for (double& v : model.values)
            v = init_rng.normal() / std::sqrt(static_cast<double>(sim.task().param_dim()));
        for (int t = 1; t <= cfg.rounds; ++t) {
            RngStream rng(cfg.seed, {stream::kLocalShuffle, static_cast<uint64_t>(t),
                                     static_cast<uint64_t>(c)});
            const auto& ds = sim.initial_train[static_cast<std::size_t>(c)];
            model = local_update(sim.task(), model, ds, cfg.lr, cfg.local_epochs,
                                 std::min<int>(cfg.batch_size, static_cast<int>(ds.n())),
                                 rng);
        }
        CHECK(model.values == finals[static_cast<std::size_t>(c)].values);
    }

    // two clients with identical data would still train identically; distinct
    // data must stay distinct (no cross-influence)
    CHECK(finals[0].values != finals[5].values);
}

TEST_CASE("kfed-lite recovers separable feature clusters but not mixed linear") {
    // separable: distinct feature means per cluster
    WorldConfig w;
    w.task = TaskSpec::softmax_regression(6, 3);
    w.clusters = 3;
    w.clients_per_cluster = 4;
    w.samples_per_client = 60;
    w.seed = 77;
    SkewSpec skew;
    skew.kind = SkewSpec::Kind::DisjointLabels;
    skew.labels_per_cluster = 1;
    auto [sw, data] = gen_softmax_world(w, skew);
    auto labels = run_kfed_lite(data, w.task, 3, 3, 42);
    CHECK(ari(labels, sw.assignment) == doctest::Approx(1.0));

    CHECK(run_kfed_lite(data, w.task, 1, 1, 42) == std::vector<int>(12, 0));

    // mixed linear regression features are identically distributed across
    // clusters; one-shot feature clustering carries no signal
    WorldConfig lw = tiny_linear_world(3);
    lw.clients_per_cluster = 5;
    SimWorld sim = build_sim_world(lw);
    auto blind = run_kfed_lite(sim.initial_train, lw.task, 3, 3, 42);
    CHECK(ari(blind, sim.true_assignment) < 0.5);
}

TEST_CASE("fedavg forces a single model") {
    WorldConfig w = tiny_linear_world();
    SimWorld sim = build_sim_world(w);
    FederationConfig cfg = base_federation(4);
    cfg.algorithm = Algorithm::FedAvg;
    FederationResult res = run_federation(sim, cfg);
    CHECK(res.final_models.size() == 1);
    CHECK(res.records[0].group_sizes.size() == 1);
}
