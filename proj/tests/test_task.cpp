#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clove/datagen.hpp"
#include "clove/task.hpp"

using namespace clove;

namespace {

ClientDataset tiny_1d() {
    ClientDataset ds;
    ds.features = Matrix(2, 1);
    ds.features.at(0, 0) = 1.0;
    ds.features.at(1, 0) = 2.0;
    ds.targets = {2.0, 2.0};
    return ds;
}

ClientDataset random_dataset(const TaskSpec& task, std::size_t n, RngStream& rng) {
    ClientDataset ds;
    ds.features = Matrix(n, static_cast<std::size_t>(task.d));
    for (double& v : ds.features.data) v = rng.normal();
    if (task.kind == TaskKind::LinearRegression) {
        ds.targets.resize(n);
        for (double& y : ds.targets) y = rng.normal();
    } else if (task.kind == TaskKind::SoftmaxRegression) {
        ds.targets.resize(n);
        for (double& y : ds.targets)
            y = static_cast<double>(rng.uniform_index(static_cast<std::size_t>(task.classes)));
    }
    return ds;
}

ModelParams random_params(const TaskSpec& task, RngStream& rng, double scale = 1.0) {
    ModelParams p(static_cast<std::size_t>(task.param_dim()));
    for (double& v : p.values) v = scale * rng.normal();
    return p;
}

// central finite differences, step scaled by the parameter magnitude
std::vector<double> fd_gradient(const TaskSpec& task, const ModelParams& params,
                                const ClientDataset& data) {
    std::vector<double> g(params.size());
    ModelParams probe = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double h = 1e-6 * std::max(1.0, std::abs(params[i]));
        probe.values[i] = params[i] + h;
        double up = loss(task, probe, data);
        probe.values[i] = params[i] - h;
        double down = loss(task, probe, data);
        probe.values[i] = params[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double rel_vec_error(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(1e-8, std::sqrt(den));
}

}  // namespace

TEST_CASE("linear regression loss matches hand evaluation") {
    TaskSpec task = TaskSpec::linear_regression(1);
    ModelParams zero(1, 0.0);
    CHECK(loss(task, zero, tiny_1d()) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("loss is zero at the generating model on noiseless data") {
    TaskSpec task = TaskSpec::linear_regression(6);
    RngStream rng(7);
    ModelParams theta = random_params(task, rng);
    ClientDataset ds;
    ds.features = Matrix(40, 6);
    for (double& v : ds.features.data) v = rng.normal();
    ds.targets.resize(40);
    for (std::size_t i = 0; i < 40; ++i) {
        double y = 0.0;
        for (int j = 0; j < 6; ++j) y += theta[static_cast<std::size_t>(j)] * ds.features.at(i, static_cast<std::size_t>(j));
        ds.targets[i] = y;
    }
    CHECK(loss(task, theta, ds) == doctest::Approx(0.0).epsilon(1e-12));
    auto g = gradient(task, theta, ds);
    for (double v : g) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("square orthonormal autoencoder reconstructs exactly") {
    TaskSpec task = TaskSpec::linear_autoencoder(3, 3);
    ModelParams identity(9, 0.0);
    identity.values[0] = identity.values[4] = identity.values[8] = 1.0;
    RngStream rng(3);
    ClientDataset ds = random_dataset(task, 10, rng);
    CHECK(loss(task, identity, ds) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("gradient matches hand differentiation in 1-d") {
    TaskSpec task = TaskSpec::linear_regression(1);
    ModelParams zero(1, 0.0);
    auto g = gradient(task, zero, tiny_1d());
    REQUIRE(g.size() == 1);
    CHECK(g[0] == doctest::Approx(-10.0).epsilon(1e-15));
}

TEST_CASE("analytic gradient matches central finite differences on all tasks") {
    const TaskSpec tasks[] = {TaskSpec::linear_regression(5),
                              TaskSpec::softmax_regression(4, 3),
                              TaskSpec::linear_autoencoder(5, 2)};
    RngStream rng(11);
    for (const TaskSpec& task : tasks) {
        for (int trial = 0; trial < 8; ++trial) {
            ClientDataset ds = random_dataset(task, 12, rng);
            ModelParams params = random_params(task, rng, 0.7);
            auto g = gradient(task, params, ds);
            auto fd = fd_gradient(task, params, ds);
            CHECK(rel_vec_error(g, fd) <= 1e-5);
        }
    }
}

TEST_CASE("loss is invariant to row permutation") {
    TaskSpec task = TaskSpec::softmax_regression(4, 3);
    RngStream rng(13);
    ClientDataset ds = random_dataset(task, 9, rng);
    ModelParams params = random_params(task, rng);
    double base = loss(task, params, ds);

    ClientDataset reversed = ds;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        std::size_t j = ds.n() - 1 - i;
        for (std::size_t c = 0; c < ds.features.cols; ++c)
            reversed.features.at(i, c) = ds.features.at(j, c);
        reversed.targets[i] = ds.targets[j];
    }
    CHECK(loss(task, params, reversed) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("one explicit full-batch step") {
    TaskSpec task = TaskSpec::linear_regression(1);
    ModelParams zero(1, 0.0);
    RngStream rng(1);
    ModelParams next = local_update(task, zero, tiny_1d(), 0.1, 1, 2, rng);
    CHECK(next[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("full-batch update equals params - lr * gradient exactly") {
    TaskSpec task = TaskSpec::softmax_regression(3, 3);
    RngStream rng(17);
    ClientDataset ds = random_dataset(task, 7, rng);
    ModelParams params = random_params(task, rng);
    auto g = gradient(task, params, ds);
    RngStream upd(5);
    ModelParams stepped = local_update(task, params, ds, 0.05, 1,
                                       static_cast<int>(ds.n()), upd);
    for (std::size_t i = 0; i < params.size(); ++i)
        CHECK(stepped[i] == params[i] - 0.05 * g[i]);  // bitwise
}

TEST_CASE("vanishing learning rate leaves params unchanged") {
    TaskSpec task = TaskSpec::linear_regression(1);
    ModelParams theta(1, 3.0);
    RngStream rng(1);
    CHECK_THROWS_AS(local_update(task, theta, tiny_1d(), 0.0, 1, 2, rng),
                    std::invalid_argument);
    ModelParams next = local_update(task, theta, tiny_1d(), 1e-300, 1, 2, rng);
    CHECK(next[0] == 3.0);
}

TEST_CASE("full-batch descent is monotone below the stability bound") {
    TaskSpec task = TaskSpec::linear_regression(4);
    RngStream rng(19);
    ClientDataset ds = random_dataset(task, 30, rng);
    ModelParams params = random_params(task, rng);
    double prev = loss(task, params, ds);
    for (int step = 0; step < 20; ++step) {
        RngStream upd(0);
        params = local_update(task, params, ds, 0.05, 1, static_cast<int>(ds.n()), upd);
        double cur = loss(task, params, ds);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
}

TEST_CASE("mini-batch epochs replay bit-identically from the same stream") {
    TaskSpec task = TaskSpec::linear_regression(4);
    RngStream data_rng(23);
    ClientDataset ds = random_dataset(task, 20, data_rng);
    ModelParams params = random_params(task, data_rng);
    RngStream a(99), b(99);
    ModelParams r1 = local_update(task, params, ds, 0.01, 3, 6, a);
    ModelParams r2 = local_update(task, params, ds, 0.01, 3, 6, b);
    CHECK(r1.values == r2.values);
}

TEST_CASE("sqrt_transform") {
    CHECK(sqrt_transform({0.0, 1.0, 4.0}) == std::vector<double>{0.0, 1.0, 2.0});
    auto fig1 = sqrt_transform({1.0, 5.1});
    CHECK(fig1[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(fig1[1] == doctest::Approx(2.2583179581272424).epsilon(1e-13));
    auto equal = sqrt_transform({2.5, 2.5, 2.5});
    CHECK(equal[0] == equal[1]);
    CHECK(equal[1] == equal[2]);
    CHECK_THROWS_AS(sqrt_transform({-1e-9}), std::invalid_argument);
}

TEST_CASE("contract violations throw") {
    TaskSpec task = TaskSpec::linear_regression(2);
    ModelParams wrong(3, 0.0);
    CHECK_THROWS_AS(loss(task, wrong, tiny_1d()), std::invalid_argument);
    ClientDataset empty;
    empty.features = Matrix(0, 2);
    ModelParams ok(2, 0.0);
    CHECK_THROWS_AS(loss(task, ok, empty), std::invalid_argument);
    RngStream rng(1);
    ClientDataset ds = tiny_1d();
    TaskSpec d1 = TaskSpec::linear_regression(1);
    ModelParams p1(1, 0.0);
    CHECK_THROWS_AS(local_update(d1, p1, ds, 0.1, 0, 2, rng), std::invalid_argument);
    CHECK_THROWS_AS(local_update(d1, p1, ds, 0.1, 1, 3, rng), std::invalid_argument);
}

// sqrt of the empirical loss behaves like a scaled chi variable: its mean is
// alpha * (1 - 1/(4n)) and its variance alpha^2 / (2n), for
// alpha = sqrt(|theta - theta*|^2 + sigma^2).
TEST_CASE("sqrt-loss concentration across many clients") {
    const int d = 8, n = 50, clients = 600;
    const double sigma = 0.1;
    WorldConfig cfg;
    cfg.task = TaskSpec::linear_regression(d);
    cfg.clusters = 1;
    cfg.clients_per_cluster = clients;
    cfg.samples_per_client = n;
    cfg.delta = 1.0;
    cfg.sigma = sigma;
    cfg.seed = 42;
    auto [world, data] = gen_mixed_linear(cfg);

    RngStream rng(4242);
    ModelParams probe = world.optima[0];
    for (double& v : probe.values) v += 0.25 * rng.normal();
    double dist2 = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        double diff = probe[i] - world.optima[0][i];
        dist2 += diff * diff;
    }
    const double alpha = std::sqrt(dist2 + sigma * sigma);

    double sum = 0.0, sumsq = 0.0;
    for (const auto& ds : data) {
        double f = std::sqrt(loss(cfg.task, probe, ds));
        sum += f;
        sumsq += f * f;
    }
    double mean = sum / clients;
    double var = sumsq / clients - mean * mean;

    double expected_mean = alpha * (1.0 - 1.0 / (4.0 * n));
    double se = alpha / std::sqrt(2.0 * n * static_cast<double>(clients));
    CHECK(std::abs(mean - expected_mean) <= 4.0 * se);

    double expected_var = alpha * alpha / (2.0 * n);
    CHECK(var >= expected_var / 2.0);
    CHECK(var <= expected_var * 2.0);
}
