#include "clove/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace clove {

namespace {

void normalize(std::vector<double>& v) {
    double n = std::sqrt(squared_norm(v));
    for (double& x : v) x /= n;
}

std::vector<double> gaussian_vector(int d, RngStream& rng) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (double& x : v) x = rng.normal();
    return v;
}

bool pairwise_in_range(const std::vector<ModelParams>& optima, double lo, double hi) {
    for (std::size_t i = 0; i < optima.size(); ++i)
        for (std::size_t j = i + 1; j < optima.size(); ++j) {
            double d = euclidean_distance(optima[i].values, optima[j].values);
            if (d < lo || d > hi) return false;
        }
    return true;
}

// Gamma(shape=a, scale=1) draw; shape a > 0. Marsaglia-Tsang for a >= 1,
// boosted for a < 1.
double gamma_draw(double a, RngStream& rng) {
    if (a < 1.0) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        return gamma_draw(a + 1.0, rng) * std::pow(u, 1.0 / a);
    }
    double d = a - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = rng.normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<double> dirichlet_draw(std::size_t n, double alpha, RngStream& rng) {
    std::vector<double> w(n);
    double sum = 0.0;
    for (double& x : w) {
        x = gamma_draw(alpha, rng);
        sum += x;
    }
    for (double& x : w) x /= sum;
    return w;
}

ClientDataset make_linear_dataset(const TrueWorld& world, const WorldConfig& cfg,
                                  int client, uint64_t purpose, int round) {
    RngStream rng(cfg.seed, {purpose, static_cast<uint64_t>(round),
                             static_cast<uint64_t>(client)});
    const int n = cfg.samples_per_client, d = cfg.task.d;
    const ModelParams& theta = world.optima[static_cast<std::size_t>(
        world.assignment[static_cast<std::size_t>(client)])];
    ClientDataset ds;
    ds.client_id = client;
    ds.features = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
    ds.targets.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto row = ds.features.row(static_cast<std::size_t>(i));
        double y = 0.0;
        for (int j = 0; j < d; ++j) {
            row[j] = rng.normal();
            y += theta[static_cast<std::size_t>(j)] * row[j];
        }
        ds.targets[static_cast<std::size_t>(i)] = y + cfg.sigma * rng.normal();
    }
    return ds;
}

std::vector<int> ground_truth_assignment(const WorldConfig& cfg) {
    std::vector<int> s(static_cast<std::size_t>(cfg.total_clients()));
    for (int i = 0; i < cfg.total_clients(); ++i)
        s[static_cast<std::size_t>(i)] = i / cfg.clients_per_cluster;
    return s;
}

ClientDataset make_softmax_dataset(const SoftmaxWorld& world, const WorldConfig& cfg,
                                   int client, uint64_t purpose, int round) {
    RngStream rng(cfg.seed, {purpose, static_cast<uint64_t>(round),
                             static_cast<uint64_t>(client)});
    const int n = cfg.samples_per_client, d = cfg.task.d;
    const int cluster = world.assignment[static_cast<std::size_t>(client)];
    const auto& label_map = world.label_maps[static_cast<std::size_t>(cluster)];
    auto weights = world.client_class_weights.row(static_cast<std::size_t>(client));

    ClientDataset ds;
    ds.client_id = client;
    ds.features = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
    ds.targets.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        int cls = world.classes - 1;
        double acc = 0.0;
        for (int c = 0; c < world.classes; ++c) {
            acc += weights[static_cast<std::size_t>(c)];
            if (u < acc) {
                cls = c;
                break;
            }
        }
        auto row = ds.features.row(static_cast<std::size_t>(i));
        for (int j = 0; j < d; ++j) row[j] = rng.normal();
        row[static_cast<std::size_t>(cls % d)] += world.proto_scale;
        ds.targets[static_cast<std::size_t>(i)] =
            static_cast<double>(label_map[static_cast<std::size_t>(cls)]);
    }
    return ds;
}

ClientDataset make_autoencoder_dataset(const SubspaceWorld& world,
                                       const WorldConfig& cfg, int client,
                                       uint64_t purpose, int round) {
    RngStream rng(cfg.seed, {purpose, static_cast<uint64_t>(round),
                             static_cast<uint64_t>(client)});
    const int n = cfg.samples_per_client, d = cfg.task.d, r = cfg.task.rank;
    const Matrix& basis =
        world.bases[static_cast<std::size_t>(world.assignment[static_cast<std::size_t>(client)])];

    ClientDataset ds;
    ds.client_id = client;
    ds.features = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
    std::vector<double> z(static_cast<std::size_t>(r));
    for (int i = 0; i < n; ++i) {
        for (double& x : z) x = rng.normal();
        auto row = ds.features.row(static_cast<std::size_t>(i));
        for (int j = 0; j < d; ++j) {
            double v = 0.0;
            for (int l = 0; l < r; ++l)
                v += basis.at(static_cast<std::size_t>(j), static_cast<std::size_t>(l)) *
                     z[static_cast<std::size_t>(l)];
            row[j] = v + cfg.sigma * rng.normal();
        }
    }
    return ds;
}

}  // namespace

void validate_world(const WorldConfig& cfg) {
    if (cfg.clusters < 1) throw std::invalid_argument("world: K must be >= 1");
    if (cfg.clients_per_cluster < 1) throw std::invalid_argument("world: m must be >= 1");
    if (cfg.samples_per_client < 1) throw std::invalid_argument("world: n must be >= 1");
    if (cfg.sigma < 0.0) throw std::invalid_argument("world: sigma must be >= 0");
    if (cfg.task.kind == TaskKind::LinearRegression) {
        if (!(cfg.delta > 0.0)) throw std::invalid_argument("world: delta must be > 0");
        if (cfg.delta > 2.0)
            throw std::invalid_argument("world: delta > 2 infeasible on the unit sphere");
    }
    if (cfg.task.d < 1) throw std::invalid_argument("world: d must be >= 1");
}

std::vector<ModelParams> sample_separated_optima(int k, int d, double delta,
                                                 RngStream& rng, int draw_budget) {
    std::vector<ModelParams> optima(static_cast<std::size_t>(k));
    if (k == 1) {
        auto v = gaussian_vector(d, rng);
        normalize(v);
        optima[0] = ModelParams(std::move(v));
        return optima;
    }

    // Local proposal around a random sphere point: unit-sphere rejection alone
    // cannot hit pairwise distances <= 5*delta for small delta. The scale is
    // chosen so normalized pairwise distances land mid-range in [delta, 5*delta].
    double target = std::min(2.5 * delta, 1.38) / delta;
    double s = target * delta /
               std::sqrt(static_cast<double>(d) *
                         (2.0 - target * target * delta * delta));
    int draws = 0;
    while (draws < draw_budget) {
        auto center = gaussian_vector(d, rng);
        normalize(center);
        ++draws;
        for (int i = 0; i < k; ++i) {
            auto v = gaussian_vector(d, rng);
            ++draws;
            for (int j = 0; j < d; ++j)
                v[static_cast<std::size_t>(j)] =
                    center[static_cast<std::size_t>(j)] + s * v[static_cast<std::size_t>(j)];
            normalize(v);
            optima[static_cast<std::size_t>(i)] = ModelParams(std::move(v));
        }
        if (pairwise_in_range(optima, delta, 5.0 * delta)) return optima;
    }
    throw std::runtime_error("sample_separated_optima: draw budget exhausted; "
                             "separation constraint infeasible");
}

std::pair<TrueWorld, std::vector<ClientDataset>> gen_mixed_linear(const WorldConfig& cfg) {
    validate_world(cfg);
    if (cfg.task.kind != TaskKind::LinearRegression)
        throw std::invalid_argument("gen_mixed_linear: task must be linear regression");

    TrueWorld world;
    world.delta = cfg.delta;
    world.sigma = cfg.sigma;
    RngStream rng(cfg.seed, {stream::kOptima});
    world.optima = sample_separated_optima(cfg.clusters, cfg.task.d, cfg.delta, rng);
    world.assignment = ground_truth_assignment(cfg);
    return {world, resample_round_data(world, cfg, 1)};
}

std::vector<ClientDataset> resample_round_data(const TrueWorld& world,
                                               const WorldConfig& cfg, int round) {
    std::vector<ClientDataset> out;
    out.reserve(static_cast<std::size_t>(cfg.total_clients()));
    for (int c = 0; c < cfg.total_clients(); ++c)
        out.push_back(make_linear_dataset(world, cfg, c, stream::kData, round));
    return out;
}

std::vector<ClientDataset> gen_linear_test_data(const TrueWorld& world,
                                                const WorldConfig& cfg) {
    std::vector<ClientDataset> out;
    out.reserve(static_cast<std::size_t>(cfg.total_clients()));
    for (int c = 0; c < cfg.total_clients(); ++c)
        out.push_back(make_linear_dataset(world, cfg, c, stream::kTestData, 0));
    return out;
}

std::pair<SoftmaxWorld, std::vector<ClientDataset>> gen_softmax_world(
    const WorldConfig& cfg, const SkewSpec& skew) {
    validate_world(cfg);
    if (cfg.task.kind != TaskKind::SoftmaxRegression)
        throw std::invalid_argument("gen_softmax_world: task must be softmax regression");
    const int classes = cfg.task.classes;
    const int k = cfg.clusters;
    if (classes < 2) throw std::invalid_argument("gen_softmax_world: need >= 2 classes");
    if (cfg.task.d < classes)
        throw std::invalid_argument("gen_softmax_world: need d >= classes for distinct prototypes");

    SoftmaxWorld world;
    world.classes = classes;
    world.assignment = ground_truth_assignment(cfg);
    world.cluster_classes.resize(static_cast<std::size_t>(k));
    world.label_maps.assign(static_cast<std::size_t>(k), {});

    std::vector<int> identity(static_cast<std::size_t>(classes));
    std::iota(identity.begin(), identity.end(), 0);

    switch (skew.kind) {
        case SkewSpec::Kind::DisjointLabels: {
            const int u = skew.labels_per_cluster;
            if (u < 1 || u * k > classes)
                throw std::invalid_argument("disjoint label skew infeasible: u*K > C");
            for (int c = 0; c < k; ++c) {
                auto& cls = world.cluster_classes[static_cast<std::size_t>(c)];
                for (int j = 0; j < u; ++j) cls.push_back(c * u + j);
                world.label_maps[static_cast<std::size_t>(c)] = identity;
            }
            break;
        }
        case SkewSpec::Kind::OverlapLabels: {
            const int u = skew.labels_per_cluster, v = skew.shared_labels;
            if (v > u) throw std::invalid_argument("overlap label skew infeasible: V > U");
            if (v + k * (u - v) <= classes) {
                // v classes common to all clusters plus u-v unique per cluster
                for (int c = 0; c < k; ++c) {
                    auto& cls = world.cluster_classes[static_cast<std::size_t>(c)];
                    for (int j = 0; j < v; ++j) cls.push_back(j);
                    for (int j = 0; j < u - v; ++j) cls.push_back(v + c * (u - v) + j);
                    world.label_maps[static_cast<std::size_t>(c)] = identity;
                }
            } else if (k * (classes - u) <= classes && 2 * u - classes >= v) {
                // dense variant: cluster c excludes its own block of C-U classes
                for (int c = 0; c < k; ++c) {
                    auto& cls = world.cluster_classes[static_cast<std::size_t>(c)];
                    int lo = c * (classes - u), hi = lo + (classes - u);
                    for (int j = 0; j < classes; ++j)
                        if (j < lo || j >= hi) cls.push_back(j);
                    world.label_maps[static_cast<std::size_t>(c)] = identity;
                }
            } else {
                throw std::invalid_argument("overlap label skew infeasible for (C, K, U, V)");
            }
            break;
        }
        case SkewSpec::Kind::ConceptShift: {
            for (int c = 0; c < k; ++c)
                world.cluster_classes[static_cast<std::size_t>(c)] = identity;
            if (!skew.permutations.empty()) {
                if (static_cast<int>(skew.permutations.size()) != k)
                    throw std::invalid_argument("concept shift: need one permutation per cluster");
                world.label_maps = skew.permutations;
            } else {
                // two cluster-unique pair swaps
                if (4 * k > classes)
                    throw std::invalid_argument("concept shift default scheme needs C >= 4K");
                for (int c = 0; c < k; ++c) {
                    auto perm = identity;
                    std::swap(perm[static_cast<std::size_t>(4 * c)],
                              perm[static_cast<std::size_t>(4 * c + 1)]);
                    std::swap(perm[static_cast<std::size_t>(4 * c + 2)],
                              perm[static_cast<std::size_t>(4 * c + 3)]);
                    world.label_maps[static_cast<std::size_t>(c)] = perm;
                }
            }
            break;
        }
        case SkewSpec::Kind::DominantClass: {
            if (k > classes)
                throw std::invalid_argument("dominant class skew infeasible: K > C");
            for (int c = 0; c < k; ++c) {
                world.cluster_classes[static_cast<std::size_t>(c)] = identity;
                world.label_maps[static_cast<std::size_t>(c)] = identity;
            }
            break;
        }
    }

    // Per-client class weights. Dirichlet(0.5) spreads a class's mass across
    // the clients of each cluster holding it; disjoint and concept-shift skews
    // stay uniform.
    const int m_total = cfg.total_clients();
    world.client_class_weights =
        Matrix(static_cast<std::size_t>(m_total), static_cast<std::size_t>(classes), 0.0);
    const bool dirichlet = skew.kind == SkewSpec::Kind::OverlapLabels ||
                           skew.kind == SkewSpec::Kind::DominantClass;
    for (int c = 0; c < k; ++c) {
        const auto& available = world.cluster_classes[static_cast<std::size_t>(c)];
        const int m = cfg.clients_per_cluster;
        Matrix share(static_cast<std::size_t>(m), static_cast<std::size_t>(classes), 0.0);
        RngStream rng(cfg.seed, {stream::kSkew, static_cast<uint64_t>(c)});
        for (int cls : available) {
            std::vector<double> w(static_cast<std::size_t>(m),
                                  1.0 / static_cast<double>(m));
            if (dirichlet) w = dirichlet_draw(static_cast<std::size_t>(m), 0.5, rng);
            for (int i = 0; i < m; ++i)
                share.at(static_cast<std::size_t>(i), static_cast<std::size_t>(cls)) =
                    w[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i < m; ++i) {
            int client = c * m + i;
            auto row = world.client_class_weights.row(static_cast<std::size_t>(client));
            double total = 0.0;
            for (int cls = 0; cls < classes; ++cls) {
                row[static_cast<std::size_t>(cls)] =
                    share.at(static_cast<std::size_t>(i), static_cast<std::size_t>(cls));
                total += row[static_cast<std::size_t>(cls)];
            }
            for (int cls = 0; cls < classes; ++cls) row[static_cast<std::size_t>(cls)] /= total;
            if (skew.kind == SkewSpec::Kind::DominantClass) {
                int dom = c;  // unique dominant class per cluster
                for (int cls = 0; cls < classes; ++cls)
                    row[static_cast<std::size_t>(cls)] *= skew.uniform_share;
                row[static_cast<std::size_t>(dom)] += 1.0 - skew.uniform_share;
            }
        }
    }

    return {world, softmax_round_data(world, cfg, 1)};
}

std::vector<ClientDataset> softmax_round_data(const SoftmaxWorld& world,
                                              const WorldConfig& cfg, int round) {
    std::vector<ClientDataset> out;
    out.reserve(static_cast<std::size_t>(cfg.total_clients()));
    for (int c = 0; c < cfg.total_clients(); ++c)
        out.push_back(make_softmax_dataset(world, cfg, c, stream::kData, round));
    return out;
}

std::vector<ClientDataset> gen_softmax_test_data(const SoftmaxWorld& world,
                                                 const WorldConfig& cfg) {
    std::vector<ClientDataset> out;
    out.reserve(static_cast<std::size_t>(cfg.total_clients()));
    for (int c = 0; c < cfg.total_clients(); ++c)
        out.push_back(make_softmax_dataset(world, cfg, c, stream::kTestData, 0));
    return out;
}

std::pair<SubspaceWorld, std::vector<ClientDataset>> gen_autoencoder_world(
    const WorldConfig& cfg) {
    validate_world(cfg);
    if (cfg.task.kind != TaskKind::LinearAutoencoder)
        throw std::invalid_argument("gen_autoencoder_world: task must be linear autoencoder");
    const int d = cfg.task.d, r = cfg.task.rank;
    if (r < 1 || r >= d)
        throw std::invalid_argument("gen_autoencoder_world: need 1 <= rank < d");

    SubspaceWorld world;
    world.assignment = ground_truth_assignment(cfg);
    RngStream rng(cfg.seed, {stream::kOptima});
    for (int c = 0; c < cfg.clusters; ++c) {
        // orthonormal basis via Gram-Schmidt on Gaussian columns
        Matrix basis(static_cast<std::size_t>(d), static_cast<std::size_t>(r));
        for (int col = 0; col < r; ++col) {
            std::vector<double> v = gaussian_vector(d, rng);
            for (int prev = 0; prev < col; ++prev) {
                double dot = 0.0;
                for (int j = 0; j < d; ++j)
                    dot += v[static_cast<std::size_t>(j)] *
                           basis.at(static_cast<std::size_t>(j), static_cast<std::size_t>(prev));
                for (int j = 0; j < d; ++j)
                    v[static_cast<std::size_t>(j)] -=
                        dot * basis.at(static_cast<std::size_t>(j),
                                       static_cast<std::size_t>(prev));
            }
            normalize(v);
            for (int j = 0; j < d; ++j)
                basis.at(static_cast<std::size_t>(j), static_cast<std::size_t>(col)) =
                    v[static_cast<std::size_t>(j)];
        }
        world.bases.push_back(std::move(basis));
    }
    return {world, autoencoder_round_data(world, cfg, 1)};
}

std::vector<ClientDataset> autoencoder_round_data(const SubspaceWorld& world,
                                                  const WorldConfig& cfg, int round) {
    std::vector<ClientDataset> out;
    out.reserve(static_cast<std::size_t>(cfg.total_clients()));
    for (int c = 0; c < cfg.total_clients(); ++c)
        out.push_back(make_autoencoder_dataset(world, cfg, c, stream::kData, round));
    return out;
}

std::vector<ClientDataset> gen_autoencoder_test_data(const SubspaceWorld& world,
                                                     const WorldConfig& cfg) {
    std::vector<ClientDataset> out;
    out.reserve(static_cast<std::size_t>(cfg.total_clients()));
    for (int c = 0; c < cfg.total_clients(); ++c)
        out.push_back(make_autoencoder_dataset(world, cfg, c, stream::kTestData, 0));
    return out;
}

void save_dataset_csv(const ClientDataset& data, const std::string& path,
                      bool supervised) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.precision(17);
    for (std::size_t j = 0; j < data.features.cols; ++j) {
        if (j) out << ',';
        out << 'x' << j;
    }
    if (supervised) out << ",y";
    out << '\n';
    for (std::size_t i = 0; i < data.n(); ++i) {
        auto row = data.features.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out << ',';
            out << row[j];
        }
        if (supervised) out << ',' << data.targets[i];
        out << '\n';
    }
}

ClientDataset load_dataset_csv(const std::string& path, bool supervised,
                               int client_id) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file " + path);

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw std::runtime_error("dataset has no rows: " + path);

    const std::size_t width = rows[0].size();
    const std::size_t d = supervised ? width - 1 : width;
    ClientDataset ds;
    ds.client_id = client_id;
    ds.features = Matrix(rows.size(), d);
    if (supervised) ds.targets.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != width)
            throw std::runtime_error("ragged dataset row in " + path);
        for (std::size_t j = 0; j < d; ++j) ds.features.at(i, j) = rows[i][j];
        if (supervised) ds.targets[i] = rows[i][d];
    }
    return ds;
}

}  // namespace clove
