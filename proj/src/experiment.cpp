#include "clove/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "clove/metrics.hpp"

namespace clove {

namespace {

using nlohmann::json;

// --- enum <-> string --------------------------------------------------------

template <typename T>
struct NameTable {
    std::vector<std::pair<std::string, T>> entries;

    T parse(const std::string& s, const char* what) const {
        for (const auto& [name, value] : entries)
            if (name == s) return value;
        throw ConfigError(std::string("unknown ") + what + ": '" + s + "'");
    }
    const std::string& name(T v) const {
        for (const auto& [name, value] : entries)
            if (value == v) return name;
        throw std::logic_error("unnamed enum value");
    }
};

const NameTable<Algorithm> kAlgorithms{{{"clove", Algorithm::CLoVE},
                                        {"ifca", Algorithm::IFCA},
                                        {"fedavg", Algorithm::FedAvg},
                                        {"local_only", Algorithm::LocalOnly},
                                        {"kfed_lite", Algorithm::KFedLite}}};
const NameTable<Averaging> kAveraging{{{"model", Averaging::ModelAvg},
                                       {"gradient", Averaging::GradAvg}}};
const NameTable<Embedding> kEmbedding{{{"loss", Embedding::Loss},
                                       {"sqrt_loss", Embedding::SqrtLoss}}};
const NameTable<Clusterer> kClusterer{{{"kmeans", Clusterer::KMeans},
                                       {"agglomerative", Clusterer::Agglomerative}}};
const NameTable<MatchingRule> kMatching{{{"min_cost", MatchingRule::MinCost},
                                         {"ordered", MatchingRule::Ordered},
                                         {"overlap", MatchingRule::Overlap}}};
const NameTable<InitPolicy> kInit{{{"orthonormal", InitPolicy::Orthonormal},
                                   {"same_random", InitPolicy::SameRandom},
                                   {"independent_random", InitPolicy::IndependentRandom}}};
const NameTable<FirstRound> kFirstRound{{{"evaluate", FirstRound::Evaluate},
                                         {"random", FirstRound::Random}}};
const NameTable<TaskKind> kTaskKind{{{"linear_regression", TaskKind::LinearRegression},
                                     {"softmax_regression", TaskKind::SoftmaxRegression},
                                     {"linear_autoencoder", TaskKind::LinearAutoencoder}}};
const NameTable<SkewSpec::Kind> kSkewKind{
    {{"disjoint_labels", SkewSpec::Kind::DisjointLabels},
     {"overlap_labels", SkewSpec::Kind::OverlapLabels},
     {"concept_shift", SkewSpec::Kind::ConceptShift},
     {"dominant_class", SkewSpec::Kind::DominantClass}}};

// --- JSON helpers ------------------------------------------------------------

void check_keys(const json& j, const char* where,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok)
            throw ConfigError(std::string("unknown key '") + it.key() + "' in " + where);
    }
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "'");
    }
}

void apply_task(const json& j, TaskSpec& task) {
    check_keys(j, "task", {"kind", "d", "classes", "rank"});
    if (j.contains("kind"))
        task.kind = kTaskKind.parse(j.at("kind").get<std::string>(), "task kind");
    read_into(j, "d", task.d);
    read_into(j, "classes", task.classes);
    read_into(j, "rank", task.rank);
}

void apply_skew(const json& j, std::optional<SkewSpec>& skew) {
    check_keys(j, "skew", {"kind", "labels_per_cluster", "shared_labels",
                           "uniform_share", "permutations"});
    if (!skew) skew.emplace();
    if (j.contains("kind"))
        skew->kind = kSkewKind.parse(j.at("kind").get<std::string>(), "skew kind");
    read_into(j, "labels_per_cluster", skew->labels_per_cluster);
    read_into(j, "shared_labels", skew->shared_labels);
    read_into(j, "uniform_share", skew->uniform_share);
    read_into(j, "permutations", skew->permutations);
}

void apply_world(const json& j, WorldConfig& world, std::optional<SkewSpec>& skew) {
    check_keys(j, "world",
               {"task", "K", "clients_per_cluster", "samples_per_client", "delta",
                "sigma", "fresh_data_per_round", "seed", "skew"});
    if (j.contains("task")) apply_task(j.at("task"), world.task);
    read_into(j, "K", world.clusters);
    read_into(j, "clients_per_cluster", world.clients_per_cluster);
    read_into(j, "samples_per_client", world.samples_per_client);
    read_into(j, "delta", world.delta);
    read_into(j, "sigma", world.sigma);
    read_into(j, "fresh_data_per_round", world.fresh_data_per_round);
    read_into(j, "seed", world.seed);
    if (j.contains("skew")) apply_skew(j.at("skew"), skew);
}

void apply_federation(const json& j, FederationConfig& fed) {
    check_keys(j, "federation",
               {"algorithm", "K_models", "rounds", "local_epochs", "lr", "batch_size",
                "averaging", "embedding", "clusterer", "matching", "init",
                "first_round_assignment", "participation_fraction", "seed"});
    if (j.contains("algorithm"))
        fed.algorithm = kAlgorithms.parse(j.at("algorithm").get<std::string>(), "algorithm");
    read_into(j, "K_models", fed.k_models);
    read_into(j, "rounds", fed.rounds);
    read_into(j, "local_epochs", fed.local_epochs);
    read_into(j, "lr", fed.lr);
    read_into(j, "batch_size", fed.batch_size);
    if (j.contains("averaging"))
        fed.averaging = kAveraging.parse(j.at("averaging").get<std::string>(), "averaging");
    if (j.contains("embedding"))
        fed.embedding = kEmbedding.parse(j.at("embedding").get<std::string>(), "embedding");
    if (j.contains("clusterer"))
        fed.clusterer = kClusterer.parse(j.at("clusterer").get<std::string>(), "clusterer");
    if (j.contains("matching"))
        fed.matching = kMatching.parse(j.at("matching").get<std::string>(), "matching");
    if (j.contains("init"))
        fed.init = kInit.parse(j.at("init").get<std::string>(), "init");
    if (j.contains("first_round_assignment"))
        fed.first_round_assignment = kFirstRound.parse(
            j.at("first_round_assignment").get<std::string>(), "first_round_assignment");
    read_into(j, "participation_fraction", fed.participation_fraction);
    read_into(j, "seed", fed.seed);
}

// --- numeric formatting -------------------------------------------------------

std::string fmt(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt(*v) : std::string();
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

std::optional<double> median_of(std::vector<double> xs) {
    if (xs.empty()) return std::nullopt;
    std::sort(xs.begin(), xs.end());
    std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

// --- presets -----------------------------------------------------------------

namespace {

WorldConfig linear_theory_world() {
    WorldConfig w;
    w.task = TaskSpec::linear_regression(50);
    w.clusters = 5;
    w.clients_per_cluster = 5;
    w.samples_per_client = 1000;
    w.delta = 1.0;
    w.sigma = 0.05;
    w.fresh_data_per_round = true;
    return w;
}

FederationConfig linear_theory_federation() {
    FederationConfig f;
    f.algorithm = Algorithm::CLoVE;
    f.k_models = 5;
    f.rounds = 20;
    f.local_epochs = 25;
    f.lr = 0.1;
    f.batch_size = 100;
    f.averaging = Averaging::ModelAvg;
    f.embedding = Embedding::SqrtLoss;
    f.init = InitPolicy::Orthonormal;
    return f;
}

std::vector<uint64_t> seq_seeds(int n) {
    std::vector<uint64_t> s(static_cast<std::size_t>(n));
    std::iota(s.begin(), s.end(), 1);
    return s;
}

ExperimentConfig preset_fig1_toy() {
    ExperimentConfig cfg;
    WorldConfig w;
    w.task = TaskSpec::linear_regression(10);
    w.clusters = 2;
    w.clients_per_cluster = 5;
    w.samples_per_client = 200;
    w.delta = 1.0;
    w.sigma = 0.05;
    w.fresh_data_per_round = false;
    FederationConfig f;
    f.k_models = 2;
    f.rounds = 10;
    f.local_epochs = 5;
    f.lr = 0.1;
    f.batch_size = 100;
    f.init = InitPolicy::SameRandom;
    for (Algorithm a : {Algorithm::CLoVE, Algorithm::IFCA}) {
        FederationConfig fa = f;
        fa.algorithm = a;
        cfg.runs.push_back({kAlgorithms.name(a), w, std::nullopt, fa});
    }
    cfg.seeds = seq_seeds(3);
    return cfg;
}

ExperimentConfig preset_lr_theory() {
    ExperimentConfig cfg;
    cfg.runs.push_back({"clove", linear_theory_world(), std::nullopt,
                        linear_theory_federation()});
    cfg.seeds = seq_seeds(10);
    return cfg;
}

ExperimentConfig preset_lr_sweep_delta() {
    ExperimentConfig cfg = preset_lr_theory();
    for (auto& run : cfg.runs) {
        run.world.sigma = 1e-4;  // noise well below the smallest swept delta
        run.federation.rounds = 100;
    }
    return cfg;
}

ExperimentConfig preset_init_robustness() {
    ExperimentConfig cfg;
    WorldConfig w = linear_theory_world();
    for (Algorithm a : {Algorithm::CLoVE, Algorithm::IFCA}) {
        for (InitPolicy init : {InitPolicy::SameRandom, InitPolicy::IndependentRandom}) {
            for (FirstRound first : {FirstRound::Random, FirstRound::Evaluate}) {
                FederationConfig f = linear_theory_federation();
                f.algorithm = a;
                f.init = init;
                f.first_round_assignment = first;
                std::string label = kAlgorithms.name(a);
                label += init == InitPolicy::SameRandom ? ":init=s" : ":init=d";
                label += first == FirstRound::Random ? ",first=r" : ",first=e";
                cfg.runs.push_back({label, w, std::nullopt, f});
            }
        }
    }
    cfg.seeds = seq_seeds(5);
    return cfg;
}

ExperimentConfig preset_ablations() {
    ExperimentConfig cfg;
    WorldConfig w;
    w.task = TaskSpec::softmax_regression(10, 10);
    w.clusters = 5;
    w.clients_per_cluster = 5;
    w.samples_per_client = 250;
    w.sigma = 0.0;
    w.fresh_data_per_round = false;
    SkewSpec skew;
    skew.kind = SkewSpec::Kind::OverlapLabels;
    skew.labels_per_cluster = 9;  // every cluster misses one unique class
    skew.shared_labels = 8;
    FederationConfig f;
    f.algorithm = Algorithm::CLoVE;
    f.k_models = 5;
    f.rounds = 30;
    f.local_epochs = 1;
    f.lr = 0.1;
    f.batch_size = 50;
    f.init = InitPolicy::IndependentRandom;
    cfg.runs.push_back({"clove", w, skew, f});
    cfg.seeds = seq_seeds(10);
    return cfg;
}

ExperimentConfig preset_kfed_compare() {
    ExperimentConfig cfg = preset_lr_theory();
    RunSpec kfed = cfg.runs[0];
    kfed.label = "kfed_lite";
    kfed.federation.algorithm = Algorithm::KFedLite;
    cfg.runs.push_back(std::move(kfed));
    return cfg;
}

}  // namespace

ExperimentConfig preset_config(const std::string& name) {
    if (name == "fig1-toy") return preset_fig1_toy();
    if (name == "lr-theory") return preset_lr_theory();
    if (name == "lr-sweep-delta") return preset_lr_sweep_delta();
    if (name == "init-robustness") return preset_init_robustness();
    if (name == "ablations") return preset_ablations();
    if (name == "kfed-compare") return preset_kfed_compare();
    throw ConfigError("unknown preset: '" + name + "'");
}

std::vector<std::string> preset_names() {
    return {"fig1-toy", "lr-theory", "lr-sweep-delta", "init-robustness",
            "ablations", "kfed-compare"};
}

// --- config parsing ------------------------------------------------------------

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "config",
               {"preset", "world", "federation", "algorithms", "seeds", "output_dir"});

    ExperimentConfig cfg;
    if (j.contains("preset")) {
        cfg = preset_config(j.at("preset").get<std::string>());
        cfg.preset = j.at("preset").get<std::string>();
    } else {
        if (!j.contains("world") || !j.contains("federation"))
            throw ConfigError("config needs either a preset or world+federation sections");
        cfg.runs.push_back({"", WorldConfig{}, std::nullopt, FederationConfig{}});
        cfg.seeds = {1};
    }

    for (auto& run : cfg.runs) {
        if (j.contains("world")) apply_world(j.at("world"), run.world, run.skew);
        if (j.contains("federation")) apply_federation(j.at("federation"), run.federation);
    }

    if (j.contains("algorithms")) {
        std::vector<std::string> names;
        read_into(j, "algorithms", names);
        if (names.empty()) throw ConfigError("algorithms list must not be empty");
        RunSpec base = cfg.runs.front();
        cfg.runs.clear();
        for (const std::string& n : names) {
            RunSpec r = base;
            r.label = n;
            r.federation.algorithm = kAlgorithms.parse(n, "algorithm");
            cfg.runs.push_back(std::move(r));
        }
    }
    for (auto& run : cfg.runs)
        if (run.label.empty())
            run.label = kAlgorithms.name(run.federation.algorithm);

    if (j.contains("seeds")) {
        read_into(j, "seeds", cfg.seeds);
    }
    if (cfg.seeds.empty()) throw ConfigError("seeds list must not be empty");
    read_into(j, "output_dir", cfg.output_dir);

    // fail fast on invalid world/federation combinations
    for (auto& run : cfg.runs) {
        try {
            validate_world(run.world);
            validate_federation(run.federation, run.world.task);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("invalid config for run '") + run.label +
                              "': " + e.what());
        }
        if (run.world.task.kind == TaskKind::SoftmaxRegression && !run.skew)
            throw ConfigError("softmax task requires world.skew");
    }
    return cfg;
}

ExperimentConfig load_experiment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

// --- execution -------------------------------------------------------------------

namespace {

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<SeedRunResult> execute_experiment(const ExperimentConfig& cfg, int jobs) {
    const std::size_t units = cfg.runs.size() * cfg.seeds.size();
    std::vector<SeedRunResult> results(units);
    parallel_for(units, jobs, [&](std::size_t u) {
        const RunSpec& spec = cfg.runs[u / cfg.seeds.size()];
        const uint64_t seed = cfg.seeds[u % cfg.seeds.size()];
        WorldConfig world = spec.world;
        FederationConfig fed = spec.federation;
        world.seed = seed;
        fed.seed = seed;
        SimWorld sim = build_sim_world(world, spec.skew);
        FederationResult res = run_federation(sim, fed);
        results[u] = {spec.label, seed, std::move(res.records)};
    });
    return results;
}

std::string rounds_csv(const std::vector<SeedRunResult>& results) {
    std::string out =
        "seed,round,algorithm,ari,mean_test_loss,test_accuracy,"
        "max_model_distance,group_sizes,wall_ms\n";
    for (const auto& run : results) {
        for (const auto& rec : run.records) {
            out += std::to_string(run.seed);
            out += ',';
            out += std::to_string(rec.round);
            out += ',';
            out += run.label;
            out += ',';
            out += fmt(rec.ari);
            out += ',';
            out += fmt(rec.mean_test_loss);
            out += ',';
            out += fmt_opt(rec.test_accuracy);
            out += ',';
            if (rec.model_distances) {
                double mx = 0.0;
                for (double d : *rec.model_distances) mx = std::max(mx, d);
                out += fmt(mx);
            }
            out += ',';
            for (std::size_t i = 0; i < rec.group_sizes.size(); ++i) {
                if (i) out += ';';
                out += std::to_string(rec.group_sizes[i]);
            }
            out += ',';
            out += std::to_string(rec.wall_ms);
            out += '\n';
        }
    }
    return out;
}

namespace {
constexpr const char* kSummaryColumns =
    ",n_seeds,final_ari_mean,final_ari_std,mean_test_loss_mean,"
    "mean_test_loss_std,test_accuracy_mean,test_accuracy_std,"
    "pct_final_ari_at_10_mean,pct_final_ari_at_10_std,"
    "first_round_ari_90_median,rounds_to_recovery_median\n";
}  // namespace

std::string summary_csv(const std::vector<SeedRunResult>& results) {
    std::vector<std::string> labels;
    for (const auto& r : results)
        if (std::find(labels.begin(), labels.end(), r.label) == labels.end())
            labels.push_back(r.label);

    std::string out = std::string("algorithm") + kSummaryColumns;
    for (const std::string& label : labels) {
        std::vector<double> final_ari, final_loss, final_acc, pct10, first90, recovery;
        int n_seeds = 0;
        for (const auto& r : results) {
            if (r.label != label || r.records.empty()) continue;
            ++n_seeds;
            const RoundRecord& last = r.records.back();
            std::vector<double> series;
            series.reserve(r.records.size());
            for (const auto& rec : r.records) series.push_back(rec.ari);
            ConvergenceStats stats = convergence_stats(series);
            final_ari.push_back(last.ari);
            if (!std::isnan(last.mean_test_loss)) final_loss.push_back(last.mean_test_loss);
            if (last.test_accuracy) final_acc.push_back(*last.test_accuracy);
            pct10.push_back(stats.pct_final_ari_at_10);
            if (stats.first_round_ari_90) first90.push_back(*stats.first_round_ari_90);
            if (stats.rounds_to_full_recovery)
                recovery.push_back(*stats.rounds_to_full_recovery);
        }
        out += label;
        out += ',' + std::to_string(n_seeds);
        out += ',' + fmt(mean_of(final_ari)) + ',' + fmt(std_of(final_ari));
        out += ',' + fmt(mean_of(final_loss)) + ',' + fmt(std_of(final_loss));
        out += ',' + (final_acc.empty() ? "" : fmt(mean_of(final_acc)));
        out += ',' + (final_acc.empty() ? "" : fmt(std_of(final_acc)));
        out += ',' + fmt(mean_of(pct10)) + ',' + fmt(std_of(pct10));
        out += ',' + fmt_opt(median_of(first90));
        out += ',' + fmt_opt(median_of(recovery));
        out += '\n';
    }
    return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, target);
}

// --- commands ----------------------------------------------------------------

namespace {

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

std::string value_token(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

void apply_sweep_value(ExperimentConfig& cfg, const std::string& param, double value) {
    for (auto& run : cfg.runs) {
        if (param == "delta") {
            run.world.delta = value;
        } else if (param == "sigma") {
            run.world.sigma = value;
        } else if (param == "clients_per_cluster") {
            run.world.clients_per_cluster = static_cast<int>(value);
        } else if (param == "samples_per_client") {
            run.world.samples_per_client = static_cast<int>(value);
        } else if (param == "participation_fraction") {
            run.federation.participation_fraction = value;
        } else {
            throw ConfigError("unknown sweep param: '" + param + "'");
        }
        validate_world(run.world);
        validate_federation(run.federation, run.world.task);
    }
}

}  // namespace

int cmd_run(const std::string& config_path, const std::string& out_override, int jobs) {
    return guarded([&] {
        ExperimentConfig cfg = load_experiment_file(config_path);
        if (!out_override.empty()) cfg.output_dir = out_override;
        auto results = execute_experiment(cfg, jobs);
        write_file_atomic(cfg.output_dir + "/rounds.csv", rounds_csv(results));
        write_file_atomic(cfg.output_dir + "/summary.csv", summary_csv(results));
    });
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::vector<double>& values, const std::string& out_override,
              int jobs) {
    return guarded([&] {
        ExperimentConfig base = load_experiment_file(config_path);
        if (!out_override.empty()) base.output_dir = out_override;
        if (values.empty()) throw ConfigError("sweep needs at least one value");
        {
            ExperimentConfig probe = base;  // reject unknown params before running
            apply_sweep_value(probe, param, values.front());
        }

        std::string sweep =
            "param,value,algorithm,n_seeds,final_ari_mean,final_ari_std,"
            "mean_test_loss_mean,mean_test_loss_std,test_accuracy_mean,"
            "test_accuracy_std,pct_final_ari_at_10_mean,pct_final_ari_at_10_std,"
            "first_round_ari_90_median,rounds_to_recovery_median\n";
        for (double value : values) {
            ExperimentConfig cfg = base;
            apply_sweep_value(cfg, param, value);
            auto results = execute_experiment(cfg, jobs);
            std::string sub = base.output_dir + "/" + param + "=" + value_token(value);
            write_file_atomic(sub + "/rounds.csv", rounds_csv(results));
            write_file_atomic(sub + "/summary.csv", summary_csv(results));

            std::istringstream summary(summary_csv(results));
            std::string line;
            std::getline(summary, line);  // header
            while (std::getline(summary, line))
                sweep += param + "," + value_token(value) + "," + line + "\n";
        }
        write_file_atomic(base.output_dir + "/sweep.csv", sweep);
    });
}

int cmd_ablate(const std::string& config_path, const std::string& out_override,
               int jobs) {
    return guarded([&] {
        ExperimentConfig base = load_experiment_file(config_path);
        if (!out_override.empty()) base.output_dir = out_override;

        struct Variant {
            const char* name;
            void (*tweak)(FederationConfig&);
        };
        const Variant variants[] = {
            {"default", [](FederationConfig&) {}},
            {"no-matching",
             [](FederationConfig& f) { f.matching = MatchingRule::Ordered; }},
            {"agglomerative",
             [](FederationConfig& f) { f.clusterer = Clusterer::Agglomerative; }},
            {"sqrt-loss", [](FederationConfig& f) { f.embedding = Embedding::SqrtLoss; }},
        };

        ExperimentConfig cfg = base;
        cfg.runs.clear();
        for (const Variant& v : variants) {
            for (const RunSpec& run : base.runs) {
                RunSpec r = run;
                r.label = base.runs.size() > 1 ? std::string(v.name) + ":" + run.label
                                               : std::string(v.name);
                v.tweak(r.federation);
                cfg.runs.push_back(std::move(r));
            }
        }
        auto results = execute_experiment(cfg, jobs);
        write_file_atomic(cfg.output_dir + "/rounds.csv", rounds_csv(results));

        std::string ablation = std::string("variant") + kSummaryColumns;
        std::istringstream summary(summary_csv(results));
        std::string line;
        std::getline(summary, line);  // header
        while (std::getline(summary, line)) ablation += line + "\n";
        write_file_atomic(cfg.output_dir + "/ablation.csv", ablation);
    });
}

}  // namespace clove
