#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace clove {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Flat parameter vector of one model.
struct ModelParams {
    std::vector<double> values;

    ModelParams() = default;
    explicit ModelParams(std::size_t p, double fill = 0.0) : values(p, fill) {}
    explicit ModelParams(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    bool operator==(const ModelParams&) const = default;
};

enum class TaskKind { LinearRegression, SoftmaxRegression, LinearAutoencoder };

/// Which model family a federation trains. The parameter dimension is a pure
/// function of (kind, d, classes/rank).
struct TaskSpec {
    TaskKind kind = TaskKind::LinearRegression;
    int d = 0;        // feature dimension
    int classes = 0;  // softmax only
    int rank = 0;     // autoencoder only

    static TaskSpec linear_regression(int d) { return {TaskKind::LinearRegression, d, 0, 0}; }
    static TaskSpec softmax_regression(int d, int classes) {
        return {TaskKind::SoftmaxRegression, d, classes, 0};
    }
    static TaskSpec linear_autoencoder(int d, int rank) {
        return {TaskKind::LinearAutoencoder, d, 0, rank};
    }

    int param_dim() const {
        switch (kind) {
            case TaskKind::LinearRegression: return d;
            case TaskKind::SoftmaxRegression: return d * classes;
            case TaskKind::LinearAutoencoder: return d * rank;
        }
        return 0;
    }

    bool supervised() const { return kind != TaskKind::LinearAutoencoder; }
    bool operator==(const TaskSpec&) const = default;
};

/// One client's local data. Targets are empty for unsupervised tasks.
struct ClientDataset {
    Matrix features;              // n x d
    std::vector<double> targets;  // length n, or empty
    int client_id = 0;

    std::size_t n() const { return features.rows; }
};

/// Ground truth of a synthetic mixed linear regression world.
struct TrueWorld {
    std::vector<ModelParams> optima;  // K unit-norm models
    double delta = 0.0;               // min pairwise separation
    double sigma = 0.0;               // additive noise std
    std::vector<int> assignment;      // client -> true cluster

    int k() const { return static_cast<int>(optima.size()); }
    double snr() const { return delta * delta / (sigma * sigma); }
};

inline double squared_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace clove
