#include "clove/task.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace clove {

namespace {

void check_shapes(const TaskSpec& task, const ModelParams& params,
                  const ClientDataset& data) {
    if (static_cast<int>(params.size()) != task.param_dim())
        throw std::invalid_argument("params dimension does not match task");
    if (data.n() == 0) throw std::invalid_argument("empty dataset");
    if (static_cast<int>(data.features.cols) != task.d)
        throw std::invalid_argument("feature dimension does not match task");
    if (task.supervised()) {
        if (data.targets.size() != data.n())
            throw std::invalid_argument("supervised task requires one target per row");
    } else if (!data.targets.empty()) {
        throw std::invalid_argument("unsupervised task got targets");
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// logits[c] = <w_c, x> with w_c = params[c*d .. c*d+d)
void softmax_logits(const ModelParams& params, std::span<const double> x, int d,
                    int classes, std::vector<double>& logits) {
    logits.resize(classes);
    for (int c = 0; c < classes; ++c) {
        const double* w = params.values.data() + static_cast<std::size_t>(c) * d;
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += w[j] * x[j];
        logits[c] = s;
    }
}

// probs = softmax(logits), returns log(sum exp) shifted by max for stability
void softmax_probs(std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : logits) v /= sum;
}

double sample_loss_linear(const ModelParams& params, std::span<const double> x, double y) {
    double r = dot(params.values, x) - y;
    return r * r;
}

double sample_loss_softmax(const TaskSpec& task, const ModelParams& params,
                           std::span<const double> x, double y,
                           std::vector<double>& scratch) {
    softmax_logits(params, x, task.d, task.classes, scratch);
    double mx = *std::max_element(scratch.begin(), scratch.end());
    double lse = 0.0;
    for (double v : scratch) lse += std::exp(v - mx);
    lse = mx + std::log(lse);
    int label = static_cast<int>(y);
    if (label < 0 || label >= task.classes)
        throw std::invalid_argument("class label out of range");
    return lse - scratch[label];
}

// reconstruction x_hat = W W^T x with W the d x rank matrix in params
double sample_loss_autoencoder(const TaskSpec& task, const ModelParams& params,
                               std::span<const double> x, std::vector<double>& z) {
    const int d = task.d, r = task.rank;
    z.assign(r, 0.0);
    for (int i = 0; i < d; ++i) {
        const double* w = params.values.data() + static_cast<std::size_t>(i) * r;
        for (int j = 0; j < r; ++j) z[j] += w[j] * x[i];
    }
    double err = 0.0;
    for (int i = 0; i < d; ++i) {
        const double* w = params.values.data() + static_cast<std::size_t>(i) * r;
        double xhat = 0.0;
        for (int j = 0; j < r; ++j) xhat += w[j] * z[j];
        double e = xhat - x[i];
        err += e * e;
    }
    return err;
}

// Accumulates the gradient over data rows idx[0..count), scaled by 1/count.
// Rows must be in ascending order so full-batch calls are bit-identical to
// gradient().
std::vector<double> gradient_over(const TaskSpec& task, const ModelParams& params,
                                  const ClientDataset& data,
                                  std::span<const std::size_t> idx) {
    const int d = task.d;
    std::vector<double> g(task.param_dim(), 0.0);
    const double inv = 1.0 / static_cast<double>(idx.size());

    switch (task.kind) {
        case TaskKind::LinearRegression: {
            for (std::size_t ii : idx) {
                auto x = data.features.row(ii);
                double r = dot(params.values, x) - data.targets[ii];
                double c = 2.0 * inv * r;
                for (int j = 0; j < d; ++j) g[j] += c * x[j];
            }
            break;
        }
        case TaskKind::SoftmaxRegression: {
            std::vector<double> p;
            for (std::size_t ii : idx) {
                auto x = data.features.row(ii);
                softmax_logits(params, x, d, task.classes, p);
                softmax_probs(p);
                int label = static_cast<int>(data.targets[ii]);
                for (int c = 0; c < task.classes; ++c) {
                    double coef = inv * (p[c] - (c == label ? 1.0 : 0.0));
                    double* gc = g.data() + static_cast<std::size_t>(c) * d;
                    for (int j = 0; j < d; ++j) gc[j] += coef * x[j];
                }
            }
            break;
        }
        case TaskKind::LinearAutoencoder: {
            // L = |x - W W^T x|^2, dL/dW = 2 (e z^T + x (W^T e)^T)
            // with z = W^T x, e = W z - x
            const int r = task.rank;
            std::vector<double> z(r), e(d), wte(r);
            for (std::size_t ii : idx) {
                auto x = data.features.row(ii);
                std::fill(z.begin(), z.end(), 0.0);
                for (int i = 0; i < d; ++i) {
                    const double* w = params.values.data() + static_cast<std::size_t>(i) * r;
                    for (int j = 0; j < r; ++j) z[j] += w[j] * x[i];
                }
                std::fill(wte.begin(), wte.end(), 0.0);
                for (int i = 0; i < d; ++i) {
                    const double* w = params.values.data() + static_cast<std::size_t>(i) * r;
                    double xhat = 0.0;
                    for (int j = 0; j < r; ++j) xhat += w[j] * z[j];
                    e[i] = xhat - x[i];
                    for (int j = 0; j < r; ++j) wte[j] += w[j] * e[i];
                }
                const double c = 2.0 * inv;
                for (int i = 0; i < d; ++i) {
                    double* gi = g.data() + static_cast<std::size_t>(i) * r;
                    for (int j = 0; j < r; ++j) gi[j] += c * (e[i] * z[j] + x[i] * wte[j]);
                }
            }
            break;
        }
    }
    return g;
}

}  // namespace

double loss(const TaskSpec& task, const ModelParams& params, const ClientDataset& data) {
    check_shapes(task, params, data);
    double total = 0.0;
    std::vector<double> scratch;
    for (std::size_t i = 0; i < data.n(); ++i) {
        auto x = data.features.row(i);
        switch (task.kind) {
            case TaskKind::LinearRegression:
                total += sample_loss_linear(params, x, data.targets[i]);
                break;
            case TaskKind::SoftmaxRegression:
                total += sample_loss_softmax(task, params, x, data.targets[i], scratch);
                break;
            case TaskKind::LinearAutoencoder:
                total += sample_loss_autoencoder(task, params, x, scratch);
                break;
        }
    }
    return total / static_cast<double>(data.n());
}

std::vector<double> gradient(const TaskSpec& task, const ModelParams& params,
                             const ClientDataset& data) {
    check_shapes(task, params, data);
    std::vector<std::size_t> all(data.n());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return gradient_over(task, params, data, all);
}

ModelParams local_update(const TaskSpec& task, const ModelParams& params,
                         const ClientDataset& data, double lr, int epochs,
                         int batch_size, RngStream& rng) {
    check_shapes(task, params, data);
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    const std::size_t n = data.n();
    if (batch_size < 1 || static_cast<std::size_t>(batch_size) > n)
        throw std::invalid_argument("batch_size must be in [1, n]");

    ModelParams cur = params;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t bs = static_cast<std::size_t>(batch_size);
    const bool full_batch = bs == n;

    for (int e = 0; e < epochs; ++e) {
        if (!full_batch) std::shuffle(order.begin(), order.end(), rng.gen());
        for (std::size_t start = 0; start < n; start += bs) {
            std::size_t len = std::min(bs, n - start);
            std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + start + len);
            std::sort(batch.begin(), batch.end());
            std::vector<double> g = gradient_over(task, cur, data, batch);
            for (std::size_t j = 0; j < cur.size(); ++j) cur[j] -= lr * g[j];
        }
    }
    return cur;
}

std::vector<double> sqrt_transform(const std::vector<double>& loss_vector) {
    std::vector<double> out(loss_vector.size());
    for (std::size_t i = 0; i < loss_vector.size(); ++i) {
        if (loss_vector[i] < 0.0)
            throw std::invalid_argument("sqrt_transform: negative entry");
        out[i] = std::sqrt(loss_vector[i]);
    }
    return out;
}

double classification_accuracy(const TaskSpec& task, const ModelParams& params,
                               const ClientDataset& data) {
    if (task.kind != TaskKind::SoftmaxRegression)
        throw std::invalid_argument("accuracy only defined for softmax task");
    check_shapes(task, params, data);
    std::vector<double> logits;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        softmax_logits(params, data.features.row(i), task.d, task.classes, logits);
        auto best = std::max_element(logits.begin(), logits.end());
        if (static_cast<int>(best - logits.begin()) == static_cast<int>(data.targets[i]))
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.n());
}

}  // namespace clove
