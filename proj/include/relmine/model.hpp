#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "relmine/losses.hpp"
#include "relmine/rng.hpp"

namespace relmine {

/// One training example as the optimizer sees it: an input embedding and a
/// soft target distribution over predicates.
struct TrainingExample {
    std::vector<double> embedding;
    LabelDistribution target;
};

/// Relation classifier f_theta: R^d -> R^|P|, an MLP with one ReLU hidden
/// layer. hidden_dim == 0 degenerates to a single linear map. All parameters
/// and all training math are f64; embeddings are widened at the call site.
struct ClassifierParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;   // 0 => linear model
    std::size_t num_classes = 0;

    std::vector<double> w1;  // hidden_dim x input_dim, row-major (empty when linear)
    std::vector<double> b1;  // hidden_dim
    std::vector<double> w2;  // num_classes x fan_in, fan_in = hidden_dim ? hidden_dim : input_dim
    std::vector<double> b2;  // num_classes

    std::size_t fan_in2() const { return hidden_dim ? hidden_dim : input_dim; }
    std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

    /// Flat parameter view in a fixed order (w1, b1, w2, b2); used by the
    /// checkpoint format and by finite-difference tests.
    std::vector<double> flatten() const {
        std::vector<double> flat;
        flat.reserve(parameter_count());
        flat.insert(flat.end(), w1.begin(), w1.end());
        flat.insert(flat.end(), b1.begin(), b1.end());
        flat.insert(flat.end(), w2.begin(), w2.end());
        flat.insert(flat.end(), b2.begin(), b2.end());
        return flat;
    }

    void unflatten(std::span<const double> flat) {
        if (flat.size() != parameter_count())
            throw std::invalid_argument("unflatten: parameter count mismatch");
        std::size_t off = 0;
        auto take = [&](std::vector<double>& dst) {
            std::copy(flat.begin() + off, flat.begin() + off + dst.size(), dst.begin());
            off += dst.size();
        };
        take(w1);
        take(b1);
        take(w2);
        take(b2);
    }
};

inline ClassifierParams zeros_like(const ClassifierParams& p) {
    ClassifierParams z;
    z.input_dim = p.input_dim;
    z.hidden_dim = p.hidden_dim;
    z.num_classes = p.num_classes;
    z.w1.assign(p.w1.size(), 0.0);
    z.b1.assign(p.b1.size(), 0.0);
    z.w2.assign(p.w2.size(), 0.0);
    z.b2.assign(p.b2.size(), 0.0);
    return z;
}

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases; deterministic per seed.
inline ClassifierParams init_classifier(std::size_t input_dim, std::size_t hidden_dim,
                                        std::size_t num_predicates, std::uint64_t seed) {
    if (input_dim == 0 || num_predicates == 0)
        throw std::invalid_argument("init_classifier: dimensions must be positive");
    ClassifierParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.num_classes = num_predicates;
    RngStream rng = RngStream::derived(seed, 0x1217);
    if (hidden_dim > 0) {
        const double std1 = std::sqrt(2.0 / static_cast<double>(input_dim));
        p.w1.resize(hidden_dim * input_dim);
        for (double& w : p.w1) w = rng.normal() * std1;
        p.b1.assign(hidden_dim, 0.0);
    }
    const double std2 = std::sqrt(2.0 / static_cast<double>(p.fan_in2()));
    p.w2.resize(num_predicates * p.fan_in2());
    for (double& w : p.w2) w = rng.normal() * std2;
    p.b2.assign(num_predicates, 0.0);
    return p;
}

/// Logits for one embedding; pure function of (params, x).
inline std::vector<double> forward(const ClassifierParams& p, std::span<const double> x) {
    if (x.size() != p.input_dim) throw std::invalid_argument("forward: embedding dimension mismatch");
    std::vector<double> h;
    std::span<const double> feat = x;
    if (p.hidden_dim > 0) {
        h.resize(p.hidden_dim);
        for (std::size_t i = 0; i < p.hidden_dim; ++i) {
            double z = p.b1[i];
            const double* row = p.w1.data() + i * p.input_dim;
            for (std::size_t j = 0; j < p.input_dim; ++j) z += row[j] * x[j];
            h[i] = z > 0.0 ? z : 0.0;
        }
        feat = h;
    }
    std::vector<double> logits(p.num_classes);
    for (std::size_t k = 0; k < p.num_classes; ++k) {
        double z = p.b2[k];
        const double* row = p.w2.data() + k * feat.size();
        for (std::size_t j = 0; j < feat.size(); ++j) z += row[j] * feat[j];
        logits[k] = z;
    }
    return logits;
}

inline std::vector<double> forward(const ClassifierParams& p, const std::vector<float>& x) {
    std::vector<double> wide(x.begin(), x.end());
    return forward(p, std::span<const double>(wide));
}

/// Mean soft-target cross-entropy over a batch and its exact gradient.
/// d(loss)/d(logits) for one sample is softmax(logits) - target; the same
/// kernel backs both the CE (one-hot) and KL (refined soft target) paths,
/// whose parameter gradients coincide.
inline std::pair<double, ClassifierParams> loss_and_grad(
    const ClassifierParams& p, std::span<const TrainingExample> batch) {
    if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
    ClassifierParams grad = zeros_like(p);
    double loss = 0.0;
    std::vector<double> z1, h;
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    for (const TrainingExample& ex : batch) {
        if (ex.embedding.size() != p.input_dim)
            throw std::invalid_argument("loss_and_grad: embedding dimension mismatch");
        if (ex.target.size() != p.num_classes)
            throw std::invalid_argument("loss_and_grad: target length mismatch");
        if (!ex.target.valid())
            throw std::invalid_argument("loss_and_grad: target is not a distribution");

        std::span<const double> x(ex.embedding);
        std::span<const double> feat = x;
        if (p.hidden_dim > 0) {
            z1.resize(p.hidden_dim);
            h.resize(p.hidden_dim);
            for (std::size_t i = 0; i < p.hidden_dim; ++i) {
                double z = p.b1[i];
                const double* row = p.w1.data() + i * p.input_dim;
                for (std::size_t j = 0; j < p.input_dim; ++j) z += row[j] * x[j];
                z1[i] = z;
                h[i] = z > 0.0 ? z : 0.0;
            }
            feat = h;
        }
        std::vector<double> logits(p.num_classes);
        for (std::size_t k = 0; k < p.num_classes; ++k) {
            double z = p.b2[k];
            const double* row = p.w2.data() + k * feat.size();
            for (std::size_t j = 0; j < feat.size(); ++j) z += row[j] * feat[j];
            logits[k] = z;
        }
        const LabelDistribution probs = stable_softmax(logits);
        loss += cross_entropy(probs, ex.target) * inv_n;

        // dL/dlogit_k, already scaled by the batch mean.
        std::vector<double> dlogits(p.num_classes);
        for (std::size_t k = 0; k < p.num_classes; ++k)
            dlogits[k] = (probs[k] - ex.target[k]) * inv_n;

        for (std::size_t k = 0; k < p.num_classes; ++k) {
            grad.b2[k] += dlogits[k];
            double* grow = grad.w2.data() + k * feat.size();
            for (std::size_t j = 0; j < feat.size(); ++j) grow[j] += dlogits[k] * feat[j];
        }
        if (p.hidden_dim > 0) {
            for (std::size_t i = 0; i < p.hidden_dim; ++i) {
                if (z1[i] <= 0.0) continue;  // ReLU gate
                double dh = 0.0;
                for (std::size_t k = 0; k < p.num_classes; ++k)
                    dh += p.w2[k * p.hidden_dim + i] * dlogits[k];
                grad.b1[i] += dh;
                double* grow = grad.w1.data() + i * p.input_dim;
                for (std::size_t j = 0; j < p.input_dim; ++j) grow[j] += dh * x[j];
            }
        }
    }
    return {loss, std::move(grad)};
}

/// SGD momentum state. v <- momentum * v + g; theta <- theta - lr * v.
struct OptimizerState {
    double learning_rate = 1e-2;
    double momentum = 0.9;
    ClassifierParams velocity;

    static OptimizerState create(const ClassifierParams& p, double lr, double momentum) {
        if (!(lr > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
        OptimizerState s;
        s.learning_rate = lr;
        s.momentum = momentum;
        s.velocity = zeros_like(p);
        return s;
    }
};

inline void sgd_momentum_step(ClassifierParams& params, OptimizerState& state,
                              const ClassifierParams& grad) {
    auto update = [&](std::vector<double>& theta, std::vector<double>& v,
                      const std::vector<double>& g) {
        if (theta.size() != g.size() || v.size() != g.size())
            throw std::invalid_argument("sgd_momentum_step: shape mismatch");
        for (std::size_t i = 0; i < theta.size(); ++i) {
            v[i] = state.momentum * v[i] + g[i];
            theta[i] -= state.learning_rate * v[i];
        }
    };
    update(params.w1, state.velocity.w1, grad.w1);
    update(params.b1, state.velocity.b1, grad.b1);
    update(params.w2, state.velocity.w2, grad.w2);
    update(params.b2, state.velocity.b2, grad.b2);
}

}  // namespace relmine
