#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "relmine/losses.hpp"
#include "relmine/model.hpp"
#include "relmine/rng.hpp"

namespace relmine {

struct MixupConfig {
    double alpha = 4.0;
    bool enabled = true;
};

/// lambda ~ Beta(alpha, alpha) as the ratio of two Gamma(alpha, 1) variates.
inline double sample_lambda(double alpha, RngStream& rng) {
    if (!(alpha > 0.0)) throw std::invalid_argument("sample_lambda: alpha must be positive");
    const double g1 = rng.gamma(alpha);
    const double g2 = rng.gamma(alpha);
    return g1 / (g1 + g2);
}

/// Convex combination of two embedding/label pairs.
inline std::pair<std::vector<double>, LabelDistribution> mixup(
    const std::vector<double>& x, const LabelDistribution& p, const std::vector<double>& x_other,
    const LabelDistribution& p_other, double lambda) {
    if (x.size() != x_other.size()) throw std::invalid_argument("mixup: embedding length mismatch");
    if (p.size() != p_other.size()) throw std::invalid_argument("mixup: label length mismatch");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("mixup: lambda outside [0,1]");
    std::vector<double> xm(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xm[i] = lambda * x[i] + (1.0 - lambda) * x_other[i];
    LabelDistribution pm;
    pm.probs.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        pm.probs[i] = lambda * p[i] + (1.0 - lambda) * p_other[i];
    return {std::move(xm), std::move(pm)};
}

/// Mixes every element with a uniformly permuted partner (self-pairing
/// allowed), one lambda per element. Output order matches input order.
inline std::vector<TrainingExample> mixup_batch(const std::vector<TrainingExample>& batch,
                                                RngStream& rng, double alpha) {
    if (batch.empty()) throw std::invalid_argument("mixup_batch: empty batch");
    const auto partner = rng.permutation(batch.size());
    std::vector<TrainingExample> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double lambda = sample_lambda(alpha, rng);
        const TrainingExample& a = batch[i];
        const TrainingExample& b = batch[partner[i]];
        auto [xm, pm] = mixup(a.embedding, a.target, b.embedding, b.target, lambda);
        out.push_back(TrainingExample{std::move(xm), std::move(pm)});
    }
    return out;
}

}  // namespace relmine
