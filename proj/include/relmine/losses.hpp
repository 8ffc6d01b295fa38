#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace relmine {

/// Log clamp used by every loss kernel in the project.
inline constexpr double kLogEps = 1e-12;

/// A probability vector over the |P| predicates. Houses annotated labels,
/// imputed labels and refined soft targets alike.
struct LabelDistribution {
    std::vector<double> probs;

    std::size_t size() const { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }

    bool valid(double tol = 1e-6) const {
        double sum = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0) || !std::isfinite(p)) return false;
            sum += p;
        }
        return std::abs(sum - 1.0) <= tol;
    }

    static LabelDistribution one_hot(std::size_t n, std::size_t index) {
        if (index >= n) throw std::invalid_argument("one_hot: index out of range");
        LabelDistribution d;
        d.probs.assign(n, 0.0);
        d.probs[index] = 1.0;
        return d;
    }
};

inline void require_finite(std::span<const double> logits) {
    for (double l : logits)
        if (!std::isfinite(l)) throw std::invalid_argument("softmax: non-finite logit");
}

/// Max-subtracted softmax over the full label space.
inline LabelDistribution stable_softmax(std::span<const double> logits) {
    require_finite(logits);
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    LabelDistribution out;
    out.probs.resize(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.probs[i] = std::exp(logits[i] - mx);
        sum += out.probs[i];
    }
    for (double& p : out.probs) p /= sum;
    return out;
}

/// Softmax computed only over `subset`; all other entries are exactly zero.
/// Equals mask-then-renormalize of the full softmax, but is computed directly
/// so the max subtraction stays within the subset.
inline LabelDistribution restricted_softmax(std::span<const double> logits,
                                            std::span<const std::size_t> subset) {
    require_finite(logits);
    if (subset.empty()) throw std::invalid_argument("restricted_softmax: empty subset");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i : subset) {
        if (i >= logits.size()) throw std::invalid_argument("restricted_softmax: subset index out of range");
        mx = std::max(mx, logits[i]);
    }
    LabelDistribution out;
    out.probs.assign(logits.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i : subset) {
        out.probs[i] = std::exp(logits[i] - mx);
        sum += out.probs[i];
    }
    for (std::size_t i : subset) out.probs[i] /= sum;
    return out;
}

inline void require_same_length(const LabelDistribution& a, const LabelDistribution& b,
                                const char* what) {
    if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

/// Soft-target cross-entropy  -sum_k target_k ln(max(pred_k, eps)).
inline double cross_entropy(const LabelDistribution& pred, const LabelDistribution& target) {
    require_same_length(pred, target, "cross_entropy");
    double loss = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (target[k] == 0.0) continue;
        loss -= target[k] * std::log(std::max(pred[k], kLogEps));
    }
    return loss;
}

/// Shannon entropy with the 0 ln 0 := 0 convention.
inline double entropy(const LabelDistribution& d) {
    double h = 0.0;
    for (double p : d.probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

/// Forward KL divergence  sum_k target_k ln(target_k / max(pred_k, eps)).
/// Always >= 0 up to the eps clamp; equals cross_entropy(pred, target) minus
/// the target entropy, so its parameter gradient coincides with soft-CE's.
inline double kl_divergence(const LabelDistribution& target, const LabelDistribution& pred) {
    require_same_length(pred, target, "kl_divergence");
    double kl = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (target[k] == 0.0) continue;
        kl += target[k] * std::log(target[k] / std::max(pred[k], kLogEps));
    }
    return kl;
}

}  // namespace relmine
