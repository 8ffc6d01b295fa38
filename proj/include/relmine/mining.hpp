#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "relmine/data.hpp"
#include "relmine/losses.hpp"
#include "relmine/model.hpp"
#include "relmine/vocabulary.hpp"

namespace relmine {

enum class ImputeMode { Hard, Soft };

/// Index of the highest-scoring label within `support`, ties broken by the
/// lowest index. Softmax is monotone, so raw logits decide.
inline std::size_t argmax_over(std::span<const double> logits,
                               std::span<const std::size_t> support) {
    if (support.empty()) throw std::invalid_argument("argmax_over: empty label subset");
    std::size_t best = support[0];
    for (std::size_t id : support) {
        if (id >= logits.size()) throw std::invalid_argument("argmax_over: index out of range");
        if (logits[id] > logits[best]) best = id;
    }
    return best;
}

/// Imputed label over an arbitrary label subset; the generalized kernel
/// behind the implicit-label operations (the ablation grid swaps subsets).
inline LabelDistribution impute_over(const ClassifierParams& params, std::span<const double> x,
                                     std::span<const std::size_t> support, ImputeMode mode) {
    const auto logits = forward(params, x);
    if (mode == ImputeMode::Hard)
        return LabelDistribution::one_hot(logits.size(), argmax_over(logits, support));
    return restricted_softmax(logits, support);
}

/// One-hot at the highest-scoring implicit label (the paper's default).
inline LabelDistribution impute_implicit_hard(const ClassifierParams& params,
                                              std::span<const double> x,
                                              const RelationVocabulary& vocab) {
    return impute_over(params, x, vocab.implicit_ids(), ImputeMode::Hard);
}

/// Full restricted softmax over the implicit set (the "Soft" ablation).
inline LabelDistribution impute_implicit_soft(const ClassifierParams& params,
                                              std::span<const double> x,
                                              const RelationVocabulary& vocab) {
    return impute_over(params, x, vocab.implicit_ids(), ImputeMode::Soft);
}

/// Label refinement: the elementwise average of the annotated label and the
/// imputed label. For a one-hot pair that disagrees this leaves exactly two
/// 0.5 entries, one per side of the partition.
inline LabelDistribution refine_label(const LabelDistribution& annotated,
                                      const LabelDistribution& imputed) {
    if (annotated.size() != imputed.size())
        throw std::invalid_argument("refine_label: length mismatch");
    LabelDistribution out;
    out.probs.resize(annotated.size());
    for (std::size_t k = 0; k < annotated.size(); ++k)
        out.probs[k] = 0.5 * (annotated[k] + imputed[k]);
    return out;
}

/// Imputes and refines every explicit-annotated pair in one pass, using the
/// current parameter snapshot. Rejects pairs that are not explicit-annotated.
inline std::vector<std::pair<PairRef, LabelDistribution>> impute_batch(
    const ClassifierParams& params, const Dataset& ds, std::span<const PairRef> explicit_pairs,
    const RelationVocabulary& vocab, ImputeMode mode) {
    std::vector<std::pair<PairRef, LabelDistribution>> out;
    out.reserve(explicit_pairs.size());
    std::vector<double> wide;
    for (const PairRef ref : explicit_pairs) {
        const AnnotatedPair& pr = resolve(ds, ref);
        const auto pid = static_cast<std::size_t>(pr.predicate_id);
        if (is_implicit(vocab, pid))
            throw std::invalid_argument("impute_batch: pair annotated with an implicit label");
        wide.assign(pr.embedding.begin(), pr.embedding.end());
        const auto imputed = impute_over(params, wide, vocab.implicit_ids(), mode);
        out.emplace_back(ref, refine_label(LabelDistribution::one_hot(vocab.size(), pid), imputed));
    }
    return out;
}

}  // namespace relmine
