#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "relmine/data.hpp"
#include "relmine/losses.hpp"
#include "relmine/model.hpp"
#include "relmine/vocabulary.hpp"

namespace relmine {

struct ScoredTriplet {
    int subject_id = 0;
    int object_id = 0;
    int predicate_id = 0;
    double score = 0.0;
};

struct InstanceTriplet {
    int subject_id = 0;
    int predicate_id = 0;
    int object_id = 0;
    auto operator<=>(const InstanceTriplet&) const = default;
};

/// Ground truth of one image: instance-level triplets plus their class-level
/// types (the latter drive zero-shot filtering).
struct GtTriplet {
    InstanceTriplet instance;
    TripletType type;
};

inline double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

/// Scores every (annotated pair, predicate) combination with the classifier
/// probability and ranks them per image, descending. Ties break by pair
/// order, then predicate index.
inline std::vector<ScoredTriplet> rank_triplets(const ClassifierParams& params,
                                                const ImageRecord& image) {
    struct Candidate {
        double score;
        std::size_t pair_idx;
        std::size_t pred_idx;
    };
    std::vector<Candidate> cands;
    cands.reserve(image.pairs.size() * params.num_classes);
    std::vector<double> wide;
    for (std::size_t pi = 0; pi < image.pairs.size(); ++pi) {
        const auto& pr = image.pairs[pi];
        wide.assign(pr.embedding.begin(), pr.embedding.end());
        const auto probs = stable_softmax(forward(params, wide));
        for (std::size_t k = 0; k < probs.size(); ++k)
            cands.push_back({probs[k], pi, k});
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.pair_idx != b.pair_idx) return a.pair_idx < b.pair_idx;
        return a.pred_idx < b.pred_idx;
    });
    std::vector<ScoredTriplet> out;
    out.reserve(cands.size());
    for (const auto& c : cands) {
        const auto& pr = image.pairs[c.pair_idx];
        out.push_back({pr.subject_id, pr.object_id, static_cast<int>(c.pred_idx), c.score});
    }
    return out;
}

inline std::vector<GtTriplet> ground_truth_of(const ImageRecord& image) {
    std::vector<GtTriplet> gt;
    gt.reserve(image.pairs.size());
    for (const auto& pr : image.pairs)
        gt.push_back({{pr.subject_id, pr.predicate_id, pr.object_id}, triplet_type_of(image, pr)});
    return gt;
}

inline std::set<InstanceTriplet> top_k_set(std::span<const ScoredTriplet> ranked, std::size_t k) {
    std::set<InstanceTriplet> top;
    const std::size_t n = std::min(k, ranked.size());
    for (std::size_t i = 0; i < n; ++i)
        top.insert({ranked[i].subject_id, ranked[i].predicate_id, ranked[i].object_id});
    return top;
}

/// Image-averaged Recall@K; images without ground truth are excluded from
/// the mean. NaN when no image contributes.
inline double recall_at_k(std::span<const std::vector<ScoredTriplet>> ranked,
                          std::span<const std::vector<GtTriplet>> ground_truth, std::size_t k) {
    double sum = 0.0;
    std::size_t n_images = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& gt = ground_truth[i];
        if (gt.empty()) continue;
        const auto top = top_k_set(ranked[i], k);
        std::size_t hits = 0;
        for (const auto& g : gt) hits += top.count(g.instance);
        sum += static_cast<double>(hits) / static_cast<double>(gt.size());
        ++n_images;
    }
    return n_images ? sum / static_cast<double>(n_images) : nan_value();
}

/// Per-predicate recall micro-averaged over that predicate's ground-truth
/// instances, then the unweighted mean over predicates that occur; classes
/// with no ground truth are excluded rather than counted as zero.
inline std::pair<double, std::map<std::size_t, double>> mean_recall_at_k(
    std::span<const std::vector<ScoredTriplet>> ranked,
    std::span<const std::vector<GtTriplet>> ground_truth, std::size_t k,
    const RelationVocabulary& vocab) {
    std::map<std::size_t, std::size_t> hits, totals;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& gt = ground_truth[i];
        if (gt.empty()) continue;
        const auto top = top_k_set(ranked[i], k);
        for (const auto& g : gt) {
            const auto c = static_cast<std::size_t>(g.instance.predicate_id);
            ++totals[c];
            hits[c] += top.count(g.instance);
        }
    }
    std::map<std::size_t, double> per_class;
    double sum = 0.0;
    for (const auto& [c, total] : totals) {
        const double r = static_cast<double>(hits[c]) / static_cast<double>(total);
        per_class[c] = r;
        sum += r;
    }
    (void)vocab;
    return {totals.empty() ? nan_value() : sum / static_cast<double>(totals.size()),
            std::move(per_class)};
}

/// Recall@K with ground truth filtered to zero-shot triplet types; images
/// with no zero-shot ground truth are excluded. NaN when the set is empty.
inline double zero_shot_recall_at_k(std::span<const std::vector<ScoredTriplet>> ranked,
                                    std::span<const std::vector<GtTriplet>> ground_truth,
                                    std::size_t k, const std::set<TripletType>& zs_set) {
    if (zs_set.empty()) return nan_value();
    double sum = 0.0;
    std::size_t n_images = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        std::vector<GtTriplet> filtered;
        for (const auto& g : ground_truth[i])
            if (zs_set.count(g.type)) filtered.push_back(g);
        if (filtered.empty()) continue;
        const auto top = top_k_set(ranked[i], k);
        std::size_t hits = 0;
        for (const auto& g : filtered) hits += top.count(g.instance);
        sum += static_cast<double>(hits) / static_cast<double>(filtered.size());
        ++n_images;
    }
    return n_images ? sum / static_cast<double>(n_images) : nan_value();
}

/// Mean recall with the class average restricted to one side of the
/// explicit/implicit partition. Sides with no observed class are NaN.
inline std::map<std::string, double> subset_mean_recall(
    std::span<const std::vector<ScoredTriplet>> ranked,
    std::span<const std::vector<GtTriplet>> ground_truth, std::size_t k,
    const RelationVocabulary& vocab) {
    auto [overall, per_class] = mean_recall_at_k(ranked, ground_truth, k, vocab);
    (void)overall;
    double sum_e = 0.0, sum_i = 0.0;
    std::size_t n_e = 0, n_i = 0;
    for (const auto& [c, r] : per_class) {
        if (vocab.is_explicit(c)) {
            sum_e += r;
            ++n_e;
        } else {
            sum_i += r;
            ++n_i;
        }
    }
    return {{"explicit", n_e ? sum_e / static_cast<double>(n_e) : nan_value()},
            {"implicit", n_i ? sum_i / static_cast<double>(n_i) : nan_value()}};
}

struct EvalResult {
    // indices 0,1,2 correspond to K = 20, 50, 100
    std::array<double, 3> recall{};
    std::array<double, 3> mean_recall{};
    std::array<double, 3> zero_shot_recall{};
    std::map<std::size_t, double> per_class_recall100;
    double explicit_mr50 = 0, explicit_mr100 = 0;
    double implicit_mr50 = 0, implicit_mr100 = 0;

    static constexpr std::array<std::size_t, 3> kRanks{20, 50, 100};
};

inline std::size_t eval_thread_count() {
    if (const char* env = std::getenv("RELMINE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return 1;
}

/// Ranks every image (in parallel when RELMINE_THREADS allows; results land
/// in preassigned slots so the reduction is deterministic) and assembles the
/// full metric suite.
inline EvalResult evaluate(const ClassifierParams& params, const Dataset& ds,
                           const std::set<TripletType>& zs_set) {
    const std::size_t n = ds.images.size();
    std::vector<std::vector<ScoredTriplet>> ranked(n);
    std::vector<std::vector<GtTriplet>> gt(n);
    const std::size_t threads = std::min(eval_thread_count(), std::max<std::size_t>(n, 1));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            ranked[i] = rank_triplets(params, ds.images[i]);
            gt[i] = ground_truth_of(ds.images[i]);
        }
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&, t]() {
                for (std::size_t i = t; i < n; i += threads) {
                    ranked[i] = rank_triplets(params, ds.images[i]);
                    gt[i] = ground_truth_of(ds.images[i]);
                }
            });
        for (auto& th : pool) th.join();
    }

    EvalResult res;
    for (std::size_t ki = 0; ki < EvalResult::kRanks.size(); ++ki) {
        const std::size_t k = EvalResult::kRanks[ki];
        res.recall[ki] = recall_at_k(ranked, gt, k);
        auto [mr, per_class] = mean_recall_at_k(ranked, gt, k, ds.vocabulary);
        res.mean_recall[ki] = mr;
        if (k == 100) res.per_class_recall100 = std::move(per_class);
        res.zero_shot_recall[ki] = zero_shot_recall_at_k(ranked, gt, k, zs_set);
    }
    auto sub50 = subset_mean_recall(ranked, gt, 50, ds.vocabulary);
    auto sub100 = subset_mean_recall(ranked, gt, 100, ds.vocabulary);
    res.explicit_mr50 = sub50.at("explicit");
    res.implicit_mr50 = sub50.at("implicit");
    res.explicit_mr100 = sub100.at("explicit");
    res.implicit_mr100 = sub100.at("implicit");
    return res;
}

// --- CSV emission ----------------------------------------------------------

inline std::string format_metric(double v) {
    if (std::isnan(v)) return "—";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string eval_csv_header() {
    return "R@20,R@50,R@100,mR@20,mR@50,mR@100,zsR@20,zsR@50,zsR@100,"
           "explicit_mR@50,explicit_mR@100,implicit_mR@50,implicit_mR@100";
}

inline std::string eval_csv_row(const EvalResult& r) {
    std::string row;
    auto push = [&row](double v) {
        if (!row.empty()) row += ',';
        row += format_metric(v);
    };
    for (double v : r.recall) push(v);
    for (double v : r.mean_recall) push(v);
    for (double v : r.zero_shot_recall) push(v);
    push(r.explicit_mr50);
    push(r.explicit_mr100);
    push(r.implicit_mr50);
    push(r.implicit_mr100);
    return row;
}

inline std::string per_class_csv(const EvalResult& r, const RelationVocabulary& vocab) {
    std::string out = "predicate,recall@100,is_implicit\n";
    for (const auto& [c, rec] : r.per_class_recall100) {
        out += vocab.name(c);
        out += ',';
        out += format_metric(rec);
        out += ',';
        out += vocab.is_explicit(c) ? "0" : "1";
        out += '\n';
    }
    return out;
}

}  // namespace relmine
