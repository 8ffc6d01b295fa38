#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "relmine/rng.hpp"
#include "relmine/vocabulary.hpp"

namespace relmine {

using Box = std::array<double, 4>;  // x1, y1, x2, y2; normalized, y grows downward

struct ObjectInstance {
    int id = 0;
    int class_id = 0;
    Box box{0, 0, 0, 0};
};

struct OracleLabels {
    int true_explicit = -1;
    int true_implicit = -1;
};

struct AnnotatedPair {
    int subject_id = 0;
    int object_id = 0;
    int predicate_id = 0;
    std::vector<float> embedding;          // stored f32, widened to f64 at the model boundary
    std::optional<OracleLabels> oracle;    // planted ground truth; evaluation-only
};

struct ImageRecord {
    std::string image_id;
    std::vector<ObjectInstance> objects;
    std::vector<AnnotatedPair> pairs;
};

using TripletType = std::array<int, 3>;  // (subject_class, predicate, object_class)

struct Dataset {
    RelationVocabulary vocabulary;
    std::vector<std::string> object_class_names;
    std::size_t embedding_dim = 0;
    std::vector<ImageRecord> images;
    std::string split_tag = "train";
    std::vector<TripletType> zero_shot_types;  // recorded by the generator on the test split

    std::size_t total_pairs() const {
        std::size_t n = 0;
        for (const auto& img : images) n += img.pairs.size();
        return n;
    }
};

/// (image index, pair index) with enough provenance to find the pair again.
struct PairRef {
    std::size_t image = 0;
    std::size_t pair = 0;
};

inline const AnnotatedPair& resolve(const Dataset& ds, PairRef ref) {
    return ds.images[ref.image].pairs[ref.pair];
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

inline double box_width(const Box& b) { return b[2] - b[0]; }
inline double box_height(const Box& b) { return b[3] - b[1]; }

inline void require_valid_box(const Box& b) {
    for (double v : b)
        if (!std::isfinite(v)) throw std::invalid_argument("box: non-finite coordinate");
    if (!(box_width(b) > 0.0) || !(box_height(b) > 0.0))
        throw std::invalid_argument("box: zero or negative extent");
}

inline double box_iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a[2], b[2]) - std::max(a[0], b[0]));
    const double iy = std::max(0.0, std::min(a[3], b[3]) - std::max(a[1], b[1]));
    const double inter = ix * iy;
    const double uni = box_width(a) * box_height(a) + box_width(b) * box_height(b) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Spatial features of a subject-object box pair:
/// [(cxs-cxo)/wo, (cys-cyo)/ho, ln(ws/wo), ln(hs/ho), IoU].
inline std::array<double, 5> geometry_features(const Box& s, const Box& o) {
    require_valid_box(s);
    require_valid_box(o);
    const double cxs = 0.5 * (s[0] + s[2]), cys = 0.5 * (s[1] + s[3]);
    const double cxo = 0.5 * (o[0] + o[2]), cyo = 0.5 * (o[1] + o[3]);
    const double ws = box_width(s), hs = box_height(s);
    const double wo = box_width(o), ho = box_height(o);
    return {(cxs - cxo) / wo, (cys - cyo) / ho, std::log(ws / wo), std::log(hs / ho),
            box_iou(s, o)};
}

/// Joint embedding: concat(class_table[subject], class_table[object],
/// geometry_features, latent). Length is 2*class_dim + 5 + latent_dim.
inline std::vector<double> compute_joint_embedding(const ObjectInstance& subject,
                                                   const ObjectInstance& object,
                                                   const std::vector<std::vector<double>>& class_table,
                                                   std::span<const double> latent) {
    if (subject.class_id < 0 || object.class_id < 0 ||
        static_cast<std::size_t>(subject.class_id) >= class_table.size() ||
        static_cast<std::size_t>(object.class_id) >= class_table.size())
        throw std::invalid_argument("compute_joint_embedding: class id outside class table");
    const auto geom = geometry_features(subject.box, object.box);
    const auto& cs = class_table[subject.class_id];
    const auto& co = class_table[object.class_id];
    std::vector<double> out;
    out.reserve(cs.size() + co.size() + geom.size() + latent.size());
    out.insert(out.end(), cs.begin(), cs.end());
    out.insert(out.end(), co.begin(), co.end());
    out.insert(out.end(), geom.begin(), geom.end());
    out.insert(out.end(), latent.begin(), latent.end());
    return out;
}

/// Outcomes of the deterministic explicit-label rule. The rule is evaluated
/// in object-relative units so that the outcome is an exact function of the
/// stored geometry features (absolute image scale is not in the embedding).
enum class SpatialOutcome { On, Under, Above, BelowFamily, InFrontOf, Behind, Near, Fallback };

/// Priority-ordered rule: contact "on"/"under", then vertical dominance
/// "above"/below-family, then size-ratio depth "in front of"/"behind",
/// then "near" by center distance, else the fallback label.
inline SpatialOutcome spatial_rule(const Box& s, const Box& o) {
    const auto g = geometry_features(s, o);
    const double dx = g[0], dy = g[1];
    const double hs_over_ho = std::exp(g[3]);
    const double ws_over_wo = std::exp(g[2]);
    const bool horiz_overlap = std::abs(dx) < 0.5 * (ws_over_wo + 1.0);
    // gap between subject bottom and object top, in object heights
    const double gap_on = -dy - 0.5 * (1.0 + hs_over_ho);
    // gap between subject top and object bottom (mirror)
    const double gap_under = dy - 0.5 * (1.0 + hs_over_ho);
    if (horiz_overlap && gap_on >= -0.05 && gap_on < 0.10) return SpatialOutcome::On;
    if (horiz_overlap && gap_under >= -0.05 && gap_under < 0.10) return SpatialOutcome::Under;
    if (std::abs(dy) >= std::abs(dx))
        return dy < 0.0 ? SpatialOutcome::Above : SpatialOutcome::BelowFamily;
    const double log_area_ratio = g[2] + g[3];
    if (std::abs(log_area_ratio) > 0.8)
        return log_area_ratio > 0.0 ? SpatialOutcome::InFrontOf : SpatialOutcome::Behind;
    if (std::hypot(dx, dy) < 1.5) return SpatialOutcome::Near;
    return SpatialOutcome::Fallback;
}

/// Maps rule outcomes onto a vocabulary. Outcome names missing from the
/// vocabulary fall back to `fallback` (or, failing that, the first explicit
/// predicate, so any valid vocabulary is expressible); below-family prefers
/// "below" when the vocabulary has it, "under" otherwise.
class SpatialRuleResolver {
public:
    SpatialRuleResolver(const RelationVocabulary& vocab, const std::string& fallback) {
        auto expl = [&](const std::string& name) -> std::optional<std::size_t> {
            auto id = vocab.index_of(name);
            if (id && vocab.is_explicit(*id)) return id;
            return std::nullopt;
        };
        fallback_ = expl(trim_copy(fallback)).value_or(vocab.explicit_ids().front());
        auto pick = [&](const std::string& name) { return expl(name).value_or(fallback_); };
        on_ = pick("on");
        under_ = pick("under");
        above_ = pick("above");
        below_ = expl("below").value_or(pick("under"));
        front_ = pick("in front of");
        behind_ = pick("behind");
        near_ = pick("near");
        if (vocab.implicit_ids().empty())
            throw std::invalid_argument("spatial rule: vocabulary has no implicit predicates");
    }

    std::size_t resolve(SpatialOutcome outcome) const {
        switch (outcome) {
            case SpatialOutcome::On: return on_;
            case SpatialOutcome::Under: return under_;
            case SpatialOutcome::Above: return above_;
            case SpatialOutcome::BelowFamily: return below_;
            case SpatialOutcome::InFrontOf: return front_;
            case SpatialOutcome::Behind: return behind_;
            case SpatialOutcome::Near: return near_;
            case SpatialOutcome::Fallback: return fallback_;
        }
        throw std::logic_error("spatial rule: unknown outcome");
    }

    std::size_t label_for(const Box& s, const Box& o) const { return resolve(spatial_rule(s, o)); }

private:
    std::size_t on_, under_, above_, below_, front_, behind_, near_, fallback_;
};

// ---------------------------------------------------------------------------
// Annotation-subset partition and zero-shot triplets
// ---------------------------------------------------------------------------

/// Splits a dataset's pairs into X^I (implicit-annotated) and X^E
/// (explicit-annotated), preserving (image, pair) provenance.
inline std::pair<std::vector<PairRef>, std::vector<PairRef>> partition_by_annotation(
    const Dataset& ds, const RelationVocabulary& vocab) {
    std::vector<PairRef> implicit_side, explicit_side;
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        const auto& img = ds.images[i];
        for (std::size_t j = 0; j < img.pairs.size(); ++j) {
            const auto pid = static_cast<std::size_t>(img.pairs[j].predicate_id);
            (vocab.is_explicit(pid) ? explicit_side : implicit_side).push_back({i, j});
        }
    }
    return {std::move(implicit_side), std::move(explicit_side)};
}

inline TripletType triplet_type_of(const ImageRecord& img, const AnnotatedPair& pr) {
    return {img.objects.at(pr.subject_id).class_id, pr.predicate_id,
            img.objects.at(pr.object_id).class_id};
}

inline std::set<TripletType> triplet_types(const Dataset& ds) {
    std::set<TripletType> types;
    for (const auto& img : ds.images)
        for (const auto& pr : img.pairs) types.insert(triplet_type_of(img, pr));
    return types;
}

/// Class-level triplet types present in test ground truth but absent from
/// train ground truth.
inline std::set<TripletType> zero_shot_triplets(const Dataset& train, const Dataset& test) {
    if (!(train.vocabulary == test.vocabulary))
        throw std::invalid_argument("zero_shot_triplets: vocabulary mismatch between splits");
    if (train.object_class_names != test.object_class_names)
        throw std::invalid_argument("zero_shot_triplets: object class table mismatch");
    const auto train_types = triplet_types(train);
    std::set<TripletType> zs;
    for (const auto& t : triplet_types(test))
        if (!train_types.count(t)) zs.insert(t);
    return zs;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------
//
//   <prefix>.header.json   vocabulary, object classes, embedding dim, split
//   <prefix>.jsonl         one ImageRecord per line; embeddings by file order
//   <prefix>.emb           "RMEB", u32 version=1, u32 dim, u64 count, f32 data (LE)
//   <prefix>.oracle.jsonl  per pair: image_id, pair_index, true labels

namespace detail {

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t read_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("embedding sidecar: truncated header");
    return b[0] | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline std::uint64_t read_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("embedding sidecar: truncated header");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline void write_f32_le(std::ostream& os, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    write_u32_le(os, v);
}

inline float read_f32_le(std::istream& is) {
    const std::uint32_t v = read_u32_le(is);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace detail

inline nlohmann::json image_to_json(const ImageRecord& img) {
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& ob : img.objects)
        objs.push_back({{"id", ob.id}, {"class_id", ob.class_id}, {"box", ob.box}});
    nlohmann::json prs = nlohmann::json::array();
    for (const auto& pr : img.pairs)
        prs.push_back({{"subject_id", pr.subject_id},
                       {"object_id", pr.object_id},
                       {"predicate_id", pr.predicate_id}});
    return {{"image_id", img.image_id}, {"objects", objs}, {"pairs", prs}};
}

inline void save_dataset(const Dataset& ds, const std::string& prefix) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(prefix).parent_path();
    if (!dir.empty()) fs::create_directories(dir);

    nlohmann::json header{{"vocabulary", ds.vocabulary.to_json()},
                          {"object_classes", ds.object_class_names},
                          {"embedding_dim", ds.embedding_dim},
                          {"split", ds.split_tag}};
    if (!ds.zero_shot_types.empty()) header["zero_shot_types"] = ds.zero_shot_types;
    {
        std::ofstream f(prefix + ".header.json");
        if (!f) throw std::runtime_error("save_dataset: cannot write " + prefix + ".header.json");
        f << header.dump(2) << "\n";
        if (!f) throw std::runtime_error("save_dataset: write failure on header");
    }
    {
        std::ofstream body(prefix + ".jsonl");
        std::ofstream emb(prefix + ".emb", std::ios::binary);
        if (!body || !emb) throw std::runtime_error("save_dataset: cannot open outputs under " + prefix);
        emb.write("RMEB", 4);
        detail::write_u32_le(emb, 1);
        detail::write_u32_le(emb, static_cast<std::uint32_t>(ds.embedding_dim));
        detail::write_u64_le(emb, ds.total_pairs());
        for (const auto& img : ds.images) {
            body << image_to_json(img).dump() << "\n";
            for (const auto& pr : img.pairs) {
                if (pr.embedding.size() != ds.embedding_dim)
                    throw std::runtime_error("save_dataset: pair embedding dim mismatch");
                for (float v : pr.embedding) detail::write_f32_le(emb, v);
            }
        }
        if (!body || !emb) throw std::runtime_error("save_dataset: write failure under " + prefix);
    }
    bool any_oracle = false;
    for (const auto& img : ds.images)
        for (const auto& pr : img.pairs) any_oracle = any_oracle || pr.oracle.has_value();
    if (any_oracle) {
        std::ofstream f(prefix + ".oracle.jsonl");
        if (!f) throw std::runtime_error("save_dataset: cannot write oracle sidecar");
        for (const auto& img : ds.images)
            for (std::size_t j = 0; j < img.pairs.size(); ++j) {
                const auto& pr = img.pairs[j];
                if (!pr.oracle) continue;
                f << nlohmann::json{{"image_id", img.image_id},
                                    {"pair_index", j},
                                    {"true_explicit", pr.oracle->true_explicit},
                                    {"true_implicit", pr.oracle->true_implicit}}
                         .dump()
                  << "\n";
            }
        if (!f) throw std::runtime_error("save_dataset: write failure on oracle sidecar");
    }
}

inline Dataset load_dataset(const std::string& prefix) {
    Dataset ds;
    {
        std::ifstream f(prefix + ".header.json");
        if (!f) throw std::runtime_error("load_dataset: missing " + prefix + ".header.json");
        nlohmann::json header = nlohmann::json::parse(f);
        ds.vocabulary = RelationVocabulary::from_json(header.at("vocabulary"));
        ds.object_class_names = header.at("object_classes").get<std::vector<std::string>>();
        ds.embedding_dim = header.at("embedding_dim").get<std::size_t>();
        ds.split_tag = header.at("split").get<std::string>();
        if (header.contains("zero_shot_types"))
            ds.zero_shot_types = header.at("zero_shot_types").get<std::vector<TripletType>>();
    }
    {
        std::ifstream body(prefix + ".jsonl");
        if (!body) throw std::runtime_error("load_dataset: missing " + prefix + ".jsonl");
        std::string line;
        std::set<std::string> seen_ids;
        while (std::getline(body, line)) {
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            ImageRecord img;
            img.image_id = j.at("image_id").get<std::string>();
            if (!seen_ids.insert(img.image_id).second)
                throw std::runtime_error("load_dataset: duplicate image_id " + img.image_id);
            for (const auto& jo : j.at("objects")) {
                ObjectInstance ob;
                ob.id = jo.at("id").get<int>();
                ob.class_id = jo.at("class_id").get<int>();
                ob.box = jo.at("box").get<Box>();
                require_valid_box(ob.box);
                if (ob.class_id < 0 ||
                    static_cast<std::size_t>(ob.class_id) >= ds.object_class_names.size())
                    throw std::runtime_error("load_dataset: object class id out of range in " +
                                             img.image_id);
                img.objects.push_back(ob);
            }
            for (const auto& jp : j.at("pairs")) {
                AnnotatedPair pr;
                pr.subject_id = jp.at("subject_id").get<int>();
                pr.object_id = jp.at("object_id").get<int>();
                pr.predicate_id = jp.at("predicate_id").get<int>();
                if (pr.subject_id == pr.object_id)
                    throw std::runtime_error("load_dataset: pair with subject == object in " +
                                             img.image_id);
                auto in_range = [&](int id) {
                    return id >= 0 && static_cast<std::size_t>(id) < img.objects.size();
                };
                if (!in_range(pr.subject_id) || !in_range(pr.object_id))
                    throw std::runtime_error("load_dataset: dangling pair object index in " +
                                             img.image_id);
                if (pr.predicate_id < 0 ||
                    static_cast<std::size_t>(pr.predicate_id) >= ds.vocabulary.size())
                    throw std::runtime_error("load_dataset: unknown predicate id in " + img.image_id);
                img.pairs.push_back(std::move(pr));
            }
            ds.images.push_back(std::move(img));
        }
    }
    {
        std::ifstream emb(prefix + ".emb", std::ios::binary);
        if (!emb) throw std::runtime_error("load_dataset: missing " + prefix + ".emb");
        char magic[4];
        emb.read(magic, 4);
        if (!emb || std::memcmp(magic, "RMEB", 4) != 0)
            throw std::runtime_error("load_dataset: bad embedding sidecar magic");
        const std::uint32_t version = detail::read_u32_le(emb);
        if (version != 1) throw std::runtime_error("load_dataset: unsupported sidecar version");
        const std::uint32_t dim = detail::read_u32_le(emb);
        const std::uint64_t count = detail::read_u64_le(emb);
        if (dim != ds.embedding_dim)
            throw std::runtime_error("load_dataset: embedding dim mismatch between header and sidecar");
        if (count != ds.total_pairs())
            throw std::runtime_error("load_dataset: embedding count mismatch");
        for (auto& img : ds.images)
            for (auto& pr : img.pairs) {
                pr.embedding.resize(dim);
                for (std::uint32_t k = 0; k < dim; ++k) pr.embedding[k] = detail::read_f32_le(emb);
                if (!emb) throw std::runtime_error("load_dataset: truncated embedding sidecar");
                for (float v : pr.embedding)
                    if (!std::isfinite(v))
                        throw std::runtime_error("load_dataset: non-finite embedding value");
            }
    }
    if (std::filesystem::exists(prefix + ".oracle.jsonl")) {
        std::ifstream f(prefix + ".oracle.jsonl");
        std::map<std::string, std::size_t> by_id;
        for (std::size_t i = 0; i < ds.images.size(); ++i) by_id[ds.images[i].image_id] = i;
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            auto it = by_id.find(j.at("image_id").get<std::string>());
            if (it == by_id.end()) throw std::runtime_error("load_dataset: oracle references unknown image");
            auto& img = ds.images[it->second];
            const auto pi = j.at("pair_index").get<std::size_t>();
            if (pi >= img.pairs.size())
                throw std::runtime_error("load_dataset: oracle references unknown pair");
            img.pairs[pi].oracle =
                OracleLabels{j.at("true_explicit").get<int>(), j.at("true_implicit").get<int>()};
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark generator
// ---------------------------------------------------------------------------

struct IndexRange {
    std::size_t min = 1;
    std::size_t max = 1;
};

struct SyntheticConfig {
    std::size_t num_images = 400;       // train split
    std::size_t num_test_images = 160;
    IndexRange objects_per_image{6, 8};
    std::size_t num_object_classes = 12;
    RelationVocabulary vocabulary;      // defaults to default_synthetic_partition()
    IndexRange pairs_per_image{20, 24};
    double annotator_bias = 0.7;        // probability the recorded label is the explicit one
    std::size_t latent_dim = 10;
    double latent_noise_sigma = 0.5;
    std::size_t class_embedding_dim = 12;
    double zero_shot_holdout_fraction = 0.08;
    std::uint64_t seed = 7;
    std::string fallback_explicit = "at";

    std::size_t embedding_dim() const { return 2 * class_embedding_dim + 5 + latent_dim; }

    void validate() const {
        if (!(annotator_bias >= 0.0 && annotator_bias <= 1.0))
            throw std::invalid_argument("synthetic config: annotator_bias must be in [0,1]");
        if (!(zero_shot_holdout_fraction >= 0.0 && zero_shot_holdout_fraction < 1.0))
            throw std::invalid_argument("synthetic config: zero_shot_holdout_fraction must be in [0,1)");
        if (num_images == 0 || num_test_images == 0 || num_object_classes == 0 ||
            latent_dim == 0 || class_embedding_dim == 0)
            throw std::invalid_argument("synthetic config: counts must be positive");
        if (objects_per_image.min < 2 || objects_per_image.min > objects_per_image.max)
            throw std::invalid_argument("synthetic config: bad objects_per_image range");
        if (pairs_per_image.min < 1 || pairs_per_image.min > pairs_per_image.max)
            throw std::invalid_argument("synthetic config: bad pairs_per_image range");
        if (!(latent_noise_sigma >= 0.0))
            throw std::invalid_argument("synthetic config: latent_noise_sigma must be >= 0");
        if (vocabulary.size() == 0)
            throw std::invalid_argument("synthetic config: vocabulary is empty");
    }
};

/// A compact 16-predicate vocabulary whose explicit names are all expressible
/// by the spatial rule; used as the synthetic benchmark default.
inline RelationVocabulary default_synthetic_partition() {
    static const std::vector<std::string> kNames = {
        "above", "at", "behind", "carrying", "eating", "holding", "in front of", "near",
        "on", "playing", "riding", "sitting on", "standing on", "under", "watching", "wearing"};
    static const std::vector<std::string> kExplicit = {"above", "at", "behind", "in front of",
                                                       "near", "on", "under"};
    return build_vocabulary(kNames, kExplicit);
}

namespace detail {

inline Box clamp_box(double cx, double cy, double w, double h) {
    w = std::clamp(w, 0.02, 0.9);
    h = std::clamp(h, 0.02, 0.9);
    cx = std::clamp(cx, w / 2, 1.0 - w / 2);
    cy = std::clamp(cy, h / 2, 1.0 - h / 2);
    return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

/// Structured object placement so every branch of the spatial rule occurs
/// with useful frequency: stacks (on/under), side-by-side offsets
/// (near/at/front/behind) and free placement (above/below dominance).
inline std::vector<ObjectInstance> place_objects(RngStream& rng, const SyntheticConfig& cfg) {
    const std::size_t m =
        cfg.objects_per_image.min +
        rng.uniform_index(cfg.objects_per_image.max - cfg.objects_per_image.min + 1);
    std::vector<ObjectInstance> objects;
    objects.reserve(m);
    auto random_free = [&]() {
        return clamp_box(rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.08, 0.30),
                         rng.uniform(0.08, 0.30));
    };
    for (std::size_t i = 0; i < m; ++i) {
        ObjectInstance ob;
        ob.id = static_cast<int>(i);
        ob.class_id = static_cast<int>(rng.uniform_index(cfg.num_object_classes));
        if (i == 0) {
            ob.box = random_free();
        } else {
            const Box& a = objects[rng.uniform_index(i)].box;
            const double acx = 0.5 * (a[0] + a[2]), acy = 0.5 * (a[1] + a[3]);
            const double aw = box_width(a), ah = box_height(a);
            const double r = rng.uniform();
            if (r < 0.22) {
                // stack on the anchor: contact gap within the "on" band
                const double w = aw * rng.uniform(0.5, 1.1);
                const double h = std::min(0.35, ah * rng.uniform(0.5, 1.1));
                const double cx = acx + rng.uniform(-0.25, 0.25) * aw;
                const double gap = rng.uniform(-0.03, 0.08) * ah;
                const double y2 = a[1] - gap;
                ob.box = clamp_box(cx, y2 - h / 2, w, h);
            } else if (r < 0.50) {
                // beside the anchor; sizes either similar (near/at) or very
                // different (depth branch)
                double scale;
                if (rng.uniform() < 0.5)
                    scale = std::exp(rng.uniform(-0.3, 0.3));
                else
                    scale = std::exp((rng.uniform() < 0.5 ? 1.0 : -1.0) * rng.uniform(0.6, 1.2));
                const double w = aw * scale, h = ah * scale;
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                const double cx = acx + sign * rng.uniform(0.9, 2.4) * aw;
                const double cy = acy + rng.uniform(-0.25, 0.25) * ah;
                ob.box = clamp_box(cx, cy, w, h);
            } else if (r < 0.62) {
                // nested / heavy overlap
                const double w = aw * rng.uniform(0.3, 0.6), h = ah * rng.uniform(0.3, 0.6);
                ob.box = clamp_box(acx + rng.uniform(-0.3, 0.3) * aw,
                                   acy + rng.uniform(-0.3, 0.3) * ah, w, h);
            } else {
                ob.box = random_free();
            }
        }
        objects.push_back(ob);
    }
    return objects;
}

inline std::uint64_t type_hash(std::uint64_t seed, const TripletType& t) {
    std::uint64_t h = mix64(seed ^ 0x5EED);
    h = mix64(h ^ (static_cast<std::uint64_t>(t[0]) + 0x1000));
    h = mix64(h ^ (static_cast<std::uint64_t>(t[1]) + 0x2000));
    h = mix64(h ^ (static_cast<std::uint64_t>(t[2]) + 0x3000));
    return h;
}

}  // namespace detail

/// Planted structure shared by both splits: class embeddings, per-implicit
/// latent anchors, and a skewed class-pair compatibility table over implicit
/// predicates. Exposed so oracle tests can interrogate the plant.
struct SyntheticPlant {
    std::vector<std::vector<double>> class_table;             // num_classes x class_dim
    std::vector<std::vector<double>> anchors;                 // |P| rows; empty for explicit ids
    std::vector<double> implicit_frequency;                   // |P|; global skew, 0 for explicit
    std::vector<std::vector<std::vector<double>>> compat;     // [s_class][o_class] -> cdf over implicit_ids
    std::vector<std::size_t> implicit_ids;

    std::size_t draw_implicit(RngStream& rng, int s_class, int o_class) const {
        const auto& cdf = compat[s_class][o_class];
        const double u = rng.uniform();
        for (std::size_t k = 0; k < cdf.size(); ++k)
            if (u < cdf[k]) return implicit_ids[k];
        return implicit_ids.back();
    }
};

inline SyntheticPlant build_plant(const SyntheticConfig& cfg) {
    SyntheticPlant plant;
    plant.implicit_ids.assign(cfg.vocabulary.implicit_ids().begin(),
                              cfg.vocabulary.implicit_ids().end());
    const std::size_t ni = plant.implicit_ids.size();

    RngStream cls_rng = RngStream::derived(cfg.seed, 0xC1A55);
    plant.class_table.resize(cfg.num_object_classes);
    for (auto& row : plant.class_table) {
        row.resize(cfg.class_embedding_dim);
        for (double& v : row) v = cls_rng.normal();
    }

    // Latent anchors: orthonormalized when latent_dim allows, so implicit
    // relations are separable from the latent block alone.
    RngStream anc_rng = RngStream::derived(cfg.seed, 0xA2C40);
    std::vector<std::vector<double>> raw(ni, std::vector<double>(cfg.latent_dim));
    for (auto& v : raw)
        for (double& x : v) x = anc_rng.normal();
    for (std::size_t i = 0; i < ni; ++i) {
        if (cfg.latent_dim >= ni) {
            for (std::size_t j = 0; j < i; ++j) {
                double dot = 0.0;
                for (std::size_t k = 0; k < cfg.latent_dim; ++k) dot += raw[i][k] * raw[j][k];
                for (std::size_t k = 0; k < cfg.latent_dim; ++k) raw[i][k] -= dot * raw[j][k];
            }
        }
        double norm = 0.0;
        for (double x : raw[i]) norm += x * x;
        norm = std::sqrt(std::max(norm, 1e-12));
        for (double& x : raw[i]) x /= norm;
    }
    plant.anchors.assign(cfg.vocabulary.size(), {});
    for (std::size_t k = 0; k < ni; ++k) plant.anchors[plant.implicit_ids[k]] = raw[k];

    // Long-tailed global frequency over implicit predicates; the rank order
    // is reshuffled per seed so no fixed predicate is always the rare one.
    RngStream freq_rng = RngStream::derived(cfg.seed, 0xF4E0);
    const auto rank_of = freq_rng.permutation(ni);
    std::vector<double> global(ni);
    for (std::size_t k = 0; k < ni; ++k) global[k] = std::pow(0.62, static_cast<double>(rank_of[k]));
    plant.implicit_frequency.assign(cfg.vocabulary.size(), 0.0);
    double gsum = 0.0;
    for (double g : global) gsum += g;
    for (std::size_t k = 0; k < ni; ++k)
        plant.implicit_frequency[plant.implicit_ids[k]] = global[k] / gsum;

    // Per class-pair: a sparse compatible subset, weighted by global skew.
    RngStream cmp_rng = RngStream::derived(cfg.seed, 0xC03B);
    plant.compat.resize(cfg.num_object_classes);
    const std::size_t support = std::min<std::size_t>(ni, 3);
    for (std::size_t a = 0; a < cfg.num_object_classes; ++a) {
        plant.compat[a].resize(cfg.num_object_classes);
        for (std::size_t b = 0; b < cfg.num_object_classes; ++b) {
            auto perm = cmp_rng.permutation(ni);
            std::vector<double> w(ni, 0.0);
            for (std::size_t k = 0; k < support; ++k)
                w[perm[k]] = global[perm[k]] * cmp_rng.uniform(0.5, 1.5);
            double sum = 0.0;
            for (double x : w) sum += x;
            std::vector<double> cdf(ni);
            double acc = 0.0;
            for (std::size_t k = 0; k < ni; ++k) {
                acc += w[k] / sum;
                cdf[k] = acc;
            }
            plant.compat[a][b] = std::move(cdf);
        }
    }
    return plant;
}

/// Deterministic planted scene-graph benchmark. Every pair carries a true
/// explicit label (pure function of the two boxes), a true implicit label
/// (drawn from the planted compatibility table and encoded in the latent
/// block of the embedding), and a recorded label that is the explicit one
/// with probability annotator_bias. Zero-shot triplet types are selected
/// from the test split and rejected from train.
inline std::pair<Dataset, Dataset> generate_synthetic(const SyntheticConfig& user_cfg) {
    SyntheticConfig cfg = user_cfg;
    if (cfg.vocabulary.size() == 0) cfg.vocabulary = default_synthetic_partition();
    cfg.validate();
    const SpatialRuleResolver rule(cfg.vocabulary, cfg.fallback_explicit);
    const SyntheticPlant plant = build_plant(cfg);

    auto make_image = [&](std::uint64_t salt, std::size_t index, const std::string& id_prefix,
                          const std::set<TripletType>* reject) {
        RngStream rng = RngStream::derived(cfg.seed, salt + index);
        ImageRecord img;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s_%06zu", id_prefix.c_str(), index);
        img.image_id = buf;
        img.objects = detail::place_objects(rng, cfg);

        const std::size_t m = img.objects.size();
        std::vector<std::pair<int, int>> all_pairs;
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t o = 0; o < m; ++o)
                if (s != o) all_pairs.emplace_back(static_cast<int>(s), static_cast<int>(o));
        const auto order = rng.permutation(all_pairs.size());
        const std::size_t want =
            cfg.pairs_per_image.min +
            rng.uniform_index(cfg.pairs_per_image.max - cfg.pairs_per_image.min + 1);
        const std::size_t n_pairs = std::min(want, all_pairs.size());

        for (std::size_t t = 0; t < n_pairs; ++t) {
            const auto [si, oi] = all_pairs[order[t]];
            const auto& sub = img.objects[si];
            const auto& obj = img.objects[oi];
            const int te = static_cast<int>(rule.label_for(sub.box, obj.box));

            int ti = -1, recorded = -1;
            std::vector<double> latent(cfg.latent_dim);
            bool ok = false;
            for (int attempt = 0; attempt < 60 && !ok; ++attempt) {
                ti = static_cast<int>(plant.draw_implicit(rng, sub.class_id, obj.class_id));
                recorded = rng.bernoulli(cfg.annotator_bias) ? te : ti;
                if (!reject ||
                    !reject->count(TripletType{sub.class_id, recorded, obj.class_id}))
                    ok = true;
            }
            if (!ok) continue;  // pair type fully blocked by the zero-shot holdout

            const auto& mu = plant.anchors[ti];
            for (std::size_t k = 0; k < cfg.latent_dim; ++k)
                latent[k] = mu[k] + cfg.latent_noise_sigma * rng.normal();

            AnnotatedPair pr;
            pr.subject_id = si;
            pr.object_id = oi;
            pr.predicate_id = recorded;
            const auto emb = compute_joint_embedding(sub, obj, plant.class_table, latent);
            pr.embedding.assign(emb.begin(), emb.end());
            pr.oracle = OracleLabels{te, ti};
            img.pairs.push_back(std::move(pr));
        }
        return img;
    };

    Dataset test;
    test.vocabulary = cfg.vocabulary;
    test.embedding_dim = cfg.embedding_dim();
    test.split_tag = "test";
    for (std::size_t c = 0; c < cfg.num_object_classes; ++c) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "obj_%02zu", c);
        test.object_class_names.push_back(buf);
    }
    for (std::size_t i = 0; i < cfg.num_test_images; ++i)
        test.images.push_back(make_image(0x7E570000ULL, i, "test", nullptr));

    // Designate zero-shot types among those the test split actually contains.
    std::set<TripletType> zs;
    if (cfg.zero_shot_holdout_fraction > 0.0) {
        for (const auto& t : triplet_types(test)) {
            const double u =
                static_cast<double>(detail::type_hash(cfg.seed, t) >> 11) * 0x1.0p-53;
            if (u < cfg.zero_shot_holdout_fraction) zs.insert(t);
        }
    }

    Dataset train;
    train.vocabulary = cfg.vocabulary;
    train.object_class_names = test.object_class_names;
    train.embedding_dim = cfg.embedding_dim();
    train.split_tag = "train";
    for (std::size_t i = 0; i < cfg.num_images; ++i)
        train.images.push_back(make_image(0x12A110000ULL, i, "train", zs.empty() ? nullptr : &zs));

    test.zero_shot_types.assign(zs.begin(), zs.end());
    return {std::move(train), std::move(test)};
}

}  // namespace relmine
