#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace relmine {

inline std::string trim_copy(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

/// The predicate label space P together with its partition into explicit and
/// implicit relation sets. Immutable after construction; indices are stable,
/// so serialized label distributions remain meaningful across save/load.
class RelationVocabulary {
public:
    RelationVocabulary() = default;

    RelationVocabulary(std::vector<std::string> names, std::vector<std::size_t> explicit_ids)
        : names_(std::move(names)) {
        if (names_.empty()) throw std::invalid_argument("vocabulary: names must be non-empty");
        std::vector<bool> is_explicit(names_.size(), false);
        for (std::size_t id : explicit_ids) {
            if (id >= names_.size()) throw std::invalid_argument("vocabulary: explicit id out of range");
            if (is_explicit[id]) throw std::invalid_argument("vocabulary: duplicate explicit id");
            is_explicit[id] = true;
        }
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (index_.count(names_[i])) throw std::invalid_argument("vocabulary: duplicate name '" + names_[i] + "'");
            index_.emplace(names_[i], i);
            (is_explicit[i] ? explicit_ids_ : implicit_ids_).push_back(i);
        }
        if (explicit_ids_.empty()) throw std::invalid_argument("vocabulary: explicit set must be non-empty");
        if (implicit_ids_.empty()) throw std::invalid_argument("vocabulary: implicit set must be non-empty");
        explicit_mask_ = std::move(is_explicit);
    }

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t id) const { return names_.at(id); }
    const std::vector<std::size_t>& explicit_ids() const { return explicit_ids_; }
    const std::vector<std::size_t>& implicit_ids() const { return implicit_ids_; }

    bool is_explicit(std::size_t id) const {
        if (id >= names_.size()) throw std::out_of_range("vocabulary: predicate id out of range");
        return explicit_mask_[id];
    }

    std::optional<std::size_t> index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    /// Id lookup that throws with the offending name; for loaders.
    std::size_t require(std::string_view name) const {
        auto id = index_of(name);
        if (!id) throw std::invalid_argument("vocabulary: unknown predicate '" + std::string(name) + "'");
        return *id;
    }

    /// FNV-1a over names and partition; stored in checkpoints so a model is
    /// never evaluated against a dataset with a different label space.
    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto feed = [&h](std::string_view s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 0x100000001b3ULL;
            }
            h ^= 0xff;
            h *= 0x100000001b3ULL;
        };
        for (const auto& n : names_) feed(n);
        feed("|explicit|");
        for (std::size_t id : explicit_ids_) feed(names_[id]);
        return h;
    }

    nlohmann::json to_json() const {
        nlohmann::json expl = nlohmann::json::array();
        for (std::size_t id : explicit_ids_) expl.push_back(names_[id]);
        return nlohmann::json{{"names", names_}, {"explicit", expl}};
    }

    static RelationVocabulary from_json(const nlohmann::json& j);

    friend bool operator==(const RelationVocabulary& a, const RelationVocabulary& b) {
        return a.names_ == b.names_ && a.explicit_ids_ == b.explicit_ids_;
    }

private:
    std::vector<std::string> names_;
    std::vector<std::size_t> explicit_ids_;   // ascending
    std::vector<std::size_t> implicit_ids_;   // ascending
    std::vector<bool> explicit_mask_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Builds a vocabulary from predicate names and the subset that counts as
/// explicit. Names are trimmed of surrounding whitespace; matching is
/// case-sensitive. The explicit subset must be a strict, non-empty subset.
inline RelationVocabulary build_vocabulary(const std::vector<std::string>& names,
                                           const std::vector<std::string>& explicit_names) {
    std::vector<std::string> trimmed;
    trimmed.reserve(names.size());
    for (const auto& n : names) trimmed.push_back(trim_copy(n));

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < trimmed.size(); ++i) {
        if (!index.emplace(trimmed[i], i).second)
            throw std::invalid_argument("build_vocabulary: duplicate name '" + trimmed[i] + "'");
    }
    std::vector<std::size_t> explicit_ids;
    explicit_ids.reserve(explicit_names.size());
    for (const auto& raw : explicit_names) {
        const std::string n = trim_copy(raw);
        auto it = index.find(n);
        if (it == index.end())
            throw std::invalid_argument("build_vocabulary: explicit name '" + n + "' not in names");
        explicit_ids.push_back(it->second);
    }
    return RelationVocabulary(std::move(trimmed), std::move(explicit_ids));
}

inline RelationVocabulary RelationVocabulary::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("names") || !j.contains("explicit"))
        throw std::invalid_argument("vocabulary: expected object with 'names' and 'explicit'");
    return build_vocabulary(j.at("names").get<std::vector<std::string>>(),
                            j.at("explicit").get<std::vector<std::string>>());
}

inline bool is_implicit(const RelationVocabulary& vocab, std::size_t predicate_id) {
    return !vocab.is_explicit(predicate_id);
}

/// The 50-predicate Visual Genome vocabulary (xu2017scene release) with the
/// 13-predicate explicit set.
inline RelationVocabulary default_vg_partition() {
    static const std::vector<std::string> kNames = {
        "above", "across", "against", "along", "and", "at", "attached to", "behind",
        "belonging to", "between", "carrying", "covered in", "covering", "eating",
        "flying in", "for", "from", "growing on", "hanging from", "has", "holding",
        "in", "in front of", "laying on", "looking at", "lying on", "made of",
        "mounted on", "near", "of", "on", "on back of", "over", "painted on",
        "parked on", "part of", "playing", "riding", "says", "sitting on",
        "standing on", "to", "under", "using", "walking in", "walking on",
        "watching", "wearing", "wears", "with"};
    static const std::vector<std::string> kExplicit = {
        "above", "across", "against", "along", "at", "behind", "between",
        "in", "in front of", "near", "on", "over", "under"};
    return build_vocabulary(kNames, kExplicit);
}

}  // namespace relmine
