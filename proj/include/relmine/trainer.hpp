#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "relmine/augment.hpp"
#include "relmine/data.hpp"
#include "relmine/metrics.hpp"
#include "relmine/mining.hpp"
#include "relmine/model.hpp"
#include "relmine/rng.hpp"

namespace relmine {

enum class TrainLabelSubset { All, ExplicitOnly, ImplicitOnly, RandomSplit };

inline std::string to_string(TrainLabelSubset s) {
    switch (s) {
        case TrainLabelSubset::All: return "all";
        case TrainLabelSubset::ExplicitOnly: return "explicit";
        case TrainLabelSubset::ImplicitOnly: return "implicit";
        case TrainLabelSubset::RandomSplit: return "random";
    }
    throw std::logic_error("unknown subset");
}

inline TrainLabelSubset subset_from_string(const std::string& s) {
    if (s == "all") return TrainLabelSubset::All;
    if (s == "explicit") return TrainLabelSubset::ExplicitOnly;
    if (s == "implicit") return TrainLabelSubset::ImplicitOnly;
    if (s == "random") return TrainLabelSubset::RandomSplit;
    throw std::invalid_argument("train_label_subset: expected all|explicit|implicit|random, got '" +
                                s + "'");
}

struct TrainConfig {
    std::size_t batch_size = 12;
    double learning_rate = 1e-2;
    double momentum = 0.9;
    std::size_t warmup_iterations = 30000;
    std::size_t refinement_iterations = 20000;
    MixupConfig mixup{};                               // alpha 4, enabled
    ImputeMode impute_mode = ImputeMode::Hard;
    bool refinement_enabled = true;
    TrainLabelSubset train_label_subset = TrainLabelSubset::ImplicitOnly;
    std::uint64_t seed = 1;
    std::size_t eval_every = 500;
    std::size_t hidden_width = 64;

    /// The paper's training hyperparameters.
    static TrainConfig paper_profile() { return TrainConfig{}; }

    /// Same method at desk scale; minutes instead of GPU-days.
    static TrainConfig desk_profile() {
        TrainConfig c;
        c.batch_size = 32;
        c.warmup_iterations = 3000;
        c.refinement_iterations = 2000;
        return c;
    }

    void validate() const {
        if (batch_size == 0) throw std::invalid_argument("train config: batch_size must be positive");
        if (!(learning_rate > 0)) throw std::invalid_argument("train config: learning_rate must be positive");
        if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("train config: momentum must be in [0,1)");
        if (!(mixup.alpha > 0)) throw std::invalid_argument("train config: mixup.alpha must be positive");
        if (eval_every == 0) throw std::invalid_argument("train config: eval_every must be positive");
    }

    nlohmann::json to_json() const {
        return {{"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"momentum", momentum},
                {"warmup_iterations", warmup_iterations},
                {"refinement_iterations", refinement_iterations},
                {"mixup", {{"alpha", mixup.alpha}, {"enabled", mixup.enabled}}},
                {"impute_mode", impute_mode == ImputeMode::Hard ? "hard" : "soft"},
                {"refinement_enabled", refinement_enabled},
                {"train_label_subset", to_string(train_label_subset)},
                {"seed", seed},
                {"eval_every", eval_every},
                {"hidden_width", hidden_width}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        auto get = [&](const char* key, auto& dst) {
            if (j.contains(key)) {
                try {
                    dst = j.at(key).get<std::decay_t<decltype(dst)>>();
                } catch (const std::exception&) {
                    throw std::invalid_argument(std::string("train config: bad value for '") + key + "'");
                }
            }
        };
        get("batch_size", c.batch_size);
        get("learning_rate", c.learning_rate);
        get("momentum", c.momentum);
        get("warmup_iterations", c.warmup_iterations);
        get("refinement_iterations", c.refinement_iterations);
        if (j.contains("mixup")) {
            const auto& m = j.at("mixup");
            if (m.contains("alpha")) c.mixup.alpha = m.at("alpha").get<double>();
            if (m.contains("enabled")) c.mixup.enabled = m.at("enabled").get<bool>();
        }
        if (j.contains("impute_mode")) {
            const auto s = j.at("impute_mode").get<std::string>();
            if (s == "hard") c.impute_mode = ImputeMode::Hard;
            else if (s == "soft") c.impute_mode = ImputeMode::Soft;
            else throw std::invalid_argument("train config: impute_mode must be hard|soft");
        }
        get("refinement_enabled", c.refinement_enabled);
        if (j.contains("train_label_subset"))
            c.train_label_subset = subset_from_string(j.at("train_label_subset").get<std::string>());
        get("seed", c.seed);
        get("eval_every", c.eval_every);
        get("hidden_width", c.hidden_width);
        c.validate();
        return c;
    }

    std::uint64_t hash() const {
        const std::string dump = to_json().dump();
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : dump) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

/// The label-space roles a run trains with: labels in `anchor_labels` keep
/// their one-hot annotation; pairs annotated outside it are the imputation
/// targets, with the restricted softmax supported on `anchor_labels`.
struct LabelRoles {
    std::vector<std::size_t> anchor_labels;
    std::vector<bool> is_anchor;  // size |P|

    bool anchors_everything() const { return anchor_labels.size() == is_anchor.size(); }
};

inline LabelRoles label_roles_for(const TrainConfig& cfg, const RelationVocabulary& vocab) {
    LabelRoles roles;
    roles.is_anchor.assign(vocab.size(), false);
    auto use = [&](std::span<const std::size_t> ids) {
        roles.anchor_labels.assign(ids.begin(), ids.end());
        for (std::size_t id : ids) roles.is_anchor[id] = true;
    };
    switch (cfg.train_label_subset) {
        case TrainLabelSubset::All: {
            std::vector<std::size_t> all(vocab.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            use(all);
            break;
        }
        case TrainLabelSubset::ImplicitOnly: use(vocab.implicit_ids()); break;
        case TrainLabelSubset::ExplicitOnly: use(vocab.explicit_ids()); break;
        case TrainLabelSubset::RandomSplit: {
            // A seeded bipartition, the same size as the implicit set, drawn
            // without knowledge of which labels are explicit.
            RngStream rng = RngStream::derived(cfg.seed, 0x5B117);
            auto perm = rng.permutation(vocab.size());
            std::vector<std::size_t> chosen(perm.begin(),
                                            perm.begin() + vocab.implicit_ids().size());
            std::sort(chosen.begin(), chosen.end());
            use(chosen);
            break;
        }
    }
    return roles;
}

/// Flattened training view: one slot per pair, embeddings widened to f64 once.
struct TrainingPool {
    std::vector<std::vector<double>> embeddings;
    std::vector<std::size_t> predicate_ids;
    std::vector<PairRef> refs;
    std::vector<std::size_t> anchor_pool;      // indices with anchor-side annotation
    std::vector<std::size_t> full_pool;        // all indices

    static TrainingPool build(const Dataset& ds, const LabelRoles& roles) {
        TrainingPool pool;
        for (std::size_t i = 0; i < ds.images.size(); ++i) {
            const auto& img = ds.images[i];
            for (std::size_t j = 0; j < img.pairs.size(); ++j) {
                const auto& pr = img.pairs[j];
                pool.embeddings.emplace_back(pr.embedding.begin(), pr.embedding.end());
                pool.predicate_ids.push_back(static_cast<std::size_t>(pr.predicate_id));
                pool.refs.push_back({i, j});
                const std::size_t idx = pool.embeddings.size() - 1;
                pool.full_pool.push_back(idx);
                if (roles.is_anchor[pool.predicate_ids[idx]]) pool.anchor_pool.push_back(idx);
            }
        }
        return pool;
    }
};

struct StageResult {
    ClassifierParams params;
    std::vector<double> iteration_loss;
};

/// Called every eval_every iterations and at stage end with fresh parameters.
using EvalCallback =
    std::function<void(std::size_t iteration, const std::string& stage, double mean_loss,
                       const ClassifierParams& params)>;

namespace detail_train {

inline double run_stage(ClassifierParams& params, const TrainingPool& pool,
                        std::span<const std::size_t> sample_pool, const LabelRoles& roles,
                        const TrainConfig& cfg, std::size_t iterations, bool stage_two,
                        RngStream& sample_rng, RngStream& mixup_rng,
                        std::vector<double>* loss_trace, const std::string& stage_name,
                        std::size_t iteration_offset, const EvalCallback& on_eval) {
    if (sample_pool.empty()) throw std::invalid_argument("trainer: empty training subset");
    OptimizerState opt = OptimizerState::create(params, cfg.learning_rate, cfg.momentum);
    const std::size_t num_classes = params.num_classes;
    double loss_sum_since_eval = 0.0;
    std::size_t steps_since_eval = 0;
    double last_mean = 0.0;

    for (std::size_t t = 0; t < iterations; ++t) {
        std::vector<TrainingExample> batch;
        batch.reserve(cfg.batch_size);
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const std::size_t idx = sample_pool[sample_rng.uniform_index(sample_pool.size())];
            const std::size_t pid = pool.predicate_ids[idx];
            LabelDistribution target;
            if (roles.is_anchor[pid]) {
                target = LabelDistribution::one_hot(num_classes, pid);
            } else {
                // Imputation from the live parameters, then label refinement.
                const auto imputed =
                    impute_over(params, pool.embeddings[idx], roles.anchor_labels, cfg.impute_mode);
                target = refine_label(LabelDistribution::one_hot(num_classes, pid), imputed);
            }
            batch.push_back(TrainingExample{pool.embeddings[idx], std::move(target)});
        }
        if (stage_two && cfg.mixup.enabled)
            batch = mixup_batch(batch, mixup_rng, cfg.mixup.alpha);

        auto [loss, grad] = loss_and_grad(params, batch);
        sgd_momentum_step(params, opt, grad);
        if (loss_trace) loss_trace->push_back(loss);
        loss_sum_since_eval += loss;
        ++steps_since_eval;
        if (on_eval && ((t + 1) % cfg.eval_every == 0 || t + 1 == iterations)) {
            last_mean = loss_sum_since_eval / static_cast<double>(steps_since_eval);
            on_eval(iteration_offset + t + 1, stage_name, last_mean, params);
            loss_sum_since_eval = 0.0;
            steps_since_eval = 0;
        }
    }
    return last_mean;
}

}  // namespace detail_train

/// Stage 1 (Eq. 8): minibatch SGD on the anchor subset only, one-hot targets,
/// no imputation and no mixup.
inline StageResult warmup_stage(const Dataset& train, const RelationVocabulary& vocab,
                                const TrainConfig& cfg, RngStream& sample_rng,
                                const EvalCallback& on_eval = nullptr) {
    cfg.validate();
    const LabelRoles roles = label_roles_for(cfg, vocab);
    const TrainingPool pool = TrainingPool::build(train, roles);
    ClassifierParams params = init_classifier(train.embedding_dim, cfg.hidden_width, vocab.size(),
                                              derive_seed(cfg.seed, 0x11A7));
    if (cfg.warmup_iterations == 0) return {std::move(params), {}};
    RngStream unused_mixup = RngStream::derived(cfg.seed, 0xDEAD);  // never consumed in warmup
    StageResult res;
    res.params = std::move(params);
    detail_train::run_stage(res.params, pool, pool.anchor_pool, roles, cfg,
                            cfg.warmup_iterations, /*stage_two=*/false, sample_rng,
                            unused_mixup, &res.iteration_loss, "warmup", 0, on_eval);
    return res;
}

/// Stage 2 (Algorithm 1, lines 3-8): alternating imputation and training.
/// When refinement is on, batches mix anchor and non-anchor pairs in natural
/// proportion; non-anchor pairs get refined targets imputed from the live
/// parameters before mixup is applied. When refinement is off, the stage is
/// plain supervised continuation on the anchor subset (or everything, when
/// the subset is "all"). Momentum is reset at the stage boundary.
inline StageResult refinement_stage(ClassifierParams params, const Dataset& train,
                                    const RelationVocabulary& vocab, const TrainConfig& cfg,
                                    RngStream& sample_rng, RngStream& mixup_rng,
                                    const EvalCallback& on_eval = nullptr,
                                    std::size_t iteration_offset = 0) {
    cfg.validate();
    const LabelRoles roles = label_roles_for(cfg, vocab);
    const TrainingPool pool = TrainingPool::build(train, roles);
    // With refinement off the stage continues plain supervised training on
    // the anchor subset; with the "all" subset both pools coincide and the
    // stage is the baseline (optionally plus mixup).
    const auto& sample_pool = cfg.refinement_enabled ? pool.full_pool : pool.anchor_pool;
    StageResult res;
    res.params = std::move(params);
    if (cfg.refinement_iterations == 0) return res;
    detail_train::run_stage(res.params, pool, sample_pool, roles, cfg,
                            cfg.refinement_iterations, /*stage_two=*/true, sample_rng,
                            mixup_rng, &res.iteration_loss, "refinement", iteration_offset,
                            on_eval);
    return res;
}

struct TrainLogRow {
    std::size_t iteration = 0;
    std::string stage;
    double mean_loss = 0.0;
    double mr20 = 0, mr50 = 0, mr100 = 0;
    double r20 = 0, r50 = 0, r100 = 0;
    double zs20 = 0, zs50 = 0;
    std::int64_t wall_ms = 0;
};

struct TrainingLog {
    std::vector<TrainLogRow> rows;

    std::string to_csv() const {
        std::string out =
            "iteration,stage,mean_loss,mR@20,mR@50,mR@100,R@20,R@50,R@100,zsR@20,zsR@50,wall_ms\n";
        for (const auto& r : rows) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%zu,%s,", r.iteration, r.stage.c_str());
            out += buf;
            std::snprintf(buf, sizeof(buf), "%.6f,", r.mean_loss);
            out += buf;
            for (double v : {r.mr20, r.mr50, r.mr100, r.r20, r.r50, r.r100, r.zs20, r.zs50}) {
                out += format_metric(v);
                out += ',';
            }
            std::snprintf(buf, sizeof(buf), "%lld\n", static_cast<long long>(r.wall_ms));
            out += buf;
        }
        return out;
    }
};

struct Checkpoint {
    ClassifierParams params;
    std::uint64_t vocabulary_hash = 0;
    std::size_t iteration = 0;
    std::string stage = "refinement";
    nlohmann::json config_snapshot;
};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(path).parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    nlohmann::json header{{"input_dim", ck.params.input_dim},
                          {"hidden_dim", ck.params.hidden_dim},
                          {"num_classes", ck.params.num_classes},
                          {"vocabulary_hash", ck.vocabulary_hash},
                          {"iteration", ck.iteration},
                          {"stage", ck.stage},
                          {"config", ck.config_snapshot}};
    const std::string hdr = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot write " + path);
    f.write("RMCK", 4);
    detail::write_u32_le(f, 1);
    detail::write_u32_le(f, static_cast<std::uint32_t>(hdr.size()));
    f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    const auto flat = ck.params.flatten();
    detail::write_u64_le(f, flat.size());
    for (double v : flat) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        detail::write_u64_le(f, bits);
    }
    if (!f) throw std::runtime_error("save_checkpoint: write failure on " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: missing " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "RMCK", 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    if (detail::read_u32_le(f) != 1) throw std::runtime_error("load_checkpoint: unsupported version");
    const std::uint32_t hdr_len = detail::read_u32_le(f);
    std::string hdr(hdr_len, '\0');
    f.read(hdr.data(), hdr_len);
    if (!f) throw std::runtime_error("load_checkpoint: truncated header");
    nlohmann::json header = nlohmann::json::parse(hdr);
    Checkpoint ck;
    ck.vocabulary_hash = header.at("vocabulary_hash").get<std::uint64_t>();
    ck.iteration = header.at("iteration").get<std::size_t>();
    ck.stage = header.at("stage").get<std::string>();
    ck.config_snapshot = header.at("config");
    ck.params.input_dim = header.at("input_dim").get<std::size_t>();
    ck.params.hidden_dim = header.at("hidden_dim").get<std::size_t>();
    ck.params.num_classes = header.at("num_classes").get<std::size_t>();
    ck.params.w1.assign(ck.params.hidden_dim * ck.params.input_dim, 0.0);
    ck.params.b1.assign(ck.params.hidden_dim, 0.0);
    ck.params.w2.assign(ck.params.num_classes * ck.params.fan_in2(), 0.0);
    ck.params.b2.assign(ck.params.num_classes, 0.0);
    const std::uint64_t count = detail::read_u64_le(f);
    if (count != ck.params.parameter_count())
        throw std::runtime_error("load_checkpoint: parameter count mismatch");
    std::vector<double> flat(count);
    for (auto& v : flat) {
        const std::uint64_t bits = detail::read_u64_le(f);
        double d64;
        std::memcpy(&d64, &bits, 8);
        v = d64;
    }
    if (!f) throw std::runtime_error("load_checkpoint: truncated parameter blob");
    ck.params.unflatten(flat);
    return ck;
}

struct TrainOutput {
    Checkpoint checkpoint;
    TrainingLog log;
    EvalResult final_val;
};

/// The full two-stage procedure: implicit-only warmup, then alternating
/// imputation + joint training, with validation metrics appended to the log
/// every eval_every iterations.
inline TrainOutput train(const Dataset& train_ds, const Dataset& val_ds, const TrainConfig& cfg) {
    cfg.validate();
    if (!(train_ds.vocabulary == val_ds.vocabulary))
        throw std::invalid_argument("train: vocabulary mismatch between train and val");
    const auto& vocab = train_ds.vocabulary;
    const auto zs = zero_shot_triplets(train_ds, val_ds);
    const auto t0 = std::chrono::steady_clock::now();

    TrainOutput out;
    auto log_eval = [&](std::size_t iteration, const std::string& stage, double mean_loss,
                        const ClassifierParams& params) {
        const EvalResult ev = evaluate(params, val_ds, zs);
        TrainLogRow row;
        row.iteration = iteration;
        row.stage = stage;
        row.mean_loss = mean_loss;
        row.mr20 = ev.mean_recall[0];
        row.mr50 = ev.mean_recall[1];
        row.mr100 = ev.mean_recall[2];
        row.r20 = ev.recall[0];
        row.r50 = ev.recall[1];
        row.r100 = ev.recall[2];
        row.zs20 = ev.zero_shot_recall[0];
        row.zs50 = ev.zero_shot_recall[1];
        row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        out.log.rows.push_back(std::move(row));
        out.final_val = ev;
    };

    RngStream warmup_rng = RngStream::derived(cfg.seed, 0xB001);
    RngStream refine_rng = RngStream::derived(cfg.seed, 0xB002);
    RngStream mixup_rng = RngStream::derived(cfg.seed, 0xB003);

    StageResult warm = warmup_stage(train_ds, vocab, cfg, warmup_rng, log_eval);
    StageResult fine = refinement_stage(std::move(warm.params), train_ds, vocab, cfg, refine_rng,
                                        mixup_rng, log_eval, cfg.warmup_iterations);
    if (out.log.rows.empty()) {
        // Zero-iteration runs still report final metrics once.
        log_eval(0, "refinement", 0.0, fine.params);
    }

    out.checkpoint.params = std::move(fine.params);
    out.checkpoint.vocabulary_hash = vocab.hash();
    out.checkpoint.iteration = cfg.warmup_iterations + cfg.refinement_iterations;
    out.checkpoint.stage = cfg.refinement_iterations > 0 ? "refinement" : "warmup";
    out.checkpoint.config_snapshot = cfg.to_json();
    return out;
}

struct AblationRow {
    TrainConfig config;
    std::uint64_t config_hash = 0;
    bool ok = false;
    std::string error;
    EvalResult test_result;
};

/// One train+eval per grid row; failures are recorded and the grid continues.
inline std::vector<AblationRow> run_ablation(std::span<const TrainConfig> grid,
                                             const Dataset& train_ds, const Dataset& val_ds,
                                             const Dataset& test_ds) {
    std::vector<AblationRow> rows;
    rows.reserve(grid.size());
    const auto zs = zero_shot_triplets(train_ds, test_ds);
    for (const TrainConfig& cfg : grid) {
        AblationRow row;
        row.config = cfg;
        row.config_hash = cfg.hash();
        try {
            TrainOutput out = train(train_ds, val_ds, cfg);
            row.test_result = evaluate(out.checkpoint.params, test_ds, zs);
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string ablation_csv(std::span<const AblationRow> rows) {
    std::string out = "config_hash,train_label_subset,impute_mode,refinement,mixup,status,";
    out += eval_csv_header();
    out += '\n';
    for (const auto& r : rows) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx,", static_cast<unsigned long long>(r.config_hash));
        out += buf;
        out += to_string(r.config.train_label_subset);
        out += ',';
        out += r.config.impute_mode == ImputeMode::Hard ? "hard" : "soft";
        out += ',';
        out += r.config.refinement_enabled ? "1" : "0";
        out += ',';
        out += r.config.mixup.enabled ? "1" : "0";
        out += ',';
        if (r.ok) {
            out += "ok,";
            out += eval_csv_row(r.test_result);
        } else {
            out += "error,";
            std::string msg = r.error;
            for (char& c : msg)
                if (c == ',' || c == '\n') c = ';';
            out += msg;
        }
        out += '\n';
    }
    return out;
}

}  // namespace relmine
