#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "relmine/data.hpp"

using namespace relmine;
namespace fs = std::filesystem;

namespace {

std::string temp_prefix(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "relmine_test_data";
    fs::create_directories(dir);
    return (dir / name).string();
}

std::string file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

SyntheticConfig small_config(std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.vocabulary = default_synthetic_partition();
    cfg.num_images = 10;
    cfg.num_test_images = 6;
    cfg.pairs_per_image = {4, 6};
    cfg.seed = seed;
    return cfg;
}

// Independent re-derivation of the explicit-label rule used by tests only.
int rederive_explicit(const Box& s, const Box& o, const RelationVocabulary& vocab) {
    const double cxs = (s[0] + s[2]) / 2, cys = (s[1] + s[3]) / 2;
    const double cxo = (o[0] + o[2]) / 2, cyo = (o[1] + o[3]) / 2;
    const double ws = s[2] - s[0], hs = s[3] - s[1];
    const double wo = o[2] - o[0], ho = o[3] - o[1];
    const double dx = (cxs - cxo) / wo, dy = (cys - cyo) / ho;
    const bool overlap = std::abs(dx) < 0.5 * (ws / wo + 1.0);
    const double gap_on = (o[1] - s[3]) / ho;
    const double gap_under = (s[1] - o[3]) / ho;
    auto id = [&](const char* n) { return static_cast<int>(vocab.require(n)); };
    if (overlap && gap_on >= -0.05 && gap_on < 0.10) return id("on");
    if (overlap && gap_under >= -0.05 && gap_under < 0.10) return id("under");
    if (std::abs(dy) >= std::abs(dx)) return dy < 0 ? id("above") : id("under");
    const double lar = std::log(ws / wo) + std::log(hs / ho);
    if (std::abs(lar) > 0.8) return lar > 0 ? id("in front of") : id("behind");
    if (std::hypot(dx, dy) < 1.5) return id("near");
    return id("at");
}

}  // namespace

TEST_CASE("geometry features: identical and nested boxes") {
    Box b{0.2, 0.2, 0.4, 0.4};
    auto g = geometry_features(b, b);
    REQUIRE(g[0] == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(g[1] == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(g[2] == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(g[3] == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(g[4] == Catch::Approx(1.0).margin(1e-15));

    Box bs{0, 0, 0.2, 0.2}, bo{0, 0, 0.4, 0.4};
    auto h = geometry_features(bs, bo);
    REQUIRE(h[0] == Catch::Approx(-0.25).margin(1e-12));
    REQUIRE(h[1] == Catch::Approx(-0.25).margin(1e-12));
    REQUIRE(h[2] == Catch::Approx(-std::log(2.0)).margin(1e-12));
    REQUIRE(h[3] == Catch::Approx(-std::log(2.0)).margin(1e-12));
    REQUIRE(h[4] == Catch::Approx(0.25).margin(1e-12));

    REQUIRE_THROWS_AS(geometry_features(Box{0, 0, 0, 0.5}, bo), std::invalid_argument);
}

TEST_CASE("joint embedding is the declared concatenation") {
    std::vector<std::vector<double>> table{{1, 2}, {3, 4}};
    ObjectInstance s{0, 0, {0.1, 0.1, 0.3, 0.3}};
    ObjectInstance o{1, 1, {0.5, 0.5, 0.7, 0.7}};
    std::vector<double> latent{9, 8, 7};
    auto emb = compute_joint_embedding(s, o, table, latent);
    REQUIRE(emb.size() == 2 * 2 + 5 + 3);
    REQUIRE(emb[0] == 1);
    REQUIRE(emb[1] == 2);
    REQUIRE(emb[2] == 3);
    REQUIRE(emb[3] == 4);
    REQUIRE(emb[9] == 9);

    ObjectInstance bad{2, 7, {0.1, 0.1, 0.2, 0.2}};
    REQUIRE_THROWS_AS(compute_joint_embedding(bad, o, table, latent), std::invalid_argument);
}

TEST_CASE("synthetic generation is deterministic and respects the bias extremes") {
    auto cfg = small_config(3);
    auto [train_a, test_a] = generate_synthetic(cfg);
    auto [train_b, test_b] = generate_synthetic(cfg);
    REQUIRE(train_a.images.size() == 10);
    REQUIRE(test_a.images.size() == 6);
    REQUIRE(train_a.total_pairs() == train_b.total_pairs());
    for (std::size_t i = 0; i < train_a.images.size(); ++i) {
        const auto& x = train_a.images[i];
        const auto& y = train_b.images[i];
        REQUIRE(x.image_id == y.image_id);
        REQUIRE(x.pairs.size() == y.pairs.size());
        for (std::size_t j = 0; j < x.pairs.size(); ++j) {
            REQUIRE(x.pairs[j].predicate_id == y.pairs[j].predicate_id);
            REQUIRE(x.pairs[j].embedding == y.pairs[j].embedding);
        }
    }

    auto all_explicit = small_config(4);
    all_explicit.annotator_bias = 1.0;
    auto [tr1, te1] = generate_synthetic(all_explicit);
    for (const auto& img : tr1.images)
        for (const auto& pr : img.pairs)
            REQUIRE(tr1.vocabulary.is_explicit(static_cast<std::size_t>(pr.predicate_id)));

    auto none_explicit = small_config(5);
    none_explicit.annotator_bias = 0.0;
    auto [tr0, te0] = generate_synthetic(none_explicit);
    auto [implicit_refs, explicit_refs] = partition_by_annotation(tr0, tr0.vocabulary);
    REQUIRE(explicit_refs.empty());
    REQUIRE(implicit_refs.size() == tr0.total_pairs());
}

TEST_CASE("recorded-explicit fraction concentrates at the annotator bias") {
    auto cfg = small_config(11);
    cfg.num_images = 250;
    cfg.pairs_per_image = {20, 24};
    cfg.annotator_bias = 0.5;
    cfg.zero_shot_holdout_fraction = 0.0;
    auto [train, test] = generate_synthetic(cfg);
    const double n = static_cast<double>(train.total_pairs());
    REQUIRE(n >= 5000);
    auto [implicit_refs, explicit_refs] = partition_by_annotation(train, train.vocabulary);
    const double frac = static_cast<double>(explicit_refs.size()) / n;
    const double bound = 3.0 * std::sqrt(0.5 * 0.5 / n);
    REQUIRE(std::abs(frac - 0.5) < bound + 1e-9);
}

TEST_CASE("oracle explicit labels are a pure function of the boxes") {
    auto cfg = small_config(13);
    auto [train, test] = generate_synthetic(cfg);
    for (const auto& img : train.images)
        for (const auto& pr : img.pairs) {
            REQUIRE(pr.oracle.has_value());
            const auto& s = img.objects[pr.subject_id];
            const auto& o = img.objects[pr.object_id];
            REQUIRE(pr.oracle->true_explicit == rederive_explicit(s.box, o.box, train.vocabulary));
            REQUIRE(is_implicit(train.vocabulary,
                                static_cast<std::size_t>(pr.oracle->true_implicit)));
        }
}

TEST_CASE("partition_by_annotation splits exhaustively with provenance") {
    auto cfg = small_config(17);
    auto [train, test] = generate_synthetic(cfg);
    auto [implicit_refs, explicit_refs] = partition_by_annotation(train, train.vocabulary);
    REQUIRE(implicit_refs.size() + explicit_refs.size() == train.total_pairs());
    for (const auto& ref : implicit_refs)
        REQUIRE(is_implicit(train.vocabulary,
                            static_cast<std::size_t>(resolve(train, ref).predicate_id)));
    for (const auto& ref : explicit_refs)
        REQUIRE_FALSE(is_implicit(train.vocabulary,
                                  static_cast<std::size_t>(resolve(train, ref).predicate_id)));
}

TEST_CASE("dataset round trip preserves everything; sidecar bytes are stable") {
    auto cfg = small_config(19);
    auto [train, test] = generate_synthetic(cfg);
    const auto prefix = temp_prefix("roundtrip");
    save_dataset(train, prefix);
    auto loaded = load_dataset(prefix);

    REQUIRE(loaded.vocabulary == train.vocabulary);
    REQUIRE(loaded.embedding_dim == train.embedding_dim);
    REQUIRE(loaded.images.size() == train.images.size());
    for (std::size_t i = 0; i < train.images.size(); ++i) {
        REQUIRE(loaded.images[i].image_id == train.images[i].image_id);
        for (std::size_t j = 0; j < train.images[i].pairs.size(); ++j) {
            const auto& a = train.images[i].pairs[j];
            const auto& b = loaded.images[i].pairs[j];
            REQUIRE(a.predicate_id == b.predicate_id);
            REQUIRE(a.embedding == b.embedding);  // bit-exact through f32 storage
            REQUIRE(b.oracle.has_value());
            REQUIRE(a.oracle->true_implicit == b.oracle->true_implicit);
        }
    }

    const auto prefix2 = temp_prefix("roundtrip_again");
    save_dataset(loaded, prefix2);
    REQUIRE(file_bytes(prefix + ".emb") == file_bytes(prefix2 + ".emb"));
    REQUIRE(file_bytes(prefix + ".jsonl") == file_bytes(prefix2 + ".jsonl"));
}

TEST_CASE("empty dataset round trips") {
    Dataset ds;
    ds.vocabulary = build_vocabulary({"on", "riding"}, {"on"});
    ds.object_class_names = {"a"};
    ds.embedding_dim = 4;
    const auto prefix = temp_prefix("empty");
    save_dataset(ds, prefix);
    auto loaded = load_dataset(prefix);
    REQUIRE(loaded.images.empty());
    REQUIRE(loaded.embedding_dim == 4);
}

TEST_CASE("loader rejects malformed inputs") {
    auto cfg = small_config(23);
    auto [train, test] = generate_synthetic(cfg);
    const auto prefix = temp_prefix("corrupt");
    save_dataset(train, prefix);

    SECTION("embedding count mismatch") {
        // truncate one record off the sidecar
        auto bytes = file_bytes(prefix + ".emb");
        bytes.resize(bytes.size() - 4 * train.embedding_dim);
        // fix the declared count? no: leave header count, the byte stream is short
        std::ofstream f(prefix + ".emb", std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.close();
        REQUIRE_THROWS_WITH(load_dataset(prefix), Catch::Matchers::ContainsSubstring("truncated"));
    }
    SECTION("count field mismatch") {
        auto bytes = file_bytes(prefix + ".emb");
        // declared count lives at offset 12; zero it out
        for (int i = 0; i < 8; ++i) bytes[12 + i] = 0;
        std::ofstream f(prefix + ".emb", std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.close();
        REQUIRE_THROWS_WITH(load_dataset(prefix),
                            Catch::Matchers::ContainsSubstring("embedding count mismatch"));
    }
    SECTION("malformed json body") {
        std::ofstream f(prefix + ".jsonl", std::ios::app);
        f << "{not json\n";
        f.close();
        REQUIRE_THROWS(load_dataset(prefix));
    }
    SECTION("dangling pair index") {
        auto body = file_bytes(prefix + ".jsonl");
        std::ofstream f(prefix + ".jsonl");
        f << R"({"image_id":"bad","objects":[{"id":0,"class_id":0,"box":[0.1,0.1,0.2,0.2]}],"pairs":[{"subject_id":0,"object_id":5,"predicate_id":0}]})"
          << "\n";
        f.close();
        REQUIRE_THROWS_WITH(load_dataset(prefix), Catch::Matchers::ContainsSubstring("dangling"));
    }
}

TEST_CASE("zero-shot triplets: identity, toy difference, planted holdout") {
    auto cfg = small_config(29);
    auto [train, test] = generate_synthetic(cfg);
    REQUIRE(zero_shot_triplets(train, train).empty());

    // toy difference
    Dataset a, b;
    a.vocabulary = b.vocabulary = build_vocabulary({"on", "riding"}, {"on"});
    a.object_class_names = b.object_class_names = {"man", "horse"};
    a.embedding_dim = b.embedding_dim = 1;
    ImageRecord img;
    img.image_id = "x";
    img.objects = {{0, 0, {0.1, 0.1, 0.2, 0.2}}, {1, 1, {0.3, 0.3, 0.6, 0.6}}};
    AnnotatedPair pr;
    pr.subject_id = 0;
    pr.object_id = 1;
    pr.predicate_id = 0;
    pr.embedding = {0.0f};
    img.pairs = {pr};
    a.images = {img};
    auto img2 = img;
    img2.pairs.push_back(pr);
    img2.pairs[1].predicate_id = 1;
    b.images = {img2};
    auto zs = zero_shot_triplets(a, b);
    REQUIRE(zs.size() == 1);
    REQUIRE(zs.count(TripletType{0, 1, 1}) == 1);

    // planted holdout: every designated type appears in the empirical set
    auto cfg_h = small_config(31);
    cfg_h.num_images = 60;
    cfg_h.num_test_images = 40;
    cfg_h.zero_shot_holdout_fraction = 0.10;
    auto [train_h, test_h] = generate_synthetic(cfg_h);
    REQUIRE_FALSE(test_h.zero_shot_types.empty());
    auto empirical = zero_shot_triplets(train_h, test_h);
    for (const auto& t : test_h.zero_shot_types) REQUIRE(empirical.count(t) == 1);

    // vocabulary mismatch is an error
    Dataset c = a;
    c.vocabulary = build_vocabulary({"on", "walking"}, {"on"});
    REQUIRE_THROWS_AS(zero_shot_triplets(a, c), std::invalid_argument);
}
