#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "relmine/augment.hpp"
#include "relmine/rng.hpp"

using namespace relmine;

TEST_CASE("beta(4,4) moments over 1e5 draws") {
    RngStream rng(2024);
    const int n = 100000;
    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double l = sample_lambda(4.0, rng);
        REQUIRE(l >= 0.0);
        REQUIRE(l <= 1.0);
        mean += l;
        m2 += l * l;
    }
    mean /= n;
    const double var = m2 / n - mean * mean;
    REQUIRE(std::abs(mean - 0.5) < 0.01);
    REQUIRE(std::abs(var - 1.0 / 36.0) < 0.003);
}

TEST_CASE("lambda sequence is reproducible per seed") {
    RngStream rng(7);
    RngStream rng2(7);
    for (int i = 0; i < 16; ++i)
        REQUIRE(sample_lambda(4.0, rng) == sample_lambda(4.0, rng2));

    // golden values recorded once after the moment checks passed
    RngStream fixed(7);
    const std::vector<double> golden = {0.52702003073215842, 0.66381679160035356,
                                        0.35214569935360357, 0.37526794369459893};
    for (double want : golden)
        REQUIRE(sample_lambda(4.0, fixed) == Catch::Approx(want).margin(1e-15));
}

TEST_CASE("gamma sampler mean matches alpha") {
    RngStream rng(5);
    double acc = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) acc += rng.gamma(0.7);
    REQUIRE(acc / n == Catch::Approx(0.7).margin(0.02));
}

TEST_CASE("mixup endpoints and arithmetic") {
    std::vector<double> x{4, 0}, xo{0, 4};
    LabelDistribution p{{1, 0}}, po{{0, 1}};

    auto [x1, p1] = mixup(x, p, xo, po, 1.0);
    REQUIRE(x1 == x);
    REQUIRE(p1.probs == p.probs);

    auto [x0, p0] = mixup(x, p, xo, po, 0.0);
    REQUIRE(x0 == xo);
    REQUIRE(p0.probs == po.probs);

    auto [xm, pm] = mixup(x, p, xo, po, 0.25);
    REQUIRE(xm == std::vector<double>{1, 3});
    REQUIRE(pm.probs == std::vector<double>{0.25, 0.75});

    REQUIRE_THROWS_AS(mixup(x, p, std::vector<double>{1.0}, po, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(mixup(x, p, xo, po, 1.5), std::invalid_argument);
}

TEST_CASE("mixup batch invariants") {
    RngStream rng(99);

    std::vector<TrainingExample> single{{{1.0, 2.0}, LabelDistribution{{0.3, 0.7}}}};
    auto mixed1 = mixup_batch(single, rng, 4.0);
    REQUIRE(mixed1.size() == 1);
    REQUIRE(mixed1[0].embedding == single[0].embedding);
    REQUIRE(mixed1[0].target.probs == single[0].target.probs);

    std::vector<TrainingExample> batch;
    RngStream data_rng(17);
    for (int i = 0; i < 16; ++i) {
        std::vector<double> x{data_rng.uniform(-3, 3), data_rng.uniform(-3, 3)};
        const std::size_t hot = data_rng.uniform_index(3);
        batch.push_back({x, LabelDistribution::one_hot(3, hot)});
    }
    auto mixed = mixup_batch(batch, rng, 4.0);
    REQUIRE(mixed.size() == batch.size());
    double lo0 = 1e9, hi0 = -1e9;
    for (const auto& ex : batch) {
        lo0 = std::min(lo0, ex.embedding[0]);
        hi0 = std::max(hi0, ex.embedding[0]);
    }
    for (const auto& ex : mixed) {
        REQUIRE(ex.target.valid());
        REQUIRE(ex.embedding[0] >= lo0 - 1e-12);
        REQUIRE(ex.embedding[0] <= hi0 + 1e-12);
    }

    // identical targets stay identical under any mixing
    std::vector<TrainingExample> same;
    for (int i = 0; i < 8; ++i)
        same.push_back({{double(i), 0.0}, LabelDistribution{{0.25, 0.75}}});
    for (const auto& ex : mixup_batch(same, rng, 4.0)) {
        REQUIRE(ex.target.probs[0] == Catch::Approx(0.25).margin(1e-12));
        REQUIRE(ex.target.probs[1] == Catch::Approx(0.75).margin(1e-12));
    }
}
