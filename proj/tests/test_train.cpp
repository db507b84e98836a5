// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <cmath>

#include "bayeslora/error.hpp"
#include "bayeslora/train.hpp"
#include "test_util.hpp"

using namespace bayeslora;
using namespace bayeslora::testing;

TEST_CASE("cross_entropy fixtures") {
    CHECK(cross_entropy({0, 0}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(cross_entropy({0, 0}, 1) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(cross_entropy({30, -30}, 0) < 1e-10);
    // −log(e⁻¹/(e¹+e⁻¹)) = 2 + ln(1 + e⁻²)
    CHECK(cross_entropy({1, -1}, 1) == doctest::Approx(2.0 + std::log1p(std::exp(-2.0))).epsilon(1e-14));
    CHECK(cross_entropy({1, -1}, 1) == doctest::Approx(2.126928).epsilon(1e-6));
    CHECK(cross_entropy({1000, -1000}, 1) == doctest::Approx(2000.0));
    CHECK_THROWS_AS(cross_entropy({NAN, 0}, 0), ComputationError);
    CHECK_THROWS_AS(cross_entropy({0, INFINITY}, 0), ComputationError);
}

TEST_CASE("batch gradient conventions") {
    const auto bb = small_backbone();
    const LoraModel m = randomized(LoraModel(bb, AdapterSpec{2, 8.0, 0.05}, 3), 8);
    const LabeledSequence ex{random_tokens(bb->config(), 6, 17), 1};
    const std::vector<LabeledSequence> one{ex}, two{ex, ex};
    const auto g1 = batch_gradient(m, one).gradient;
    const auto g2 = batch_gradient(m, two).gradient;
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(g1[i]).epsilon(1e-14));

    CHECK_THROWS_AS(batch_gradient(m, std::vector<LabeledSequence>{}), ValidationError);

    // alpha = 0 kills the adapter path: zero gradient for that adapter's B.
    LoraModel dead = m;
    dead.adapters()[1].alpha = 0.0;
    const auto g = batch_gradient(dead, one).gradient;
    const auto blocks = dead.block_layouts();
    const auto& b_block = blocks[2];  // adapter 1, B
    for (std::size_t i = 0; i < b_block.size(); ++i) CHECK(g[b_block.offset + i] == 0.0);
}

TEST_CASE("adamw_step fixtures") {
    TrainConfig cfg;
    {
        cfg.weight_decay = 0.0;
        std::vector<double> p{0.3, -2.0};
        OptimizerState st;
        adamw_step(p, std::vector<double>{0.0, 0.0}, st, cfg);
        CHECK(p == std::vector<double>{0.3, -2.0});
        CHECK(st.step == 1);
    }
    {
        cfg.learning_rate = 0.1;
        cfg.weight_decay = 0.0;
        std::vector<double> p{1.0};
        OptimizerState st;
        adamw_step(p, std::vector<double>{1.0}, st, cfg);
        // Bias-corrected first step: lr·g/(√g² + ε)
        CHECK(p[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));
    }
    {
        cfg.learning_rate = 0.1;
        cfg.weight_decay = 0.5;
        std::vector<double> p{1.0};
        OptimizerState st;
        adamw_step(p, std::vector<double>{0.0}, st, cfg);
        CHECK(p[0] == doctest::Approx(0.95).epsilon(1e-15));
    }
    {
        std::vector<double> p{1.0};
        OptimizerState st;
        CHECK_THROWS_AS(adamw_step(p, std::vector<double>{1.0, 2.0}, st, cfg), ValidationError);
    }
}

TEST_CASE("zero gradients with positive decay shrink the norm geometrically") {
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.weight_decay = 0.05;
    std::vector<double> p{1.0, -2.0, 0.5};
    OptimizerState st;
    double prev = 1e300;
    for (int i = 0; i < 20; ++i) {
        adamw_step(p, std::vector<double>(3, 0.0), st, cfg);
        const double norm = std::hypot(p[0], p[1], p[2]);
        CHECK(norm < prev);
        prev = norm;
    }
}

TEST_CASE("train_lora contracts") {
    const auto bb = small_backbone();
    std::vector<LabeledSequence> data;
    for (int i = 0; i < 10; ++i) data.push_back({random_tokens(bb->config(), 5, 400 + i), i % 2});
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = 17;
    const TrainResult a = train_lora(bb, AdapterSpec{2, 8.0, 0.05}, data, cfg);
    const TrainResult b = train_lora(bb, AdapterSpec{2, 8.0, 0.05}, data, cfg);
    CHECK(a.model.flatten_params() == b.model.flatten_params());
    CHECK(a.loss_log.size() == 3 * 3);  // epochs × ceil(10/4)
    for (const auto& r : a.loss_log) CHECK(std::isfinite(r.loss));
    CHECK(a.loss_log.back().step == 9);

    cfg.epochs = 0;
    CHECK_THROWS_AS(train_lora(bb, AdapterSpec{2, 8.0, 0.05}, data, cfg), ValidationError);
    cfg.epochs = 1;
    CHECK_THROWS_AS(train_lora(bb, AdapterSpec{2, 8.0, 0.05}, std::vector<LabeledSequence>{}, cfg), ValidationError);
}

TEST_CASE("loss log csv") {
    const std::vector<LossRecord> log{{1, 1, 0.5}, {1, 2, 0.25}};
    CHECK(loss_log_csv(log) == "epoch,step,loss\n1,1,0.5\n1,2,0.25\n");
}
