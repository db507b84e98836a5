// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <cmath>

#include "bayeslora/ensemble.hpp"
#include "bayeslora/error.hpp"
#include "test_util.hpp"

using namespace bayeslora;
using namespace bayeslora::testing;

namespace {

std::vector<LabeledSequence> toy_data(const BackboneConfig& c) {
    std::vector<LabeledSequence> data;
    for (int i = 0; i < 8; ++i) data.push_back({random_tokens(c, 5, 700 + i), i % 2});
    return data;
}

TrainConfig quick() {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.learning_rate = 1e-2;
    return cfg;
}

}  // namespace

TEST_CASE("average of member probabilities") {
    const std::vector<Logits> p{{0.2, 0.8}, {0.4, 0.6}};
    const Logits m = average_probabilities(p);
    CHECK(m[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(m[1] == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("ensemble training and prediction") {
    const auto bb = small_backbone();
    const auto data = toy_data(bb->config());
    const auto seeds = default_member_seeds(5, 3);
    const auto r = train_ensemble(bb, AdapterSpec{2, 8.0, 0.05}, data, quick(), 3, seeds);
    CHECK(r.warnings.empty());
    const LoraEnsemble& e = r.ensemble;
    REQUIRE(e.size() == 3);
    CHECK(e.member(0).model.flatten_params() != e.member(1).model.flatten_params());

    double member_nll = 0.0, ens_nll = 0.0;
    for (const auto& ex : data) {
        std::vector<Logits> probs;
        for (const auto& m : e.members()) probs.push_back(softmax(model_forward(m.model, ex.tokens)));
        const Logits p = ensemble_predict(e, ex.tokens);
        const Logits ext{(probs[0][0] + probs[1][0] + probs[2][0]) / 3.0, (probs[0][1] + probs[1][1] + probs[2][1]) / 3.0};
        CHECK(p[1] == doctest::Approx(ext[1]).epsilon(1e-14));
        CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-12);
        for (std::size_t c = 0; c < 2; ++c) {
            const double lo = std::min({probs[0][c], probs[1][c], probs[2][c]});
            const double hi = std::max({probs[0][c], probs[1][c], probs[2][c]});
            CHECK(p[c] >= lo - 1e-15);
            CHECK(p[c] <= hi + 1e-15);
        }
        for (const auto& q : probs) member_nll -= std::log(q[ex.label]) / 3.0;
        ens_nll -= std::log(p[ex.label]);

        std::vector<EnsembleMember> reversed(e.members().rbegin(), e.members().rend());
        const Logits pr = ensemble_predict(LoraEnsemble(reversed), ex.tokens);
        CHECK(std::abs(pr[1] - p[1]) <= 1e-12);
    }
    CHECK(ens_nll <= member_nll + 1e-12);
}

TEST_CASE("degenerate ensembles") {
    const auto bb = small_backbone();
    const auto data = toy_data(bb->config());
    TrainConfig cfg = quick();
    const std::vector<std::uint64_t> one{77};
    const auto r1 = train_ensemble(bb, AdapterSpec{2, 8.0, 0.05}, data, cfg, 1, one);
    cfg.seed = 77;
    const TrainResult single = train_lora(bb, AdapterSpec{2, 8.0, 0.05}, data, cfg);
    for (const auto& ex : data) {
        CHECK(ensemble_predict(r1.ensemble, ex.tokens) == softmax(model_forward(single.model, ex.tokens)));
    }

    const std::vector<std::uint64_t> dup{3, 3};
    const auto r2 = train_ensemble(bb, AdapterSpec{2, 8.0, 0.05}, data, quick(), 2, dup);
    CHECK(r2.warnings.size() == 1);
    const auto& ex = data.front();
    CHECK(ensemble_predict(r2.ensemble, ex.tokens) == softmax(model_forward(r2.ensemble.member(0).model, ex.tokens)));

    const std::vector<std::uint64_t> two{1, 2};
    CHECK_THROWS_AS(train_ensemble(bb, AdapterSpec{2, 8.0, 0.05}, data, quick(), 3, two), ValidationError);
    CHECK_THROWS_AS(LoraEnsemble(std::vector<EnsembleMember>{}), ValidationError);
}
