// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/ensemble.hpp"

#include <algorithm>
#include <set>

#include "bayeslora/error.hpp"

namespace bayeslora {

LoraEnsemble::LoraEnsemble(std::vector<EnsembleMember> members) : members_(std::move(members)) {
    if (members_.empty()) throw ValidationError("an ensemble needs at least one member");
    const FrozenBackbone* bb = &members_.front().model.backbone();
    for (const auto& m : members_) {
        if (&m.model.backbone() != bb && m.model.backbone().fingerprint() != bb->fingerprint()) {
            throw ValidationError("ensemble members must share one backbone");
        }
    }
}

std::vector<std::uint64_t> default_member_seeds(std::uint64_t seed, std::size_t m) {
    std::vector<std::uint64_t> seeds(m);
    for (std::size_t i = 0; i < m; ++i) seeds[i] = derive_seed(seed, i);
    return seeds;
}

EnsembleTrainResult train_ensemble(std::shared_ptr<const FrozenBackbone> backbone, const AdapterSpec& spec,
                                   std::span<const LabeledSequence> train_set, const TrainConfig& config,
                                   std::size_t m, std::span<const std::uint64_t> seeds) {
    if (m == 0) throw ValidationError("ensemble size must be at least 1");
    if (seeds.size() != m) {
        throw ValidationError("ensemble of " + std::to_string(m) + " members needs " + std::to_string(m) +
                              " seeds, got " + std::to_string(seeds.size()));
    }
    std::vector<std::string> warnings;
    std::set<std::uint64_t> seen;
    for (std::uint64_t s : seeds) {
        if (!seen.insert(s).second) {
            warnings.push_back("duplicate ensemble seed " + std::to_string(s) + ": members will be identical");
        }
    }
    std::vector<EnsembleMember> members;
    for (std::size_t i = 0; i < m; ++i) {
        TrainConfig cfg = config;
        cfg.seed = seeds[i];
        TrainResult r = train_lora(backbone, spec, train_set, cfg);
        members.push_back({std::move(r.model), seeds[i], std::move(r.loss_log)});
    }
    return {LoraEnsemble(std::move(members)), std::move(warnings)};
}

Logits average_probabilities(std::span<const Logits> probs) {
    if (probs.empty()) throw ValidationError("cannot average an empty set of probabilities");
    Logits sum{0.0, 0.0};
    for (const auto& p : probs) {
        sum[0] += p[0];
        sum[1] += p[1];
    }
    const double n = static_cast<double>(probs.size());
    return {sum[0] / n, sum[1] / n};
}

Logits ensemble_predict(const LoraEnsemble& ensemble, std::span<const TokenId> tokens) {
    std::vector<Logits> probs;
    probs.reserve(ensemble.size());
    for (const auto& m : ensemble.members()) probs.push_back(softmax(model_forward(m.model, tokens)));
    return average_probabilities(probs);
}

}  // namespace bayeslora
