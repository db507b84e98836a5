// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bayeslora/model.hpp"
#include "bayeslora/train.hpp"

namespace bayeslora {

struct EnsembleMember {
    LoraModel model;
    std::uint64_t seed = 0;
    std::vector<LossRecord> loss_log;
};

/// M adapter sets over one shared frozen backbone.
class LoraEnsemble {
public:
    explicit LoraEnsemble(std::vector<EnsembleMember> members);

    std::size_t size() const noexcept { return members_.size(); }
    const std::vector<EnsembleMember>& members() const noexcept { return members_; }
    const EnsembleMember& member(std::size_t m) const { return members_.at(m); }
    const FrozenBackbone& backbone() const noexcept { return members_.front().model.backbone(); }
    const std::shared_ptr<const FrozenBackbone>& shared_backbone() const noexcept {
        return members_.front().model.shared_backbone();
    }

private:
    std::vector<EnsembleMember> members_;
};

struct EnsembleTrainResult {
    LoraEnsemble ensemble;
    std::vector<std::string> warnings;
};

/// Member seeds used when none are given: derive_seed(seed, m).
std::vector<std::uint64_t> default_member_seeds(std::uint64_t seed, std::size_t m);

/// Trains member m with `config.seed = seeds[m]`. Duplicate seeds are allowed but reported.
EnsembleTrainResult train_ensemble(std::shared_ptr<const FrozenBackbone> backbone, const AdapterSpec& spec,
                                   std::span<const LabeledSequence> train_set, const TrainConfig& config,
                                   std::size_t m, std::span<const std::uint64_t> seeds);

/// Mean of the members' eval-mode softmax vectors, summed in member order.
Logits ensemble_predict(const LoraEnsemble& ensemble, std::span<const TokenId> tokens);

/// Mean of the given probability vectors.
Logits average_probabilities(std::span<const Logits> probs);

}  // namespace bayeslora
