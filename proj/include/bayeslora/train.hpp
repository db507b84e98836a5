// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bayeslora/model.hpp"

namespace bayeslora {

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t epochs = 4;
    std::size_t batch_size = 4;
    /// Decoupled decay; λ/2 makes the trained adapters the MAP estimate under a N(0, λ⁻¹I) prior.
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

struct OptimizerState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;
};

/// −log softmax(logits)[label], evaluated with max-subtraction.
double cross_entropy(const Logits& logits, int label);

struct BatchGradient {
    std::vector<double> gradient;  ///< ∂(mean loss)/∂θ over adapter parameters
    double loss = 0.0;             ///< mean cross-entropy over the batch
};

/// Mean-loss gradient over a batch. In train mode `stream` drives adapter dropout.
BatchGradient batch_gradient(const LoraModel& model, std::span<const LabeledSequence> batch, bool train_mode = false,
                             RandomStream* stream = nullptr);

/// In-place AdamW: params ← params·(1 − lr·wd), then the bias-corrected Adam step.
void adamw_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                const TrainConfig& config);

struct LossRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;  ///< global optimizer step, 1-based
    double loss = 0.0;
};

struct TrainResult {
    LoraModel model;
    std::vector<LossRecord> loss_log;
};

/// Fine-tunes the adapters of `initial`. Shuffling and dropout streams derive from `config.seed`.
TrainResult train_lora(LoraModel initial, std::span<const LabeledSequence> train_set, const TrainConfig& config);

/// Fresh adapters initialized from `config.seed`, then trained.
TrainResult train_lora(std::shared_ptr<const FrozenBackbone> backbone, const AdapterSpec& spec,
                       std::span<const LabeledSequence> train_set, const TrainConfig& config);

/// CSV with header `epoch,step,loss`.
std::string loss_log_csv(std::span<const LossRecord> log);

}  // namespace bayeslora
