// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bayeslora/error.hpp"
#include "bayeslora/format.hpp"

namespace bayeslora {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (epochs < 1) throw ValidationError("epochs must be at least 1");
    if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw ValidationError("Adam betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
}

double cross_entropy(const Logits& logits, int label) {
    if (!std::isfinite(logits[0]) || !std::isfinite(logits[1])) {
        throw ComputationError("cross_entropy: non-finite logits");
    }
    if (label != 0 && label != 1) throw ValidationError("label must be 0 or 1");
    const double m = std::max(logits[0], logits[1]);
    const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
    return lse - logits[static_cast<std::size_t>(label)];
}

BatchGradient batch_gradient(const LoraModel& model, std::span<const LabeledSequence> batch, bool train_mode,
                             RandomStream* stream) {
    if (batch.empty()) throw ValidationError("batch is empty");
    BatchGradient out{std::vector<double>(model.parameter_count(), 0.0), 0.0};
    for (const auto& ex : batch) {
        const ForwardRecord rec = model.record(ex.tokens, train_mode, stream);
        out.loss += cross_entropy(rec.logits(), ex.label);
        const Logits p = softmax(rec.logits());
        Logits dlogits{p[0], p[1]};
        dlogits[static_cast<std::size_t>(ex.label)] -= 1.0;
        model.backward(rec, dlogits, out.gradient);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : out.gradient) g *= inv;
    out.loss *= inv;
    return out;
}

void adamw_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                const TrainConfig& config) {
    if (params.size() != grads.size()) throw ValidationError("adamw_step: parameter/gradient length mismatch");
    if (state.first_moment.empty() && state.second_moment.empty()) {
        state.first_moment.assign(params.size(), 0.0);
        state.second_moment.assign(params.size(), 0.0);
    }
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw ValidationError("adamw_step: optimizer state does not match parameter length");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    const double decay = 1.0 - config.learning_rate * config.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g * g;
        params[i] *= decay;
        params[i] -= config.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + config.epsilon);
    }
}

TrainResult train_lora(LoraModel initial, std::span<const LabeledSequence> train_set, const TrainConfig& config) {
    config.validate();
    if (train_set.empty()) throw ValidationError("training set is empty");

    RandomStream shuffle_stream(derive_seed(config.seed, 1));
    RandomStream dropout_stream(derive_seed(config.seed, 2));
    TrainResult result{std::move(initial), {}};
    LoraModel& model = result.model;
    std::vector<double> params = model.flatten_params();
    OptimizerState state;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<LabeledSequence> batch;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(order, shuffle_stream);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
            const BatchGradient g = batch_gradient(model, batch, true, &dropout_stream);
            if (!std::isfinite(g.loss)) throw ComputationError("training loss became non-finite");
            adamw_step(params, g.gradient, state, config);
            model.unflatten_params(params);
            result.loss_log.push_back({epoch, ++step, g.loss});
        }
    }
    return result;
}

TrainResult train_lora(std::shared_ptr<const FrozenBackbone> backbone, const AdapterSpec& spec,
                       std::span<const LabeledSequence> train_set, const TrainConfig& config) {
    LoraModel initial(std::move(backbone), spec, derive_seed(config.seed, 0));
    return train_lora(std::move(initial), train_set, config);
}

std::string loss_log_csv(std::span<const LossRecord> log) {
    std::ostringstream os;
    os << "epoch,step,loss\n";
    for (const auto& r : log) os << r.epoch << ',' << r.step << ',' << format_double(r.loss) << '\n';
    return os.str();
}

}  // namespace bayeslora
