// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "bayeslora/numerics.hpp"

namespace bayeslora {

using Logits = std::array<double, 2>;
using TokenId = std::uint32_t;

/// Encoded classification example.
struct LabeledSequence {
    std::vector<TokenId> tokens;
    int label = 0;
};

struct BackboneConfig {
    std::size_t vocab_size = 64;
    std::size_t embed_dim = 32;
    std::size_t num_heads = 2;
    std::size_t num_layers = 2;
    std::size_t max_seq_len = 50;
    std::size_t num_classes = 2;
    /// Token id treated as padding; padded positions are masked out of attention.
    TokenId pad_id = 0;

    std::size_t ffn_dim() const noexcept { return 4 * embed_dim; }
    void validate() const;
    friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

/// Closed-form count of frozen weights for the encoder layout used here.
std::size_t frozen_parameter_count(const BackboneConfig& config);

struct EncoderLayerWeights {
    std::vector<double> ln1_gamma, ln1_beta;
    Matrix wq, wk, wv, wo;  // d × d, applied as W·x
    std::vector<double> ln2_gamma, ln2_beta;
    Matrix w1;  // ffn × d
    std::vector<double> b1;
    Matrix w2;  // d × ffn
    std::vector<double> b2;
};

/// Randomly initialized pre-LN transformer encoder with a 2-class head on the first
/// position. Immutable after construction; share it through `std::shared_ptr<const>`.
class FrozenBackbone {
public:
    static std::shared_ptr<const FrozenBackbone> create(const BackboneConfig& config, std::uint64_t seed);

    const BackboneConfig& config() const noexcept { return config_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const Matrix& token_embedding() const noexcept { return token_embedding_; }
    const Matrix& position_embedding() const noexcept { return position_embedding_; }
    const EncoderLayerWeights& layer(std::size_t l) const { return layers_.at(l); }
    const std::vector<double>& final_gamma() const noexcept { return final_gamma_; }
    const std::vector<double>& final_beta() const noexcept { return final_beta_; }
    const Matrix& head() const noexcept { return head_; }
    const std::vector<double>& head_bias() const noexcept { return head_bias_; }

    std::size_t parameter_count() const noexcept;
    /// FNV-1a over the raw bytes of every weight; used to assert frozenness.
    std::uint64_t fingerprint() const noexcept;

private:
    FrozenBackbone() = default;

    BackboneConfig config_;
    std::uint64_t seed_ = 0;
    Matrix token_embedding_;
    Matrix position_embedding_;
    std::vector<EncoderLayerWeights> layers_;
    std::vector<double> final_gamma_, final_beta_;
    Matrix head_;
    std::vector<double> head_bias_;
};

inline std::shared_ptr<const FrozenBackbone> init_backbone(const BackboneConfig& config, std::uint64_t seed) {
    return FrozenBackbone::create(config, seed);
}

enum class Projection : std::uint8_t { query = 0, value = 1, output = 2 };
inline constexpr std::size_t kProjectionsPerLayer = 3;

const char* projection_name(Projection p) noexcept;

/// Low-rank update ΔW = (alpha/rank)·B·A for a d1×d2 host matrix.
struct LoraAdapter {
    std::size_t layer_id = 0;
    Matrix b;  // d1 × rank
    Matrix a;  // rank × d2
    std::size_t rank = 0;
    double alpha = 32.0;
    double dropout = 0.05;

    std::size_t d1() const noexcept { return b.rows(); }
    std::size_t d2() const noexcept { return a.cols(); }
    double scale() const noexcept { return alpha / static_cast<double>(rank); }
    std::size_t parameter_count() const noexcept { return b.size() + a.size(); }
};

struct AdapterSpec {
    std::size_t rank = 8;
    double alpha = 32.0;
    double dropout = 0.05;
};

/// B = 0, A ~ Kaiming-uniform with fan-in d2: U(−√(6/d2), √(6/d2)).
LoraAdapter init_adapter(std::size_t d1, std::size_t d2, std::size_t rank, double alpha, std::uint64_t seed,
                         double dropout = 0.05, std::size_t layer_id = 0);

/// h = W₀·a + (alpha/r)·B·(A·dropout(a)); dropout only when `train_mode` is set.
std::vector<double> lora_forward(const Matrix& w0, const LoraAdapter& adapter, std::span<const double> a,
                                 bool train_mode, RandomStream* stream);

/// Per-adapter record of one example's forward/backward for curvature estimation.
/// Each row is one sequence position. The adapter is seen as two stacked linear layers:
/// A maps `input` (d2) to `hidden` (rank); B maps `hidden` to its pre-activation output (d1).
struct AdapterTrace {
    Matrix input;        ///< positions × d2 (after dropout)
    Matrix hidden;       ///< positions × rank
    Matrix grad_hidden;  ///< positions × rank, upstream gradient at A's output
    Matrix grad_output;  ///< positions × d1, upstream gradient at B's output
};

struct LayerTrace {
    bool enabled = true;
    std::vector<AdapterTrace> adapters;  ///< indexed by adapter position in the model
};

/// Shape of one trainable matrix seen as a linear layer, and its slice of the parameter vector.
struct BlockLayout {
    std::size_t offset = 0;
    std::size_t out_dim = 0;
    std::size_t in_dim = 0;
    std::size_t size() const noexcept { return out_dim * in_dim; }
};

class LoraModel;

/// Activations of one forward pass, retained for the backward pass.
class ForwardRecord {
public:
    const Logits& logits() const noexcept { return logits_; }

private:
    friend class LoraModel;
    struct Impl;
    std::shared_ptr<Impl> impl_;
    Logits logits_{};
};

class LoraModel {
public:
    using Input = std::span<const TokenId>;
    using Tape = ForwardRecord;

    LoraModel(std::shared_ptr<const FrozenBackbone> backbone, const AdapterSpec& spec, std::uint64_t seed);
    LoraModel(std::shared_ptr<const FrozenBackbone> backbone, std::vector<LoraAdapter> adapters);

    const FrozenBackbone& backbone() const noexcept { return *backbone_; }
    const std::shared_ptr<const FrozenBackbone>& shared_backbone() const noexcept { return backbone_; }
    const std::vector<LoraAdapter>& adapters() const noexcept { return adapters_; }
    std::vector<LoraAdapter>& adapters() noexcept { return adapters_; }
    const LoraAdapter& adapter(std::size_t layer, Projection p) const;

    std::size_t parameter_count() const noexcept;
    /// One block per trainable matrix: adapter order, B before A.
    std::vector<BlockLayout> block_layouts() const;

    /// Canonical ordering: adapter id ascending, B before A, row-major.
    std::vector<double> flatten_params() const;
    void unflatten_params(std::span<const double> params);

    ForwardRecord record(Input tokens, bool train_mode = false, RandomStream* stream = nullptr) const;
    /// Accumulates ∂(dlogitsᵀ·logits)/∂θ into `grad` (length parameter_count) and fills `trace`.
    void backward(const ForwardRecord& tape, const Logits& dlogits, std::span<double> grad,
                  LayerTrace* trace = nullptr) const;

    void validate_input(Input tokens) const;

private:
    std::shared_ptr<const FrozenBackbone> backbone_;
    std::vector<LoraAdapter> adapters_;
};

/// Logits of the adapted model. With a trace, records every adapter's input activations.
Logits model_forward(const LoraModel& model, std::span<const TokenId> tokens, bool train_mode = false,
                     RandomStream* stream = nullptr, LayerTrace* trace = nullptr);

inline std::vector<double> flatten_params(const LoraModel& model) { return model.flatten_params(); }
inline void unflatten_params(LoraModel& model, std::span<const double> params) { model.unflatten_params(params); }

/// One linear layer with a LoRA adapter and a fixed 2-row readout: logits = R·(W₀ + (α/r)·B·A)·x.
/// Small enough for dense curvature oracles.
class LinearLoraModel {
public:
    using Input = std::span<const double>;

    class Tape {
    public:
        const Logits& logits() const noexcept { return logits_; }

    private:
        friend class LinearLoraModel;
        std::vector<double> input_;
        std::vector<double> hidden_;
        Logits logits_{};
    };

    LinearLoraModel(Matrix readout, Matrix w0, LoraAdapter adapter);

    const Matrix& readout() const noexcept { return readout_; }
    const Matrix& w0() const noexcept { return w0_; }
    const LoraAdapter& adapter() const noexcept { return adapter_; }
    LoraAdapter& adapter() noexcept { return adapter_; }

    std::size_t parameter_count() const noexcept { return adapter_.parameter_count(); }
    std::vector<BlockLayout> block_layouts() const;
    std::vector<double> flatten_params() const;
    void unflatten_params(std::span<const double> params);

    Tape record(Input x) const;
    void backward(const Tape& tape, const Logits& dlogits, std::span<double> grad, LayerTrace* trace = nullptr) const;

private:
    Matrix readout_;
    Matrix w0_;
    LoraAdapter adapter_;
};

Logits softmax(const Logits& logits);

}  // namespace bayeslora
