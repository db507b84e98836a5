// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bayeslora/laplace.hpp"
#include "bayeslora/model.hpp"
#include "bayeslora/numerics.hpp"

namespace bayeslora {

/// params × 2; column c is ∂logit_c/∂θ in flatten_params order (eval mode).
Matrix jacobian_logits(const LoraModel& model, std::span<const TokenId> tokens);
Matrix jacobian_logits(const LinearLoraModel& model, std::span<const double> x);

/// Gaussian over the two logits.
struct PredictiveDistribution {
    Logits mean{};
    Matrix covariance;  ///< Λ, 2 × 2
    Matrix chol;        ///< lower triangular, L·Lᵀ = Λ + jitter·I
    double jitter = 0.0;
};

inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-4;

/// Symmetrizes Λ and factors it, adding jitter 1e-10, 1e-9, … up to 1e-4 on failure.
/// Λ = 0 exactly gives L = 0 with no jitter.
PredictiveDistribution gaussian_predictive(const Logits& mean, const Matrix& covariance);

/// Λ = Jᵀ H⁻¹ J.
PredictiveDistribution predictive_distribution(const Logits& mean, const Matrix& jacobian,
                                               const LaplacePosterior& posterior);

/// mean + L·z with z ~ N(0, I); every sample consumes exactly two normals.
std::vector<Logits> sample_logits(const PredictiveDistribution& dist, std::size_t count, RandomStream& stream);

/// Mean of the per-sample softmax vectors.
Logits bma_probability(std::span<const Logits> samples);

inline std::uint64_t example_seed(std::uint64_t run_seed, std::uint64_t index) noexcept { return run_seed ^ index; }

struct BayesPrediction {
    Logits map_probability{};
    Logits probability{};
    double jitter = 0.0;
};

/// Linearized Laplace predictive for one input, sampled with `samples` draws from `seed`.
BayesPrediction bayes_predict(const LoraModel& map_model, const LaplacePosterior& posterior,
                              std::span<const TokenId> tokens, std::size_t samples, std::uint64_t seed);

/// One row of the prediction dump: probabilities of class 1.
struct PredictionRecord {
    std::string id;
    int label = 0;
    double p_map = 0.0;
    std::optional<double> p_bayes;
    std::optional<double> p_ens;
};

/// Tab-separated `id label p_map p_bayes p_ens` with a header; absent values are `NA`.
std::string predictions_tsv(std::span<const PredictionRecord> records);
std::vector<PredictionRecord> parse_predictions_tsv(std::string_view text);

}  // namespace bayeslora
