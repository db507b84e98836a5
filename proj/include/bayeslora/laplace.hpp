// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bayeslora/model.hpp"
#include "bayeslora/numerics.hpp"

namespace bayeslora {

/// One side of a Kronecker factor: either a dense symmetric matrix or a low-rank
/// factor L (dim × k) standing for L·Lᵀ.
class FactorSide {
public:
    FactorSide() = default;
    static FactorSide dense(Matrix m);
    static FactorSide low_rank(Matrix factor);

    bool compressed() const noexcept { return compressed_; }
    std::size_t dim() const noexcept { return m_.rows(); }
    /// The dense matrix, or the low-rank factor when compressed.
    const Matrix& stored() const noexcept { return m_; }
    Matrix to_dense() const;

private:
    bool compressed_ = false;
    Matrix m_;
};

/// K-FAC block for one LoRA matrix seen as a linear layer (out_dim × in_dim).
///
/// `act` sums input-activation outer products over every accumulated position;
/// `grad` sums the output-gradient outer products, with the expectation over the
/// model's own predictive distribution taken exactly over both classes.
/// The Fisher block in the row-major parameter order is grad ⊗ (act / sample_count).
struct KfacFactor {
    std::size_t block = 0;  ///< index into the model's block_layouts()
    BlockLayout layout;
    FactorSide act;   ///< in_dim × in_dim
    FactorSide grad;  ///< out_dim × out_dim
    std::size_t sample_count = 0;  ///< activation rows accumulated (sequence positions)

    Matrix fisher_block() const;
};

struct KfacOptions {
    /// Sides wider than this are kept as a rank-`compression_budget` factor.
    std::size_t compression_threshold = 64;
    std::size_t compression_budget = 10;
};

std::vector<KfacFactor> accumulate_kfac(const LoraModel& model, std::span<const LabeledSequence> data,
                                        const KfacOptions& options = {});
std::vector<KfacFactor> accumulate_kfac(const LinearLoraModel& model, std::span<const std::vector<double>> data,
                                        const KfacOptions& options = {});

/// F = Σₙ Σ_c p(c|xₙ)·g·gᵀ with g = ∇θ log p(c|xₙ). Guarded to at most 2000 parameters.
Matrix fisher_bruteforce(const LoraModel& model, std::span<const LabeledSequence> data);
Matrix fisher_bruteforce(const LinearLoraModel& model, std::span<const std::vector<double>> data);

inline constexpr std::size_t kMaxDenseParameters = 2000;

/// Gaussian posterior N(θ_MAP, H⁻¹) with H = blockdiag(K-FAC blocks) + λI.
class LaplacePosterior {
public:
    LaplacePosterior(std::vector<double> map_estimate, std::vector<KfacFactor> factors, double prior_precision);

    const std::vector<double>& map_estimate() const noexcept { return map_; }
    const std::vector<KfacFactor>& factors() const noexcept { return factors_; }
    double prior_precision() const noexcept { return lambda_; }
    std::size_t dimension() const noexcept { return map_.size(); }

    /// H⁻¹·v using the joint eigenbasis of each block's Kronecker sides.
    std::vector<double> apply_inverse(std::span<const double> v) const;
    /// H·v.
    std::vector<double> apply_precision(std::span<const double> v) const;

    Matrix dense_precision() const;
    Matrix dense_covariance() const;

private:
    struct BlockSolver {
        BlockLayout layout;
        Matrix grad_basis;  // out × kg, orthonormal columns
        std::vector<double> grad_values;
        Matrix act_basis;  // in × ka
        std::vector<double> act_values;  // already divided by sample_count
    };

    std::vector<double> map_;
    std::vector<KfacFactor> factors_;
    double lambda_;
    std::vector<BlockSolver> solvers_;
};

/// Validates coverage and PSD-ness (eigenvalues ≥ −1e-6) and precomputes block eigenbases.
LaplacePosterior posterior_from_factors(std::vector<double> map_estimate, std::vector<KfacFactor> factors,
                                        double prior_precision);

}  // namespace bayeslora
