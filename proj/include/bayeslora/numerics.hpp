// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace bayeslora {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Takes ownership of `values` (row-major). Rejects a size mismatch or non-finite entries.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }

    Matrix transposed() const;
    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// a · bᵀ without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

Matrix kronecker(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
/// (m + mᵀ)/2; requires a square matrix.
Matrix symmetrized(const Matrix& m);
bool is_symmetric(const Matrix& m, double tol);

/// Lower-triangular L with L·Lᵀ = s. Throws NotPositiveDefiniteError on a non-positive pivot.
Matrix cholesky(const Matrix& s);

struct SvdResult {
    Matrix u;                     ///< rows × k, orthonormal columns
    std::vector<double> singular; ///< k values, non-increasing
    Matrix v;                     ///< cols × k, orthonormal columns
};

/// Best rank-k approximation U·diag(S)·Vᵀ via one-sided Jacobi.
SvdResult truncated_svd(const Matrix& m, std::size_t k);

struct SymmetricEigen {
    std::vector<double> values; ///< ascending
    Matrix vectors;             ///< eigenvectors stored as columns
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
SymmetricEigen symmetric_eigen(const Matrix& s);

/// Counter-based random stream (SplitMix64 output function over a seeded counter).
/// The sequence depends on the seed alone, so streams are reproducible across platforms
/// and independent streams never share state.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal() noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

std::vector<double> gaussian_sample(RandomStream& stream, std::size_t n);

/// Deterministically derives a child seed; distinct (seed, index) pairs give distinct streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

template <class T>
void shuffle(std::vector<T>& items, RandomStream& stream) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(stream.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace bayeslora
