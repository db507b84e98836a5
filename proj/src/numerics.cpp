// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "bayeslora/error.hpp"

namespace bayeslora {

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ValidationError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
    }
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

double dot_columns(const std::vector<std::vector<double>>& cols, std::size_t p, std::size_t q) {
    const auto& a = cols[p];
    const auto& b = cols[q];
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Replaces column j with a unit vector orthogonal to every column in `basis`.
void complete_orthonormal(std::vector<std::vector<double>>& basis, std::size_t j) {
    const std::size_t m = basis[j].size();
    for (std::size_t e = 0; e < m; ++e) {
        std::vector<double> cand(m, 0.0);
        cand[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t c = 0; c < basis.size(); ++c) {
                if (c == j) continue;
                double proj = 0.0;
                for (std::size_t i = 0; i < m; ++i) proj += cand[i] * basis[c][i];
                for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * basis[c][i];
            }
        }
        double norm = 0.0;
        for (double x : cand) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 1e-6) {
            for (double& x : cand) x /= norm;
            basis[j] = std::move(cand);
            return;
        }
    }
}

// Hestenes one-sided Jacobi on a tall (rows >= cols) matrix.
SvdResult jacobi_svd_tall(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    std::vector<std::vector<double>> cols(n, std::vector<double>(m));
    std::vector<std::vector<double>> vcols(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) cols[j][i] = a(i, j);
        vcols[j][j] = 1.0;
    }

    constexpr double kTol = 1e-15;
    for (int sweep = 0; sweep < 80; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = dot_columns(cols, p, p);
                const double beta = dot_columns(cols, q, q);
                const double gamma = dot_columns(cols, p, q);
                if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double xp = cols[p][i];
                    const double xq = cols[q][i];
                    cols[p][i] = c * xp - s * xq;
                    cols[q][i] = s * xp + c * xq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double xp = vcols[p][i];
                    const double xq = vcols[q][i];
                    vcols[p][i] = c * xp - s * xq;
                    vcols[q][i] = s * xp + c * xq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(dot_columns(cols, j, j));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double cutoff = (sigma.empty() ? 0.0 : sigma[order[0]]) * 1e-14;
    std::vector<std::vector<double>> ucols(n);
    std::vector<double> sorted_sigma(n);
    std::vector<std::vector<double>> sorted_v(n);
    std::vector<std::size_t> degenerate;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        sorted_sigma[k] = sigma[j];
        sorted_v[k] = vcols[j];
        ucols[k] = cols[j];
        if (sigma[j] > cutoff && sigma[j] > 0.0) {
            for (double& x : ucols[k]) x /= sigma[j];
        } else {
            sorted_sigma[k] = 0.0;
            degenerate.push_back(k);
        }
    }
    for (std::size_t k : degenerate) std::fill(ucols[k].begin(), ucols[k].end(), 0.0);
    for (std::size_t k : degenerate) complete_orthonormal(ucols, k);

    SvdResult out{Matrix(m, n), std::move(sorted_sigma), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < m; ++i) out.u(i, k) = ucols[k][i];
        for (std::size_t i = 0; i < n; ++i) out.v(i, k) = sorted_v[k][i];
    }
    return out;
}

Matrix leading_columns(const Matrix& m, std::size_t k) {
    Matrix out(m.rows(), k);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < k; ++j) out(i, j) = m(i, j);
    }
    return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows * cols) {
        throw ValidationError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                              std::to_string(values_.size()) + " entries");
    }
    if (!all_finite()) throw ValidationError("matrix entries must be finite");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ValidationError("ragged matrix literal");
        values.insert(values.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(values));
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    }
    return t;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ValidationError("matmul: shape mismatch " + shape(a) + " x " + shape(b));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k).data();
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ValidationError("matmul_transposed: shape mismatch " + shape(a) + " x " + shape(b) + "^T");
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j).data();
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
            out(i, j) = s;
        }
    }
    return out;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw ValidationError("matvec: " + shape(a) + " applied to vector of length " + std::to_string(x.size()));
    }
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i).data();
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) s += arow[k] * x[k];
        out[i] = s;
    }
    return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (double& x : out.values()) x *= s;
    return out;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double aij = a(i, j);
            for (std::size_t k = 0; k < b.rows(); ++k) {
                for (std::size_t l = 0; l < b.cols(); ++l) {
                    out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
                }
            }
        }
    }
    return out;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double x : m.values()) s += x * x;
    return std::sqrt(s);
}

double max_abs(const Matrix& m) {
    double s = 0.0;
    for (double x : m.values()) s = std::max(s, std::abs(x));
    return s;
}

Matrix symmetrized(const Matrix& m) {
    if (m.rows() != m.cols()) throw ValidationError("symmetrized: matrix is not square (" + shape(m) + ")");
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = 0.5 * (m(i, j) + m(j, i));
    }
    return out;
}

bool is_symmetric(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = i + 1; j < m.cols(); ++j) {
            if (std::abs(m(i, j) - m(j, i)) > tol) return false;
        }
    }
    return true;
}

Matrix cholesky(const Matrix& s) {
    if (s.rows() != s.cols()) throw ValidationError("cholesky: matrix is not square (" + shape(s) + ")");
    if (!is_symmetric(s, 1e-9 * std::max(1.0, max_abs(s)))) throw ValidationError("cholesky: matrix is not symmetric");
    const std::size_t n = s.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = s(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0)) throw NotPositiveDefiniteError(j);
        const double ljj = std::sqrt(diag);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = s(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
            l(i, j) = v / ljj;
        }
    }
    return l;
}

SvdResult truncated_svd(const Matrix& m, std::size_t k) {
    if (k == 0) throw ValidationError("truncated_svd: rank budget k must be positive");
    const std::size_t full = std::min(m.rows(), m.cols());
    if (k > full) {
        throw ValidationError("truncated_svd: k=" + std::to_string(k) + " exceeds min dimension of " + shape(m));
    }
    SvdResult svd;
    if (m.rows() >= m.cols()) {
        svd = jacobi_svd_tall(m);
    } else {
        SvdResult t = jacobi_svd_tall(m.transposed());
        svd = SvdResult{std::move(t.v), std::move(t.singular), std::move(t.u)};
    }
    svd.u = leading_columns(svd.u, k);
    svd.v = leading_columns(svd.v, k);
    svd.singular.resize(k);
    return svd;
}

SymmetricEigen symmetric_eigen(const Matrix& s) {
    if (s.rows() != s.cols()) throw ValidationError("symmetric_eigen: matrix is not square (" + shape(s) + ")");
    const std::size_t n = s.rows();
    Matrix a = symmetrized(s);
    Matrix v = Matrix::identity(n);

    const double scale = std::max(frobenius_norm(a), 1e-300);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        }
        if (std::sqrt(off) <= 1e-17 * scale) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
    SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

std::uint64_t RandomStream::next_u64() noexcept {
    ++counter_;
    return mix64(seed_ + counter_ * kGolden);
}

double RandomStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

double RandomStream::normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> gaussian_sample(RandomStream& stream, std::size_t n) {
    std::vector<double> out(n);
    for (double& x : out) x = stream.normal();
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(seed ^ mix64(index + kGolden));
}

}  // namespace bayeslora
