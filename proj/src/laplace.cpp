// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bayeslora/error.hpp"

namespace bayeslora {

namespace {

// Running Σ w·rowsᵀ·rows, kept dense or as a re-truncated low-rank factor.
class SideAccumulator {
public:
    SideAccumulator(std::size_t dim, const KfacOptions& opt)
        : dim_(dim), compressed_(dim > opt.compression_threshold), budget_(opt.compression_budget) {
        if (compressed_) {
            if (budget_ == 0) throw ValidationError("compression budget must be positive");
            factor_ = Matrix(dim, 0);
        } else {
            sum_ = Matrix(dim, dim);
        }
    }

    void add_rows(const Matrix& rows, double weight) {
        if (weight == 0.0 || rows.rows() == 0) return;
        if (rows.cols() != dim_) throw ValidationError("trace width does not match factor dimension");
        if (!compressed_) {
            for (std::size_t t = 0; t < rows.rows(); ++t) {
                const double* r = rows.row(t).data();
                for (std::size_t i = 0; i < dim_; ++i) {
                    const double wi = weight * r[i];
                    if (wi == 0.0) continue;
                    double* s = sum_.row(i).data();
                    for (std::size_t j = 0; j < dim_; ++j) s[j] += wi * r[j];
                }
            }
            return;
        }
        const double sw = std::sqrt(weight);
        for (std::size_t t = 0; t < rows.rows(); ++t) {
            std::vector<double> col(dim_);
            for (std::size_t i = 0; i < dim_; ++i) col[i] = sw * rows(t, i);
            pending_.push_back(std::move(col));
        }
        if (pending_.size() >= std::max<std::size_t>(budget_, 32)) flush();
    }

    FactorSide finish() {
        if (!compressed_) return FactorSide::dense(symmetrized(sum_));
        flush();
        return FactorSide::low_rank(factor_);
    }

private:
    // Append pending columns to the factor, re-factorize, truncate to the budget.
    void flush() {
        if (pending_.empty()) return;
        const std::size_t old_k = factor_.cols();
        Matrix stacked(dim_, old_k + pending_.size());
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j < old_k; ++j) stacked(i, j) = factor_(i, j);
            for (std::size_t j = 0; j < pending_.size(); ++j) stacked(i, old_k + j) = pending_[j][i];
        }
        pending_.clear();
        const std::size_t k = std::min({budget_, dim_, stacked.cols()});
        const SvdResult svd = truncated_svd(stacked, k);
        factor_ = Matrix(dim_, k);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < k; ++j) factor_(i, j) = svd.u(i, j) * svd.singular[j];
    }

    std::size_t dim_;
    bool compressed_;
    std::size_t budget_;
    Matrix sum_;
    Matrix factor_;
    std::vector<std::vector<double>> pending_;
};

Logits log_prob_gradient(const Logits& p, std::size_t cls) {
    Logits g{-p[0], -p[1]};
    g[cls] += 1.0;
    return g;
}

template <class Model, class Item, class InputOf>
std::vector<KfacFactor> kfac_impl(const Model& model, std::span<const Item> data, const KfacOptions& opt,
                                  InputOf input_of) {
    if (data.empty()) throw ValidationError("K-FAC accumulation needs a non-empty dataset");
    const std::vector<BlockLayout> layouts = model.block_layouts();
    std::vector<SideAccumulator> act, grad;
    for (const auto& b : layouts) {
        act.emplace_back(b.in_dim, opt);
        grad.emplace_back(b.out_dim, opt);
    }
    std::vector<std::size_t> rows(layouts.size(), 0);
    std::vector<double> scratch(model.parameter_count());

    for (const auto& item : data) {
        const auto tape = model.record(input_of(item));
        const Logits p = softmax(tape.logits());
        for (std::size_t cls = 0; cls < 2; ++cls) {
            LayerTrace trace;
            model.backward(tape, log_prob_gradient(p, cls), scratch, &trace);
            for (std::size_t m = 0; m < trace.adapters.size(); ++m) {
                const AdapterTrace& t = trace.adapters[m];
                if (cls == 0) {
                    act[2 * m].add_rows(t.hidden, 1.0);
                    act[2 * m + 1].add_rows(t.input, 1.0);
                    rows[2 * m] += t.hidden.rows();
                    rows[2 * m + 1] += t.input.rows();
                }
                grad[2 * m].add_rows(t.grad_output, p[cls]);
                grad[2 * m + 1].add_rows(t.grad_hidden, p[cls]);
            }
        }
    }

    std::vector<KfacFactor> out;
    for (std::size_t b = 0; b < layouts.size(); ++b) {
        out.push_back({b, layouts[b], act[b].finish(), grad[b].finish(), rows[b]});
    }
    return out;
}

template <class Model, class Item, class InputOf>
Matrix fisher_impl(const Model& model, std::span<const Item> data, InputOf input_of) {
    const std::size_t n = model.parameter_count();
    if (n > kMaxDenseParameters) {
        throw ValidationError("dense Fisher over " + std::to_string(n) + " parameters exceeds the guard of " +
                              std::to_string(kMaxDenseParameters));
    }
    Matrix f(n, n);
    std::vector<double> g(n);
    for (const auto& item : data) {
        const auto tape = model.record(input_of(item));
        const Logits p = softmax(tape.logits());
        for (std::size_t cls = 0; cls < 2; ++cls) {
            std::fill(g.begin(), g.end(), 0.0);
            model.backward(tape, log_prob_gradient(p, cls), g);
            for (std::size_t i = 0; i < n; ++i) {
                const double wi = p[cls] * g[i];
                if (wi == 0.0) continue;
                double* row = f.row(i).data();
                for (std::size_t j = 0; j < n; ++j) row[j] += wi * g[j];
            }
        }
    }
    return symmetrized(f);
}

struct Eigenbasis {
    Matrix basis;
    std::vector<double> values;
};

Eigenbasis side_eigenbasis(const FactorSide& side, double scale, const char* what, std::size_t block) {
    Eigenbasis e;
    if (side.compressed()) {
        const Matrix& l = side.stored();
        if (l.cols() == 0) {
            e.basis = Matrix(l.rows(), 0);
            return e;
        }
        const SvdResult svd = truncated_svd(l, std::min(l.rows(), l.cols()));
        e.basis = svd.u;
        for (double s : svd.singular) e.values.push_back(scale * s * s);
        return e;
    }
    const SymmetricEigen eig = symmetric_eigen(side.stored());
    for (double v : eig.values) {
        if (v < -1e-6) {
            throw ComputationError(std::string(what) + " factor of block " + std::to_string(block) +
                                   " is not positive semi-definite (eigenvalue " + std::to_string(v) + ")");
        }
        e.values.push_back(scale * std::max(v, 0.0));
    }
    e.basis = eig.vectors;
    return e;
}

// Qᵀ·V·P for V (out × in), Q (out × kq), P (in × kp).
Matrix project(const Matrix& q, const Matrix& v, const Matrix& p) {
    return matmul(matmul(q.transposed(), v), p);
}

}  // namespace

FactorSide FactorSide::dense(Matrix m) {
    if (m.rows() != m.cols()) throw ValidationError("dense factor side must be square");
    FactorSide s;
    s.m_ = std::move(m);
    return s;
}

FactorSide FactorSide::low_rank(Matrix factor) {
    FactorSide s;
    s.compressed_ = true;
    s.m_ = std::move(factor);
    return s;
}

Matrix FactorSide::to_dense() const {
    return compressed_ ? matmul_transposed(m_, m_) : m_;
}

Matrix KfacFactor::fisher_block() const {
    const double inv = sample_count ? 1.0 / static_cast<double>(sample_count) : 0.0;
    return kronecker(grad.to_dense(), inv * act.to_dense());
}

std::vector<KfacFactor> accumulate_kfac(const LoraModel& model, std::span<const LabeledSequence> data,
                                        const KfacOptions& options) {
    return kfac_impl(model, data, options,
                     [](const LabeledSequence& ex) { return std::span<const TokenId>(ex.tokens); });
}

std::vector<KfacFactor> accumulate_kfac(const LinearLoraModel& model, std::span<const std::vector<double>> data,
                                        const KfacOptions& options) {
    return kfac_impl(model, data, options, [](const std::vector<double>& x) { return std::span<const double>(x); });
}

Matrix fisher_bruteforce(const LoraModel& model, std::span<const LabeledSequence> data) {
    return fisher_impl(model, data, [](const LabeledSequence& ex) { return std::span<const TokenId>(ex.tokens); });
}

Matrix fisher_bruteforce(const LinearLoraModel& model, std::span<const std::vector<double>> data) {
    return fisher_impl(model, data, [](const std::vector<double>& x) { return std::span<const double>(x); });
}

LaplacePosterior::LaplacePosterior(std::vector<double> map_estimate, std::vector<KfacFactor> factors,
                                   double prior_precision)
    : map_(std::move(map_estimate)), factors_(std::move(factors)), lambda_(prior_precision) {
    if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw ValidationError("prior precision must be positive");
    if (!factors_.empty()) {
        std::vector<const KfacFactor*> sorted;
        for (const auto& f : factors_) sorted.push_back(&f);
        std::sort(sorted.begin(), sorted.end(),
                  [](const KfacFactor* a, const KfacFactor* b) { return a->layout.offset < b->layout.offset; });
        std::size_t expected = 0;
        for (const KfacFactor* f : sorted) {
            if (f->layout.offset != expected) throw ValidationError("K-FAC blocks must tile the parameter vector");
            if (f->act.dim() != f->layout.in_dim || f->grad.dim() != f->layout.out_dim) {
                throw ValidationError("K-FAC factor sides do not match block " + std::to_string(f->block));
            }
            expected += f->layout.size();
        }
        if (expected != map_.size()) throw ValidationError("K-FAC blocks do not cover every parameter");
    }
    for (const auto& f : factors_) {
        const double inv = f.sample_count ? 1.0 / static_cast<double>(f.sample_count) : 0.0;
        Eigenbasis g = side_eigenbasis(f.grad, 1.0, "gradient", f.block);
        Eigenbasis a = side_eigenbasis(f.act, inv, "activation", f.block);
        solvers_.push_back({f.layout, std::move(g.basis), std::move(g.values), std::move(a.basis), std::move(a.values)});
    }
}

std::vector<double> LaplacePosterior::apply_inverse(std::span<const double> v) const {
    if (v.size() != map_.size()) throw ValidationError("apply_inverse: vector length does not match posterior");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / lambda_;
    // Per block: H⁻¹V = V/λ + Q_g (C − T/λ) Q_aᵀ with T = Q_gᵀ V Q_a, C = T ./ (d_g d_aᵀ + λ).
    for (const auto& s : solvers_) {
        const auto& L = s.layout;
        Matrix vb(L.out_dim, L.in_dim, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(L.offset),
                                                           v.begin() + static_cast<std::ptrdiff_t>(L.offset + L.size())));
        Matrix t = project(s.grad_basis, vb, s.act_basis);
        for (std::size_t i = 0; i < t.rows(); ++i) {
            for (std::size_t j = 0; j < t.cols(); ++j) {
                const double x = t(i, j);
                t(i, j) = x / (s.grad_values[i] * s.act_values[j] + lambda_) - x / lambda_;
            }
        }
        const Matrix corr = matmul_transposed(matmul(s.grad_basis, t), s.act_basis);
        for (std::size_t k = 0; k < L.size(); ++k) out[L.offset + k] += corr.data()[k];
    }
    return out;
}

std::vector<double> LaplacePosterior::apply_precision(std::span<const double> v) const {
    if (v.size() != map_.size()) throw ValidationError("apply_precision: vector length does not match posterior");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = lambda_ * v[i];
    for (const auto& s : solvers_) {
        const auto& L = s.layout;
        Matrix vb(L.out_dim, L.in_dim, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(L.offset),
                                                           v.begin() + static_cast<std::ptrdiff_t>(L.offset + L.size())));
        Matrix t = project(s.grad_basis, vb, s.act_basis);
        for (std::size_t i = 0; i < t.rows(); ++i)
            for (std::size_t j = 0; j < t.cols(); ++j) t(i, j) *= s.grad_values[i] * s.act_values[j];
        const Matrix fv = matmul_transposed(matmul(s.grad_basis, t), s.act_basis);
        for (std::size_t k = 0; k < L.size(); ++k) out[L.offset + k] += fv.data()[k];
    }
    return out;
}

Matrix LaplacePosterior::dense_precision() const {
    const std::size_t n = map_.size();
    if (n > kMaxDenseParameters) throw ValidationError("dense precision requested for too many parameters");
    Matrix h = lambda_ * Matrix::identity(n);
    for (const auto& f : factors_) {
        const Matrix block = f.fisher_block();
        const std::size_t o = f.layout.offset;
        for (std::size_t i = 0; i < block.rows(); ++i)
            for (std::size_t j = 0; j < block.cols(); ++j) h(o + i, o + j) += block(i, j);
    }
    return h;
}

Matrix LaplacePosterior::dense_covariance() const {
    const std::size_t n = map_.size();
    if (n > kMaxDenseParameters) throw ValidationError("dense covariance requested for too many parameters");
    Matrix cov(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        const std::vector<double> col = apply_inverse(e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) cov(i, j) = col[i];
    }
    return cov;
}

LaplacePosterior posterior_from_factors(std::vector<double> map_estimate, std::vector<KfacFactor> factors,
                                        double prior_precision) {
    return LaplacePosterior(std::move(map_estimate), std::move(factors), prior_precision);
}

}  // namespace bayeslora
