// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "bayeslora/error.hpp"

namespace bayeslora {

namespace {

constexpr double kLayerNormEps = 1e-5;

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, RandomStream& stream) {
    Matrix m(rows, cols);
    for (double& x : m.values()) x = stddev * stream.normal();
    return m;
}

// y = x·Wᵀ for every row of x.
void linear_rows(const Matrix& x, const Matrix& w, Matrix& y) {
    const std::size_t n = x.rows(), in = x.cols(), out = w.rows();
    y = Matrix(n, out);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = x.row(i).data();
        double* yr = y.row(i).data();
        for (std::size_t o = 0; o < out; ++o) {
            const double* wr = w.row(o).data();
            double s = 0.0;
            for (std::size_t k = 0; k < in; ++k) s += xr[k] * wr[k];
            yr[o] = s;
        }
    }
}

// dx += dy·W for every row.
void linear_rows_backward(const Matrix& dy, const Matrix& w, Matrix& dx) {
    const std::size_t n = dy.rows(), in = w.cols(), out = w.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* dyr = dy.row(i).data();
        double* dxr = dx.row(i).data();
        for (std::size_t o = 0; o < out; ++o) {
            const double g = dyr[o];
            if (g == 0.0) continue;
            const double* wr = w.row(o).data();
            for (std::size_t k = 0; k < in; ++k) dxr[k] += g * wr[k];
        }
    }
}

void layer_norm_rows(const Matrix& x, const std::vector<double>& gamma, const std::vector<double>& beta, Matrix& xhat,
                     std::vector<double>& rstd, Matrix& y) {
    const std::size_t n = x.rows(), d = x.cols();
    xhat = Matrix(n, d);
    y = Matrix(n, d);
    rstd.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = x.row(i).data();
        double mean = 0.0;
        for (std::size_t k = 0; k < d; ++k) mean += xr[k];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t k = 0; k < d; ++k) var += (xr[k] - mean) * (xr[k] - mean);
        var /= static_cast<double>(d);
        const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
        rstd[i] = rs;
        for (std::size_t k = 0; k < d; ++k) {
            const double h = (xr[k] - mean) * rs;
            xhat(i, k) = h;
            y(i, k) = gamma[k] * h + beta[k];
        }
    }
}

// dx += LayerNorm'(dy) for every row.
void layer_norm_rows_backward(const Matrix& dy, const Matrix& xhat, const std::vector<double>& rstd,
                              const std::vector<double>& gamma, Matrix& dx) {
    const std::size_t n = dy.rows(), d = dy.cols();
    std::vector<double> g(d);
    for (std::size_t i = 0; i < n; ++i) {
        double mean_g = 0.0, mean_gx = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            g[k] = dy(i, k) * gamma[k];
            mean_g += g[k];
            mean_gx += g[k] * xhat(i, k);
        }
        mean_g /= static_cast<double>(d);
        mean_gx /= static_cast<double>(d);
        for (std::size_t k = 0; k < d; ++k) dx(i, k) += rstd[i] * (g[k] - mean_g - xhat(i, k) * mean_gx);
    }
}

struct AdapterCache {
    Matrix input;   // dropout(x)
    Matrix hidden;  // input·Aᵀ
    Matrix mask;    // empty in eval mode; else keep/(1−p) factors
};

// y = x·W₀ᵀ + scale·(dropout(x)·Aᵀ)·Bᵀ
void adapted_projection(const Matrix& x, const Matrix& w0, const LoraAdapter& ad, bool train_mode,
                        RandomStream* stream, AdapterCache& cache, Matrix& y) {
    linear_rows(x, w0, y);
    cache.input = x;
    cache.mask = Matrix();
    if (train_mode && ad.dropout > 0.0) {
        if (stream == nullptr) throw ValidationError("train-mode forward requires a random stream for dropout");
        const double keep_scale = 1.0 / (1.0 - ad.dropout);
        cache.mask = Matrix(x.rows(), x.cols());
        for (std::size_t i = 0; i < cache.mask.size(); ++i) {
            const double m = stream->uniform() >= ad.dropout ? keep_scale : 0.0;
            cache.mask.data()[i] = m;
            cache.input.data()[i] *= m;
        }
    }
    linear_rows(cache.input, ad.a, cache.hidden);
    Matrix delta;
    linear_rows(cache.hidden, ad.b, delta);
    const double s = ad.scale();
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += s * delta.data()[i];
}

// Given dy at the projection output: accumulates B/A gradients, adds dx, fills the trace.
void adapted_projection_backward(const Matrix& dy, const Matrix& w0, const LoraAdapter& ad, const AdapterCache& cache,
                                 double* grad_b, double* grad_a, Matrix& dx, AdapterTrace* trace) {
    const std::size_t n = dy.rows(), r = ad.rank, d1 = ad.d1(), d2 = ad.d2();
    linear_rows_backward(dy, w0, dx);

    Matrix grad_out(n, d1);
    const double s = ad.scale();
    for (std::size_t i = 0; i < dy.size(); ++i) grad_out.data()[i] = s * dy.data()[i];

    // grad_B += grad_outᵀ·hidden ; grad_hidden = grad_out·B
    Matrix grad_hidden(n, r);
    for (std::size_t t = 0; t < n; ++t) {
        const double* go = grad_out.row(t).data();
        const double* hd = cache.hidden.row(t).data();
        double* gh = grad_hidden.row(t).data();
        for (std::size_t o = 0; o < d1; ++o) {
            const double g = go[o];
            if (g == 0.0) continue;
            const double* br = ad.b.row(o).data();
            double* gb = grad_b + o * r;
            for (std::size_t k = 0; k < r; ++k) {
                gb[k] += g * hd[k];
                gh[k] += g * br[k];
            }
        }
    }
    // grad_A += grad_hiddenᵀ·input ; d(input) = grad_hidden·A
    Matrix dinput(n, d2);
    for (std::size_t t = 0; t < n; ++t) {
        const double* gh = grad_hidden.row(t).data();
        const double* in = cache.input.row(t).data();
        double* di = dinput.row(t).data();
        for (std::size_t k = 0; k < r; ++k) {
            const double g = gh[k];
            if (g == 0.0) continue;
            const double* ar = ad.a.row(k).data();
            double* ga = grad_a + k * d2;
            for (std::size_t j = 0; j < d2; ++j) {
                ga[j] += g * in[j];
                di[j] += g * ar[j];
            }
        }
    }
    for (std::size_t i = 0; i < dinput.size(); ++i) {
        const double m = cache.mask.empty() ? 1.0 : cache.mask.data()[i];
        dx.data()[i] += dinput.data()[i] * m;
    }
    if (trace != nullptr) {
        trace->input = cache.input;
        trace->hidden = cache.hidden;
        trace->grad_hidden = std::move(grad_hidden);
        trace->grad_output = std::move(grad_out);
    }
}

std::uint64_t fnv1a(std::uint64_t h, std::span<const double> values) noexcept {
    for (double v : values) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace

void BackboneConfig::validate() const {
    if (vocab_size < 1) throw ValidationError("vocab_size must be positive");
    if (embed_dim < 1 || num_heads < 1) throw ValidationError("embed_dim and num_heads must be positive");
    if (embed_dim % num_heads != 0) {
        throw ValidationError("embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " +
                              std::to_string(num_heads));
    }
    if (num_layers < 1) throw ValidationError("num_layers must be positive");
    if (max_seq_len < 1) throw ValidationError("max_seq_len must be at least 1");
    if (num_classes != 2) throw ValidationError("only 2-class heads are supported");
    if (pad_id >= vocab_size) throw ValidationError("pad_id must be a valid token id");
}

std::size_t frozen_parameter_count(const BackboneConfig& c) {
    const std::size_t d = c.embed_dim, f = c.ffn_dim();
    const std::size_t per_layer = 2 * d + 4 * d * d + 2 * d + f * d + f + d * f + d;
    return c.vocab_size * d + c.max_seq_len * d + c.num_layers * per_layer + 2 * d + c.num_classes * d + c.num_classes;
}

std::shared_ptr<const FrozenBackbone> FrozenBackbone::create(const BackboneConfig& config, std::uint64_t seed) {
    config.validate();
    std::shared_ptr<FrozenBackbone> bb(new FrozenBackbone());
    bb->config_ = config;
    bb->seed_ = seed;
    RandomStream stream(seed);
    const std::size_t d = config.embed_dim, f = config.ffn_dim();
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(d));
    bb->token_embedding_ = gaussian_matrix(config.vocab_size, d, 1.0, stream);
    bb->position_embedding_ = gaussian_matrix(config.max_seq_len, d, 1.0, stream);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        EncoderLayerWeights w;
        w.ln1_gamma.assign(d, 1.0);
        w.ln1_beta.assign(d, 0.0);
        w.wq = gaussian_matrix(d, d, proj_std, stream);
        w.wk = gaussian_matrix(d, d, proj_std, stream);
        w.wv = gaussian_matrix(d, d, proj_std, stream);
        w.wo = gaussian_matrix(d, d, proj_std, stream);
        w.ln2_gamma.assign(d, 1.0);
        w.ln2_beta.assign(d, 0.0);
        w.w1 = gaussian_matrix(f, d, std::sqrt(2.0 / static_cast<double>(d)), stream);
        w.b1.assign(f, 0.0);
        w.w2 = gaussian_matrix(d, f, 1.0 / std::sqrt(static_cast<double>(f)), stream);
        w.b2.assign(d, 0.0);
        bb->layers_.push_back(std::move(w));
    }
    bb->final_gamma_.assign(d, 1.0);
    bb->final_beta_.assign(d, 0.0);
    bb->head_ = gaussian_matrix(config.num_classes, d, proj_std, stream);
    bb->head_bias_.assign(config.num_classes, 0.0);
    return bb;
}

std::size_t FrozenBackbone::parameter_count() const noexcept {
    std::size_t n = token_embedding_.size() + position_embedding_.size();
    for (const auto& w : layers_) {
        n += w.ln1_gamma.size() + w.ln1_beta.size() + w.wq.size() + w.wk.size() + w.wv.size() + w.wo.size() +
             w.ln2_gamma.size() + w.ln2_beta.size() + w.w1.size() + w.b1.size() + w.w2.size() + w.b2.size();
    }
    return n + final_gamma_.size() + final_beta_.size() + head_.size() + head_bias_.size();
}

std::uint64_t FrozenBackbone::fingerprint() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(h, token_embedding_.values());
    h = fnv1a(h, position_embedding_.values());
    for (const auto& w : layers_) {
        for (const auto* v : {&w.ln1_gamma, &w.ln1_beta, &w.ln2_gamma, &w.ln2_beta, &w.b1, &w.b2}) h = fnv1a(h, *v);
        for (const auto* m : {&w.wq, &w.wk, &w.wv, &w.wo, &w.w1, &w.w2}) h = fnv1a(h, m->values());
    }
    h = fnv1a(h, final_gamma_);
    h = fnv1a(h, final_beta_);
    h = fnv1a(h, head_.values());
    return fnv1a(h, head_bias_);
}

const char* projection_name(Projection p) noexcept {
    switch (p) {
        case Projection::query: return "query";
        case Projection::value: return "value";
        case Projection::output: return "output";
    }
    return "?";
}

LoraAdapter init_adapter(std::size_t d1, std::size_t d2, std::size_t rank, double alpha, std::uint64_t seed,
                         double dropout, std::size_t layer_id) {
    if (rank < 1 || 2 * rank > std::min(d1, d2)) {
        throw ValidationError("adapter rank " + std::to_string(rank) + " outside [1, min(d1,d2)/2] for " +
                              std::to_string(d1) + "x" + std::to_string(d2));
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("adapter dropout must lie in [0, 1)");
    if (!std::isfinite(alpha)) throw ValidationError("adapter alpha must be finite");
    LoraAdapter ad;
    ad.layer_id = layer_id;
    ad.rank = rank;
    ad.alpha = alpha;
    ad.dropout = dropout;
    ad.b = Matrix(d1, rank);
    ad.a = Matrix(rank, d2);
    const double bound = std::sqrt(6.0 / static_cast<double>(d2));
    RandomStream stream(seed);
    for (double& x : ad.a.values()) x = stream.uniform(-bound, bound);
    return ad;
}

std::vector<double> lora_forward(const Matrix& w0, const LoraAdapter& adapter, std::span<const double> a,
                                 bool train_mode, RandomStream* stream) {
    if (w0.rows() != adapter.d1() || w0.cols() != adapter.d2()) {
        throw ValidationError("adapter shape does not match host layer");
    }
    if (a.size() != adapter.d2()) {
        throw ValidationError("lora_forward: input length " + std::to_string(a.size()) + ", expected " +
                              std::to_string(adapter.d2()));
    }
    Matrix x(1, a.size(), std::vector<double>(a.begin(), a.end()));
    AdapterCache cache;
    Matrix y;
    adapted_projection(x, w0, adapter, train_mode, stream, cache, y);
    return {y.values().begin(), y.values().end()};
}

Logits softmax(const Logits& z) {
    const double m = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
    const double s = e0 + e1;
    return {e0 / s, e1 / s};
}

// ---------------------------------------------------------------------------
// LoraModel

struct ForwardRecord::Impl {
    struct Layer {
        Matrix x_in;
        Matrix xhat1, h1;
        std::vector<double> rstd1;
        Matrix q, k, v;
        std::vector<double> probs;  // heads × n × n
        Matrix ctx;
        Matrix x_mid;
        Matrix xhat2, h2;
        std::vector<double> rstd2;
        Matrix f1;  // pre-activation of the first FFN matrix
        AdapterCache adapters[kProjectionsPerLayer];
    };
    std::size_t positions = 0;
    std::vector<Layer> layers;
    Matrix xhat_final;  // 1 × d, first position only
    std::vector<double> rstd_final;
};

LoraModel::LoraModel(std::shared_ptr<const FrozenBackbone> backbone, const AdapterSpec& spec, std::uint64_t seed)
    : backbone_(std::move(backbone)) {
    if (!backbone_) throw ValidationError("LoraModel requires a backbone");
    const std::size_t d = backbone_->config().embed_dim;
    const std::size_t count = backbone_->config().num_layers * kProjectionsPerLayer;
    for (std::size_t id = 0; id < count; ++id) {
        adapters_.push_back(init_adapter(d, d, spec.rank, spec.alpha, derive_seed(seed, id), spec.dropout, id));
    }
}

LoraModel::LoraModel(std::shared_ptr<const FrozenBackbone> backbone, std::vector<LoraAdapter> adapters)
    : backbone_(std::move(backbone)), adapters_(std::move(adapters)) {
    if (!backbone_) throw ValidationError("LoraModel requires a backbone");
    const std::size_t d = backbone_->config().embed_dim;
    const std::size_t count = backbone_->config().num_layers * kProjectionsPerLayer;
    if (adapters_.size() != count) {
        throw ValidationError("expected " + std::to_string(count) + " adapters, got " + std::to_string(adapters_.size()));
    }
    for (std::size_t id = 0; id < count; ++id) {
        const auto& ad = adapters_[id];
        if (ad.layer_id != id) throw ValidationError("adapters must be ordered by layer id");
        if (ad.d1() != d || ad.d2() != d || ad.b.cols() != ad.rank || ad.a.rows() != ad.rank) {
            throw ValidationError("adapter " + std::to_string(id) + " does not match host layer dimensions");
        }
    }
}

const LoraAdapter& LoraModel::adapter(std::size_t layer, Projection p) const {
    return adapters_.at(layer * kProjectionsPerLayer + static_cast<std::size_t>(p));
}

std::size_t LoraModel::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& ad : adapters_) n += ad.parameter_count();
    return n;
}

std::vector<BlockLayout> LoraModel::block_layouts() const {
    std::vector<BlockLayout> out;
    std::size_t offset = 0;
    for (const auto& ad : adapters_) {
        out.push_back({offset, ad.b.rows(), ad.b.cols()});
        offset += ad.b.size();
        out.push_back({offset, ad.a.rows(), ad.a.cols()});
        offset += ad.a.size();
    }
    return out;
}

std::vector<double> LoraModel::flatten_params() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& ad : adapters_) {
        out.insert(out.end(), ad.b.values().begin(), ad.b.values().end());
        out.insert(out.end(), ad.a.values().begin(), ad.a.values().end());
    }
    return out;
}

void LoraModel::unflatten_params(std::span<const double> params) {
    if (params.size() != parameter_count()) {
        throw ValidationError("parameter vector has length " + std::to_string(params.size()) + ", expected " +
                              std::to_string(parameter_count()));
    }
    std::size_t offset = 0;
    for (auto& ad : adapters_) {
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), ad.b.size(), ad.b.data());
        offset += ad.b.size();
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), ad.a.size(), ad.a.data());
        offset += ad.a.size();
    }
}

void LoraModel::validate_input(Input tokens) const {
    const auto& c = backbone_->config();
    if (tokens.empty()) throw ValidationError("token sequence is empty");
    if (tokens.size() > c.max_seq_len) {
        throw ValidationError("sequence length " + std::to_string(tokens.size()) + " exceeds max_seq_len " +
                              std::to_string(c.max_seq_len));
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] >= c.vocab_size) {
            throw ValidationError("token id " + std::to_string(tokens[i]) + " at position " + std::to_string(i) +
                                  " is outside the vocabulary");
        }
    }
}

ForwardRecord LoraModel::record(Input tokens, bool train_mode, RandomStream* stream) const {
    validate_input(tokens);
    const auto& bb = *backbone_;
    const auto& c = bb.config();
    const std::size_t d = c.embed_dim, heads = c.num_heads, dh = d / heads, f = c.ffn_dim();

    // Padded positions are masked as attention keys, so they never influence the
    // first position; dropping them is exactly equivalent and cheaper.
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i == 0 || tokens[i] != c.pad_id) kept.push_back(i);
    }
    const std::size_t n = kept.size();

    auto impl = std::make_shared<ForwardRecord::Impl>();
    impl->positions = n;
    impl->layers.resize(c.num_layers);

    Matrix x(n, d);
    for (std::size_t t = 0; t < n; ++t) {
        const auto te = bb.token_embedding().row(tokens[kept[t]]);
        const auto pe = bb.position_embedding().row(kept[t]);
        for (std::size_t k = 0; k < d; ++k) x(t, k) = te[k] + pe[k];
    }

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        const auto& w = bb.layer(l);
        auto& L = impl->layers[l];
        const LoraAdapter* ad = &adapters_[l * kProjectionsPerLayer];
        L.x_in = x;
        layer_norm_rows(x, w.ln1_gamma, w.ln1_beta, L.xhat1, L.rstd1, L.h1);
        adapted_projection(L.h1, w.wq, ad[0], train_mode, stream, L.adapters[0], L.q);
        linear_rows(L.h1, w.wk, L.k);
        adapted_projection(L.h1, w.wv, ad[1], train_mode, stream, L.adapters[1], L.v);

        L.probs.assign(heads * n * n, 0.0);
        L.ctx = Matrix(n, d);
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < n; ++i) {
                double* p = &L.probs[(h * n + i) * n];
                double mx = -INFINITY;
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < dh; ++k) s += L.q(i, off + k) * L.k(j, off + k);
                    p[j] = s * inv_sqrt_dh;
                    mx = std::max(mx, p[j]);
                }
                double z = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    p[j] = std::exp(p[j] - mx);
                    z += p[j];
                }
                for (std::size_t j = 0; j < n; ++j) {
                    p[j] /= z;
                    for (std::size_t k = 0; k < dh; ++k) L.ctx(i, off + k) += p[j] * L.v(j, off + k);
                }
            }
        }
        Matrix o;
        adapted_projection(L.ctx, w.wo, ad[2], train_mode, stream, L.adapters[2], o);
        L.x_mid = x + o;

        layer_norm_rows(L.x_mid, w.ln2_gamma, w.ln2_beta, L.xhat2, L.rstd2, L.h2);
        linear_rows(L.h2, w.w1, L.f1);
        Matrix a1(n, f);
        for (std::size_t i = 0; i < L.f1.rows(); ++i) {
            for (std::size_t j = 0; j < f; ++j) {
                L.f1(i, j) += w.b1[j];
                a1(i, j) = std::max(0.0, L.f1(i, j));
            }
        }
        Matrix f2;
        linear_rows(a1, w.w2, f2);
        x = L.x_mid;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < d; ++k) x(i, k) += f2(i, k) + w.b2[k];
        }
    }

    Matrix first(1, d);
    for (std::size_t k = 0; k < d; ++k) first(0, k) = x(0, k);
    Matrix z;
    layer_norm_rows(first, bb.final_gamma(), bb.final_beta(), impl->xhat_final, impl->rstd_final, z);
    ForwardRecord rec;
    for (std::size_t cls = 0; cls < 2; ++cls) {
        double s = bb.head_bias()[cls];
        for (std::size_t k = 0; k < d; ++k) s += bb.head()(cls, k) * z(0, k);
        rec.logits_[cls] = s;
    }
    if (!std::isfinite(rec.logits_[0]) || !std::isfinite(rec.logits_[1])) {
        throw ComputationError("forward pass produced non-finite logits");
    }
    rec.impl_ = std::move(impl);
    return rec;
}

void LoraModel::backward(const ForwardRecord& tape, const Logits& dlogits, std::span<double> grad,
                         LayerTrace* trace) const {
    if (!tape.impl_) throw ValidationError("backward called with an empty forward record");
    if (grad.size() != parameter_count()) throw ValidationError("gradient buffer has the wrong length");
    const auto& impl = *tape.impl_;
    const auto& bb = *backbone_;
    const auto& c = bb.config();
    const std::size_t d = c.embed_dim, heads = c.num_heads, dh = d / heads, n = impl.positions, f = c.ffn_dim();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<std::size_t> offsets;
    {
        std::size_t off = 0;
        for (const auto& ad : adapters_) {
            offsets.push_back(off);
            off += ad.parameter_count();
        }
    }
    if (trace != nullptr) trace->adapters.assign(adapters_.size(), AdapterTrace{});

    Matrix dz(1, d);
    for (std::size_t k = 0; k < d; ++k) dz(0, k) = dlogits[0] * bb.head()(0, k) + dlogits[1] * bb.head()(1, k);
    Matrix dfirst(1, d);
    layer_norm_rows_backward(dz, impl.xhat_final, impl.rstd_final, bb.final_gamma(), dfirst);
    Matrix dx(n, d);
    for (std::size_t k = 0; k < d; ++k) dx(0, k) = dfirst(0, k);

    for (std::size_t li = c.num_layers; li-- > 0;) {
        const auto& w = bb.layer(li);
        const auto& L = impl.layers[li];
        const std::size_t base = li * kProjectionsPerLayer;

        // Feed-forward block.
        Matrix da1(n, f);
        linear_rows_backward(dx, w.w2, da1);
        for (std::size_t i = 0; i < da1.size(); ++i) {
            if (L.f1.data()[i] <= 0.0) da1.data()[i] = 0.0;
        }
        Matrix dh2(n, d);
        linear_rows_backward(da1, w.w1, dh2);
        Matrix dmid = dx;
        layer_norm_rows_backward(dh2, L.xhat2, L.rstd2, w.ln2_gamma, dmid);

        // Output projection.
        Matrix dctx(n, d);
        {
            const std::size_t id = base + 2;
            const auto& ad = adapters_[id];
            double* gb = grad.data() + offsets[id];
            adapted_projection_backward(dmid, w.wo, ad, L.adapters[2], gb, gb + ad.b.size(), dctx,
                                        trace ? &trace->adapters[id] : nullptr);
        }

        // Attention.
        Matrix dq(n, d), dk(n, d), dv(n, d);
        std::vector<double> dp(n);
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < n; ++i) {
                const double* p = &L.probs[(h * n + i) * n];
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < dh; ++k) {
                        s += dctx(i, off + k) * L.v(j, off + k);
                        dv(j, off + k) += p[j] * dctx(i, off + k);
                    }
                    dp[j] = s;
                    dot += p[j] * s;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double ds = p[j] * (dp[j] - dot) * inv_sqrt_dh;
                    if (ds == 0.0) continue;
                    for (std::size_t k = 0; k < dh; ++k) {
                        dq(i, off + k) += ds * L.k(j, off + k);
                        dk(j, off + k) += ds * L.q(i, off + k);
                    }
                }
            }
        }

        Matrix dh1(n, d);
        {
            const std::size_t id = base;
            const auto& ad = adapters_[id];
            double* gb = grad.data() + offsets[id];
            adapted_projection_backward(dq, w.wq, ad, L.adapters[0], gb, gb + ad.b.size(), dh1,
                                        trace ? &trace->adapters[id] : nullptr);
        }
        linear_rows_backward(dk, w.wk, dh1);
        {
            const std::size_t id = base + 1;
            const auto& ad = adapters_[id];
            double* gb = grad.data() + offsets[id];
            adapted_projection_backward(dv, w.wv, ad, L.adapters[1], gb, gb + ad.b.size(), dh1,
                                        trace ? &trace->adapters[id] : nullptr);
        }
        dx = std::move(dmid);
        layer_norm_rows_backward(dh1, L.xhat1, L.rstd1, w.ln1_gamma, dx);
    }
}

Logits model_forward(const LoraModel& model, std::span<const TokenId> tokens, bool train_mode, RandomStream* stream,
                     LayerTrace* trace) {
    ForwardRecord rec = model.record(tokens, train_mode, stream);
    if (trace != nullptr && trace->enabled) {
        // Activations only; gradients arrive with LoraModel::backward.
        std::vector<double> scratch(model.parameter_count(), 0.0);
        LayerTrace full;
        model.backward(rec, {0.0, 0.0}, scratch, &full);
        trace->adapters.assign(model.adapters().size(), AdapterTrace{});
        for (std::size_t i = 0; i < full.adapters.size(); ++i) {
            trace->adapters[i].input = std::move(full.adapters[i].input);
            trace->adapters[i].hidden = std::move(full.adapters[i].hidden);
        }
    }
    return rec.logits();
}

// ---------------------------------------------------------------------------
// LinearLoraModel

LinearLoraModel::LinearLoraModel(Matrix readout, Matrix w0, LoraAdapter adapter)
    : readout_(std::move(readout)), w0_(std::move(w0)), adapter_(std::move(adapter)) {
    if (readout_.rows() != 2) throw ValidationError("readout must have 2 rows");
    if (readout_.cols() != w0_.rows()) throw ValidationError("readout does not match host layer output width");
    if (adapter_.d1() != w0_.rows() || adapter_.d2() != w0_.cols()) {
        throw ValidationError("adapter does not match host layer dimensions");
    }
}

std::vector<BlockLayout> LinearLoraModel::block_layouts() const {
    return {{0, adapter_.b.rows(), adapter_.b.cols()}, {adapter_.b.size(), adapter_.a.rows(), adapter_.a.cols()}};
}

std::vector<double> LinearLoraModel::flatten_params() const {
    std::vector<double> out(adapter_.b.values().begin(), adapter_.b.values().end());
    out.insert(out.end(), adapter_.a.values().begin(), adapter_.a.values().end());
    return out;
}

void LinearLoraModel::unflatten_params(std::span<const double> params) {
    if (params.size() != parameter_count()) throw ValidationError("parameter vector has the wrong length");
    std::copy_n(params.begin(), adapter_.b.size(), adapter_.b.data());
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(adapter_.b.size()), adapter_.a.size(), adapter_.a.data());
}

LinearLoraModel::Tape LinearLoraModel::record(Input x) const {
    if (x.size() != w0_.cols()) throw ValidationError("input length does not match host layer");
    Tape tape;
    tape.input_.assign(x.begin(), x.end());
    tape.hidden_ = matvec(adapter_.a, x);
    std::vector<double> h = matvec(w0_, x);
    const std::vector<double> delta = matvec(adapter_.b, tape.hidden_);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += adapter_.scale() * delta[i];
    const std::vector<double> z = matvec(readout_, h);
    tape.logits_ = {z[0], z[1]};
    return tape;
}

void LinearLoraModel::backward(const Tape& tape, const Logits& dlogits, std::span<double> grad,
                               LayerTrace* trace) const {
    if (grad.size() != parameter_count()) throw ValidationError("gradient buffer has the wrong length");
    const std::size_t d1 = adapter_.d1(), d2 = adapter_.d2(), r = adapter_.rank;
    std::vector<double> grad_out(d1);
    for (std::size_t o = 0; o < d1; ++o) {
        grad_out[o] = adapter_.scale() * (dlogits[0] * readout_(0, o) + dlogits[1] * readout_(1, o));
    }
    std::vector<double> grad_hidden(r, 0.0);
    for (std::size_t o = 0; o < d1; ++o) {
        for (std::size_t k = 0; k < r; ++k) {
            grad[o * r + k] += grad_out[o] * tape.hidden_[k];
            grad_hidden[k] += grad_out[o] * adapter_.b(o, k);
        }
    }
    double* ga = grad.data() + adapter_.b.size();
    for (std::size_t k = 0; k < r; ++k) {
        for (std::size_t j = 0; j < d2; ++j) ga[k * d2 + j] += grad_hidden[k] * tape.input_[j];
    }
    if (trace != nullptr) {
        AdapterTrace t;
        t.input = Matrix(1, d2, tape.input_);
        t.hidden = Matrix(1, r, tape.hidden_);
        t.grad_hidden = Matrix(1, r, grad_hidden);
        t.grad_output = Matrix(1, d1, grad_out);
        trace->adapters.assign(1, std::move(t));
    }
}

}  // namespace bayeslora
