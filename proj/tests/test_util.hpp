// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bayeslora/model.hpp"

namespace bayeslora::testing {

inline std::shared_ptr<const FrozenBackbone> small_backbone(std::uint64_t seed = 42) {
    BackboneConfig c;
    c.vocab_size = 16;
    c.embed_dim = 8;
    c.num_heads = 2;
    c.num_layers = 2;
    c.max_seq_len = 12;
    return init_backbone(c, seed);
}

/// Non-pad tokens (ids ≥ 1) of the given length.
inline std::vector<TokenId> random_tokens(const BackboneConfig& c, std::size_t len, std::uint64_t seed) {
    RandomStream s(seed);
    std::vector<TokenId> t(len);
    for (auto& id : t) id = static_cast<TokenId>(1 + s.below(c.vocab_size - 1));
    return t;
}

/// Copy of `m` with every B filled with N(0, 0.25) so all gradients are non-trivial.
inline LoraModel randomized(LoraModel m, std::uint64_t seed) {
    RandomStream s(seed);
    for (auto& ad : m.adapters())
        for (double& x : ad.b.values()) x = 0.5 * s.normal();
    return m;
}

inline LinearLoraModel toy_linear_model(std::size_t d1, std::size_t d2, std::size_t rank, std::uint64_t seed) {
    RandomStream s(seed);
    Matrix readout(2, d1), w0(d1, d2);
    for (double& x : readout.values()) x = s.normal();
    for (double& x : w0.values()) x = s.normal() / std::sqrt(static_cast<double>(d2));
    LoraAdapter ad = init_adapter(d1, d2, rank, 2.0 * static_cast<double>(rank), derive_seed(seed, 1), 0.0);
    for (double& x : ad.b.values()) x = 0.5 * s.normal();
    return LinearLoraModel(std::move(readout), std::move(w0), std::move(ad));
}

template <class F>
double central_difference(F&& f, const std::vector<double>& theta, std::size_t idx, double step) {
    std::vector<double> p = theta;
    p[idx] = theta[idx] + step;
    const double up = f(p);
    p[idx] = theta[idx] - step;
    const double down = f(p);
    return (up - down) / (2.0 * step);
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace bayeslora::testing
