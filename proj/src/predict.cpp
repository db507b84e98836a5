// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/predict.hpp"

#include <cmath>

#include "bayeslora/error.hpp"
#include "bayeslora/format.hpp"

namespace bayeslora {

namespace {

template <class Model>
Matrix jacobian_impl(const Model& model, typename Model::Input input) {
    const auto tape = model.record(input);
    const std::size_t n = model.parameter_count();
    Matrix j(n, 2);
    std::vector<double> g(n);
    for (std::size_t c = 0; c < 2; ++c) {
        std::fill(g.begin(), g.end(), 0.0);
        Logits e{0.0, 0.0};
        e[c] = 1.0;
        model.backward(tape, e, g);
        for (std::size_t i = 0; i < n; ++i) j(i, c) = g[i];
    }
    return j;
}

const char* kDumpHeader = "id\tlabel\tp_map\tp_bayes\tp_ens";

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::optional<double> parse_optional(std::string_view field) {
    if (field == "NA") return std::nullopt;
    return parse_double(field);
}

}  // namespace

Matrix jacobian_logits(const LoraModel& model, std::span<const TokenId> tokens) {
    model.validate_input(tokens);
    return jacobian_impl(model, tokens);
}

Matrix jacobian_logits(const LinearLoraModel& model, std::span<const double> x) { return jacobian_impl(model, x); }

PredictiveDistribution gaussian_predictive(const Logits& mean, const Matrix& covariance) {
    if (covariance.rows() != 2 || covariance.cols() != 2) throw ValidationError("predictive covariance must be 2x2");
    if (!std::isfinite(mean[0]) || !std::isfinite(mean[1])) throw ComputationError("predictive mean is not finite");
    PredictiveDistribution d;
    d.mean = mean;
    d.covariance = symmetrized(covariance);
    if (max_abs(d.covariance) == 0.0) {
        d.chol = Matrix(2, 2);
        return d;
    }
    try {
        d.chol = cholesky(d.covariance);
        return d;
    } catch (const NotPositiveDefiniteError&) {
    }
    for (double jitter = kJitterStart; jitter <= kJitterMax * (1.0 + 1e-9); jitter *= 10.0) {
        try {
            d.chol = cholesky(d.covariance + jitter * Matrix::identity(2));
            d.jitter = jitter;
            return d;
        } catch (const NotPositiveDefiniteError&) {
        }
    }
    throw ComputationError("predictive covariance is not positive definite even with jitter " +
                           format_double(kJitterMax));
}

PredictiveDistribution predictive_distribution(const Logits& mean, const Matrix& jacobian,
                                               const LaplacePosterior& posterior) {
    if (jacobian.rows() != posterior.dimension() || jacobian.cols() != 2) {
        throw ValidationError("Jacobian shape does not match posterior dimension " +
                              std::to_string(posterior.dimension()));
    }
    const std::size_t n = jacobian.rows();
    std::vector<double> col(n);
    Matrix lambda(2, 2);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < n; ++i) col[i] = jacobian(i, c);
        const std::vector<double> solved = posterior.apply_inverse(col);
        for (std::size_t r = 0; r < 2; ++r) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += jacobian(i, r) * solved[i];
            lambda(r, c) = s;
        }
    }
    return gaussian_predictive(mean, lambda);
}

std::vector<Logits> sample_logits(const PredictiveDistribution& dist, std::size_t count, RandomStream& stream) {
    if (count == 0) throw ValidationError("sample count must be at least 1");
    std::vector<Logits> out(count);
    const Matrix& l = dist.chol;
    for (auto& s : out) {
        const double z0 = stream.normal();
        const double z1 = stream.normal();
        s[0] = dist.mean[0] + l(0, 0) * z0;
        s[1] = dist.mean[1] + l(1, 0) * z0 + l(1, 1) * z1;
    }
    return out;
}

Logits bma_probability(std::span<const Logits> samples) {
    if (samples.empty()) throw ValidationError("BMA needs at least one sample");
    Logits sum{0.0, 0.0};
    for (const auto& s : samples) {
        const Logits p = softmax(s);
        sum[0] += p[0];
        sum[1] += p[1];
    }
    const double n = static_cast<double>(samples.size());
    return {sum[0] / n, sum[1] / n};
}

BayesPrediction bayes_predict(const LoraModel& map_model, const LaplacePosterior& posterior,
                              std::span<const TokenId> tokens, std::size_t samples, std::uint64_t seed) {
    const Matrix j = jacobian_logits(map_model, tokens);
    const Logits mean = model_forward(map_model, tokens);
    const PredictiveDistribution dist = predictive_distribution(mean, j, posterior);
    RandomStream stream(seed);
    const auto draws = sample_logits(dist, samples, stream);
    return {softmax(mean), bma_probability(draws), dist.jitter};
}

std::string predictions_tsv(std::span<const PredictionRecord> records) {
    std::string out = kDumpHeader;
    out += '\n';
    for (const auto& r : records) {
        out += r.id + '\t' + std::to_string(r.label) + '\t' + format_double(r.p_map) + '\t' +
               optional_field(r.p_bayes) + '\t' + optional_field(r.p_ens) + '\n';
    }
    return out;
}

std::vector<PredictionRecord> parse_predictions_tsv(std::string_view text) {
    std::vector<PredictionRecord> out;
    std::size_t line_no = 0;
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != kDumpHeader) throw ParseError("unexpected prediction dump header", line_no);
            continue;
        }
        const auto f = split(line, '\t');
        if (f.size() != 5) throw ParseError("prediction row needs 5 fields, got " + std::to_string(f.size()), line_no);
        try {
            PredictionRecord r;
            r.id = std::string(f[0]);
            if (f[1] != "0" && f[1] != "1") throw ValidationError("label must be 0 or 1");
            r.label = f[1] == "1" ? 1 : 0;
            r.p_map = parse_double(f[2]);
            r.p_bayes = parse_optional(f[3]);
            r.p_ens = parse_optional(f[4]);
            out.push_back(std::move(r));
        } catch (const ParseError&) {
            throw;
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return out;
}

}  // namespace bayeslora
