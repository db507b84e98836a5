// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "bayeslora/error.hpp"
#include "bayeslora/predict.hpp"
#include "test_util.hpp"

using namespace bayeslora;
using namespace bayeslora::testing;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
    return e;
}

std::vector<std::vector<double>> random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
    RandomStream s(seed);
    std::vector<std::vector<double>> xs(n, std::vector<double>(d));
    for (auto& x : xs)
        for (double& v : x) v = s.normal();
    return xs;
}

Matrix diag2(double a, double b) { return Matrix(2, 2, {a, 0.0, 0.0, b}); }

}  // namespace

TEST_CASE("logit Jacobian matches finite differences") {
    const auto bb = small_backbone();
    const LoraModel m = randomized(LoraModel(bb, AdapterSpec{2, 8.0, 0.05}, 4), 21);
    const auto tokens = random_tokens(bb->config(), 7, 33);
    const Matrix j = jacobian_logits(m, tokens);
    CHECK(j.rows() == m.parameter_count());
    CHECK(j.cols() == 2);
    const auto theta = m.flatten_params();
    RandomStream pick(5);
    for (int k = 0; k < 20; ++k) {
        const std::size_t idx = pick.below(theta.size());
        for (std::size_t c = 0; c < 2; ++c) {
            auto f = [&](const std::vector<double>& p) {
                LoraModel q = m;
                q.unflatten_params(p);
                return model_forward(q, tokens)[c];
            };
            const double fd = central_difference(f, theta, idx, 1e-5);
            CHECK(relative_error(j(idx, c), fd) <= 1e-3);
        }
    }
}

TEST_CASE("constant logit gives a zero Jacobian column") {
    LinearLoraModel m = toy_linear_model(4, 4, 2, 3);
    Matrix r = m.readout();
    for (std::size_t i = 0; i < r.cols(); ++i) r(0, i) = 0.0;
    const LinearLoraModel z(r, m.w0(), m.adapter());
    const std::vector<double> x{1.0, -0.5, 0.25, 2.0};
    const Matrix j = jacobian_logits(z, x);
    for (std::size_t i = 0; i < j.rows(); ++i) CHECK(j(i, 0) == 0.0);
}

TEST_CASE("predictive covariance against closed forms and a dense oracle") {
    const LinearLoraModel m = toy_linear_model(5, 4, 2, 7);
    const auto xs = random_inputs(6, 4, 8);
    const std::vector<double> x{0.3, -1.0, 0.5, 0.8};
    const Matrix j = jacobian_logits(m, x);
    const Logits mean = m.record(x).logits();

    const LaplacePosterior prior(m.flatten_params(), {}, 0.1);
    const auto d0 = predictive_distribution(mean, j, prior);
    const Matrix expected = 10.0 * matmul(j.transposed(), j);
    CHECK(max_abs(d0.covariance - expected) < 1e-10 * std::max(1.0, max_abs(expected)));

    const LaplacePosterior post(m.flatten_params(), accumulate_kfac(m, xs), 0.1);
    const auto d = predictive_distribution(mean, j, post);
    const Eigen::MatrixXd je = to_eigen(j);
    const Eigen::MatrixXd oracle = je.transpose() * to_eigen(post.dense_precision()).inverse() * je;
    CHECK((to_eigen(d.covariance) - oracle).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
    CHECK(max_abs(matmul_transposed(d.chol, d.chol) - (d.covariance + d.jitter * Matrix::identity(2))) < 1e-9);
    CHECK(symmetric_eigen(d.covariance).values.front() >= -1e-8);

    // Scaling H⁻¹ by c scales Λ by c: λ → λ/c on the prior-only posterior.
    const LaplacePosterior scaled(m.flatten_params(), {}, 0.1 / 3.0);
    const auto d3 = predictive_distribution(mean, j, scaled);
    CHECK(max_abs(d3.covariance - 3.0 * d0.covariance) < 1e-10 * std::max(1.0, max_abs(d3.covariance)));

    CHECK_THROWS_AS(predictive_distribution(mean, Matrix(3, 2), post), ValidationError);
}

TEST_CASE("zero Jacobian gives a degenerate predictive") {
    const LaplacePosterior prior(std::vector<double>(4, 0.0), {}, 0.1);
    const auto d = predictive_distribution({0.5, -0.5}, Matrix(4, 2), prior);
    CHECK(max_abs(d.covariance) == 0.0);
    CHECK(d.jitter == 0.0);
    RandomStream s(1);
    for (const auto& x : sample_logits(d, 20, s)) {
        CHECK(x[0] == 0.5);
        CHECK(x[1] == -0.5);
    }
    const auto samples = sample_logits(d, 5, s);
    const Logits bma = bma_probability(samples);
    CHECK(bma[0] == doctest::Approx(softmax({0.5, -0.5})[0]).epsilon(1e-15));
}

TEST_CASE("jitter ladder") {
    const auto d = gaussian_predictive({0, 0}, Matrix(2, 2, {1.0, 1.0, 1.0, 1.0}));
    CHECK(d.jitter >= kJitterStart);
    CHECK(d.jitter <= kJitterMax);
    CHECK_THROWS_AS(gaussian_predictive({0, 0}, diag2(-1.0, 1.0)), ComputationError);
    CHECK(gaussian_predictive({0, 0}, diag2(1.0, 4.0)).jitter == 0.0);
}

TEST_CASE("sampled covariance converges") {
    const auto d = gaussian_predictive({1.0, -2.0}, diag2(1.0, 4.0));
    RandomStream s(99);
    const auto samples = sample_logits(d, 100000, s);
    double m0 = 0, m1 = 0;
    for (const auto& x : samples) {
        m0 += x[0];
        m1 += x[1];
    }
    m0 /= samples.size();
    m1 /= samples.size();
    double c00 = 0, c01 = 0, c11 = 0;
    for (const auto& x : samples) {
        c00 += (x[0] - m0) * (x[0] - m0);
        c01 += (x[0] - m0) * (x[1] - m1);
        c11 += (x[1] - m1) * (x[1] - m1);
    }
    const double n = static_cast<double>(samples.size() - 1);
    CHECK(std::abs(c00 / n - 1.0) <= 0.05);
    CHECK(std::abs(c01 / n) <= 0.05);
    CHECK(std::abs(c11 / n - 4.0) <= 0.05);

    RandomStream a(7), b(7);
    const auto sa = sample_logits(d, 50, a);
    const auto sb = sample_logits(d, 50, b);
    CHECK(sa == sb);
    CHECK_THROWS_AS(sample_logits(d, 0, a), ValidationError);
}

TEST_CASE("BMA fixtures") {
    const std::vector<Logits> one{{0.3, 1.1}};
    CHECK(bma_probability(one) == softmax(one[0]));
    const std::vector<Logits> sym{{2.0, -2.0}, {-2.0, 2.0}};
    const Logits p = bma_probability(sym);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));
    const std::vector<Logits> three{{0.0, 1.0}, {2.0, 0.0}, {-1.0, -3.0}};
    double expect1 = 0.0;
    for (const auto& z : three) expect1 += 1.0 / (1.0 + std::exp(z[0] - z[1]));
    expect1 /= 3.0;
    const Logits q = bma_probability(three);
    CHECK(q[1] == doctest::Approx(expect1).epsilon(1e-14));
    CHECK(std::abs(q[0] + q[1] - 1.0) <= 1e-12);
    CHECK_THROWS_AS(bma_probability(std::vector<Logits>{}), ValidationError);
}

TEST_CASE("BMA estimates agree across sample counts") {
    const auto d = gaussian_predictive({0.7, -0.4}, Matrix(2, 2, {2.0, 0.5, 0.5, 1.5}));
    RandomStream a(11), b(12);
    const Logits p4 = bma_probability(sample_logits(d, 10000, a));
    const Logits p5 = bma_probability(sample_logits(d, 100000, b));
    CHECK(std::abs(p4[1] - p5[1]) <= 0.01);
}

TEST_CASE("tiny covariance keeps the MAP class") {
    const auto bb = small_backbone();
    const LoraModel m = randomized(LoraModel(bb, AdapterSpec{2, 8.0, 0.05}, 4), 22);
    const LaplacePosterior post(m.flatten_params(), {}, 1e12);
    for (int i = 0; i < 5; ++i) {
        const auto tokens = random_tokens(bb->config(), 5, 300 + i);
        const BayesPrediction p = bayes_predict(m, post, tokens, 50, example_seed(9, i));
        CHECK((p.probability[1] > p.probability[0]) == (p.map_probability[1] > p.map_probability[0]));
        const BayesPrediction again = bayes_predict(m, post, tokens, 50, example_seed(9, i));
        CHECK(again.probability == p.probability);
    }
}

TEST_CASE("prediction dump round trip") {
    const std::vector<PredictionRecord> recs{{"0", 1, 0.75, 0.7, std::nullopt}, {"1", 0, 0.1, std::nullopt, 0.2}};
    const std::string text = predictions_tsv(recs);
    CHECK(text == "id\tlabel\tp_map\tp_bayes\tp_ens\n0\t1\t0.75\t0.7\tNA\n1\t0\t0.1\tNA\t0.2\n");
    const auto back = parse_predictions_tsv(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].p_bayes == 0.7);
    CHECK(!back[0].p_ens);
    CHECK(back[1].p_ens == 0.2);
    CHECK_THROWS_AS(parse_predictions_tsv("id\tlabel\tp_map\tp_bayes\tp_ens\n0\t2\t0.5\tNA\tNA\n"), ParseError);
}
