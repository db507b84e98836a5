// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "bayeslora/error.hpp"
#include "bayeslora/laplace.hpp"
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

Matrix block_of(const Matrix& full, const BlockLayout& b) {
    Matrix out(b.size(), b.size());
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out(i, j) = full(b.offset + i, b.offset + j);
    return out;
}

double min_eigenvalue(const Matrix& m) { return symmetric_eigen(symmetrized(m)).values.front(); }

}  // namespace

TEST_CASE("single-example K-FAC blocks equal the brute-force Fisher blocks") {
    const LinearLoraModel m = toy_linear_model(4, 4, 2, 11);
    const auto xs = random_inputs(1, 4, 5);
    const auto factors = accumulate_kfac(m, xs);
    const Matrix full = fisher_bruteforce(m, xs);
    REQUIRE(factors.size() == 2);
    for (const auto& f : factors) {
        CHECK(f.sample_count == 1);
        const Matrix kfac = f.fisher_block();
        const Matrix ref = block_of(full, f.layout);
        CHECK(max_abs(kfac - ref) < 1e-9);
        CHECK(frobenius_norm(ref) > 1e-6);
    }
}

TEST_CASE("duplicating the data doubles the factor sums") {
    const LinearLoraModel m = toy_linear_model(4, 4, 2, 12);
    const auto xs = random_inputs(3, 4, 6);
    auto doubled = xs;
    doubled.insert(doubled.end(), xs.begin(), xs.end());
    const auto f1 = accumulate_kfac(m, xs);
    const auto f2 = accumulate_kfac(m, doubled);
    for (std::size_t b = 0; b < f1.size(); ++b) {
        CHECK(f2[b].sample_count == 2 * f1[b].sample_count);
        CHECK(max_abs(f2[b].act.to_dense() - 2.0 * f1[b].act.to_dense()) < 1e-12);
        CHECK(max_abs(f2[b].grad.to_dense() - 2.0 * f1[b].grad.to_dense()) < 1e-12);
    }
}

TEST_CASE("zero inputs give zero activation factors") {
    const LinearLoraModel m = toy_linear_model(4, 4, 2, 13);
    const std::vector<std::vector<double>> xs(2, std::vector<double>(4, 0.0));
    const auto f = accumulate_kfac(m, xs);
    for (const auto& k : f) CHECK(max_abs(k.act.to_dense()) == 0.0);
    CHECK(max_abs(f[0].fisher_block()) == 0.0);
}

TEST_CASE("transformer factors are symmetric and positive semi-definite") {
    const auto bb = small_backbone();
    const LoraModel m = randomized(LoraModel(bb, AdapterSpec{2, 8.0, 0.05}, 3), 8);
    std::vector<LabeledSequence> data;
    for (int i = 0; i < 5; ++i) data.push_back({random_tokens(bb->config(), 4 + i, 90 + i), i % 2});
    const auto factors = accumulate_kfac(m, data);
    CHECK(factors.size() == m.block_layouts().size());
    std::size_t positions = 0;
    for (const auto& ex : data) positions += ex.tokens.size();
    for (const auto& f : factors) {
        CHECK(f.sample_count == positions);
        for (const Matrix& s : {f.act.to_dense(), f.grad.to_dense()}) {
            CHECK(is_symmetric(s, 1e-12));
            CHECK(min_eigenvalue(s) > -1e-9);
        }
    }
    CHECK_THROWS_AS(accumulate_kfac(m, std::span<const LabeledSequence>{}), ValidationError);
}

TEST_CASE("posterior inverse matches a dense oracle") {
    const LinearLoraModel m = toy_linear_model(5, 4, 2, 14);
    const auto xs = random_inputs(6, 4, 7);
    const double lambda = 0.1;
    const LaplacePosterior post(m.flatten_params(), accumulate_kfac(m, xs), lambda);
    const Eigen::MatrixXd h = to_eigen(post.dense_precision());
    const Eigen::MatrixXd inv = h.inverse();
    const Matrix cov = post.dense_covariance();
    CHECK((to_eigen(cov) - inv).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, inv.cwiseAbs().maxCoeff()));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    CHECK(es.eigenvalues().minCoeff() >= lambda - 1e-10);

    RandomStream s(3);
    std::vector<double> v(post.dimension());
    for (double& x : v) x = s.normal();
    const auto hv = post.apply_precision(v);
    const auto back = post.apply_inverse(hv);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == doctest::Approx(v[i]).epsilon(1e-9));
}

TEST_CASE("prior-only posterior is isotropic") {
    const LaplacePosterior post(std::vector<double>(6, 0.0), {}, 0.1);
    const Matrix cov = post.dense_covariance();
    for (std::size_t i = 0; i < 6; ++i) CHECK(cov(i, i) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(max_abs(cov - 10.0 * Matrix::identity(6)) < 1e-14);
    CHECK_THROWS_AS(LaplacePosterior(std::vector<double>(2, 0.0), {}, 0.0), ValidationError);
}

TEST_CASE("posterior rejects non-PSD or non-covering factors") {
    const LinearLoraModel m = toy_linear_model(4, 4, 2, 15);
    const auto xs = random_inputs(2, 4, 8);
    auto factors = accumulate_kfac(m, xs);
    {
        auto bad = factors;
        Matrix g = bad[0].grad.to_dense();
        g(0, 0) = -1.0;
        bad[0].grad = FactorSide::dense(g);
        CHECK_THROWS_AS(LaplacePosterior(m.flatten_params(), bad, 0.1), ComputationError);
    }
    {
        auto partial = factors;
        partial.pop_back();
        CHECK_THROWS_AS(LaplacePosterior(m.flatten_params(), partial, 0.1), ValidationError);
    }
}

TEST_CASE("compressed sides stay within the truncation bound") {
    // Wide activations force the low-rank path; compare against the uncompressed sum.
    const std::size_t d2 = 20;
    const LinearLoraModel m = toy_linear_model(4, d2, 2, 16);
    const auto xs = random_inputs(40, d2, 9);
    KfacOptions dense_opt;
    KfacOptions low_opt;
    low_opt.compression_threshold = 8;
    low_opt.compression_budget = 6;
    const auto exact = accumulate_kfac(m, xs, dense_opt);
    const auto approx = accumulate_kfac(m, xs, low_opt);
    const std::size_t a_block = 1;  // A: in_dim = d2
    REQUIRE(approx[a_block].act.compressed());
    CHECK(approx[a_block].act.stored().cols() == 6);
    const Matrix ref = exact[a_block].act.to_dense();
    const auto eig = symmetric_eigen(ref);
    const double sigma_next = eig.values[eig.values.size() - 1 - 6];
    const double err = max_abs(approx[a_block].act.to_dense() - ref);
    CHECK(err <= sigma_next * static_cast<double>(d2) + 1e-9);

    // The compressed posterior still inverts its own precision.
    const LaplacePosterior post(m.flatten_params(), approx, 0.1);
    std::vector<double> v(post.dimension(), 1.0);
    const auto back = post.apply_inverse(post.apply_precision(v));
    for (double x : back) CHECK(x == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("factors scale linearly with the data weight") {
    const LinearLoraModel m = toy_linear_model(3, 3, 1, 17);
    auto xs = random_inputs(4, 3, 10);
    const auto f1 = accumulate_kfac(m, xs);
    for (auto& x : xs)
        for (double& v : x) v *= 2.0;
    // Activation factors are quadratic in the inputs.
    const auto f2 = accumulate_kfac(m, xs);
    CHECK(max_abs(f2[1].act.to_dense() - 4.0 * f1[1].act.to_dense()) < 1e-10);
}

TEST_CASE("dense Fisher is guarded") {
    const LinearLoraModel m = toy_linear_model(60, 60, 20, 18);
    const auto xs = random_inputs(1, 60, 11);
    CHECK_THROWS_AS(fisher_bruteforce(m, xs), ValidationError);
}
