// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate. `acceptance <n>... [--work DIR]` runs the listed criteria (or `all`)
// and prints one PASS/FAIL line per criterion.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bayeslora/error.hpp"
#include "bayeslora/format.hpp"
#include "bayeslora/harness.hpp"
#include "test_util.hpp"

using namespace bayeslora;
using namespace bayeslora::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        notes.push_back((ok ? "" : "FAILED ") + what);
    }
};

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

fs::path fresh_dir(const fs::path& root, const std::string& name) {
    const fs::path p = root / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

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

Prediction pred(int label, double p1) { return {label, {1.0 - p1, p1}}; }

/// Every regular file under `root`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path().string());
    return out;
}

// --- 1 ---------------------------------------------------------------------

Outcome gradient_correctness(const fs::path&) {
    Outcome o;
    const auto bb = init_backbone(BackboneConfig{}, 7);
    const LoraModel m = randomized(LoraModel(bb, AdapterSpec{8, 32.0, 0.05}, 3), 11);
    const auto theta = m.flatten_params();
    const double step = 1e-4;
    double worst_grad = 0.0, worst_jac = 0.0;
    std::size_t checked = 0;
    for (std::uint64_t input = 0; input < 3; ++input) {
        const LabeledSequence ex{random_tokens(bb->config(), 12 + 5 * input, 100 + input), static_cast<int>(input % 2)};
        const std::vector<LabeledSequence> batch{ex};
        const auto g = batch_gradient(m, batch).gradient;
        const Matrix j = jacobian_logits(m, ex.tokens);
        RandomStream pick(derive_seed(77, input));
        for (int k = 0; k < 20; ++k) {
            const std::size_t idx = pick.below(theta.size());
            auto probe = [&](const std::vector<double>& p) {
                LoraModel q = m;
                q.unflatten_params(p);
                return model_forward(q, ex.tokens);
            };
            const double fd_loss =
                central_difference([&](const auto& p) { return cross_entropy(probe(p), ex.label); }, theta, idx, step);
            worst_grad = std::max(worst_grad, relative_error(g[idx], fd_loss));
            for (std::size_t c = 0; c < 2; ++c) {
                const double fd = central_difference([&](const auto& p) { return probe(p)[c]; }, theta, idx, step);
                worst_jac = std::max(worst_jac, relative_error(j(idx, c), fd));
            }
            ++checked;
        }
    }
    o.require(worst_grad <= 1e-3, "max gradient rel err " + num(worst_grad) + " <= 1e-3");
    o.require(worst_jac <= 1e-3, "max Jacobian rel err " + num(worst_jac) + " <= 1e-3");
    o.notes.push_back(std::to_string(checked) + " coordinates, step 1e-4, rel err |a-b|/max(|a|,|b|,1e-6)");
    return o;
}

// --- 2 ---------------------------------------------------------------------

Outcome fisher_oracle(const fs::path&) {
    Outcome o;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const LinearLoraModel m = toy_linear_model(6, 5, 2, seed);
        const auto xs = random_inputs(1, 5, 100 + seed);
        const auto factors = accumulate_kfac(m, xs);
        const Matrix full = fisher_bruteforce(m, xs);
        for (const auto& f : factors) {
            const Matrix block = f.fisher_block();
            for (std::size_t i = 0; i < f.layout.size(); ++i)
                for (std::size_t j = 0; j < f.layout.size(); ++j)
                    worst = std::max(worst, std::abs(block(i, j) - full(f.layout.offset + i, f.layout.offset + j)));
        }
    }
    o.require(worst <= 1e-9, "max |K-FAC - brute force| over B and A blocks " + num(worst) + " <= 1e-9");
    return o;
}

// --- 3 ---------------------------------------------------------------------

Outcome posterior_algebra(const fs::path&) {
    Outcome o;
    const double lambda = 0.1;
    const LinearLoraModel m = toy_linear_model(8, 6, 3, 21);
    const auto xs = random_inputs(10, 6, 22);
    const auto factors = accumulate_kfac(m, xs);
    const LaplacePosterior post(m.flatten_params(), factors, lambda);
    const auto n = static_cast<Eigen::Index>(post.dimension());
    o.require(post.dimension() <= 200, "toy adapter has " + std::to_string(post.dimension()) + " <= 200 parameters");

    // Independent dense H = blockdiag(G ⊗ A / count) + λI built with Eigen.
    Eigen::MatrixXd h = lambda * Eigen::MatrixXd::Identity(n, n);
    for (const auto& f : factors) {
        const Eigen::MatrixXd g = to_eigen(f.grad.to_dense());
        const Eigen::MatrixXd a = to_eigen(f.act.to_dense()) / static_cast<double>(f.sample_count);
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cols(); ++j)
                h.block(static_cast<Eigen::Index>(f.layout.offset) + i * a.rows(),
                        static_cast<Eigen::Index>(f.layout.offset) + j * a.cols(), a.rows(), a.cols()) += g(i, j) * a;
    }
    const Eigen::MatrixXd inv = h.inverse();
    const double scale = std::max(1.0, inv.cwiseAbs().maxCoeff());
    const double err = (to_eigen(post.dense_covariance()) - inv).cwiseAbs().maxCoeff() / scale;
    o.require(err <= 1e-8, "Kronecker solve vs dense inverse, max err / max(1,|inv|) " + num(err) + " <= 1e-8");

    const LaplacePosterior prior(std::vector<double>(post.dimension(), 0.0), {}, lambda);
    const Matrix cov = prior.dense_covariance();
    bool exact = true;
    for (std::size_t i = 0; i < cov.rows(); ++i)
        for (std::size_t j = 0; j < cov.cols(); ++j) exact &= cov(i, j) == (i == j ? 1.0 / lambda : 0.0);
    o.require(exact, "no-data covariance equals (1/0.1) I exactly");
    return o;
}

// --- 4 ---------------------------------------------------------------------

Outcome predictive_sampling(const fs::path&) {
    Outcome o;
    const auto d = gaussian_predictive({0.5, -1.0}, Matrix(2, 2, {1.0, 0.0, 0.0, 4.0}));
    RandomStream s(2026);
    const auto samples = sample_logits(d, 100000, s);
    double m0 = 0, m1 = 0;
    for (const auto& x : samples) {
        m0 += x[0];
        m1 += x[1];
    }
    m0 /= static_cast<double>(samples.size());
    m1 /= static_cast<double>(samples.size());
    double c00 = 0, c01 = 0, c11 = 0;
    for (const auto& x : samples) {
        c00 += (x[0] - m0) * (x[0] - m0);
        c01 += (x[0] - m0) * (x[1] - m1);
        c11 += (x[1] - m1) * (x[1] - m1);
    }
    const double k = static_cast<double>(samples.size() - 1);
    const double dev = std::max({std::abs(c00 / k - 1.0), std::abs(c01 / k), std::abs(c11 / k - 4.0)});
    o.require(dev <= 0.05, "10^5-sample covariance vs diag(1,4), max dev " + num(dev) + " <= 0.05");

    const Logits mean{0.25, -0.75};
    const auto zero = gaussian_predictive(mean, Matrix(2, 2, 0.0));
    RandomStream z(1);
    bool identical = true;
    for (const auto& x : sample_logits(zero, 1000, z)) identical &= x == mean;
    o.require(identical, "Lambda = 0 gives samples identical to the mean");
    return o;
}

// --- 5 ---------------------------------------------------------------------

Outcome ensemble_jensen(const fs::path& work) {
    Outcome o;
    RandomStream s(5);
    std::size_t violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t members = 2 + s.below(5);
        std::vector<Logits> probs;
        for (std::size_t m = 0; m < members; ++m) {
            const double p = s.uniform();
            probs.push_back({1.0 - p, p});
        }
        const int label = s.uniform() < 0.5 ? 0 : 1;
        const Logits avg = average_probabilities(probs);
        double mean_member = 0.0;
        for (const auto& q : probs)
            mean_member -= std::log(std::max(q[label], kProbabilityFloor)) / static_cast<double>(members);
        if (-std::log(std::max(avg[label], kProbabilityFloor)) > mean_member + 1e-12) ++violations;
    }
    o.require(violations == 0, "10^4 random member sets: " + std::to_string(violations) + " violations");

    std::size_t runs = 0;
    double worst_gap = -1e300;
    for (std::size_t rank : {2, 4}) {
        RunConfig c;
        c.data.n_pairs = 400;
        c.backbone.embed_dim = 16;
        c.adapter.rank = rank;
        c.train.epochs = 2;
        c.method = Method::ensemble;
        c.ensemble_size = 3;
        c.seeds = {1, 2, 3};
        c.output_dir = fresh_dir(work, "c5-r" + std::to_string(rank)).string();
        const RunSummary sum = run_method(c);
        for (const auto& r : sum.per_seed) {
            o.require(r.ok, "rank " + std::to_string(rank) + " seed " + std::to_string(r.seed) + " ran" +
                                (r.ok ? "" : ": " + r.error));
            if (!r.ok) continue;
            worst_gap = std::max(worst_gap, *r.ensemble_nll - *r.member_nll);
            ++runs;
        }
    }
    o.require(worst_gap <= 1e-12, std::to_string(runs) + " evaluation runs, max (ensemble NLL - mean member NLL) " +
                                      num(worst_gap) + " <= 1e-12");
    return o;
}

// --- 6 ---------------------------------------------------------------------

Outcome metric_fixtures(const fs::path&) {
    Outcome o;
    o.require(nll(PredictionSet{pred(1, 1.0), pred(0, 0.0)}) == 0.0, "NLL of perfect predictions is 0");
    o.require(std::abs(nll(PredictionSet{pred(1, std::exp(-1.0))}) - 1.0) <= 1e-15, "NLL of p = e^-1 is 1");
    o.require(nll(PredictionSet{pred(1, 0.0)}) == -std::log(1e-12), "NLL clamps at 1e-12");

    const auto r = reliability_bins(PredictionSet{pred(1, 0.79), pred(0, 0.79)});
    o.require(r.bins.size() == 15, "15 bins by default");
    o.require(std::abs(ece(r) - 0.29) <= 1e-15, "ECE of two 0.79-confident predictions, one right, is 0.29");
    o.require(ece(PredictionSet{pred(1, 1.0), pred(0, 0.0)}) == 0.0, "ECE of perfect predictions is 0");

    const auto c = confusion_metrics(PredictionSet{pred(1, 0.9), pred(0, 0.9), pred(1, 0.1), pred(0, 0.1)});
    o.require(c.tp == 1 && c.tn == 1 && c.fp == 1 && c.fn == 1 && c.accuracy == 0.5 && c.specificity == 0.5 &&
                  c.precision == 0.5 && c.f1 == 0.5 && c.mcc == 0.0,
              "4-example confusion: acc/spec/prec/F1 0.5, MCC 0");
    const auto deg = confusion_metrics(PredictionSet{pred(1, 0.9), pred(1, 0.8)});
    o.require(deg.specificity == 0.0 && deg.mcc == 0.0, "zero denominators give 0");
    o.require(confusion_metrics(PredictionSet{pred(1, 0.5)}).tp == 1, "p1 = 0.5 predicts class 1");

    o.require(auroc(PredictionSet{pred(1, 0.3), pred(0, 0.3), pred(1, 0.3), pred(0, 0.3)}) == 0.5, "tie AUROC 0.5");
    o.require(auroc(PredictionSet{pred(1, 0.8), pred(1, 0.4), pred(0, 0.6), pred(0, 0.2)}) == 0.75, "AUROC 0.75");
    bool undefined = false;
    try {
        auroc(PredictionSet{pred(1, 0.8), pred(1, 0.2)});
    } catch (const UndefinedMetricError&) {
        undefined = true;
    }
    o.require(undefined, "single-class AUROC is undefined");

    const std::vector<double> x{1, 2, 3};
    const auto same = welch_ttest_one_sided(x, x);
    o.require(same.t == 0.0 && same.p == 0.5, "identical samples: t 0, p 0.5");
    const std::vector<double> a{2.0, 2.1, 1.9}, b{1.0, 1.1, 0.9};
    const auto w = welch_ttest_one_sided(a, b, Alternative::greater);
    const double u = w.t / std::sqrt(1 + w.t * w.t / 4);
    const double tail = 0.5 - 0.375 * u * (1.0 - u * u / 12.0);
    o.require(std::abs(w.dof - 4.0) <= 1e-12 && std::abs(w.p - tail) <= 1e-10,
              "Welch nu = 4 closed form, p " + num(w.p));
    const std::vector<double> k1{1, 1, 1}, k2{2, 2};
    o.require(welch_ttest_one_sided(k2, k1).p == 0.0 && welch_ttest_one_sided(k2, k1, Alternative::less).p == 1.0,
              "constant unequal samples: p 0 / 1");
    return o;
}

// --- 7 ---------------------------------------------------------------------

RunConfig desk_config(const fs::path& out) {
    RunConfig c;
    c.data.n_proteins = 200;
    c.data.n_pairs = 2000;
    c.data.train_fraction = 0.8;
    c.backbone = BackboneConfig{};  // vocab 64, dim 32, heads 2, layers 2
    c.adapter.rank = 8;
    c.ensemble_size = 3;
    c.seeds = {1, 2, 3};
    c.output_dir = out.string();
    return c;
}

Outcome desk_trend(const fs::path& work) {
    Outcome o;
    const fs::path out = fresh_dir(work, "c7");
    std::map<Method, RunSummary> s;
    for (Method m : {Method::single, Method::ensemble, Method::bayesian}) {
        RunConfig c = desk_config(out);
        c.method = m;
        s[m] = run_method(c);
        o.require(s[m].values("acc").size() == 3, std::string(method_name(m)) + " completed 3 seeds");
    }
    const auto acc = s[Method::single].values("acc");
    std::string accs;
    bool all_acc = acc.size() == 3;
    for (double a : acc) {
        accs += (accs.empty() ? "" : "/") + num(a);
        all_acc &= a >= 0.75;
    }
    o.require(all_acc, "(a) single-LoRA accuracy per seed " + accs + " >= 0.75");
    const double nll_single = s[Method::single].stat("nll").mean;
    const double nll_ens = s[Method::ensemble].stat("nll").mean;
    o.require(nll_ens < nll_single, "(b) ensemble mean NLL " + num(nll_ens) + " < single " + num(nll_single));
    const auto ece_single = s[Method::single].values("ece");
    const auto ece_bayes = s[Method::bayesian].values("ece");
    int better = 0;
    std::string pairs;
    for (std::size_t i = 0; i < std::min(ece_single.size(), ece_bayes.size()); ++i) {
        better += ece_bayes[i] <= ece_single[i];
        pairs += (pairs.empty() ? "" : ", ") + num(ece_bayes[i]) + " vs " + num(ece_single[i]);
    }
    o.require(better >= 2, "(c) Bayesian ECE <= single ECE in " + std::to_string(better) + "/3 seeds (" + pairs +
                               "), need >= 2");
    return o;
}

// --- 8 ---------------------------------------------------------------------

Outcome rank_sweep(const fs::path& work) {
    Outcome o;
    std::vector<std::string> tables;
    for (const char* name : {"c8-first", "c8-rerun"}) {
        RunConfig c = desk_config(fresh_dir(work, name));
        c.backbone.embed_dim = 64;  // r = 32 needs r <= d/2
        const SweepResult sw = sweep_rank(c, kDefaultRanks);
        const std::string table = read_file((fs::path(c.output_dir) / "sweep_rank.txt").string());
        o.require(table == sweep_table(sw), std::string(name) + ": sweep_rank.txt matches the returned table");
        std::size_t complete = 0;
        for (const auto& cell : sw.cells) complete += cell.summary && cell.summary->values("acc").size() == 3;
        o.require(sw.cells.size() == 9 && complete == 9,
                  std::string(name) + ": " + std::to_string(complete) + "/9 cells with 3 successful seeds");
        tables.push_back(table);
    }
    const auto rows = parse_sweep_table(tables.front());
    std::size_t stats = 0;
    for (const auto& r : rows) stats += r.failed ? 0 : r.stats.size();
    o.require(rows.size() == 9 && stats == 27, "table has 9 rows x {acc, nll, ece} mean +- std");
    o.require(tables[0] == tables[1], "rerun in a fresh directory is byte-identical");
    std::cout << tables.front();
    return o;
}

// --- 9 ---------------------------------------------------------------------

Outcome reliability_pipeline(const fs::path& work) {
    Outcome o;
    RunConfig c;
    c.data.n_pairs = 300;
    c.backbone.embed_dim = 16;
    c.backbone.num_layers = 1;
    c.adapter.rank = 2;
    c.train.epochs = 1;
    c.samples = 20;
    c.method = Method::bayesian;
    c.seeds = {1};
    c.output_dir = fresh_dir(work, "c9").string();
    const RunSummary sum = run_method(c);
    const fs::path seed_dir = fs::path(run_directory(c)) / "seed-1";
    const MetricsReport reported = parse_report(read_file((seed_dir / "metrics.txt").string()));
    const std::string csv_path = (fs::path(c.output_dir) / "reliability.csv").string();
    emit_reliability_csv((seed_dir / "predictions.tsv").string(), kDefaultBins, csv_path);
    const std::string csv = read_file(csv_path);
    o.require(csv == read_file((seed_dir / "reliability.csv").string()), "re-emitted CSV equals the run's CSV");

    std::size_t rows = 0, total = 0;
    std::vector<std::pair<std::size_t, double>> gaps;
    double footer = -1.0;
    for (std::string_view line : split(csv, '\n')) {
        if (line.empty() || line.rfind("bin_lo", 0) == 0) continue;
        if (line.rfind("# ece=", 0) == 0) {
            footer = parse_double(line.substr(6));
            continue;
        }
        const auto f = split(line, ',');
        const auto count = static_cast<std::size_t>(parse_u64(f[2]));
        gaps.emplace_back(count, std::abs(parse_double(f[3]) - parse_double(f[4])));
        total += count;
        ++rows;
    }
    double recomputed = 0.0;
    for (const auto& [count, gap] : gaps) recomputed += static_cast<double>(count) / static_cast<double>(total) * gap;
    o.require(rows == 15, std::to_string(rows) + " bins (default 15)");
    o.require(total == 60, "bin counts sum to N = " + std::to_string(total) + " (test split of 300 pairs is 60)");
    o.require(std::abs(recomputed - reported.ece) <= 1e-9,
              "re-aggregated ECE " + num(recomputed) + " vs reported " + num(reported.ece) + " within 1e-9");
    o.require(footer == reported.ece, "CSV footer equals the reported ECE");
    o.require(sum.per_seed.front().report.ece == reported.ece, "summary ECE equals metrics.txt");
    return o;
}

// --- 10 --------------------------------------------------------------------

Outcome determinism(const fs::path& work) {
    Outcome o;
    std::vector<std::map<std::string, std::string>> trees;
    std::vector<std::uint64_t> hashes;
    for (const char* name : {"c10-first", "c10-rerun"}) {
        RunConfig base = desk_config(fresh_dir(work, name));
        base.data.n_pairs = 1000;
        base.seeds = {1, 2};
        for (Method m : {Method::single, Method::ensemble, Method::bayesian}) {
            RunConfig c = base;
            c.method = m;
            run_method(c);
            if (m == Method::bayesian) hashes.push_back(config_hash(c));
        }
        trees.push_back(snapshot(base.output_dir));
    }
    o.require(hashes[0] == hashes[1], "config hash " + hex64(hashes[0]) + " is independent of the output directory");
    std::size_t dumps = 0, reports = 0, summaries = 0, differing = 0;
    std::string which;
    for (const auto& [path, bytes] : trees[0]) {
        const auto it = trees[1].find(path);
        if (it == trees[1].end() || it->second != bytes) {
            ++differing;
            which += " " + path;
        }
        dumps += path.ends_with("predictions.tsv");
        reports += path.ends_with("metrics.txt") || path.ends_with("reliability.csv");
        summaries += path.ends_with("summary.txt");
    }
    o.require(trees[0].size() == trees[1].size() && differing == 0,
              std::to_string(trees[0].size()) + " files compared, " + std::to_string(differing) + " differ" + which);
    o.require(dumps == 6 && reports == 12 && summaries == 3,
              std::to_string(dumps) + " prediction dumps, " + std::to_string(reports) + " reports, " +
                  std::to_string(summaries) + " summaries");
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome(const fs::path&)> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> c{
        {1, "gradient correctness", 60, gradient_correctness},
        {2, "Fisher oracle equivalence", 10, fisher_oracle},
        {3, "posterior algebra", 10, posterior_algebra},
        {4, "predictive sampling", 30, predictive_sampling},
        {5, "ensemble Jensen bound", 120, ensemble_jensen},
        {6, "metric fixtures", 1, metric_fixtures},
        {7, "desk-scale trend", 900, desk_trend},
        {8, "rank sweep mechanics", 2700, rank_sweep},
        {9, "reliability pipeline", 1, reliability_pipeline},
        {10, "determinism", 600, determinism},
    };
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    fs::path work = fs::current_path() / "acceptance_work";
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--work" && i + 1 < argc) {
            work = argv[++i];
        } else if (arg == "all") {
            for (const auto& c : criteria()) selected.push_back(c.id);
        } else {
            try {
                selected.push_back(std::stoi(arg));
            } catch (const std::exception&) {
                std::cerr << "usage: acceptance <1-10|all>... [--work DIR]\n";
                return 2;
            }
        }
    }
    if (selected.empty()) {
        std::cerr << "usage: acceptance <1-10|all>... [--work DIR]\n";
        return 2;
    }
    fs::create_directories(work);
    bool all_pass = true;
    for (int id : selected) {
        const auto it = std::find_if(criteria().begin(), criteria().end(), [&](const auto& c) { return c.id == id; });
        if (it == criteria().end()) {
            std::cerr << "unknown criterion " << id << "\n";
            return 2;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = it->run(work);
        } catch (const std::exception& e) {
            o.pass = false;
            o.notes.push_back(std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        o.require(seconds < it->budget_seconds, "runtime " + num(seconds) + " s < " + num(it->budget_seconds) + " s");
        std::string detail;
        for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
        std::cout << "criterion " << it->id << " (" << it->name << "): " << (o.pass ? "PASS" : "FAIL") << " | "
                  << detail << std::endl;
        all_pass &= o.pass;
    }
    return all_pass ? 0 : 1;
}
