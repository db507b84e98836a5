// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bayeslora/checkpoint.hpp"
#include "bayeslora/data.hpp"
#include "bayeslora/ensemble.hpp"
#include "bayeslora/laplace.hpp"
#include "bayeslora/metrics.hpp"
#include "bayeslora/predict.hpp"
#include "bayeslora/train.hpp"

namespace bayeslora {

enum class Method { single, ensemble, bayesian };

const char* method_name(Method m) noexcept;
Method parse_method(std::string_view name);

struct DataSettings {
    std::string tsv_path;  ///< empty: synthetic
    std::size_t n_proteins = 200;
    std::size_t n_pairs = 2000;
    std::size_t latent_dim = 3;
    std::uint64_t seed = 1;
    double train_fraction = 0.8;
    std::uint64_t split_seed = 2;
    std::string vocab_path;  ///< empty: built-in character vocabulary
};

struct RunConfig {
    DataSettings data;
    BackboneConfig backbone;
    std::uint64_t backbone_seed = 7;
    AdapterSpec adapter;
    TrainConfig train;  ///< `train.seed` is ignored; runs use `seeds`
    Method method = Method::single;
    std::size_t ensemble_size = 3;
    double prior_precision = 0.1;
    KfacOptions kfac;
    std::size_t samples = 100;
    std::size_t bins = kDefaultBins;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string output_dir = "runs";

    void validate() const;
};

/// Canonical `[section]` / `key = value` text of every field. output_dir is included
/// but does not enter the hash.
std::string config_to_text(const RunConfig& config);
/// Applies the sections of `text` on top of `base`. Unknown sections or keys are errors.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::string& path);
/// Applies one `section.key=value` override.
void apply_override(RunConfig& config, std::string_view assignment);

/// FNV-1a of the canonical text (without output_dir) and of the TSV contents, if any.
std::uint64_t config_hash(const RunConfig& config);
/// `<output_dir>/<method>-r<rank>-<hash>`.
std::string run_directory(const RunConfig& config);

struct PreparedData {
    Vocab vocab;
    Dataset train;
    Dataset test;
    std::vector<LabeledSequence> train_encoded;
    std::vector<LabeledSequence> test_encoded;
};

PreparedData prepare_data(const RunConfig& config);

/// Member seeds for run seed s: derive_seed(s, m). Member 0 doubles as the single model.
std::vector<std::uint64_t> member_seeds(const RunConfig& config, std::uint64_t seed);

/// Trains (or loads from `<output_dir>/models`) the adapters for one training seed.
TrainResult train_cached(const RunConfig& config, const PreparedData& data, std::uint64_t train_seed);

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    MetricsReport report;
    /// Ensemble: dataset NLL of the ensemble and mean member NLL.
    std::optional<double> ensemble_nll;
    std::optional<double> member_nll;
    /// Bayesian: largest Cholesky jitter applied over the test set.
    std::optional<double> max_jitter;
};

struct MetricStat {
    double mean = 0.0;
    double std = 0.0;  ///< sample (N − 1) convention, 0 for one value
};

MetricStat aggregate(std::span<const double> values);

struct RunSummary {
    Method method = Method::single;
    std::size_t rank = 0;
    std::uint64_t config_hash = 0;
    std::string version;
    std::vector<SeedResult> per_seed;

    std::vector<double> values(std::string_view metric) const;  ///< successful seeds, in seed order
    MetricStat stat(std::string_view metric) const;
};

std::string summary_to_text(const RunSummary& summary);
RunSummary parse_summary(std::string_view text);
RunSummary load_summary(const std::string& path);

struct Evaluation {
    std::vector<PredictionRecord> records;
    PredictionSet predictions;  ///< probabilities of the evaluated method
    MetricsReport report;
    std::optional<double> ensemble_nll;
    std::optional<double> member_nll;
    std::optional<double> max_jitter;
};

/// Scores members[0] as the MAP model, the member average when `ensemble` is set and the
/// Laplace predictive when `posterior` is given (which then takes precedence). Test example i
/// draws its predictive samples from example_seed(derive_seed(seed, 3), i).
Evaluation evaluate_models(std::span<const LoraModel> members, bool ensemble, const LaplacePosterior* posterior,
                           std::span<const LabeledSequence> test, std::size_t samples, std::size_t bins,
                           std::uint64_t seed);

/// Evaluation of one seed; writes its artifacts under `dir`.
SeedResult run_seed(const RunConfig& config, const PreparedData& data, std::uint64_t seed, const std::string& dir);

/// Every seed of the configured method. A completed run directory with a matching hash is reused.
RunSummary run_method(const RunConfig& config);

struct SweepCell {
    Method method = Method::single;
    std::size_t rank = 0;
    std::optional<RunSummary> summary;
    std::string error;
};

struct SweepResult {
    std::vector<std::uint64_t> seeds;
    std::vector<SweepCell> cells;  ///< method-major, ranks ascending
};

inline const std::vector<std::size_t> kDefaultRanks{8, 16, 32};
inline const std::vector<std::string> kSweepMetrics{"acc", "nll", "ece"};

SweepResult sweep_rank(const RunConfig& base, std::span<const std::size_t> ranks = kDefaultRanks);

/// One row per (method, rank): `mean ± std` with six decimals, or `failed`.
std::string sweep_table(const SweepResult& sweep);

struct SweepRow {
    std::string method;
    std::size_t rank = 0;
    bool failed = false;
    std::vector<MetricStat> stats;  ///< kSweepMetrics order
};

std::vector<SweepRow> parse_sweep_table(std::string_view text);

struct Significance {
    std::string metric;
    Alternative alternative = Alternative::greater;
    WelchResult test;
    bool significant = false;  ///< p < 0.05
};

/// One-sided Welch test on the per-seed values of `metric`; needs ≥ 2 successful seeds per side.
Significance compare_runs(const RunSummary& a, const RunSummary& b, std::string_view metric,
                          Alternative alternative = Alternative::greater);
std::string significance_to_text(const Significance& s);

/// Probability column of a prediction dump used for reliability: "map", "bayes", "ens",
/// or "auto" (bayes, then ens, then map).
PredictionSet predictions_from_dump(std::span<const PredictionRecord> records, std::string_view column = "auto");

/// Reads a prediction dump and writes the reliability CSV with its `# ece=` footer.
void emit_reliability_csv(const std::string& dump_path, std::size_t num_bins, const std::string& out_path,
                          std::string_view column = "auto");

}  // namespace bayeslora
