// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bayeslora/model.hpp"

namespace bayeslora {

struct Prediction {
    int label = 0;
    Logits probability{};  ///< class probabilities, summing to 1
};

using PredictionSet = std::vector<Prediction>;

/// Non-empty, labels in {0,1}, probabilities in [0,1] summing to 1 within 1e-9.
void validate_predictions(std::span<const Prediction> preds);

/// Class 1 when p₁ ≥ 0.5.
inline int predicted_class(const Prediction& p) noexcept { return p.probability[1] >= 0.5 ? 1 : 0; }
inline double confidence(const Prediction& p) noexcept {
    return p.probability[0] > p.probability[1] ? p.probability[0] : p.probability[1];
}

inline constexpr std::size_t kDefaultBins = 15;
inline constexpr double kProbabilityFloor = 1e-12;

double nll(std::span<const Prediction> preds);

struct ReliabilityBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double accuracy = 0.0;    ///< 0 when empty
    double confidence = 0.0;  ///< 0 when empty
};

struct ReliabilityBins {
    std::vector<ReliabilityBin> bins;
    std::size_t total = 0;
};

/// Equal-width bins on the predicted-class confidence; bin = min(⌊conf·M⌋, M − 1).
ReliabilityBins reliability_bins(std::span<const Prediction> preds, std::size_t num_bins = kDefaultBins);
double ece(const ReliabilityBins& bins);
double ece(std::span<const Prediction> preds, std::size_t num_bins = kDefaultBins);

struct ConfusionMetrics {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    double accuracy = 0.0;
    double specificity = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double mcc = 0.0;
};

/// Positive when p₁ ≥ threshold. Ratios with a zero denominator are 0.
ConfusionMetrics confusion_metrics(std::span<const Prediction> preds, double threshold = 0.5);

/// Mann–Whitney estimate on p₁ with ties counted ½. Throws UndefinedMetricError for one-class labels.
double auroc(std::span<const Prediction> preds);

enum class Alternative { greater, less };

struct WelchResult {
    double t = 0.0;
    double dof = 0.0;
    double p = 0.0;
};

/// One-sided Welch test of mean(a) > mean(b) (or <). Constant samples: equal → p = 0.5,
/// unequal → p ∈ {0, 1} by direction.
WelchResult welch_ttest_one_sided(std::span<const double> a, std::span<const double> b,
                                  Alternative alternative = Alternative::greater);

struct MetricsReport {
    double acc = 0.0;
    double nll = 0.0;
    double ece = 0.0;
    double specificity = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double mcc = 0.0;
    double auroc = 0.0;
    ReliabilityBins reliability;
};

/// Metric names in report order.
const std::vector<std::string>& metric_names();
double metric_value(const MetricsReport& r, std::string_view name);

MetricsReport emit_report(std::span<const Prediction> preds, std::size_t num_bins = kDefaultBins);

/// `key=value` lines in metric_names() order, then `num_bins=M`.
std::string report_to_text(const MetricsReport& r);
/// Restores the scalar fields; reliability stays empty.
MetricsReport parse_report(std::string_view text);

/// Header `bin_lo,bin_hi,count,accuracy,confidence`, one row per bin, footer `# ece=<value>`.
std::string reliability_csv(const ReliabilityBins& bins);

}  // namespace bayeslora
