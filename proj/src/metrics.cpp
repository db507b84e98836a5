// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <map>

#include "bayeslora/error.hpp"
#include "bayeslora/format.hpp"

namespace bayeslora {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x, double mean) {
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s / static_cast<double>(x.size() - 1);
}

}  // namespace

void validate_predictions(std::span<const Prediction> preds) {
    if (preds.empty()) throw ValidationError("prediction set is empty");
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        if (p.label != 0 && p.label != 1) {
            throw ValidationError("prediction " + std::to_string(i) + ": label must be 0 or 1");
        }
        for (double v : p.probability) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("prediction " + std::to_string(i) + ": probability outside [0,1]");
            }
        }
        if (std::abs(p.probability[0] + p.probability[1] - 1.0) > 1e-9) {
            throw ValidationError("prediction " + std::to_string(i) + ": probabilities do not sum to 1");
        }
    }
}

double nll(std::span<const Prediction> preds) {
    validate_predictions(preds);
    double s = 0.0;
    for (const auto& p : preds) s -= std::log(std::max(p.probability[p.label], kProbabilityFloor));
    return s / static_cast<double>(preds.size());
}

ReliabilityBins reliability_bins(std::span<const Prediction> preds, std::size_t num_bins) {
    if (num_bins == 0) throw ValidationError("number of bins must be at least 1");
    validate_predictions(preds);
    ReliabilityBins out;
    out.total = preds.size();
    out.bins.resize(num_bins);
    std::vector<double> correct(num_bins, 0.0), conf(num_bins, 0.0);
    const double m = static_cast<double>(num_bins);
    for (std::size_t b = 0; b < num_bins; ++b) {
        out.bins[b].lo = static_cast<double>(b) / m;
        out.bins[b].hi = static_cast<double>(b + 1) / m;
    }
    for (const auto& p : preds) {
        const double c = confidence(p);
        const std::size_t b = std::min(static_cast<std::size_t>(std::floor(c * m)), num_bins - 1);
        ++out.bins[b].count;
        conf[b] += c;
        if (predicted_class(p) == p.label) correct[b] += 1.0;
    }
    for (std::size_t b = 0; b < num_bins; ++b) {
        const double n = static_cast<double>(out.bins[b].count);
        if (n == 0.0) continue;
        out.bins[b].accuracy = correct[b] / n;
        out.bins[b].confidence = conf[b] / n;
    }
    return out;
}

double ece(const ReliabilityBins& bins) {
    double s = 0.0;
    for (const auto& b : bins.bins) {
        if (b.count == 0) continue;
        s += static_cast<double>(b.count) / static_cast<double>(bins.total) * std::abs(b.accuracy - b.confidence);
    }
    return s;
}

double ece(std::span<const Prediction> preds, std::size_t num_bins) { return ece(reliability_bins(preds, num_bins)); }

ConfusionMetrics confusion_metrics(std::span<const Prediction> preds, double threshold) {
    validate_predictions(preds);
    ConfusionMetrics c;
    for (const auto& p : preds) {
        const bool pos = p.probability[1] >= threshold;
        if (pos && p.label == 1) ++c.tp;
        else if (pos) ++c.fp;
        else if (p.label == 1) ++c.fn;
        else ++c.tn;
    }
    const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
    const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
    c.accuracy = (tp + tn) / static_cast<double>(preds.size());
    c.specificity = ratio(tn, tn + fp);
    c.precision = ratio(tp, tp + fp);
    const double recall = ratio(tp, tp + fn);
    c.f1 = ratio(2.0 * c.precision * recall, c.precision + recall);
    const double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    c.mcc = ratio(tp * tn - fp * fn, den);
    return c;
}

double auroc(std::span<const Prediction> preds) {
    validate_predictions(preds);
    std::vector<double> pos, neg;
    for (const auto& p : preds) (p.label == 1 ? pos : neg).push_back(p.probability[1]);
    if (pos.empty() || neg.empty()) throw UndefinedMetricError("AUROC is undefined when only one class is present");
    std::sort(neg.begin(), neg.end());
    double u = 0.0;
    for (double s : pos) {
        const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
        const auto hi = std::upper_bound(lo, neg.end(), s);
        u += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
    }
    return u / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

WelchResult welch_ttest_one_sided(std::span<const double> a, std::span<const double> b, Alternative alternative) {
    if (a.size() < 2 || b.size() < 2) throw ValidationError("Welch's t-test needs at least two values per sample");
    for (double v : a)
        if (!std::isfinite(v)) throw ValidationError("Welch's t-test sample contains a non-finite value");
    for (double v : b)
        if (!std::isfinite(v)) throw ValidationError("Welch's t-test sample contains a non-finite value");
    const double ma = mean_of(a), mb = mean_of(b);
    const double qa = sample_variance(a, ma) / static_cast<double>(a.size());
    const double qb = sample_variance(b, mb) / static_cast<double>(b.size());
    const double sign = alternative == Alternative::greater ? 1.0 : -1.0;
    WelchResult r;
    if (qa + qb == 0.0) {
        r.dof = static_cast<double>(a.size() + b.size() - 2);
        if (ma == mb) {
            r.t = 0.0;
            r.p = 0.5;
        } else {
            r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            r.p = sign * (ma - mb) > 0.0 ? 0.0 : 1.0;
        }
        return r;
    }
    r.t = (ma - mb) / std::sqrt(qa + qb);
    r.dof = (qa + qb) * (qa + qb) /
            (qa * qa / static_cast<double>(a.size() - 1) + qb * qb / static_cast<double>(b.size() - 1));
    const boost::math::students_t dist(r.dof);
    r.p = boost::math::cdf(boost::math::complement(dist, sign * r.t));
    return r;
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"acc", "nll", "ece", "specificity", "precision", "f1", "mcc", "auroc"};
    return names;
}

double metric_value(const MetricsReport& r, std::string_view name) {
    if (name == "acc") return r.acc;
    if (name == "nll") return r.nll;
    if (name == "ece") return r.ece;
    if (name == "specificity") return r.specificity;
    if (name == "precision") return r.precision;
    if (name == "f1") return r.f1;
    if (name == "mcc") return r.mcc;
    if (name == "auroc") return r.auroc;
    throw ValidationError("unknown metric '" + std::string(name) + "'");
}

namespace {

double* metric_slot(MetricsReport& r, std::string_view name) {
    if (name == "acc") return &r.acc;
    if (name == "nll") return &r.nll;
    if (name == "ece") return &r.ece;
    if (name == "specificity") return &r.specificity;
    if (name == "precision") return &r.precision;
    if (name == "f1") return &r.f1;
    if (name == "mcc") return &r.mcc;
    if (name == "auroc") return &r.auroc;
    return nullptr;
}

}  // namespace

MetricsReport emit_report(std::span<const Prediction> preds, std::size_t num_bins) {
    MetricsReport r;
    const ConfusionMetrics c = confusion_metrics(preds);
    r.acc = c.accuracy;
    r.specificity = c.specificity;
    r.precision = c.precision;
    r.f1 = c.f1;
    r.mcc = c.mcc;
    r.nll = nll(preds);
    r.reliability = reliability_bins(preds, num_bins);
    r.ece = ece(r.reliability);
    r.auroc = auroc(preds);
    return r;
}

std::string report_to_text(const MetricsReport& r) {
    std::string out;
    for (const auto& name : metric_names()) out += name + "=" + format_double(metric_value(r, name)) + "\n";
    out += "num_bins=" + std::to_string(r.reliability.bins.size()) + "\n";
    return out;
}

MetricsReport parse_report(std::string_view text) {
    MetricsReport r;
    std::map<std::string, bool> seen;
    std::size_t line_no = 0;
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
        const std::string key(trim(line.substr(0, eq)));
        if (key == "num_bins") continue;
        double* slot = metric_slot(r, key);
        if (!slot) throw ParseError("unknown metric '" + key + "'", line_no);
        try {
            *slot = parse_double(trim(line.substr(eq + 1)));
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
        seen[key] = true;
    }
    for (const auto& name : metric_names()) {
        if (!seen.count(name)) throw ParseError("metrics report is missing '" + name + "'", line_no);
    }
    return r;
}

std::string reliability_csv(const ReliabilityBins& bins) {
    std::string out = "bin_lo,bin_hi,count,accuracy,confidence\n";
    for (const auto& b : bins.bins) {
        out += format_double(b.lo) + "," + format_double(b.hi) + "," + std::to_string(b.count) + "," +
               format_double(b.accuracy) + "," + format_double(b.confidence) + "\n";
    }
    out += "# ece=" + format_double(ece(bins)) + "\n";
    return out;
}

}  // namespace bayeslora
