// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <set>

#include "bayeslora/error.hpp"
#include "bayeslora/format.hpp"

#ifndef BAYESLORA_VERSION
#define BAYESLORA_VERSION "0.0.0"
#endif

namespace bayeslora {

namespace fs = std::filesystem;

const char* method_name(Method m) noexcept {
    switch (m) {
        case Method::single: return "single";
        case Method::ensemble: return "ensemble";
        case Method::bayesian: return "bayesian";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    if (name == "single") return Method::single;
    if (name == "ensemble") return Method::ensemble;
    if (name == "bayesian") return Method::bayesian;
    throw ValidationError("unknown method '" + std::string(name) + "' (expected single, ensemble or bayesian)");
}

// ---------------------------------------------------------------------------
// Config fields

namespace {

struct Field {
    const char* section;
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

std::size_t to_size(std::string_view v) { return static_cast<std::size_t>(parse_u64(v)); }

std::string seeds_text(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? "," : "") + std::to_string(seeds[i]);
    return out;
}

std::vector<std::uint64_t> parse_seeds(std::string_view v) {
    std::vector<std::uint64_t> out;
    for (std::string_view f : split(v, ',')) {
        f = trim(f);
        if (!f.empty()) out.push_back(parse_u64(f));
    }
    if (out.empty()) throw ValidationError("seed list is empty");
    return out;
}

#define SIZE_FIELD(sec, name, expr) \
    Field { sec, name, [](const RunConfig& c) { return std::to_string(c.expr); }, \
            [](RunConfig& c, std::string_view v) { c.expr = to_size(v); } }
#define U64_FIELD(sec, name, expr) \
    Field { sec, name, [](const RunConfig& c) { return std::to_string(c.expr); }, \
            [](RunConfig& c, std::string_view v) { c.expr = parse_u64(v); } }
#define DOUBLE_FIELD(sec, name, expr) \
    Field { sec, name, [](const RunConfig& c) { return format_double(c.expr); }, \
            [](RunConfig& c, std::string_view v) { c.expr = parse_double(v); } }
#define STRING_FIELD(sec, name, expr) \
    Field { sec, name, [](const RunConfig& c) { return c.expr; }, \
            [](RunConfig& c, std::string_view v) { c.expr = std::string(v); } }

const std::vector<Field>& fields() {
    static const std::vector<Field> f{
        STRING_FIELD("data", "tsv", data.tsv_path),
        SIZE_FIELD("data", "n_proteins", data.n_proteins),
        SIZE_FIELD("data", "n_pairs", data.n_pairs),
        SIZE_FIELD("data", "latent_dim", data.latent_dim),
        U64_FIELD("data", "seed", data.seed),
        DOUBLE_FIELD("data", "train_fraction", data.train_fraction),
        U64_FIELD("data", "split_seed", data.split_seed),
        STRING_FIELD("data", "vocab", data.vocab_path),
        SIZE_FIELD("backbone", "vocab_size", backbone.vocab_size),
        SIZE_FIELD("backbone", "embed_dim", backbone.embed_dim),
        SIZE_FIELD("backbone", "num_heads", backbone.num_heads),
        SIZE_FIELD("backbone", "num_layers", backbone.num_layers),
        SIZE_FIELD("backbone", "max_seq_len", backbone.max_seq_len),
        U64_FIELD("backbone", "seed", backbone_seed),
        SIZE_FIELD("adapter", "rank", adapter.rank),
        DOUBLE_FIELD("adapter", "alpha", adapter.alpha),
        DOUBLE_FIELD("adapter", "dropout", adapter.dropout),
        DOUBLE_FIELD("train", "learning_rate", train.learning_rate),
        SIZE_FIELD("train", "epochs", train.epochs),
        SIZE_FIELD("train", "batch_size", train.batch_size),
        DOUBLE_FIELD("train", "weight_decay", train.weight_decay),
        DOUBLE_FIELD("train", "beta1", train.beta1),
        DOUBLE_FIELD("train", "beta2", train.beta2),
        DOUBLE_FIELD("train", "epsilon", train.epsilon),
        SIZE_FIELD("ensemble", "size", ensemble_size),
        DOUBLE_FIELD("laplace", "prior_precision", prior_precision),
        SIZE_FIELD("laplace", "compression_threshold", kfac.compression_threshold),
        SIZE_FIELD("laplace", "compression_budget", kfac.compression_budget),
        SIZE_FIELD("predict", "samples", samples),
        SIZE_FIELD("metrics", "bins", bins),
        Field{"run", "method", [](const RunConfig& c) { return std::string(method_name(c.method)); },
              [](RunConfig& c, std::string_view v) { c.method = parse_method(v); }},
        Field{"run", "seeds", [](const RunConfig& c) { return seeds_text(c.seeds); },
              [](RunConfig& c, std::string_view v) { c.seeds = parse_seeds(v); }},
        STRING_FIELD("run", "output_dir", output_dir),
    };
    return f;
}

#undef SIZE_FIELD
#undef U64_FIELD
#undef DOUBLE_FIELD
#undef STRING_FIELD

const Field* find_field(std::string_view section, std::string_view key) {
    for (const auto& f : fields())
        if (section == f.section && key == f.key) return &f;
    return nullptr;
}

std::string canonical_text(const RunConfig& c, bool with_output_dir) {
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        if (!with_output_dir && std::string_view(f.key) == "output_dir") continue;
        if (section != f.section) {
            if (!section.empty()) out += "\n";
            section = f.section;
            out += "[" + section + "]\n";
        }
        out += std::string(f.key) + " = " + f.get(c) + "\n";
    }
    return out;
}

void set_field(RunConfig& c, std::string_view section, std::string_view key, std::string_view value,
               std::size_t line_no) {
    const Field* f = find_field(section, key);
    if (!f) throw ParseError("unknown config key '" + std::string(section) + "." + std::string(key) + "'", line_no);
    try {
        f->set(c, value);
    } catch (const ParseError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ParseError(std::string(section) + "." + std::string(key) + ": " + e.what(), line_no);
    }
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace

void RunConfig::validate() const {
    backbone.validate();
    train.validate();
    if (backbone.num_classes != 2) throw ValidationError("only binary classification is supported");
    if (adapter.rank == 0 || 2 * adapter.rank > backbone.embed_dim) {
        throw ValidationError("rank " + std::to_string(adapter.rank) + " must lie in [1, embed_dim/2 = " +
                              std::to_string(backbone.embed_dim / 2) + "]");
    }
    if (!(adapter.dropout >= 0.0 && adapter.dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
    if (!std::isfinite(adapter.alpha)) throw ValidationError("alpha must be finite");
    if (ensemble_size == 0) throw ValidationError("ensemble size must be at least 1");
    if (!(prior_precision > 0.0) || !std::isfinite(prior_precision)) {
        throw ValidationError("prior precision must be positive");
    }
    if (kfac.compression_budget == 0) throw ValidationError("compression budget must be positive");
    if (samples == 0) throw ValidationError("predictive sample count must be at least 1");
    if (bins == 0) throw ValidationError("bin count must be at least 1");
    if (seeds.empty()) throw ValidationError("at least one seed is required");
    std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
    if (distinct.size() != seeds.size()) throw ValidationError("run seeds must be pairwise distinct");
    if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
        throw ValidationError("train_fraction must lie in (0, 1)");
    }
}

std::string config_to_text(const RunConfig& config) { return canonical_text(config, true); }

RunConfig parse_config(std::string_view text, RunConfig base) {
    std::string section;
    std::size_t line_no = 0;
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", line_no);
            section = std::string(trim(line.substr(1, line.size() - 2)));
            bool known = false;
            for (const auto& f : fields()) known |= section == f.section;
            if (!known) throw ParseError("unknown config section '" + section + "'", line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
        if (section.empty()) throw ParseError("key outside of a [section]", line_no);
        set_field(base, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no);
    }
    return base;
}

RunConfig load_config(const std::string& path) {
    try {
        return parse_config(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

void apply_override(RunConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
        throw ValidationError("override '" + std::string(assignment) + "' must look like section.key=value");
    }
    set_field(config, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
              trim(assignment.substr(eq + 1)), 0);
}

std::uint64_t config_hash(const RunConfig& config) {
    std::string text = canonical_text(config, false);
    if (!config.data.tsv_path.empty()) text += "tsv_content = " + hex64(fnv1a64(read_file(config.data.tsv_path)));
    if (!config.data.vocab_path.empty()) text += "vocab_content = " + hex64(fnv1a64(read_file(config.data.vocab_path)));
    return fnv1a64(text);
}

std::string run_directory(const RunConfig& config) {
    return (fs::path(config.output_dir) / (std::string(method_name(config.method)) + "-r" +
                                           std::to_string(config.adapter.rank) + "-" + hex64(config_hash(config))))
        .string();
}

// ---------------------------------------------------------------------------
// Data and training

PreparedData prepare_data(const RunConfig& config) {
    PreparedData d;
    d.vocab = config.data.vocab_path.empty() ? Vocab::standard() : Vocab::load(config.data.vocab_path);
    if (d.vocab.size() > config.backbone.vocab_size) {
        throw ValidationError("vocabulary of " + std::to_string(d.vocab.size()) + " tokens exceeds backbone vocab_size " +
                              std::to_string(config.backbone.vocab_size));
    }
    Dataset full = config.data.tsv_path.empty()
                       ? generate_synthetic(config.data.n_proteins, config.data.n_pairs, config.data.latent_dim,
                                            config.data.seed)
                             .dataset
                       : load_tsv(config.data.tsv_path);
    auto parts = split(full, config.data.train_fraction, config.data.split_seed);
    d.train = std::move(parts.first);
    d.test = std::move(parts.second);
    d.train_encoded = encode_dataset(d.train, d.vocab, config.backbone.max_seq_len);
    d.test_encoded = encode_dataset(d.test, d.vocab, config.backbone.max_seq_len);
    return d;
}

std::vector<std::uint64_t> member_seeds(const RunConfig& config, std::uint64_t seed) {
    return default_member_seeds(seed, config.method == Method::ensemble ? config.ensemble_size : 1);
}

namespace {

std::string training_key(const RunConfig& config, std::uint64_t train_seed) {
    RunConfig c = config;
    c.method = Method::single;
    c.seeds = {0};
    c.ensemble_size = 1;
    c.prior_precision = 1.0;
    c.kfac = KfacOptions{};
    c.samples = 1;
    c.bins = 1;
    return hex64(fnv1a64(hex64(config_hash(c)) + " train_seed = " + std::to_string(train_seed)));
}

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

std::vector<LossRecord> parse_loss_csv(std::string_view text) {
    std::vector<LossRecord> out;
    bool header = true;
    for (std::string_view line : split(text, '\n')) {
        line = trim(line);
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 3) throw ParseError("loss log row needs 3 fields", 0);
        out.push_back({static_cast<std::size_t>(parse_u64(f[0])), static_cast<std::size_t>(parse_u64(f[1])),
                       parse_double(f[2])});
    }
    return out;
}

}  // namespace

TrainResult train_cached(const RunConfig& config, const PreparedData& data, std::uint64_t train_seed) {
    const fs::path dir = fs::path(config.output_dir) / "models";
    const std::string key = training_key(config, train_seed);
    const fs::path ckpt = dir / (key + ".ckpt");
    const fs::path loss = dir / (key + ".loss.csv");
    if (fs::exists(ckpt) && fs::exists(loss)) {
        return {load_model(ckpt.string()), parse_loss_csv(read_file(loss.string()))};
    }
    TrainConfig tc = config.train;
    tc.seed = train_seed;
    auto bb = init_backbone(config.backbone, config.backbone_seed);
    TrainResult r = train_lora(bb, config.adapter, data.train_encoded, tc);
    if (bb->fingerprint() != r.model.backbone().fingerprint()) throw ComputationError("backbone changed during training");
    ensure_dir(dir);
    write_file(loss.string(), loss_log_csv(r.loss_log));
    write_file(ckpt.string(), model_to_text(r.model));
    return r;
}

// ---------------------------------------------------------------------------
// Runs

MetricStat aggregate(std::span<const double> values) {
    if (values.empty()) throw ValidationError("cannot aggregate an empty sample");
    MetricStat s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

std::vector<double> RunSummary::values(std::string_view metric) const {
    std::vector<double> out;
    for (const auto& r : per_seed)
        if (r.ok) out.push_back(metric_value(r.report, metric));
    return out;
}

MetricStat RunSummary::stat(std::string_view metric) const { return aggregate(values(metric)); }

namespace {

const std::string kSummaryMagic = "bayeslora-summary 1";

void put_optional(std::string& out, const char* key, const std::optional<double>& v) {
    if (v) out += std::string(key) + "=" + format_double(*v) + "\n";
}

}  // namespace

std::string summary_to_text(const RunSummary& s) {
    std::string out = kSummaryMagic + "\n";
    out += "version=" + s.version + "\n";
    out += "method=" + std::string(method_name(s.method)) + "\n";
    out += "rank=" + std::to_string(s.rank) + "\n";
    out += "config_hash=" + hex64(s.config_hash) + "\n";
    std::vector<std::uint64_t> seeds;
    for (const auto& r : s.per_seed) seeds.push_back(r.seed);
    out += "seeds=" + seeds_text(seeds) + "\n";
    for (const auto& r : s.per_seed) {
        out += "\n[seed " + std::to_string(r.seed) + "]\n";
        if (!r.ok) {
            out += "status=failed\nerror=" + one_line(r.error) + "\n";
            continue;
        }
        out += "status=ok\n";
        for (const auto& name : metric_names()) out += name + "=" + format_double(metric_value(r.report, name)) + "\n";
        put_optional(out, "ensemble_nll", r.ensemble_nll);
        put_optional(out, "member_nll", r.member_nll);
        put_optional(out, "max_jitter", r.max_jitter);
    }
    out += "\n[aggregate]\n";
    bool any = false;
    for (const auto& r : s.per_seed) any |= r.ok;
    if (any) {
        for (const auto& name : metric_names()) {
            const MetricStat st = s.stat(name);
            out += name + ".mean=" + format_double(st.mean) + "\n";
            out += name + ".std=" + format_double(st.std) + "\n";
        }
    }
    return out;
}

RunSummary parse_summary(std::string_view text) {
    RunSummary s;
    std::size_t line_no = 0;
    std::string section;
    std::map<std::string, std::string> header;
    std::map<std::string, std::string> aggregate_fields;
    std::string seed_block;
    SeedResult* current = nullptr;
    auto finish_seed = [&]() {
        if (!current) return;
        if (current->ok) current->report = parse_report(seed_block);
        seed_block.clear();
        current = nullptr;
    };
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line_no == 1) {
            if (line != kSummaryMagic) throw ParseError("not a run summary", line_no);
            continue;
        }
        if (line.empty()) continue;
        if (line.front() == '[') {
            try {
                finish_seed();
            } catch (const ValidationError& e) {
                throw ParseError(e.what(), line_no);
            }
            section = std::string(line.substr(1, line.size() - 2));
            if (section.rfind("seed ", 0) == 0) {
                SeedResult r;
                try {
                    r.seed = parse_u64(section.substr(5));
                } catch (const ValidationError& e) {
                    throw ParseError(e.what(), line_no);
                }
                s.per_seed.push_back(r);
                current = &s.per_seed.back();
            } else if (section != "aggregate") {
                throw ParseError("unknown summary section '" + section + "'", line_no);
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
        const std::string key(line.substr(0, eq));
        const std::string value(line.substr(eq + 1));
        try {
            if (section.empty()) {
                header[key] = value;
            } else if (section == "aggregate") {
                aggregate_fields[key] = value;
            } else if (key == "status") {
                current->ok = value == "ok";
            } else if (key == "error") {
                current->error = value;
            } else if (key == "ensemble_nll") {
                current->ensemble_nll = parse_double(value);
            } else if (key == "member_nll") {
                current->member_nll = parse_double(value);
            } else if (key == "max_jitter") {
                current->max_jitter = parse_double(value);
            } else {
                seed_block += key + "=" + value + "\n";
            }
        } catch (const ParseError&) {
            throw;
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    try {
        finish_seed();
        s.version = header.at("version");
        s.method = parse_method(header.at("method"));
        s.rank = static_cast<std::size_t>(parse_u64(header.at("rank")));
        const std::string& h = header.at("config_hash");
        if (h.size() != 16) throw ValidationError("config_hash must have 16 hex digits");
        s.config_hash = std::stoull(h, nullptr, 16);
    } catch (const std::out_of_range&) {
        throw ParseError("run summary header is incomplete", 0);
    } catch (const std::invalid_argument&) {
        throw ParseError("config_hash is not hexadecimal", 0);
    } catch (const ParseError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ParseError(e.what(), 0);
    }
    if (!aggregate_fields.empty()) {
        for (const auto& name : metric_names()) {
            const MetricStat st = s.stat(name);
            const auto m = aggregate_fields.find(name + ".mean");
            const auto d = aggregate_fields.find(name + ".std");
            if (m == aggregate_fields.end() || d == aggregate_fields.end() || m->second != format_double(st.mean) ||
                d->second != format_double(st.std)) {
                throw ParseError("aggregate for '" + name + "' does not match the per-seed reports", 0);
            }
        }
    }
    return s;
}

RunSummary load_summary(const std::string& path) {
    try {
        return parse_summary(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

Evaluation evaluate_models(std::span<const LoraModel> members, bool ensemble, const LaplacePosterior* posterior,
                           std::span<const LabeledSequence> test, std::size_t samples, std::size_t bins,
                           std::uint64_t seed) {
    if (members.empty()) throw ValidationError("no models to evaluate");
    if (test.empty()) throw ValidationError("test set is empty");
    const LoraModel& map_model = members.front();
    const std::uint64_t predict_seed = derive_seed(seed, 3);
    Evaluation ev;
    double member_nll = 0.0, ensemble_nll = 0.0, max_jitter = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const LabeledSequence& ex = test[i];
        PredictionRecord rec;
        rec.id = std::to_string(i);
        rec.label = ex.label;
        std::vector<Logits> probs;
        for (std::size_t m = 0; m < (ensemble ? members.size() : 1); ++m)
            probs.push_back(softmax(model_forward(members[m], ex.tokens)));
        rec.p_map = probs.front()[1];
        Logits p = probs.front();
        if (ensemble) {
            p = average_probabilities(probs);
            rec.p_ens = p[1];
            for (const auto& q : probs)
                member_nll -= std::log(std::max(q[ex.label], kProbabilityFloor)) / static_cast<double>(probs.size());
            ensemble_nll -= std::log(std::max(p[ex.label], kProbabilityFloor));
        }
        if (posterior) {
            const BayesPrediction b =
                bayes_predict(map_model, *posterior, ex.tokens, samples, example_seed(predict_seed, i));
            p = b.probability;
            rec.p_bayes = p[1];
            max_jitter = std::max(max_jitter, b.jitter);
        }
        ev.records.push_back(rec);
        ev.predictions.push_back({ex.label, p});
    }
    if (ensemble) {
        const double n = static_cast<double>(test.size());
        ev.ensemble_nll = ensemble_nll / n;
        ev.member_nll = member_nll / n;
        if (*ev.ensemble_nll > *ev.member_nll + 1e-12) {
            throw ComputationError("ensemble NLL " + format_double(*ev.ensemble_nll) + " exceeds the mean member NLL " +
                                   format_double(*ev.member_nll));
        }
    }
    if (posterior) ev.max_jitter = max_jitter;
    ev.report = emit_report(ev.predictions, bins);
    return ev;
}

SeedResult run_seed(const RunConfig& config, const PreparedData& data, std::uint64_t seed, const std::string& dir) {
    const fs::path out = dir;
    ensure_dir(out);
    SeedResult result;
    result.seed = seed;

    const std::vector<std::uint64_t> seeds = member_seeds(config, seed);
    std::vector<EnsembleMember> members;
    for (std::size_t m = 0; m < seeds.size(); ++m) {
        TrainResult r = train_cached(config, data, seeds[m]);
        const std::string loss_name = seeds.size() == 1 ? "loss.csv" : "loss-" + std::to_string(m) + ".csv";
        write_file((out / loss_name).string(), loss_log_csv(r.loss_log));
        members.push_back({std::move(r.model), seeds[m], std::move(r.loss_log)});
    }
    const LoraModel& map_model = members.front().model;

    std::optional<LaplacePosterior> posterior;
    if (config.method == Method::bayesian) {
        posterior.emplace(map_model.flatten_params(), accumulate_kfac(map_model, data.train_encoded, config.kfac),
                          config.prior_precision);
        write_file((out / "posterior.ckpt").string(), posterior_to_text(map_model, *posterior));
    }
    std::optional<LoraEnsemble> ensemble;
    if (config.method == Method::ensemble) {
        ensemble.emplace(members);
        write_file((out / "ensemble.ckpt").string(), ensemble_to_text(*ensemble));
    } else if (config.method == Method::single) {
        write_file((out / "model.ckpt").string(), model_to_text(map_model));
    }

    std::vector<LoraModel> models;
    for (const auto& m : members) models.push_back(m.model);
    const Evaluation ev = evaluate_models(models, ensemble.has_value(), posterior ? &*posterior : nullptr,
                                          data.test_encoded, config.samples, config.bins, seed);
    result.ensemble_nll = ev.ensemble_nll;
    result.member_nll = ev.member_nll;
    result.max_jitter = ev.max_jitter;
    result.report = ev.report;
    write_file((out / "predictions.tsv").string(), predictions_tsv(ev.records));
    write_file((out / "metrics.txt").string(), report_to_text(result.report));
    write_file((out / "reliability.csv").string(), reliability_csv(result.report.reliability));
    result.ok = true;
    return result;
}

RunSummary run_method(const RunConfig& config) {
    config.validate();
    const std::uint64_t hash = config_hash(config);
    const fs::path dir = run_directory(config);
    const fs::path summary_path = dir / "summary.txt";
    if (fs::exists(summary_path)) {
        try {
            RunSummary cached = load_summary(summary_path.string());
            if (cached.config_hash == hash) return cached;
        } catch (const ValidationError&) {
            // Stale or partial summary: run again.
        }
    }
    ensure_dir(dir);
    write_file((dir / "config.ini").string(), canonical_text(config, false));
    const PreparedData data = prepare_data(config);

    RunSummary summary;
    summary.method = config.method;
    summary.rank = config.adapter.rank;
    summary.config_hash = hash;
    summary.version = BAYESLORA_VERSION;
    std::string log;
    for (std::uint64_t seed : config.seeds) {
        const std::string seed_dir = (dir / ("seed-" + std::to_string(seed))).string();
        try {
            summary.per_seed.push_back(run_seed(config, data, seed, seed_dir));
            log += "seed " + std::to_string(seed) + ": ok\n";
        } catch (const Error& e) {
            SeedResult failed;
            failed.seed = seed;
            failed.error = e.what();
            summary.per_seed.push_back(failed);
            log += "seed " + std::to_string(seed) + ": failed: " + one_line(e.what()) + "\n";
        }
    }
    write_file((dir / "run.log").string(), log);
    if (summary.values("acc").empty()) throw ComputationError("every seed failed; see " + (dir / "run.log").string());
    write_file(summary_path.string(), summary_to_text(summary));
    return summary;
}

// ---------------------------------------------------------------------------
// Sweeps and comparisons

SweepResult sweep_rank(const RunConfig& base, std::span<const std::size_t> ranks) {
    if (ranks.empty()) throw ValidationError("rank list is empty");
    SweepResult out;
    out.seeds = base.seeds;
    for (Method m : {Method::single, Method::ensemble, Method::bayesian}) {
        for (std::size_t r : ranks) {
            RunConfig c = base;
            c.method = m;
            c.adapter.rank = r;
            SweepCell cell;
            cell.method = m;
            cell.rank = r;
            try {
                cell.summary = run_method(c);
            } catch (const Error& e) {
                cell.error = e.what();
            }
            out.cells.push_back(std::move(cell));
        }
    }
    ensure_dir(base.output_dir);
    write_file((fs::path(base.output_dir) / "sweep_rank.txt").string(), sweep_table(out));
    return out;
}

std::string sweep_table(const SweepResult& sweep) {
    std::string out = "# LoRA rank sweep, mean ± std over seeds " + seeds_text(sweep.seeds) + "\n";
    out += "method    rank";
    for (const auto& m : kSweepMetrics) {
        std::string head = m;
        head.resize(24, ' ');
        out += "  " + head;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += "\n";
    for (const auto& c : sweep.cells) {
        std::string row = method_name(c.method);
        row.resize(10, ' ');
        std::string rank = std::to_string(c.rank);
        rank.resize(4, ' ');
        row += rank;
        if (!c.summary) {
            row += "  failed";
        } else {
            for (const auto& m : kSweepMetrics) {
                const MetricStat st = c.summary->stat(m);
                std::string cell = format_fixed(st.mean, 6) + " ± " + format_fixed(st.std, 6);
                cell.resize(24 + 1, ' ');  // "±" is two bytes
                row += "  " + cell;
            }
            while (!row.empty() && row.back() == ' ') row.pop_back();
        }
        out += row + "\n";
    }
    return out;
}

std::vector<SweepRow> parse_sweep_table(std::string_view text) {
    std::vector<SweepRow> rows;
    std::size_t line_no = 0;
    bool saw_header = false;
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string_view> tok;
        for (std::string_view t : split(line, ' '))
            if (!t.empty()) tok.push_back(t);
        if (!saw_header) {
            if (tok.size() != 2 + kSweepMetrics.size() || tok[0] != "method") {
                throw ParseError("sweep table header not found", line_no);
            }
            saw_header = true;
            continue;
        }
        SweepRow row;
        try {
            if (tok.size() < 3) throw ValidationError("short sweep row");
            row.method = std::string(tok[0]);
            parse_method(row.method);
            row.rank = static_cast<std::size_t>(parse_u64(tok[1]));
            if (tok.size() == 3 && tok[2] == "failed") {
                row.failed = true;
            } else {
                if (tok.size() != 2 + 3 * kSweepMetrics.size()) throw ValidationError("sweep row has the wrong width");
                for (std::size_t k = 0; k < kSweepMetrics.size(); ++k) {
                    if (tok[3 + 3 * k] != "±") throw ValidationError("expected '±'");
                    row.stats.push_back({parse_double(tok[2 + 3 * k]), parse_double(tok[4 + 3 * k])});
                }
            }
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
        rows.push_back(std::move(row));
    }
    if (!saw_header) throw ParseError("sweep table header not found", line_no);
    return rows;
}

Significance compare_runs(const RunSummary& a, const RunSummary& b, std::string_view metric, Alternative alternative) {
    const auto va = a.values(metric);
    const auto vb = b.values(metric);
    if (va.size() < 2 || vb.size() < 2) {
        throw ValidationError("comparison needs at least 2 successful seeds per run (got " + std::to_string(va.size()) +
                              " and " + std::to_string(vb.size()) + ")");
    }
    Significance s;
    s.metric = std::string(metric);
    s.alternative = alternative;
    s.test = welch_ttest_one_sided(va, vb, alternative);
    s.significant = s.test.p < 0.05;
    return s;
}

std::string significance_to_text(const Significance& s) {
    std::string out;
    out += "metric=" + s.metric + "\n";
    out += std::string("alternative=") + (s.alternative == Alternative::greater ? "greater" : "less") + "\n";
    out += "t=" + format_double(s.test.t) + "\n";
    out += "dof=" + format_double(s.test.dof) + "\n";
    out += "p=" + format_double(s.test.p) + "\n";
    out += std::string("significant=") + (s.significant ? "true" : "false") + "\n";
    return out;
}

PredictionSet predictions_from_dump(std::span<const PredictionRecord> records, std::string_view column) {
    if (records.empty()) throw ValidationError("prediction dump has no rows");
    std::string col(column);
    if (col == "auto") col = records.front().p_bayes ? "bayes" : records.front().p_ens ? "ens" : "map";
    PredictionSet out;
    for (const auto& r : records) {
        double p = 0.0;
        if (col == "map") {
            p = r.p_map;
        } else if (col == "bayes" || col == "ens") {
            const auto& v = col == "bayes" ? r.p_bayes : r.p_ens;
            if (!v) throw ValidationError("prediction dump row " + r.id + " has no '" + col + "' probability");
            p = *v;
        } else {
            throw ValidationError("unknown probability column '" + col + "' (expected map, bayes, ens or auto)");
        }
        out.push_back({r.label, {1.0 - p, p}});
    }
    return out;
}

void emit_reliability_csv(const std::string& dump_path, std::size_t num_bins, const std::string& out_path,
                          std::string_view column) {
    std::vector<PredictionRecord> records;
    try {
        records = parse_predictions_tsv(read_file(dump_path));
    } catch (const ParseError& e) {
        throw ParseError(dump_path + ": " + e.what(), 0);
    }
    const PredictionSet preds = predictions_from_dump(records, column);
    write_file(out_path, reliability_csv(reliability_bins(preds, num_bins)));
}

}  // namespace bayeslora
