// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//

#include "bayeslora/bayeslora.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "bayeslora/error.hpp"
#include "bayeslora/format.hpp"
#include "bayeslora/harness.hpp"

using namespace bayeslora;

struct bl_config {
    RunConfig value;
};

struct bl_summary {
    RunSummary value;
};

struct bl_predictor {
    std::vector<LoraModel> members;
    bool ensemble = false;
    std::optional<LaplacePosterior> posterior;
    Vocab vocab;
    std::size_t samples = 0;
};

namespace {

thread_local std::string g_last_error;

template <class F>
bl_status guarded(F&& f) noexcept {
    try {
        f();
        return BL_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        switch (e.kind()) {
            case ErrorKind::validation: return BL_ERR_VALIDATION;
            case ErrorKind::io: return BL_ERR_IO;
            default: return BL_ERR_COMPUTATION;
        }
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
    } catch (const std::exception& e) {
        g_last_error = e.what();
    } catch (...) {
        g_last_error = "unknown error";
    }
    return BL_ERR_COMPUTATION;
}

template <class T>
T& need(T* p, const char* what) {
    if (!p) throw ValidationError(std::string(what) + " must not be NULL");
    return *p;
}

std::string need_str(const char* s, const char* what) {
    if (!s) throw ValidationError(std::string(what) + " must not be NULL");
    return s;
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void check_backbone(const RunConfig& config, const FrozenBackbone& bb) {
    if (!(bb.config() == config.backbone) || bb.seed() != config.backbone_seed) {
        throw ValidationError("checkpoint backbone does not match the configured backbone");
    }
}

struct LoadedCheckpoint {
    std::vector<LoraModel> members;
    bool ensemble = false;
    std::optional<LaplacePosterior> posterior;
};

LoadedCheckpoint load_any(const std::string& path) {
    const std::string text = read_file(path);
    const std::string kind = checkpoint_kind(text);
    LoadedCheckpoint out;
    if (kind == "model") {
        out.members.push_back(model_from_text(text));
    } else if (kind == "ensemble") {
        const LoraEnsemble e = ensemble_from_text(text);
        for (const auto& m : e.members()) out.members.push_back(m.model);
        out.ensemble = true;
    } else {
        PosteriorCheckpoint p = posterior_from_text(text);
        out.members.push_back(std::move(p.model));
        out.posterior.emplace(std::move(p.posterior));
    }
    return out;
}

}  // namespace

extern "C" {

const char* bl_version(void) { return BAYESLORA_VERSION; }

const char* bl_last_error_message(void) { return g_last_error.c_str(); }

void bl_string_free(char* s) { std::free(s); }

bl_status bl_config_new(bl_config** out) {
    return guarded([&] { need(out, "out") = new bl_config{}; });
}

bl_status bl_config_load(const char* path, bl_config** out) {
    return guarded([&] {
        auto c = std::make_unique<bl_config>();
        c->value = load_config(need_str(path, "path"));
        need(out, "out") = c.release();
    });
}

bl_status bl_config_parse(const char* text, bl_config** out) {
    return guarded([&] {
        auto c = std::make_unique<bl_config>();
        c->value = parse_config(need_str(text, "text"));
        need(out, "out") = c.release();
    });
}

bl_status bl_config_set(bl_config* config, const char* assignment) {
    return guarded([&] { apply_override(need(config, "config").value, need_str(assignment, "assignment")); });
}

bl_status bl_config_validate(const bl_config* config) {
    return guarded([&] { need(config, "config").value.validate(); });
}

bl_status bl_config_to_text(const bl_config* config, char** out) {
    return guarded([&] { need(out, "out") = dup(config_to_text(need(config, "config").value)); });
}

bl_status bl_config_hash(const bl_config* config, uint64_t* out) {
    return guarded([&] { need(out, "out") = config_hash(need(config, "config").value); });
}

bl_status bl_config_run_directory(const bl_config* config, char** out) {
    return guarded([&] { need(out, "out") = dup(run_directory(need(config, "config").value)); });
}

void bl_config_free(bl_config* config) { delete config; }

bl_status bl_generate_data(const bl_config* config, const char* tsv_path) {
    return guarded([&] {
        const DataSettings& d = need(config, "config").value.data;
        const std::string path = need_str(tsv_path, "tsv_path");
        save_tsv(generate_synthetic(d.n_proteins, d.n_pairs, d.latent_dim, d.seed).dataset, path);
    });
}

bl_status bl_train(const bl_config* config, uint64_t seed, const char* checkpoint_path, const char* loss_csv_path) {
    return guarded([&] {
        const RunConfig& c = need(config, "config").value;
        const std::string path = need_str(checkpoint_path, "checkpoint_path");
        c.validate();
        const PreparedData data = prepare_data(c);
        TrainConfig tc = c.train;
        tc.seed = seed;
        const TrainResult r = train_lora(init_backbone(c.backbone, c.backbone_seed), c.adapter, data.train_encoded, tc);
        save_model(r.model, path);
        if (loss_csv_path) write_file(loss_csv_path, loss_log_csv(r.loss_log));
    });
}

bl_status bl_train_ensemble(const bl_config* config, uint64_t seed, const char* checkpoint_path) {
    return guarded([&] {
        const RunConfig& c = need(config, "config").value;
        const std::string path = need_str(checkpoint_path, "checkpoint_path");
        c.validate();
        const PreparedData data = prepare_data(c);
        const auto seeds = default_member_seeds(seed, c.ensemble_size);
        const EnsembleTrainResult r = train_ensemble(init_backbone(c.backbone, c.backbone_seed), c.adapter,
                                                     data.train_encoded, c.train, c.ensemble_size, seeds);
        save_ensemble(r.ensemble, path);
    });
}

bl_status bl_laplace_fit(const bl_config* config, const char* model_checkpoint, const char* posterior_path) {
    return guarded([&] {
        const RunConfig& c = need(config, "config").value;
        const std::string in = need_str(model_checkpoint, "model_checkpoint");
        const std::string out = need_str(posterior_path, "posterior_path");
        c.validate();
        const LoraModel model = load_model(in);
        check_backbone(c, model.backbone());
        const PreparedData data = prepare_data(c);
        const LaplacePosterior post(model.flatten_params(), accumulate_kfac(model, data.train_encoded, c.kfac),
                                    c.prior_precision);
        save_posterior(model, post, out);
    });
}

bl_status bl_evaluate(const bl_config* config, const char* checkpoint_path, uint64_t seed,
                      const char* predictions_path, const char* metrics_path, const char* reliability_path) {
    return guarded([&] {
        const RunConfig& c = need(config, "config").value;
        c.validate();
        const LoadedCheckpoint ck = load_any(need_str(checkpoint_path, "checkpoint_path"));
        check_backbone(c, ck.members.front().backbone());
        const PreparedData data = prepare_data(c);
        const Evaluation ev = evaluate_models(ck.members, ck.ensemble, ck.posterior ? &*ck.posterior : nullptr,
                                              data.test_encoded, c.samples, c.bins, seed);
        if (predictions_path) write_file(predictions_path, predictions_tsv(ev.records));
        if (metrics_path) write_file(metrics_path, report_to_text(ev.report));
        if (reliability_path) write_file(reliability_path, reliability_csv(ev.report.reliability));
    });
}

bl_status bl_run(const bl_config* config, bl_summary** out) {
    return guarded([&] {
        const RunConfig& c = need(config, "config").value;
        need(out, "out");
        auto s = std::make_unique<bl_summary>();
        s->value = run_method(c);
        *out = s.release();
    });
}

bl_status bl_summary_load(const char* path, bl_summary** out) {
    return guarded([&] {
        auto s = std::make_unique<bl_summary>();
        s->value = load_summary(need_str(path, "path"));
        need(out, "out") = s.release();
    });
}

bl_status bl_summary_to_text(const bl_summary* summary, char** out) {
    return guarded([&] { need(out, "out") = dup(summary_to_text(need(summary, "summary").value)); });
}

bl_status bl_summary_stat(const bl_summary* summary, const char* metric, double* mean, double* std_dev) {
    return guarded([&] {
        const MetricStat s = need(summary, "summary").value.stat(need_str(metric, "metric"));
        need(mean, "mean") = s.mean;
        need(std_dev, "std_dev") = s.std;
    });
}

bl_status bl_summary_seed_count(const bl_summary* summary, size_t* total, size_t* succeeded) {
    return guarded([&] {
        const RunSummary& s = need(summary, "summary").value;
        need(total, "total") = s.per_seed.size();
        need(succeeded, "succeeded") = s.values("acc").size();
    });
}

void bl_summary_free(bl_summary* summary) { delete summary; }

bl_status bl_sweep_rank(const bl_config* config, const size_t* ranks, size_t num_ranks, char** table) {
    return guarded([&] {
        const RunConfig& c = need(config, "config").value;
        need(table, "table");
        if (num_ranks && !ranks) throw ValidationError("ranks must not be NULL");
        const std::vector<std::size_t> r = num_ranks ? std::vector<std::size_t>(ranks, ranks + num_ranks) : kDefaultRanks;
        *table = dup(sweep_table(sweep_rank(c, r)));
    });
}

bl_status bl_compare(const char* summary_a, const char* summary_b, const char* metric, bl_alternative alternative,
                     char** report, int* significant) {
    return guarded([&] {
        if (alternative != BL_GREATER && alternative != BL_LESS) throw ValidationError("unknown alternative");
        const RunSummary a = load_summary(need_str(summary_a, "summary_a"));
        const RunSummary b = load_summary(need_str(summary_b, "summary_b"));
        const Significance s = compare_runs(a, b, need_str(metric, "metric"),
                                            alternative == BL_GREATER ? Alternative::greater : Alternative::less);
        if (significant) *significant = s.significant ? 1 : 0;
        if (report) *report = dup(significance_to_text(s));
    });
}

bl_status bl_reliability(const char* predictions_path, size_t num_bins, const char* csv_path, const char* column) {
    return guarded([&] {
        emit_reliability_csv(need_str(predictions_path, "predictions_path"), num_bins, need_str(csv_path, "csv_path"),
                             column ? column : "auto");
    });
}

bl_status bl_predictor_load(const bl_config* config, const char* checkpoint_path, bl_predictor** out) {
    return guarded([&] {
        const RunConfig& c = need(config, "config").value;
        need(out, "out");
        LoadedCheckpoint ck = load_any(need_str(checkpoint_path, "checkpoint_path"));
        auto p = std::make_unique<bl_predictor>();
        p->members = std::move(ck.members);
        p->ensemble = ck.ensemble;
        p->posterior = std::move(ck.posterior);
        p->vocab = c.data.vocab_path.empty() ? Vocab::standard() : Vocab::load(c.data.vocab_path);
        if (p->vocab.size() > p->members.front().backbone().config().vocab_size) {
            throw ValidationError("vocabulary does not fit the checkpoint backbone");
        }
        p->samples = c.samples;
        *out = p.release();
    });
}

bl_status bl_predictor_predict(const bl_predictor* predictor, const char* protein_a, const char* protein_b,
                               uint64_t seed, double* probability) {
    return guarded([&] {
        const bl_predictor& p = need(predictor, "predictor");
        need(probability, "probability");
        const PairExample ex{ProteinId(need_str(protein_a, "protein_a")), ProteinId(need_str(protein_b, "protein_b")),
                             0};
        const LoraModel& map_model = p.members.front();
        const auto tokens = encode_pair(ex, p.vocab, map_model.backbone().config().max_seq_len);
        if (p.posterior) {
            *probability = bayes_predict(map_model, *p.posterior, tokens, p.samples, seed).probability[1];
        } else if (p.ensemble) {
            std::vector<Logits> probs;
            for (const auto& m : p.members) probs.push_back(softmax(model_forward(m, tokens)));
            *probability = average_probabilities(probs)[1];
        } else {
            *probability = softmax(model_forward(map_model, tokens))[1];
        }
    });
}

void bl_predictor_free(bl_predictor* predictor) { delete predictor; }

}  // extern "C"
