/* Copyright (c) 2026, The bayeslora authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of libbayeslora. Every function that can fail returns a bl_status;
 * on failure bl_last_error_message() describes the error for the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * bl_string_free().
 */

#ifndef BAYESLORA_H
#define BAYESLORA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BL_API __declspec(dllexport)
#else
#define BL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bl_status {
    BL_OK = 0,
    BL_ERR_VALIDATION = 1,  /* bad argument, configuration or input file contents */
    BL_ERR_COMPUTATION = 2, /* numerical failure or undefined metric */
    BL_ERR_IO = 3           /* file could not be read or written */
} bl_status;

typedef enum bl_alternative { BL_GREATER = 0, BL_LESS = 1 } bl_alternative;

typedef struct bl_config bl_config;
typedef struct bl_summary bl_summary;
typedef struct bl_predictor bl_predictor;

BL_API const char* bl_version(void);
/* Message of the last failed call on this thread; "" if none. */
BL_API const char* bl_last_error_message(void);
BL_API void bl_string_free(char* s);

/* Configuration: ini text with [data] [backbone] [adapter] [train] [ensemble]
 * [laplace] [predict] [metrics] [run] sections. */
BL_API bl_status bl_config_new(bl_config** out);
BL_API bl_status bl_config_load(const char* path, bl_config** out);
BL_API bl_status bl_config_parse(const char* text, bl_config** out);
/* One "section.key=value" override. */
BL_API bl_status bl_config_set(bl_config* config, const char* assignment);
BL_API bl_status bl_config_validate(const bl_config* config);
BL_API bl_status bl_config_to_text(const bl_config* config, char** out);
BL_API bl_status bl_config_hash(const bl_config* config, uint64_t* out);
BL_API bl_status bl_config_run_directory(const bl_config* config, char** out);
BL_API void bl_config_free(bl_config* config);

/* Writes the configured synthetic dataset as protein_a/protein_b/label TSV. */
BL_API bl_status bl_generate_data(const bl_config* config, const char* tsv_path);

/* Trains one adapter set on the training split with the given seed. loss_csv_path may be NULL. */
BL_API bl_status bl_train(const bl_config* config, uint64_t seed, const char* checkpoint_path,
                          const char* loss_csv_path);
/* Trains ensemble.size members with seeds derived from `seed`. */
BL_API bl_status bl_train_ensemble(const bl_config* config, uint64_t seed, const char* checkpoint_path);
/* Fits the K-FAC Laplace posterior around a model checkpoint. */
BL_API bl_status bl_laplace_fit(const bl_config* config, const char* model_checkpoint, const char* posterior_path);
/* Scores any checkpoint on the test split. Output paths may be NULL. */
BL_API bl_status bl_evaluate(const bl_config* config, const char* checkpoint_path, uint64_t seed,
                             const char* predictions_path, const char* metrics_path, const char* reliability_path);

/* Runs every seed of the configured method, writing artifacts under the run directory. */
BL_API bl_status bl_run(const bl_config* config, bl_summary** out);
BL_API bl_status bl_summary_load(const char* path, bl_summary** out);
BL_API bl_status bl_summary_to_text(const bl_summary* summary, char** out);
/* Mean and sample standard deviation over successful seeds. */
BL_API bl_status bl_summary_stat(const bl_summary* summary, const char* metric, double* mean, double* std_dev);
BL_API bl_status bl_summary_seed_count(const bl_summary* summary, size_t* total, size_t* succeeded);
BL_API void bl_summary_free(bl_summary* summary);

/* Runs single, ensemble and Bayesian LoRA at each rank; returns the table text. */
BL_API bl_status bl_sweep_rank(const bl_config* config, const size_t* ranks, size_t num_ranks, char** table);

/* One-sided Welch test between the per-seed values of two run summaries. */
BL_API bl_status bl_compare(const char* summary_a, const char* summary_b, const char* metric,
                            bl_alternative alternative, char** report, int* significant);

/* Reliability CSV from a prediction dump; column is "auto", "map", "bayes" or "ens". */
BL_API bl_status bl_reliability(const char* predictions_path, size_t num_bins, const char* csv_path,
                                const char* column);

/* Loads a model, ensemble or posterior checkpoint for single-pair prediction. */
BL_API bl_status bl_predictor_load(const bl_config* config, const char* checkpoint_path, bl_predictor** out);
/* Probability that the pair interacts. `seed` drives the posterior samples. */
BL_API bl_status bl_predictor_predict(const bl_predictor* predictor, const char* protein_a, const char* protein_b,
                                      uint64_t seed, double* probability);
BL_API void bl_predictor_free(bl_predictor* predictor);

#ifdef __cplusplus
}
#endif

#endif /* BAYESLORA_H */
