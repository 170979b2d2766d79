/* C interface to the causal discrimination discovery library.
 *
 * All fallible calls return cdd_status and set a thread-local message
 * readable through cdd_last_error(). Handles are opaque; every *_free
 * accepts NULL. Datasets handed to fitting, scoring, and tree learning must
 * come from cdd_dataset_normalize.
 */
#ifndef CDD_H
#define CDD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CDD_API __declspec(dllexport)
#else
#define CDD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cdd_status {
    CDD_OK = 0,
    CDD_ERR_INVALID_ARGUMENT = 1, /* NULL handle, bad enum string, bad key */
    CDD_ERR_RUN = 2,              /* config, data, or numeric failure; see cdd_last_error */
    CDD_ERR_NOMEM = 3,
    CDD_ERR_INTERNAL = 4
} cdd_status;

/* cdd_score_row.group */
#define CDD_GROUP_PROTECTED 0
#define CDD_GROUP_UNPROTECTED 1
/* cdd_score_row.decision */
#define CDD_DECISION_NEGATIVE 0
#define CDD_DECISION_POSITIVE 1
/* cdd_score_row.flag */
#define CDD_FLAG_NEITHER 0
#define CDD_FLAG_DISCRIMINATED 1
#define CDD_FLAG_FAVORED 2

typedef struct cdd_config cdd_config;
typedef struct cdd_dataset cdd_dataset;
typedef struct cdd_model cdd_model;
typedef struct cdd_scores cdd_scores;
typedef struct cdd_tree cdd_tree;

typedef struct cdd_score_row {
    int64_t id;
    int32_t group;
    int32_t decision;
    int32_t flag;
    double propensity;
    double rd;
    double rd_causal;
    double disadvantage;
} cdd_score_row;

/* Message for the last failure on this thread; stage-tagged, e.g.
 * "[dataset] line 3, column 2 ('age'): non-numeric token 'x'". Empty string
 * when no failure happened yet. The pointer stays valid until the next
 * failing call on the same thread. */
CDD_API const char* cdd_last_error(void);
CDD_API const char* cdd_version(void);

/* --- config ------------------------------------------------------------ */
CDD_API cdd_status cdd_config_load(const char* path, cdd_config** out);
/* base_dir resolves relative dataset paths; NULL means the process cwd. */
CDD_API cdd_status cdd_config_parse(const char* json_text, const char* base_dir, cdd_config** out);
/* Override one scalar; keys: k, max_distance, alpha, bins, min_count, seed,
 * fallback, threads. Values are parsed from the string. */
CDD_API cdd_status cdd_config_set(cdd_config* cfg, const char* key, const char* value);
CDD_API void cdd_config_free(cdd_config* cfg);

/* --- dataset ------------------------------------------------------------ */
CDD_API cdd_status cdd_dataset_load(const cdd_config* cfg, cdd_dataset** out);
CDD_API cdd_status cdd_dataset_normalize(const cdd_dataset* ds, cdd_dataset** out);
/* Record count; 0 for NULL. */
CDD_API int64_t cdd_dataset_size(const cdd_dataset* ds);
/* Count records by group and decision; pass -1 to leave a dimension open. */
CDD_API int64_t cdd_dataset_count(const cdd_dataset* ds, int32_t group, int32_t decision);
CDD_API cdd_status cdd_dataset_base_rates(const cdd_dataset* ds, double* p_negative,
                                          double* p_positive);
/* Echo in the delimited table format. */
CDD_API cdd_status cdd_dataset_write(const cdd_dataset* ds, const char* path);
CDD_API void cdd_dataset_free(cdd_dataset* ds);

/* Apply the config's tamper block to ds (pre-normalization data). Outputs
 * the tampered copy, the flipped ids (caller frees via cdd_ids_free) and the
 * number of positive records the conditions matched. Any out pointer may be
 * NULL to skip it. */
CDD_API cdd_status cdd_tamper_run(const cdd_config* cfg, const cdd_dataset* ds,
                                  cdd_dataset** tampered, int64_t** flipped_ids,
                                  size_t* flipped_count, int64_t* matched_positive);
CDD_API void cdd_ids_free(int64_t* ids);

/* --- propensity model --------------------------------------------------- */
CDD_API cdd_status cdd_model_fit(const cdd_config* cfg, const cdd_dataset* normalized,
                                 cdd_model** out);
CDD_API cdd_status cdd_model_save(const cdd_model* model, const char* path);
CDD_API cdd_status cdd_model_open(const char* path, cdd_model** out);
/* Covariate-selection table (attr, ig_group, ig_decision, status); only
 * available on fitted models, not reopened ones. */
CDD_API cdd_status cdd_model_write_selection(const cdd_model* model, const char* path);
CDD_API cdd_status cdd_model_propensity(const cdd_model* model, const cdd_dataset* normalized,
                                        int64_t id, double* e_out);
CDD_API cdd_status cdd_model_meta(const cdd_model* model, int32_t* iterations, double* final_ll,
                                  int32_t* converged);
CDD_API void cdd_model_free(cdd_model* model);

/* --- scoring ------------------------------------------------------------ */
CDD_API cdd_status cdd_scores_compute(const cdd_config* cfg, const cdd_dataset* normalized,
                                      const cdd_model* model, cdd_scores** out);
CDD_API int64_t cdd_scores_count(const cdd_scores* scores);
CDD_API cdd_status cdd_scores_get(const cdd_scores* scores, int64_t index, cdd_score_row* out);
CDD_API cdd_status cdd_scores_write(const cdd_scores* scores, const char* path);
CDD_API void cdd_scores_free(cdd_scores* scores);

/* Propensity-bin trend table; scope is one of "everyone", "discriminated",
 * "favored". Rows cover the all/protected/unprotected filters. */
CDD_API cdd_status cdd_trends_write(const cdd_config* cfg, const cdd_scores* scores,
                                    const char* scope, const char* path);

/* --- trees and rules ---------------------------------------------------- */
/* mode "discrimination" labels protected-negative records with their RD^c;
 * mode "favoritism" uses unprotected-positive records. */
CDD_API cdd_status cdd_tree_learn(const cdd_config* cfg, const cdd_dataset* normalized,
                                  const cdd_scores* scores, const char* mode, cdd_tree** out);
CDD_API cdd_status cdd_tree_write_json(const cdd_tree* tree, const char* path);
CDD_API cdd_status cdd_tree_write_rules(const cdd_tree* tree, const char* path);
CDD_API cdd_status cdd_tree_write_compare(const cdd_tree* tree, const cdd_dataset* normalized,
                                          const cdd_scores* scores, const char* path);
CDD_API void cdd_tree_free(cdd_tree* tree);

/* --- pipeline ----------------------------------------------------------- */
/* Full run: load, normalize, select, fit, score, trends, trees, rules,
 * comparisons, optional tamper pass, manifest. */
CDD_API cdd_status cdd_pipeline_run(const cdd_config* cfg, const char* out_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CDD_H */
