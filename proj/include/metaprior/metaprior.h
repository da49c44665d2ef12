/* C interface to the metaprior library.
 *
 * Every call returns an mp_status. On failure mp_last_error() gives a
 * message for the calling thread. Strings returned through char** are
 * owned by the caller and released with mp_string_free. Handles are
 * released with their matching *_free function; passing NULL is a no-op.
 */
#ifndef METAPRIOR_H
#define METAPRIOR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MP_API __declspec(dllexport)
#else
#define MP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mp_status {
  MP_OK = 0,
  MP_ERR_INVALID_ARGUMENT = 1,
  MP_ERR_DIMENSION_MISMATCH = 2,
  MP_ERR_SIMPLEX_VIOLATION = 3,
  MP_ERR_OUT_OF_SUPPORT = 4,
  MP_ERR_DEGENERATE_GRID = 5,
  MP_ERR_NOT_A_DENSITY = 6,
  MP_ERR_EMPTY_SAMPLE = 7,
  MP_ERR_INVALID_BANDWIDTH = 8,
  MP_ERR_ZERO_MASS = 9,
  MP_ERR_UNSUPPORTED_BANDWIDTH_MATRIX = 10,
  MP_ERR_GRID_MISMATCH = 11,
  MP_ERR_TOO_FEW_SAMPLES = 12,
  MP_ERR_RANK_DEFICIENT = 13,
  MP_ERR_BUDGET_EXCEEDED = 14,
  MP_ERR_DEGENERATE_BELIEF = 15,
  MP_ERR_UNDEFINED_HISTORY = 16,
  MP_ERR_DOMAIN = 17,
  MP_ERR_NON_POSITIVE_INPUT = 18,
  MP_ERR_IO = 19,
  MP_ERR_PARSE = 20,
  MP_ERR_INTERNAL = 99
} mp_status;

typedef struct mp_config mp_config;
typedef struct mp_mdp mp_mdp;
typedef struct mp_candidates mp_candidates;
typedef struct mp_policy mp_policy;
typedef struct mp_manifest mp_manifest;

MP_API const char* mp_version(void);
MP_API const char* mp_status_name(mp_status status);
MP_API const char* mp_last_error(void);
MP_API void mp_string_free(char* text);

/* Experiment configuration (JSON). */
MP_API mp_status mp_config_load(const char* path, mp_config** out);
MP_API mp_status mp_config_parse(const char* json, mp_config** out);
MP_API void mp_config_free(mp_config* config);
/* Replaces the configured seed list. */
MP_API mp_status mp_config_set_seeds(mp_config* config, const uint64_t* seeds, size_t count);
/* JSON object: hash, estimators, N_train, seeds, T, H, csv, manifest. */
MP_API mp_status mp_config_summary(const mp_config* config, char** out_json);
/* MDP of the config's task space at parameter theta. */
MP_API mp_status mp_config_map(const mp_config* config, const double* theta, size_t dim, mp_mdp** out);

/* Training sample, fitted estimate and candidate set of one cell, as JSON. */
MP_API mp_status mp_estimate(const mp_config* config, const char* estimator, size_t n, uint64_t seed,
                             char** out_json);
/* Gaussian KDE of a JSON array of parameter vectors. form is "constant_free"
 * or "exact"; h > 0 fixes the bandwidth instead. lower/upper (dim values
 * each, or NULL) truncate to a box. */
MP_API mp_status mp_kde_fit(const char* samples_json, double alpha, const char* form, double h, const double* lower,
                            const double* upper, char** out_json);
/* Density of a serialized KDE at x. */
MP_API mp_status mp_kde_eval(const char* kde_json, const double* x, size_t dim, double* out);
/* Rank-d' PCA of a JSON array of parameter vectors; includes the empirical
 * risk and the projected samples. */
MP_API mp_status mp_reduce(const char* samples_json, size_t reduced_dim, int centered, char** out_json);

MP_API mp_status mp_mdp_parse(const char* json, mp_mdp** out);
MP_API mp_status mp_mdp_to_json(const mp_mdp* mdp, char** out_json);
MP_API void mp_mdp_free(mp_mdp* mdp);

MP_API mp_status mp_candidates_parse(const char* json, mp_candidates** out);
MP_API mp_status mp_candidates_to_json(const mp_candidates* candidates, char** out_json);
MP_API size_t mp_candidates_size(const mp_candidates* candidates);
MP_API void mp_candidates_free(mp_candidates* candidates);

/* Bayes-optimal planning over total_steps steps. merge != 0 gives a
 * belief-lookup policy, otherwise an explicit history tree. node_budget 0
 * keeps the default. */
MP_API mp_status mp_plan(const mp_candidates* candidates, int total_steps, int merge, int reset_belief,
                         size_t node_budget, mp_policy** out, double* value, size_t* nodes);
MP_API mp_status mp_policy_parse(const char* json, mp_policy** out);
MP_API mp_status mp_policy_to_json(const mp_policy* policy, char** out_json);
MP_API void mp_policy_free(mp_policy* policy);

MP_API mp_status mp_evaluate(const mp_policy* policy, const mp_mdp* mdp, int total_steps, double* value);
MP_API mp_status mp_bayes_loss(const mp_policy* policy, const mp_candidates* prior, int total_steps, double* value);
MP_API mp_status mp_regret(const mp_policy* policy, const mp_candidates* truth, int total_steps, double* value);

/* which: kde-sup | kde-regret | pca-kde-regret | empirical-regret |
 * prior-error-regret | pca-risk | pca-excess-risk | shaped-kde-sup |
 * truncation | cd. Returns the bound record as JSON. */
MP_API mp_status mp_bound(const char* which, const char* params_json, char** out_json);

MP_API mp_status mp_sweep(const mp_config* config, unsigned jobs, mp_manifest** out);
MP_API mp_status mp_manifest_csv(const mp_manifest* manifest, char** out_csv);
MP_API mp_status mp_manifest_json(const mp_manifest* manifest, char** out_json);
/* Human-readable per-(estimator, N) summary with bootstrap intervals. */
MP_API mp_status mp_manifest_summary(const mp_manifest* manifest, char** out_text);
MP_API size_t mp_manifest_failed(const mp_manifest* manifest);
MP_API void mp_manifest_free(mp_manifest* manifest);

MP_API mp_status mp_fit_rate(const double* n, const double* error, size_t count, double* slope, double* intercept,
                             double* r2);
/* Rate fit from a sweep CSV (median metric per N for one estimator) or a
 * two-column n,error CSV. */
MP_API mp_status mp_fit_rate_csv(const char* csv_text, const char* estimator, const char* metric, double* slope,
                                 double* intercept, double* r2);

#ifdef __cplusplus
}
#endif

#endif /* METAPRIOR_H */
