#ifndef SBR_SBR_H
#define SBR_SBR_H

/* Scalable Bayesian regression with source-specific shrinkage.
 *
 * Every function that can fail returns an sbr_status; on failure the
 * thread-local message from sbr_last_error() describes it in one line.
 * Handles are opaque and owned by the caller unless documented as borrowed.
 * Matrices crossing this API are dense, row-major doubles. */

#include <stddef.h>
#include <stdint.h>

#if defined(SBR_BUILDING_LIBRARY)
#define SBR_API __attribute__((visibility("default")))
#else
#define SBR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sbr_status {
  SBR_OK = 0,
  SBR_ERR_USAGE = 1,
  SBR_ERR_DATA = 2,
  SBR_ERR_NUMERICAL = 3,
  SBR_ERR_IO = 4,
  SBR_ERR_DOMAIN = 5,
  SBR_ERR_INTERNAL = 6
} sbr_status;

typedef enum sbr_estimator { SBR_EST_CV = 0, SBR_EST_ML = 1, SBR_EST_MAP = 2, SBR_EST_USER = 3 } sbr_estimator;

typedef enum sbr_control {
  SBR_CONTROL_NONE = 0,
  SBR_CONTROL_SQRTN = 1,
  SBR_CONTROL_LOGN = 2,
  SBR_CONTROL_SQRTLOGN = 3
} sbr_control;

typedef enum sbr_sparse_method { SBR_SPARSE_GENERAL = 0, SBR_SPARSE_RELAXED = 1 } sbr_sparse_method;

typedef enum sbr_penalty_mode {
  SBR_PENALTY_ADAPTIVE = 0, /* |beta_jk|^{-w_k}, optionally times `alpha` */
  SBR_PENALTY_SCALAR = 1,   /* the same `alpha` for every coefficient */
  SBR_PENALTY_PCR = 2       /* scalar alpha derived from `pcr_xi` */
} sbr_penalty_mode;

typedef enum sbr_kl_scale { SBR_KL_INTEGRATED = 0, SBR_KL_POSTERIOR_MEAN = 1, SBR_KL_POSTERIOR_MODE = 2 } sbr_kl_scale;

typedef struct sbr_dataset sbr_dataset;
typedef struct sbr_gram sbr_gram;
typedef struct sbr_fit sbr_fit;
typedef struct sbr_sparse sbr_sparse;
typedef struct sbr_sim sbr_sim;

SBR_API const char* sbr_version(void);
/* Library versions the core was built against, as "key=value" pairs. */
SBR_API const char* sbr_build_info(void);
SBR_API const char* sbr_last_error(void);
SBR_API const char* sbr_status_name(sbr_status status);

/* ---- datasets ---- */

/* Loads K sources (CSV or SBRM, detected per file) and an optional response
 * (NULL for prediction inputs). The result is unstandardized. */
SBR_API sbr_status sbr_dataset_load(const char* const* names, const char* const* paths, size_t k,
                                    const char* response_path, sbr_dataset** out);

/* Copies in-memory data; x[k] is n x dims[k] row-major. y may be NULL. */
SBR_API sbr_status sbr_dataset_from_arrays(size_t n, const double* y, size_t k, const char* const* names,
                                           const size_t* dims, const double* const* x, sbr_dataset** out);

/* Centers and scales all columns and the response. With drop_constant set,
 * constant columns are zeroed and excluded instead of rejected; their count
 * is written to *dropped when it is non-NULL. */
SBR_API sbr_status sbr_dataset_standardize(const sbr_dataset* ds, int drop_constant, sbr_dataset** out,
                                           size_t* dropped);

/* Writes y.sbrm (when a response is present), <name>.sbrm per source and
 * sources.list with the source names in order. */
SBR_API sbr_status sbr_dataset_save(const sbr_dataset* ds, const char* dir);

SBR_API size_t sbr_dataset_n(const sbr_dataset* ds);
SBR_API size_t sbr_dataset_k(const sbr_dataset* ds);
SBR_API size_t sbr_dataset_source_dim(const sbr_dataset* ds, size_t k);
SBR_API const char* sbr_dataset_source_name(const sbr_dataset* ds, size_t k);
/* Copies the response (length n); SBR_ERR_USAGE when there is none. */
SBR_API sbr_status sbr_dataset_response(const sbr_dataset* ds, double* out, size_t len);
SBR_API void sbr_dataset_free(sbr_dataset* ds);

/* ---- Gram matrices ---- */

/* Per-source X_k X_k^T of a standardized dataset. cache_dir (may be NULL)
 * holds <hash>.gram files reused across runs. */
SBR_API sbr_status sbr_gram_build(const sbr_dataset* standardized, size_t workers, const char* cache_dir,
                                  sbr_gram** out);
SBR_API void sbr_gram_free(sbr_gram* gram);

/* ---- shrinkage tuning ---- */

typedef struct sbr_tune_options {
  sbr_estimator estimator;
  double log_lower; /* bounds on log(lambda) */
  double log_upper;
  int restarts;
  double tolerance;
  int max_evals; /* per restart */
  uint64_t seed;
  int tie_sources; /* one shared lambda (classical ridge) */
  int intercept;   /* integrate out an unpenalized intercept (default 1) */
} sbr_tune_options;

SBR_API void sbr_tune_options_default(sbr_tune_options* opts);

typedef struct sbr_tune_result {
  double objective; /* minimized form: CV RSS, or the negated log objective */
  int evals;
  int converged;
  int at_upper_bound;
} sbr_tune_result;

/* Writes the K tuned shrinkage levels to lambda_out. When trace_csv is
 * non-NULL every objective evaluation is written there as
 * "eval,lambda_1..lambda_K,objective". */
SBR_API sbr_status sbr_tune(const sbr_gram* gram, const sbr_dataset* standardized, const sbr_tune_options* opts,
                            const char* trace_csv, double* lambda_out, size_t k, sbr_tune_result* result);

/* ---- dense fits ---- */

typedef struct sbr_fit_options {
  int with_variances;
  size_t workers;
  size_t block_size; /* 0 selects the default */
} sbr_fit_options;

SBR_API void sbr_fit_options_default(sbr_fit_options* opts);

SBR_API sbr_status sbr_fit_compute(const sbr_gram* gram, const sbr_dataset* standardized, const double* lambda,
                                   size_t k, sbr_estimator provenance, const sbr_fit_options* opts, sbr_fit** out);

SBR_API sbr_status sbr_fit_save(const sbr_fit* fit, const char* path);

/* Loads a fit file, or a sparse-solution file (the sparse coefficients then
 * act as the fit's coefficients for prediction). */
SBR_API sbr_status sbr_fit_load(const char* path, sbr_fit** out);

typedef struct sbr_fit_summary {
  size_t n, p, k;
  double sigma2_shape; /* a */
  double sigma2_scale; /* b */
  double q_lambda;
  double log_marginal;
  int has_variances;
  int is_sparse;
} sbr_fit_summary;

SBR_API sbr_status sbr_fit_get_summary(const sbr_fit* fit, sbr_fit_summary* out);
SBR_API sbr_status sbr_fit_lambda(const sbr_fit* fit, double* out, size_t k);
SBR_API sbr_status sbr_fit_coefficients(const sbr_fit* fit, double* out, size_t p);
SBR_API sbr_status sbr_fit_variances(const sbr_fit* fit, double* out, size_t p);
/* Training source names and column counts, in model order. */
SBR_API const char* sbr_fit_source_name(const sbr_fit* fit, size_t k);
SBR_API size_t sbr_fit_source_dim(const sbr_fit* fit, size_t k);

/* Predicts raw (unstandardized) inputs on the original response scale. The
 * input must have the training sources' column counts, in order. */
SBR_API sbr_status sbr_fit_predict(const sbr_fit* fit, const sbr_dataset* raw, double* out, size_t n);
SBR_API void sbr_fit_free(sbr_fit* fit);

/* ---- sparsification ---- */

typedef struct sbr_sparse_options {
  sbr_sparse_method method;
  sbr_control control; /* relaxed method only */
  sbr_penalty_mode penalty;
  double alpha;  /* scalar penalty, or multiplier on adaptive penalties */
  double pcr_xi; /* SBR_PENALTY_PCR */
  sbr_kl_scale kl_scale;
  double tol; /* general method */
  int max_sweeps;
} sbr_sparse_options;

SBR_API void sbr_sparse_options_default(sbr_sparse_options* opts);

/* The relaxed method needs a fit with variances. The general method also
 * needs the Gram matrices and standardized training data of the fit. */
SBR_API sbr_status sbr_sparsify(const sbr_fit* fit, const sbr_gram* gram, const sbr_dataset* standardized,
                                const sbr_sparse_options* opts, sbr_sparse** out);

typedef struct sbr_sparse_summary {
  size_t p;
  size_t nonzero;
  double sparsity;
  double f_n;
  int converged;
  int sweeps;
  const char* method; /* static string */
} sbr_sparse_summary;

SBR_API sbr_status sbr_sparse_get_summary(const sbr_sparse* s, sbr_sparse_summary* out);
SBR_API sbr_status sbr_sparse_coefficients(const sbr_sparse* s, double* out, size_t p);
SBR_API sbr_status sbr_sparse_save(const sbr_sparse* s, const char* path);
SBR_API sbr_status sbr_sparse_predict(const sbr_sparse* s, const sbr_dataset* raw, double* out, size_t n);
SBR_API void sbr_sparse_free(sbr_sparse* s);

/* ---- simulation ---- */

typedef enum sbr_scenario { SBR_SCENARIO_SPARSE = 0, SBR_SCENARIO_MEDIUM = 1, SBR_SCENARIO_DENSE = 2 } sbr_scenario;
typedef enum sbr_correlation { SBR_CORR_LOW = 0, SBR_CORR_HIGH = 1 } sbr_correlation;

typedef struct sbr_sim_config {
  size_t n_train, n_test;
  size_t p_cl, p_rna, p_snp; /* 0 omits the source */
  size_t snp_blocks;
  size_t rna_block_size;
  double s_cl, s_rna, s_snp;
  double gnd_shape, gnd_scale, snp_scale_factor;
  double cl_cov_scale;
  double noise_sd;
  uint64_t seed;
  /* Optional SBRM files with user covariances replacing the synthetic CL /
   * RNA draws (NULL for synthetic); sizes must match p_cl / p_rna. */
  const char* cl_covariance_path;
  const char* rna_covariance_path;
} sbr_sim_config;

/* Full-size protocol defaults for a scenario and correlation level. */
SBR_API sbr_status sbr_sim_config_default(sbr_scenario scenario, sbr_correlation correlation, uint64_t seed,
                                          sbr_sim_config* out);

/* Divides p_rna and p_snp by `factor` (>= 1) and keeps the block structure. */
SBR_API sbr_status sbr_sim_config_scale(sbr_sim_config* cfg, double factor);

SBR_API sbr_status sbr_simulate(const sbr_sim_config* cfg, size_t workers, sbr_sim** out);
/* Borrowed; valid until sbr_sim_free. */
SBR_API const sbr_dataset* sbr_sim_train(const sbr_sim* sim);
SBR_API const sbr_dataset* sbr_sim_test(const sbr_sim* sim);
SBR_API size_t sbr_sim_p(const sbr_sim* sim);
SBR_API sbr_status sbr_sim_truth(const sbr_sim* sim, double* beta, unsigned char* support, size_t p);
/* Writes train/, test/ and truth.csv under dir. */
SBR_API sbr_status sbr_sim_save(const sbr_sim* sim, const char* dir);
SBR_API void sbr_sim_free(sbr_sim* sim);

/* ---- benchmark ---- */

#define SBR_BENCH_MAX_K 8

typedef struct sbr_bench_row {
  char method[8]; /* ridge, sbr, ssbr, cssbr */
  double test_correlation;
  double sparsity; /* fraction of nonzero coefficients */
  double auc;
  size_t k;
  double lambda[SBR_BENCH_MAX_K];
  double seconds;
} sbr_bench_row;

/* Simulates one replicate and evaluates every method on its test rows.
 * `rows` must hold at least 4 entries; *count receives the number written.
 * `tune` may be NULL for defaults (its estimator drives the SBR fit). */
SBR_API sbr_status sbr_bench_run(const sbr_sim_config* cfg, const sbr_tune_options* tune, size_t workers,
                                 sbr_bench_row* rows, size_t capacity, size_t* count);

/* ---- metrics ---- */

SBR_API sbr_status sbr_metric_correlation(const double* a, const double* b, size_t len, double* out);
SBR_API sbr_status sbr_metric_auc(const double* scores, const unsigned char* truth, size_t len, double* out);

#ifdef __cplusplus
}
#endif

#endif /* SBR_SBR_H */
