#include "sbr/sbr.h"

#include "core/bench.hpp"
#include "core/data_model.hpp"
#include "core/fit.hpp"
#include "core/gram.hpp"
#include "core/matrix_io.hpp"
#include "core/model_io.hpp"
#include "core/simgen.hpp"
#include "core/sparsify.hpp"
#include "core/tuning.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>

struct sbr_dataset {
  sbr::MultiSourceDataset ds;
};

struct sbr_gram {
  sbr::GramCache cache;
};

struct sbr_fit {
  sbr::TrainedModel model;
  // Set when loaded from a sparse-solution file; used for prediction.
  std::optional<sbr::Vector> sparse_coef;
};

struct sbr_sparse {
  sbr::SparseModel model;
};

struct sbr_sim {
  sbr_dataset train;
  sbr_dataset test;
  sbr::SimTruth truth;
};

namespace {

thread_local std::string g_last_error;

sbr_status to_status(sbr::ErrorKind k) {
  switch (k) {
    case sbr::ErrorKind::Usage: return SBR_ERR_USAGE;
    case sbr::ErrorKind::Data: return SBR_ERR_DATA;
    case sbr::ErrorKind::Numerical: return SBR_ERR_NUMERICAL;
    case sbr::ErrorKind::Domain: return SBR_ERR_DOMAIN;
    case sbr::ErrorKind::Io: return SBR_ERR_IO;
  }
  return SBR_ERR_INTERNAL;
}

template <class Fn>
sbr_status guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SBR_OK;
  } catch (const sbr::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SBR_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SBR_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) sbr::fail(sbr::ErrorKind::Usage, std::string(what) + " must not be NULL");
}

void need_len(size_t got, sbr::Index want, const char* what) {
  if (static_cast<sbr::Index>(got) != want)
    sbr::fail(sbr::ErrorKind::Usage, std::string(what) + ": buffer length " + std::to_string(got) + ", expected " +
                                         std::to_string(want));
}

void copy_out(const sbr::Vector& v, double* out, size_t len, const char* what) {
  need(out, what);
  need_len(len, v.size(), what);
  std::copy(v.data(), v.data() + v.size(), out);
}

sbr::Estimator to_estimator(sbr_estimator e) {
  switch (e) {
    case SBR_EST_CV: return sbr::Estimator::CV;
    case SBR_EST_ML: return sbr::Estimator::ML;
    case SBR_EST_MAP: return sbr::Estimator::MAP;
    case SBR_EST_USER: return sbr::Estimator::User;
  }
  sbr::fail(sbr::ErrorKind::Usage, "unknown estimator");
}

sbr::Control to_control(sbr_control c) {
  switch (c) {
    case SBR_CONTROL_NONE: return sbr::Control::None;
    case SBR_CONTROL_SQRTN: return sbr::Control::SqrtN;
    case SBR_CONTROL_LOGN: return sbr::Control::LogN;
    case SBR_CONTROL_SQRTLOGN: return sbr::Control::SqrtLogN;
  }
  sbr::fail(sbr::ErrorKind::Usage, "unknown control");
}

sbr::KlScale to_kl_scale(sbr_kl_scale s) {
  switch (s) {
    case SBR_KL_INTEGRATED: return sbr::KlScale::Integrated;
    case SBR_KL_POSTERIOR_MEAN: return sbr::KlScale::PosteriorMean;
    case SBR_KL_POSTERIOR_MODE: return sbr::KlScale::PosteriorMode;
  }
  sbr::fail(sbr::ErrorKind::Usage, "unknown KL scale");
}

std::vector<sbr::Matrix> raw_blocks(const sbr::MultiSourceDataset& ds) {
  std::vector<sbr::Matrix> out;
  for (const auto& s : ds.sources()) out.push_back(s.x);
  return out;
}

void predict_into(const sbr::TrainedModel& m, const sbr::Vector& coef, const sbr_dataset* raw, double* out,
                  size_t n) {
  need(raw, "input dataset");
  const auto blocks = raw_blocks(raw->ds);
  copy_out(sbr::predict_raw(m, coef, blocks), out, n, "prediction output");
}

sbr::SimConfig to_sim_config(const sbr_sim_config& c) {
  sbr::SimConfig s;
  s.n_train = static_cast<sbr::Index>(c.n_train);
  s.n_test = static_cast<sbr::Index>(c.n_test);
  s.p_cl = static_cast<sbr::Index>(c.p_cl);
  s.p_rna = static_cast<sbr::Index>(c.p_rna);
  s.p_snp = static_cast<sbr::Index>(c.p_snp);
  s.snp_blocks = static_cast<sbr::Index>(c.snp_blocks);
  s.rna_block_size = static_cast<sbr::Index>(c.rna_block_size);
  s.s_cl = c.s_cl;
  s.s_rna = c.s_rna;
  s.s_snp = c.s_snp;
  s.gnd_shape = c.gnd_shape;
  s.gnd_scale = c.gnd_scale;
  s.snp_scale_factor = c.snp_scale_factor;
  s.cl_cov_scale = c.cl_cov_scale;
  s.noise_sd = c.noise_sd;
  s.seed = c.seed;
  if (c.cl_covariance_path != nullptr) s.cl_covariance = sbr::read_sbrm(std::filesystem::path(c.cl_covariance_path));
  if (c.rna_covariance_path != nullptr) s.rna_covariance = sbr::read_sbrm(std::filesystem::path(c.rna_covariance_path));
  return s;
}

void from_sim_config(const sbr::SimConfig& s, sbr_sim_config& c) {
  c.n_train = static_cast<size_t>(s.n_train);
  c.n_test = static_cast<size_t>(s.n_test);
  c.p_cl = static_cast<size_t>(s.p_cl);
  c.p_rna = static_cast<size_t>(s.p_rna);
  c.p_snp = static_cast<size_t>(s.p_snp);
  c.snp_blocks = static_cast<size_t>(s.snp_blocks);
  c.rna_block_size = static_cast<size_t>(s.rna_block_size);
  c.s_cl = s.s_cl;
  c.s_rna = s.s_rna;
  c.s_snp = s.s_snp;
  c.gnd_shape = s.gnd_shape;
  c.gnd_scale = s.gnd_scale;
  c.snp_scale_factor = s.snp_scale_factor;
  c.cl_cov_scale = s.cl_cov_scale;
  c.noise_sd = s.noise_sd;
  c.seed = s.seed;
  c.cl_covariance_path = nullptr;
  c.rna_covariance_path = nullptr;
}

void save_dataset(const sbr::MultiSourceDataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) sbr::fail(sbr::ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  if (ds.has_response()) sbr::write_sbrm(dir / "y.sbrm", sbr::Matrix(ds.y()));
  std::ofstream list(dir / "sources.list", std::ios::trunc);
  for (const auto& s : ds.sources()) {
    sbr::write_sbrm(dir / (s.name + ".sbrm"), s.x);
    list << s.name << '\n';
  }
  if (!list) sbr::fail(sbr::ErrorKind::Io, "cannot write " + (dir / "sources.list").string());
}

}  // namespace

extern "C" {

const char* sbr_version(void) { return "0.1.0"; }

const char* sbr_build_info(void) {
  static const std::string info = "eigen=" + std::to_string(EIGEN_WORLD_VERSION) + "." +
                                  std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION) +
                                  " compiler=" + __VERSION__;
  return info.c_str();
}

const char* sbr_last_error(void) { return g_last_error.c_str(); }

const char* sbr_status_name(sbr_status status) {
  switch (status) {
    case SBR_OK: return "ok";
    case SBR_ERR_USAGE: return "usage";
    case SBR_ERR_DATA: return "data";
    case SBR_ERR_NUMERICAL: return "numerical";
    case SBR_ERR_IO: return "io";
    case SBR_ERR_DOMAIN: return "domain";
    case SBR_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

/* ---- datasets ---- */

sbr_status sbr_dataset_load(const char* const* names, const char* const* paths, size_t k, const char* response_path,
                            sbr_dataset** out) {
  return guard([&] {
    need(out, "out");
    if (k > 0) {
      need(names, "names");
      need(paths, "paths");
    }
    std::vector<sbr::SourceFile> files;
    for (size_t i = 0; i < k; ++i) {
      need(names[i], "source name");
      need(paths[i], "source path");
      files.push_back({names[i], paths[i]});
    }
    std::optional<std::filesystem::path> resp;
    if (response_path != nullptr) resp = response_path;
    auto h = std::make_unique<sbr_dataset>();
    h->ds = sbr::load_dataset(files, resp);
    *out = h.release();
  });
}

sbr_status sbr_dataset_from_arrays(size_t n, const double* y, size_t k, const char* const* names, const size_t* dims,
                                   const double* const* x, sbr_dataset** out) {
  return guard([&] {
    need(out, "out");
    if (k > 0) {
      need(names, "names");
      need(dims, "dims");
      need(x, "x");
    }
    std::vector<sbr::Source> sources;
    const auto rows = static_cast<sbr::Index>(n);
    for (size_t i = 0; i < k; ++i) {
      need(names[i], "source name");
      need(x[i], "source data");
      sbr::Source s;
      s.name = names[i];
      const auto cols = static_cast<sbr::Index>(dims[i]);
      using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      s.x = Eigen::Map<const RowMajor>(x[i], rows, cols);
      sources.push_back(std::move(s));
    }
    sbr::Vector yv;
    if (y != nullptr) yv = Eigen::Map<const sbr::Vector>(y, rows);
    auto h = std::make_unique<sbr_dataset>();
    h->ds = sbr::MultiSourceDataset(std::move(yv), std::move(sources));
    *out = h.release();
  });
}

sbr_status sbr_dataset_standardize(const sbr_dataset* ds, int drop_constant, sbr_dataset** out, size_t* dropped) {
  return guard([&] {
    need(ds, "dataset");
    need(out, "out");
    auto h = std::make_unique<sbr_dataset>();
    h->ds = sbr::standardize(ds->ds, drop_constant != 0);
    if (dropped != nullptr) {
      size_t c = 0;
      for (const auto& s : h->ds.sources())
        for (const auto& st : s.stats) c += st.kept ? 0 : 1;
      *dropped = c;
    }
    *out = h.release();
  });
}

sbr_status sbr_dataset_save(const sbr_dataset* ds, const char* dir) {
  return guard([&] {
    need(ds, "dataset");
    need(dir, "dir");
    save_dataset(ds->ds, dir);
  });
}

size_t sbr_dataset_n(const sbr_dataset* ds) { return ds ? static_cast<size_t>(ds->ds.n()) : 0; }

size_t sbr_dataset_k(const sbr_dataset* ds) { return ds ? static_cast<size_t>(ds->ds.k()) : 0; }

size_t sbr_dataset_source_dim(const sbr_dataset* ds, size_t k) {
  if (!ds || k >= static_cast<size_t>(ds->ds.k())) return 0;
  return static_cast<size_t>(ds->ds.p(static_cast<sbr::Index>(k)));
}

const char* sbr_dataset_source_name(const sbr_dataset* ds, size_t k) {
  if (!ds || k >= static_cast<size_t>(ds->ds.k())) return nullptr;
  return ds->ds.source(static_cast<sbr::Index>(k)).name.c_str();
}

sbr_status sbr_dataset_response(const sbr_dataset* ds, double* out, size_t len) {
  return guard([&] {
    need(ds, "dataset");
    if (!ds->ds.has_response()) sbr::fail(sbr::ErrorKind::Usage, "dataset has no response");
    copy_out(ds->ds.y(), out, len, "response");
  });
}

void sbr_dataset_free(sbr_dataset* ds) { delete ds; }

/* ---- Gram matrices ---- */

sbr_status sbr_gram_build(const sbr_dataset* standardized, size_t workers, const char* cache_dir, sbr_gram** out) {
  return guard([&] {
    need(standardized, "dataset");
    need(out, "out");
    sbr::GramOptions opts;
    opts.workers = workers == 0 ? 1 : workers;
    std::optional<std::filesystem::path> dir;
    if (cache_dir != nullptr) dir = cache_dir;
    auto h = std::make_unique<sbr_gram>();
    h->cache = sbr::GramCache::build(standardized->ds, opts, dir);
    *out = h.release();
  });
}

void sbr_gram_free(sbr_gram* gram) { delete gram; }

/* ---- shrinkage tuning ---- */

void sbr_tune_options_default(sbr_tune_options* opts) {
  if (!opts) return;
  const sbr::TuneConfig d;
  opts->estimator = SBR_EST_MAP;
  opts->log_lower = d.log_lower;
  opts->log_upper = d.log_upper;
  opts->restarts = d.restarts;
  opts->tolerance = d.tolerance;
  opts->max_evals = d.max_evals;
  opts->seed = d.seed;
  opts->tie_sources = 0;
  opts->intercept = d.intercept ? 1 : 0;
}

sbr_status sbr_tune(const sbr_gram* gram, const sbr_dataset* standardized, const sbr_tune_options* opts,
                    const char* trace_csv, double* lambda_out, size_t k, sbr_tune_result* result) {
  return guard([&] {
    need(gram, "gram");
    need(standardized, "dataset");
    need(opts, "options");
    if (!standardized->ds.has_response()) sbr::fail(sbr::ErrorKind::Usage, "tuning needs a response");
    if (standardized->ds.k() != gram->cache.k() || standardized->ds.n() != gram->cache.n())
      sbr::fail(sbr::ErrorKind::Usage, "Gram matrices do not belong to this dataset");
    sbr::TuneConfig cfg;
    cfg.estimator = to_estimator(opts->estimator);
    cfg.log_lower = opts->log_lower;
    cfg.log_upper = opts->log_upper;
    cfg.restarts = opts->restarts;
    cfg.tolerance = opts->tolerance;
    cfg.max_evals = opts->max_evals;
    cfg.seed = opts->seed;
    cfg.tie_sources = opts->tie_sources != 0;
    cfg.intercept = opts->intercept != 0;
    cfg.keep_trace = trace_csv != nullptr;
    const sbr::TuneResult r = sbr::tune(gram->cache, standardized->ds.y(), cfg);
    copy_out(r.lambda_hat.lambda, lambda_out, k, "lambda output");
    if (result != nullptr) {
      result->objective = r.objective_value;
      result->evals = r.evals_used;
      result->converged = r.converged ? 1 : 0;
      result->at_upper_bound = r.at_upper_bound ? 1 : 0;
    }
    if (trace_csv != nullptr) {
      std::ofstream tf(trace_csv, std::ios::trunc);
      if (!tf) sbr::fail(sbr::ErrorKind::Io, std::string("cannot write ") + trace_csv);
      tf << "eval";
      for (sbr::Index i = 0; i < gram->cache.k(); ++i) tf << ",lambda_" << (i + 1);
      tf << ",objective\n";
      for (size_t i = 0; i < r.trace.size(); ++i) {
        tf << (i + 1);
        for (sbr::Index j = 0; j < r.trace[i].lambda.size(); ++j) tf << ',' << sbr::format_double(r.trace[i].lambda[j]);
        tf << ',' << sbr::format_double(r.trace[i].objective) << '\n';
      }
      if (!tf) sbr::fail(sbr::ErrorKind::Io, std::string("write failed: ") + trace_csv);
    }
  });
}

/* ---- dense fits ---- */

void sbr_fit_options_default(sbr_fit_options* opts) {
  if (!opts) return;
  opts->with_variances = 1;
  opts->workers = 1;
  opts->block_size = 0;
}

sbr_status sbr_fit_compute(const sbr_gram* gram, const sbr_dataset* standardized, const double* lambda, size_t k,
                           sbr_estimator provenance, const sbr_fit_options* opts, sbr_fit** out) {
  return guard([&] {
    need(gram, "gram");
    need(standardized, "dataset");
    need(lambda, "lambda");
    need(out, "out");
    const auto& ds = standardized->ds;
    if (!ds.standardized()) sbr::fail(sbr::ErrorKind::Usage, "fit needs a standardized dataset");
    if (!ds.has_response()) sbr::fail(sbr::ErrorKind::Usage, "fit needs a response");
    if (ds.k() != gram->cache.k() || ds.n() != gram->cache.n())
      sbr::fail(sbr::ErrorKind::Usage, "Gram matrices do not belong to this dataset");
    need_len(k, ds.k(), "lambda");
    sbr_fit_options o;
    sbr_fit_options_default(&o);
    if (opts != nullptr) o = *opts;
    sbr::Shrinkage sh{Eigen::Map<const sbr::Vector>(lambda, static_cast<sbr::Index>(k)), to_estimator(provenance)};
    sh.validate();
    sbr::SbrFit fit = sbr::posterior_mode(gram->cache, ds, sh);
    if (o.with_variances) {
      sbr::VarianceOptions vo;
      vo.workers = o.workers == 0 ? 1 : o.workers;
      if (o.block_size > 0) vo.block_size = static_cast<sbr::Index>(o.block_size);
      fit.var_diag = sbr::posterior_variances(gram->cache, ds, sh, vo);
    }
    auto h = std::make_unique<sbr_fit>();
    h->model = sbr::make_trained_model(std::move(fit), ds);
    *out = h.release();
  });
}

sbr_status sbr_fit_save(const sbr_fit* fit, const char* path) {
  return guard([&] {
    need(fit, "fit");
    need(path, "path");
    if (fit->sparse_coef) sbr::fail(sbr::ErrorKind::Usage, "fit was loaded from a sparse solution; save that instead");
    sbr::write_model_file(path, sbr::to_model_file(fit->model));
  });
}

sbr_status sbr_fit_load(const char* path, sbr_fit** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    const sbr::ModelFile f = sbr::read_model_file(path);
    auto h = std::make_unique<sbr_fit>();
    if (sbr::model_kind(f) == "sparse") {
      sbr::SparseModel sm = sbr::sparse_model_from_file(f);
      h->sparse_coef = sm.solution.gamma;
      h->model = std::move(sm.base);
    } else {
      h->model = sbr::trained_model_from_file(f);
    }
    *out = h.release();
  });
}

sbr_status sbr_fit_get_summary(const sbr_fit* fit, sbr_fit_summary* out) {
  return guard([&] {
    need(fit, "fit");
    need(out, "out");
    const auto& f = fit->model.fit;
    out->n = static_cast<size_t>(f.n);
    out->p = static_cast<size_t>(f.p());
    out->k = static_cast<size_t>(f.k());
    out->sigma2_shape = f.sigma2_shape;
    out->sigma2_scale = f.sigma2_scale;
    out->q_lambda = f.q_lambda;
    out->log_marginal = f.log_marginal;
    out->has_variances = f.var_diag ? 1 : 0;
    out->is_sparse = fit->sparse_coef ? 1 : 0;
  });
}

sbr_status sbr_fit_lambda(const sbr_fit* fit, double* out, size_t k) {
  return guard([&] {
    need(fit, "fit");
    copy_out(fit->model.fit.lambda.lambda, out, k, "lambda output");
  });
}

sbr_status sbr_fit_coefficients(const sbr_fit* fit, double* out, size_t p) {
  return guard([&] {
    need(fit, "fit");
    copy_out(fit->sparse_coef ? *fit->sparse_coef : fit->model.fit.beta, out, p, "coefficient output");
  });
}

sbr_status sbr_fit_variances(const sbr_fit* fit, double* out, size_t p) {
  return guard([&] {
    need(fit, "fit");
    if (!fit->model.fit.var_diag) sbr::fail(sbr::ErrorKind::Usage, "fit has no posterior variances");
    copy_out(*fit->model.fit.var_diag, out, p, "variance output");
  });
}

sbr_status sbr_fit_predict(const sbr_fit* fit, const sbr_dataset* raw, double* out, size_t n) {
  return guard([&] {
    need(fit, "fit");
    predict_into(fit->model, fit->sparse_coef ? *fit->sparse_coef : fit->model.fit.beta, raw, out, n);
  });
}

const char* sbr_fit_source_name(const sbr_fit* fit, size_t k) {
  if (!fit || k >= fit->model.source_names.size()) return nullptr;
  return fit->model.source_names[k].c_str();
}

size_t sbr_fit_source_dim(const sbr_fit* fit, size_t k) {
  if (!fit || k + 1 >= fit->model.fit.offsets.size()) return 0;
  return static_cast<size_t>(fit->model.fit.offsets[k + 1] - fit->model.fit.offsets[k]);
}

void sbr_fit_free(sbr_fit* fit) { delete fit; }

/* ---- sparsification ---- */

void sbr_sparse_options_default(sbr_sparse_options* opts) {
  if (!opts) return;
  const sbr::GeneralOptions g;
  opts->method = SBR_SPARSE_RELAXED;
  opts->control = SBR_CONTROL_LOGN;
  opts->penalty = SBR_PENALTY_ADAPTIVE;
  opts->alpha = 1.0;
  opts->pcr_xi = 0.0;
  opts->kl_scale = SBR_KL_INTEGRATED;
  opts->tol = g.tol;
  opts->max_sweeps = g.max_sweeps;
}

sbr_status sbr_sparsify(const sbr_fit* fit, const sbr_gram* gram, const sbr_dataset* standardized,
                        const sbr_sparse_options* opts, sbr_sparse** out) {
  return guard([&] {
    need(fit, "fit");
    need(out, "out");
    if (fit->sparse_coef) sbr::fail(sbr::ErrorKind::Usage, "input is already a sparse solution");
    sbr_sparse_options o;
    sbr_sparse_options_default(&o);
    if (opts != nullptr) o = *opts;
    const sbr::SbrFit& f = fit->model.fit;
    const sbr::KlScale scale = to_kl_scale(o.kl_scale);

    sbr::KlContext ctx;
    if (o.method == SBR_SPARSE_GENERAL) {
      need(gram, "gram (general method)");
      need(standardized, "training dataset (general method)");
      const auto& ds = standardized->ds;
      if (!ds.standardized()) sbr::fail(sbr::ErrorKind::Usage, "general method needs the standardized training data");
      if (ds.n() != f.n || ds.offsets() != f.offsets)
        sbr::fail(sbr::ErrorKind::Data, "training data do not match the fit's dimensions");
      ctx = sbr::build_svd_context(gram->cache, ds, f, scale);
    } else if (o.method == SBR_SPARSE_RELAXED) {
      if (!f.var_diag) sbr::fail(sbr::ErrorKind::Usage, "relaxed method needs a fit with posterior variances");
      ctx = sbr::make_kl_context(f, scale);
    } else {
      sbr::fail(sbr::ErrorKind::Usage, "unknown sparsification method");
    }

    sbr::Penalty penalty;
    std::string mode;
    switch (o.penalty) {
      case SBR_PENALTY_ADAPTIVE:
        if (!(o.alpha >= 0.0) || !std::isfinite(o.alpha)) sbr::fail(sbr::ErrorKind::Usage, "alpha must be finite and >= 0");
        penalty = sbr::Vector(o.alpha * sbr::adaptive_penalties(f, f.lambda).array());
        mode = "adaptive";
        break;
      case SBR_PENALTY_SCALAR:
        if (!(o.alpha >= 0.0) || !std::isfinite(o.alpha)) sbr::fail(sbr::ErrorKind::Usage, "alpha must be finite and >= 0");
        penalty = o.alpha;
        mode = "scalar";
        break;
      case SBR_PENALTY_PCR:
        penalty = sbr::pcr_penalty(o.pcr_xi, f, ctx);
        mode = "pcr";
        break;
      default: sbr::fail(sbr::ErrorKind::Usage, "unknown penalty mode");
    }

    auto h = std::make_unique<sbr_sparse>();
    h->model.base = fit->model;
    h->model.kl_scale = scale;
    h->model.penalty_mode = mode;
    if (o.method == SBR_SPARSE_GENERAL) {
      sbr::GeneralOptions go;
      go.tol = o.tol;
      go.max_sweeps = o.max_sweeps;
      h->model.control = sbr::Control::None;
      h->model.solution = sbr::solve_general(ctx, penalty, go);
    } else {
      const sbr::Control c = to_control(o.control);
      h->model.control = c;
      h->model.solution = sbr::solve_relaxed(ctx, penalty, sbr::control_factor(c, f.n));
    }
    *out = h.release();
  });
}

sbr_status sbr_sparse_get_summary(const sbr_sparse* s, sbr_sparse_summary* out) {
  return guard([&] {
    need(s, "sparse solution");
    need(out, "out");
    const auto& sol = s->model.solution;
    out->p = static_cast<size_t>(sol.gamma.size());
    out->nonzero = static_cast<size_t>(sol.nonzero_count);
    out->sparsity = sol.sparsity;
    out->f_n = sol.f_n;
    out->converged = sol.converged ? 1 : 0;
    out->sweeps = sol.sweeps;
    out->method = sbr::method_name(sol.method);
  });
}

sbr_status sbr_sparse_coefficients(const sbr_sparse* s, double* out, size_t p) {
  return guard([&] {
    need(s, "sparse solution");
    copy_out(s->model.solution.gamma, out, p, "coefficient output");
  });
}

sbr_status sbr_sparse_save(const sbr_sparse* s, const char* path) {
  return guard([&] {
    need(s, "sparse solution");
    need(path, "path");
    sbr::write_model_file(path, sbr::to_model_file(s->model));
  });
}

sbr_status sbr_sparse_predict(const sbr_sparse* s, const sbr_dataset* raw, double* out, size_t n) {
  return guard([&] {
    need(s, "sparse solution");
    predict_into(s->model.base, s->model.solution.gamma, raw, out, n);
  });
}

void sbr_sparse_free(sbr_sparse* s) { delete s; }

/* ---- simulation ---- */

sbr_status sbr_sim_config_default(sbr_scenario scenario, sbr_correlation correlation, uint64_t seed,
                                  sbr_sim_config* out) {
  return guard([&] {
    need(out, "out");
    sbr::Scenario s;
    switch (scenario) {
      case SBR_SCENARIO_SPARSE: s = sbr::Scenario::Sparse; break;
      case SBR_SCENARIO_MEDIUM: s = sbr::Scenario::Medium; break;
      case SBR_SCENARIO_DENSE: s = sbr::Scenario::Dense; break;
      default: sbr::fail(sbr::ErrorKind::Usage, "unknown scenario");
    }
    if (correlation != SBR_CORR_LOW && correlation != SBR_CORR_HIGH)
      sbr::fail(sbr::ErrorKind::Usage, "unknown correlation level");
    const auto c = correlation == SBR_CORR_LOW ? sbr::Correlation::Low : sbr::Correlation::High;
    from_sim_config(sbr::make_sim_config(s, c, seed), *out);
  });
}

sbr_status sbr_sim_config_scale(sbr_sim_config* cfg, double factor) {
  return guard([&] {
    need(cfg, "config");
    if (!(factor >= 1.0) || !std::isfinite(factor)) sbr::fail(sbr::ErrorKind::Usage, "scale factor must be >= 1");
    cfg->p_rna = std::max<size_t>(1, static_cast<size_t>(std::llround(static_cast<double>(cfg->p_rna) / factor)));
    if (cfg->p_snp > 0 && cfg->snp_blocks > 0) {
      const size_t block = cfg->p_snp / cfg->snp_blocks;
      const auto target = static_cast<size_t>(std::llround(static_cast<double>(cfg->p_snp) / factor));
      if (target >= block) {
        cfg->snp_blocks = target / block;
        cfg->p_snp = cfg->snp_blocks * block;
      } else {
        cfg->snp_blocks = 1;
        cfg->p_snp = std::max<size_t>(2, target);
      }
    }
  });
}

sbr_status sbr_simulate(const sbr_sim_config* cfg, size_t workers, sbr_sim** out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    sbr::SimulatedData d = sbr::generate_scenario(to_sim_config(*cfg), workers == 0 ? 1 : workers);
    auto h = std::make_unique<sbr_sim>();
    h->train.ds = std::move(d.train);
    h->test.ds = std::move(d.test);
    h->truth = std::move(d.truth);
    *out = h.release();
  });
}

const sbr_dataset* sbr_sim_train(const sbr_sim* sim) { return sim ? &sim->train : nullptr; }

const sbr_dataset* sbr_sim_test(const sbr_sim* sim) { return sim ? &sim->test : nullptr; }

size_t sbr_sim_p(const sbr_sim* sim) { return sim ? static_cast<size_t>(sim->truth.beta.size()) : 0; }

sbr_status sbr_sim_truth(const sbr_sim* sim, double* beta, unsigned char* support, size_t p) {
  return guard([&] {
    need(sim, "simulation");
    need_len(p, sim->truth.beta.size(), "truth output");
    if (beta != nullptr) std::copy(sim->truth.beta.data(), sim->truth.beta.data() + p, beta);
    if (support != nullptr)
      for (size_t j = 0; j < p; ++j) support[j] = sim->truth.support[j] ? 1 : 0;
  });
}

sbr_status sbr_sim_save(const sbr_sim* sim, const char* dir) {
  return guard([&] {
    need(sim, "simulation");
    need(dir, "dir");
    const std::filesystem::path root(dir);
    save_dataset(sim->train.ds, root / "train");
    save_dataset(sim->test.ds, root / "test");
    std::ofstream tf(root / "truth.csv", std::ios::trunc);
    if (!tf) sbr::fail(sbr::ErrorKind::Io, "cannot write " + (root / "truth.csv").string());
    tf << "index,source,beta,support\n";
    const auto& off = sim->truth.offsets;
    for (size_t k = 0; k + 1 < off.size(); ++k) {
      const std::string& name = sim->train.ds.source(static_cast<sbr::Index>(k)).name;
      for (sbr::Index j = off[k]; j < off[k + 1]; ++j)
        tf << j << ',' << name << ',' << sbr::format_double(sim->truth.beta[j]) << ','
           << (sim->truth.support[static_cast<size_t>(j)] ? 1 : 0) << '\n';
    }
    if (!tf) sbr::fail(sbr::ErrorKind::Io, "write failed: truth.csv");
  });
}

void sbr_sim_free(sbr_sim* sim) { delete sim; }

/* ---- benchmark ---- */

sbr_status sbr_bench_run(const sbr_sim_config* cfg, const sbr_tune_options* tune, size_t workers,
                         sbr_bench_row* rows, size_t capacity, size_t* count) {
  return guard([&] {
    need(cfg, "config");
    need(rows, "rows");
    need(count, "count");
    sbr::BenchOptions bo;
    bo.workers = workers == 0 ? 1 : workers;
    if (tune != nullptr) {
      bo.tune.estimator = to_estimator(tune->estimator);
      bo.tune.log_lower = tune->log_lower;
      bo.tune.log_upper = tune->log_upper;
      bo.tune.restarts = tune->restarts;
      bo.tune.tolerance = tune->tolerance;
      bo.tune.max_evals = tune->max_evals;
      bo.tune.seed = tune->seed;
      bo.tune.intercept = tune->intercept != 0;
    }
    const auto results = sbr::run_bench_case(to_sim_config(*cfg), bo);
    if (capacity < results.size()) sbr::fail(sbr::ErrorKind::Usage, "bench: row buffer too small");
    for (size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      if (r.lambda.size() > SBR_BENCH_MAX_K) sbr::fail(sbr::ErrorKind::Usage, "bench: too many sources");
      sbr_bench_row& row = rows[i];
      row = sbr_bench_row{};
      std::snprintf(row.method, sizeof row.method, "%s", r.method.c_str());
      row.test_correlation = r.test_correlation;
      row.sparsity = r.sparsity;
      row.auc = r.auc;
      row.k = static_cast<size_t>(r.lambda.size());
      for (sbr::Index j = 0; j < r.lambda.size(); ++j) row.lambda[j] = r.lambda[j];
      row.seconds = r.seconds;
    }
    *count = results.size();
  });
}

/* ---- metrics ---- */

sbr_status sbr_metric_correlation(const double* a, const double* b, size_t len, double* out) {
  return guard([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    *out = sbr::metric_correlation({a, len}, {b, len});
  });
}

sbr_status sbr_metric_auc(const double* scores, const unsigned char* truth, size_t len, double* out) {
  return guard([&] {
    need(scores, "scores");
    need(truth, "truth");
    need(out, "out");
    std::vector<bool> mask(len);
    for (size_t i = 0; i < len; ++i) mask[i] = truth[i] != 0;
    *out = sbr::metric_auc({scores, len}, mask);
  });
}

}  // extern "C"
