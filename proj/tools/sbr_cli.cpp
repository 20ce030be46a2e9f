// Command-line front end. Links only the C API.

#include "sbr/sbr.h"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

// Exit codes: 1 usage, 2 data, 3 numerical.
struct CliError {
  int code;
  std::string kind;
  std::string message;
};

int exit_code(sbr_status s) {
  switch (s) {
    case SBR_ERR_USAGE:
    case SBR_ERR_DOMAIN: return 1;
    case SBR_ERR_DATA:
    case SBR_ERR_IO: return 2;
    default: return 3;
  }
}

void check(sbr_status s) {
  if (s != SBR_OK) throw CliError{exit_code(s), sbr_status_name(s), sbr_last_error()};
}

[[noreturn]] void usage_error(const std::string& msg) { throw CliError{1, "usage", msg}; }

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using DatasetPtr = std::unique_ptr<sbr_dataset, Deleter<sbr_dataset, sbr_dataset_free>>;
using GramPtr = std::unique_ptr<sbr_gram, Deleter<sbr_gram, sbr_gram_free>>;
using FitPtr = std::unique_ptr<sbr_fit, Deleter<sbr_fit, sbr_fit_free>>;
using SparsePtr = std::unique_ptr<sbr_sparse, Deleter<sbr_sparse, sbr_sparse_free>>;
using SimPtr = std::unique_ptr<sbr_sim, Deleter<sbr_sim, sbr_sim_free>>;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

using Clock = std::chrono::steady_clock;
const Clock::time_point g_start = Clock::now();

void progress(const std::string& stage, const std::string& detail = "") {
  const double t = std::chrono::duration<double>(Clock::now() - g_start).count();
  std::fprintf(stderr, "progress: stage=%s elapsed_s=%.3f%s%s\n", stage.c_str(), t, detail.empty() ? "" : " ",
               detail.c_str());
}

void warn(const std::string& msg) { std::fprintf(stderr, "warning: %s\n", msg.c_str()); }

// Resolved configuration plus results, written as "key = value" lines.
class Manifest {
 public:
  void add(const std::string& k, const std::string& v) { entries_.emplace_back(k, v); }

  void add_options(const CLI::App& app) {
    for (const CLI::Option* opt : app.get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "config") continue;
      std::string value;
      if (opt->count() > 0) {
        const auto& r = opt->results();
        for (std::size_t i = 0; i < r.size(); ++i) value += (i ? ";" : "") + r[i];
      } else {
        value = opt->get_default_str();
      }
      add("option." + name, value);
    }
  }

  void write(const fs::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw CliError{2, "io", "cannot write " + path.string()};
    for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

Manifest start_manifest(const std::string& command, const CLI::App& sub) {
  Manifest m;
  m.add("tool", "sbr");
  m.add("version", sbr_version());
  m.add("build", sbr_build_info());
  m.add("command", command);
  m.add_options(sub);
  return m;
}

fs::path manifest_path(const std::string& flag, const fs::path& next_to) {
  if (!flag.empty()) return flag;
  const fs::path dir = next_to.has_parent_path() ? next_to.parent_path() : fs::path(".");
  return dir / "run.manifest";
}

// Inputs: --data DIR (reads sources.list) or repeated --source NAME=PATH.
struct DataArgs {
  std::string data_dir;
  std::vector<std::string> sources;
  std::string response;
};

void add_data_options(CLI::App* sub, DataArgs& a, bool with_response) {
  sub->add_option("--data", a.data_dir, "dataset directory written by `simulate` (sources.list, <name>.sbrm, y.sbrm)");
  sub->add_option("--source", a.sources, "source as NAME=PATH (CSV or SBRM); repeat per source, in order");
  if (with_response) sub->add_option("--response", a.response, "response vector file (CSV or SBRM)");
}

DatasetPtr load_data(const DataArgs& a, bool need_response) {
  std::vector<std::string> names, paths;
  std::string response = a.response;
  if (!a.data_dir.empty()) {
    if (!a.sources.empty()) usage_error("--data and --source are mutually exclusive");
    const fs::path dir(a.data_dir);
    std::ifstream list(dir / "sources.list");
    if (!list) throw CliError{2, "io", "cannot open " + (dir / "sources.list").string()};
    for (std::string line; std::getline(list, line);)
      if (!line.empty()) {
        names.push_back(line);
        paths.push_back((dir / (line + ".sbrm")).string());
      }
    if (response.empty() && fs::exists(dir / "y.sbrm")) response = (dir / "y.sbrm").string();
  } else {
    for (const auto& s : a.sources) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) usage_error("--source expects NAME=PATH, got '" + s + "'");
      names.push_back(s.substr(0, eq));
      paths.push_back(s.substr(eq + 1));
    }
  }
  if (names.empty()) usage_error("no input sources (use --data or --source)");
  if (need_response && response.empty()) usage_error("a response is required (--response)");
  std::vector<const char*> np, pp;
  for (std::size_t i = 0; i < names.size(); ++i) {
    np.push_back(names[i].c_str());
    pp.push_back(paths[i].c_str());
  }
  sbr_dataset* ds = nullptr;
  check(sbr_dataset_load(np.data(), pp.data(), names.size(), response.empty() ? nullptr : response.c_str(), &ds));
  return DatasetPtr(ds);
}

std::vector<double> response_of(const sbr_dataset* ds) {
  std::vector<double> y(sbr_dataset_n(ds));
  check(sbr_dataset_response(ds, y.data(), y.size()));
  return y;
}

DatasetPtr standardize(const sbr_dataset* raw, bool drop_constant) {
  sbr_dataset* out = nullptr;
  std::size_t dropped = 0;
  check(sbr_dataset_standardize(raw, drop_constant ? 1 : 0, &out, &dropped));
  if (dropped > 0) warn("dropped " + std::to_string(dropped) + " constant column(s)");
  return DatasetPtr(out);
}

sbr_estimator parse_estimator(const std::string& s) {
  if (s == "cv") return SBR_EST_CV;
  if (s == "ml") return SBR_EST_ML;
  if (s == "map") return SBR_EST_MAP;
  usage_error("unknown estimator '" + s + "'");
}

const char* estimator_name(sbr_estimator e) {
  switch (e) {
    case SBR_EST_CV: return "cv";
    case SBR_EST_ML: return "ml";
    case SBR_EST_MAP: return "map";
    default: return "user";
  }
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      usage_error(what + ": not a number: '" + tok + "'");
    }
  }
  if (out.empty()) usage_error(what + ": empty list");
  return out;
}

// ---- fit ----

struct TuneArgs {
  std::string estimator = "map";
  double log_lower = -12.0;
  double log_upper = 12.0;
  int restarts = 5;
  double tolerance = 1e-6;
  int max_evals = 2000;
  std::uint64_t seed = 20190301;
  bool no_intercept = false;
};

void add_tune_options(CLI::App* sub, TuneArgs& t) {
  sub->add_option("--estimator", t.estimator, "shrinkage estimator")
      ->check(CLI::IsMember({"cv", "ml", "map"}))
      ->capture_default_str();
  sub->add_option("--log-lower", t.log_lower, "lower bound on log(lambda)")->capture_default_str();
  sub->add_option("--log-upper", t.log_upper, "upper bound on log(lambda)")->capture_default_str();
  sub->add_option("--restarts", t.restarts, "optimizer restarts")->capture_default_str();
  sub->add_option("--tolerance", t.tolerance, "optimizer tolerance")->capture_default_str();
  sub->add_option("--max-evals", t.max_evals, "objective evaluations per restart")->capture_default_str();
  sub->add_option("--seed", t.seed, "seed for the restart points")->capture_default_str();
  sub->add_flag("--no-intercept", t.no_intercept,
                "tune with the uncentered CV/ML objectives instead of integrating out the intercept");
}

sbr_tune_options to_tune_options(const TuneArgs& t) {
  sbr_tune_options o;
  sbr_tune_options_default(&o);
  o.estimator = parse_estimator(t.estimator);
  o.log_lower = t.log_lower;
  o.log_upper = t.log_upper;
  o.restarts = t.restarts;
  o.tolerance = t.tolerance;
  o.max_evals = t.max_evals;
  o.seed = t.seed;
  o.intercept = t.no_intercept ? 0 : 1;
  return o;
}

struct FitArgs {
  DataArgs data;
  TuneArgs tune;
  std::string lambda;
  std::string out;
  std::string trace;
  std::string gram_cache;
  std::string manifest;
  bool drop_constant = false;
  bool no_variances = false;
  std::size_t workers = 1;
  std::size_t block_size = 0;
};

struct Workspace {
  DatasetPtr raw;
  DatasetPtr std_ds;
  GramPtr gram;
};

Workspace prepare(const DataArgs& data, bool drop_constant, std::size_t workers, const std::string& cache) {
  Workspace w;
  w.raw = load_data(data, true);
  progress("load", "n=" + std::to_string(sbr_dataset_n(w.raw.get())) + " k=" + std::to_string(sbr_dataset_k(w.raw.get())));
  w.std_ds = standardize(w.raw.get(), drop_constant);
  sbr_gram* g = nullptr;
  check(sbr_gram_build(w.std_ds.get(), workers, cache.empty() ? nullptr : cache.c_str(), &g));
  w.gram.reset(g);
  progress("gram");
  return w;
}

int run_fit(const FitArgs& a, const CLI::App& sub) {
  Workspace w = prepare(a.data, a.drop_constant, a.workers, a.gram_cache);
  const std::size_t k = sbr_dataset_k(w.std_ds.get());
  Manifest m = start_manifest("fit", sub);

  std::vector<double> lambda(k);
  sbr_estimator provenance = SBR_EST_USER;
  if (!a.lambda.empty()) {
    lambda = parse_list(a.lambda, "--lambda");
    if (lambda.size() != k)
      usage_error("--lambda has " + std::to_string(lambda.size()) + " values for " + std::to_string(k) + " sources");
    if (!a.trace.empty()) warn("--trace ignored with --lambda");
  } else {
    const sbr_tune_options opts = to_tune_options(a.tune);
    sbr_tune_result r{};
    check(sbr_tune(w.gram.get(), w.std_ds.get(), &opts, a.trace.empty() ? nullptr : a.trace.c_str(), lambda.data(), k,
                   &r));
    provenance = opts.estimator;
    progress("tune", "estimator=" + a.tune.estimator + " evals=" + std::to_string(r.evals) +
                         " converged=" + std::to_string(r.converged));
    if (r.at_upper_bound) warn("a tuned lambda sits at the upper bound exp(" + fmt(a.tune.log_upper) + ")");
    if (!r.converged) warn("optimizer did not converge within the evaluation budget");
    m.add("tune.objective", fmt(r.objective));
    m.add("tune.evals", std::to_string(r.evals));
    m.add("tune.converged", std::to_string(r.converged));
    m.add("tune.at_upper_bound", std::to_string(r.at_upper_bound));
  }

  sbr_fit_options fo;
  sbr_fit_options_default(&fo);
  fo.with_variances = a.no_variances ? 0 : 1;
  fo.workers = a.workers;
  fo.block_size = a.block_size;
  sbr_fit* fit = nullptr;
  check(sbr_fit_compute(w.gram.get(), w.std_ds.get(), lambda.data(), k, provenance, &fo, &fit));
  FitPtr fp(fit);
  progress("fit");
  check(sbr_fit_save(fp.get(), a.out.c_str()));

  sbr_fit_summary s{};
  check(sbr_fit_get_summary(fp.get(), &s));
  m.add("result.estimator", estimator_name(provenance));
  m.add("result.lambda", join(lambda));
  m.add("result.n", std::to_string(s.n));
  m.add("result.p", std::to_string(s.p));
  m.add("result.q_lambda", fmt(s.q_lambda));
  m.add("result.log_marginal", fmt(s.log_marginal));
  m.add("output.fit", a.out);
  m.write(manifest_path(a.manifest, a.out));
  progress("done", "fit=" + a.out);
  return 0;
}

// ---- predict ----

struct PredictArgs {
  DataArgs data;
  std::string model;
  std::string out;
  std::string manifest;
  bool stdout_csv = false;
};

int run_predict(const PredictArgs& a, const CLI::App& sub) {
  sbr_fit* fit = nullptr;
  check(sbr_fit_load(a.model.c_str(), &fit));
  FitPtr fp(fit);
  DatasetPtr ds = load_data(a.data, false);
  sbr_fit_summary s{};
  check(sbr_fit_get_summary(fp.get(), &s));
  const std::size_t k = sbr_dataset_k(ds.get());
  if (k != s.k)
    throw CliError{2, "data", "input has " + std::to_string(k) + " sources, model has " + std::to_string(s.k)};
  for (std::size_t i = 0; i < k; ++i) {
    const std::string want = sbr_fit_source_name(fp.get(), i);
    const std::string got = sbr_dataset_source_name(ds.get(), i);
    if (want != got) throw CliError{2, "data", "source " + std::to_string(i + 1) + " is '" + got + "', model expects '" + want + "'"};
  }
  const std::size_t n = sbr_dataset_n(ds.get());
  std::vector<double> pred(n);
  check(sbr_fit_predict(fp.get(), ds.get(), pred.data(), n));
  progress("predict", "rows=" + std::to_string(n));

  Manifest m = start_manifest("predict", sub);
  m.add("result.rows", std::to_string(n));
  if (!a.data.response.empty() || (!a.data.data_dir.empty() && fs::exists(fs::path(a.data.data_dir) / "y.sbrm"))) {
    const auto y = response_of(ds.get());
    double r = 0.0;
    check(sbr_metric_correlation(pred.data(), y.data(), n, &r));
    std::fprintf(stderr, "summary: test_correlation=%s\n", fmt(r).c_str());
    m.add("result.test_correlation", fmt(r));
  }

  auto emit = [&](std::ostream& out) {
    out << "prediction\n";
    for (double v : pred) out << fmt(v) << '\n';
  };
  if (a.stdout_csv) {
    emit(std::cout);
  } else {
    if (a.out.empty()) usage_error("predict needs --out FILE or --stdout-csv");
    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw CliError{2, "io", "cannot write " + a.out};
    emit(out);
    m.add("output.predictions", a.out);
  }
  m.write(manifest_path(a.manifest, a.out.empty() ? fs::path(a.model) : fs::path(a.out)));
  return 0;
}

// ---- sparsify ----

struct SparsifyArgs {
  std::string fit;
  std::string out;
  std::string manifest;
  std::string method = "relaxed";
  std::string control = "logn";
  std::string penalty = "adaptive";
  std::string kl_scale = "integrated";
  double alpha = 1.0;
  double pcr_xi = -1.0;
  double tol = 1e-7;
  int max_sweeps = 10000;
  DataArgs data;
  std::string gram_cache;
  bool drop_constant = false;
  std::size_t workers = 1;
};

int run_sparsify(const SparsifyArgs& a, const CLI::App& sub) {
  sbr_fit* fit = nullptr;
  check(sbr_fit_load(a.fit.c_str(), &fit));
  FitPtr fp(fit);

  sbr_sparse_options o;
  sbr_sparse_options_default(&o);
  o.method = a.method == "general" ? SBR_SPARSE_GENERAL : SBR_SPARSE_RELAXED;
  const std::map<std::string, sbr_control> controls{
      {"none", SBR_CONTROL_NONE}, {"sqrtn", SBR_CONTROL_SQRTN}, {"logn", SBR_CONTROL_LOGN}, {"sqrtlogn", SBR_CONTROL_SQRTLOGN}};
  o.control = controls.at(a.control);
  const std::map<std::string, sbr_kl_scale> scales{
      {"integrated", SBR_KL_INTEGRATED}, {"mean", SBR_KL_POSTERIOR_MEAN}, {"mode", SBR_KL_POSTERIOR_MODE}};
  o.kl_scale = scales.at(a.kl_scale);
  o.alpha = a.alpha;
  o.tol = a.tol;
  o.max_sweeps = a.max_sweeps;
  if (sub.count("--pcr-xi") > 0) {
    if (sub.count("--penalty") > 0 && a.penalty != "pcr") usage_error("--pcr-xi conflicts with --penalty " + a.penalty);
    o.penalty = SBR_PENALTY_PCR;
    o.pcr_xi = a.pcr_xi;
  } else if (a.penalty == "pcr") {
    usage_error("--penalty pcr needs --pcr-xi");
  } else {
    o.penalty = a.penalty == "scalar" ? SBR_PENALTY_SCALAR : SBR_PENALTY_ADAPTIVE;
  }
  if (o.method == SBR_SPARSE_GENERAL && sub.count("--control") > 0 && a.control != "none")
    warn("--control applies to the relaxed method only");

  Workspace w;
  if (o.method == SBR_SPARSE_GENERAL) w = prepare(a.data, a.drop_constant, a.workers, a.gram_cache);
  sbr_sparse* sp = nullptr;
  check(sbr_sparsify(fp.get(), w.gram.get(), w.std_ds.get(), &o, &sp));
  SparsePtr spp(sp);
  check(sbr_sparse_save(spp.get(), a.out.c_str()));

  sbr_sparse_summary s{};
  check(sbr_sparse_get_summary(spp.get(), &s));
  std::fprintf(stderr, "summary: method=%s nonzero=%zu p=%zu sparsity=%s f_n=%s converged=%d\n", s.method, s.nonzero,
               s.p, fmt(s.sparsity).c_str(), fmt(s.f_n).c_str(), s.converged);
  if (!s.converged) warn("coordinate descent stopped at the sweep limit");
  Manifest m = start_manifest("sparsify", sub);
  m.add("result.method", s.method);
  m.add("result.nonzero", std::to_string(s.nonzero));
  m.add("result.p", std::to_string(s.p));
  m.add("result.sparsity", fmt(s.sparsity));
  m.add("result.f_n", fmt(s.f_n));
  m.add("result.converged", std::to_string(s.converged));
  m.add("output.sparse", a.out);
  m.write(manifest_path(a.manifest, a.out));
  return 0;
}

// ---- simulate / bench ----

struct SimArgs {
  std::string scenario = "sparse";
  std::string correlation = "low";
  double scale = 1.0;
  std::uint64_t seed = 1;
  long long n_train = -1, n_test = -1, p_cl = -1, p_rna = -1, p_snp = -1;
  std::string cl_cov, rna_cov;
  std::size_t workers = 1;
};

void add_sim_options(CLI::App* sub, SimArgs& s, bool scenario_flags) {
  if (scenario_flags) {
    sub->add_option("--scenario", s.scenario, "true SNP sparsity level")
        ->check(CLI::IsMember({"sparse", "medium", "dense"}))
        ->capture_default_str();
    sub->add_option("--correlation", s.correlation, "SNP block correlation")
        ->check(CLI::IsMember({"low", "high"}))
        ->capture_default_str();
    sub->add_option("--seed", s.seed, "simulation seed")->capture_default_str();
  }
  sub->add_option("--scale", s.scale, "divide the RNA and SNP dimensions by this factor (>= 1)")->capture_default_str();
  sub->add_option("--n-train", s.n_train, "training rows (default 100)");
  sub->add_option("--n-test", s.n_test, "test rows (default 5000)");
  sub->add_option("--p-cl", s.p_cl, "clinical covariates (default 26)");
  sub->add_option("--p-rna", s.p_rna, "expression covariates (default 2000 / scale)");
  sub->add_option("--p-snp", s.p_snp, "SNP covariates (default 100000 / scale; multiple of the block size)");
  sub->add_option("--cl-cov", s.cl_cov, "SBRM file with a CL covariance replacing the synthetic one");
  sub->add_option("--rna-cov", s.rna_cov, "SBRM file with an RNA covariance replacing the synthetic one");
  sub->add_option("--workers", s.workers, "worker threads")->capture_default_str();
}

sbr_sim_config make_config(const SimArgs& a, const std::string& scenario, const std::string& correlation,
                           std::uint64_t seed) {
  const sbr_scenario sc = scenario == "sparse"   ? SBR_SCENARIO_SPARSE
                          : scenario == "medium" ? SBR_SCENARIO_MEDIUM
                                                 : SBR_SCENARIO_DENSE;
  const sbr_correlation co = correlation == "low" ? SBR_CORR_LOW : SBR_CORR_HIGH;
  sbr_sim_config c{};
  check(sbr_sim_config_default(sc, co, seed, &c));
  check(sbr_sim_config_scale(&c, a.scale));
  auto set = [](long long v, std::size_t& field) {
    if (v >= 0) field = static_cast<std::size_t>(v);
  };
  set(a.n_train, c.n_train);
  set(a.n_test, c.n_test);
  set(a.p_cl, c.p_cl);
  set(a.p_rna, c.p_rna);
  if (a.p_snp >= 0) {
    const std::size_t block = c.p_snp / c.snp_blocks;
    c.p_snp = static_cast<std::size_t>(a.p_snp);
    if (c.p_snp > 0) {
      if (c.p_snp % block != 0)
        usage_error("--p-snp must be a multiple of the SNP block size " + std::to_string(block));
      c.snp_blocks = c.p_snp / block;
    }
  }
  // The strings outlive the config: both are owned by the parsed arguments.
  if (!a.cl_cov.empty()) c.cl_covariance_path = a.cl_cov.c_str();
  if (!a.rna_cov.empty()) c.rna_covariance_path = a.rna_cov.c_str();
  return c;
}

void add_config_entries(Manifest& m, const sbr_sim_config& c, const std::string& prefix) {
  m.add(prefix + "n_train", std::to_string(c.n_train));
  m.add(prefix + "n_test", std::to_string(c.n_test));
  m.add(prefix + "p_cl", std::to_string(c.p_cl));
  m.add(prefix + "p_rna", std::to_string(c.p_rna));
  m.add(prefix + "p_snp", std::to_string(c.p_snp));
  m.add(prefix + "snp_blocks", std::to_string(c.snp_blocks));
  m.add(prefix + "rna_block_size", std::to_string(c.rna_block_size));
  m.add(prefix + "s_cl", fmt(c.s_cl));
  m.add(prefix + "s_rna", fmt(c.s_rna));
  m.add(prefix + "s_snp", fmt(c.s_snp));
  m.add(prefix + "gnd_shape", fmt(c.gnd_shape));
  m.add(prefix + "gnd_scale", fmt(c.gnd_scale));
  m.add(prefix + "snp_scale_factor", fmt(c.snp_scale_factor));
  m.add(prefix + "cl_cov_scale", fmt(c.cl_cov_scale));
  m.add(prefix + "noise_sd", fmt(c.noise_sd));
}

struct SimulateArgs {
  SimArgs sim;
  std::string out;
};

int run_simulate(const SimulateArgs& a, const CLI::App& sub) {
  const sbr_sim_config c = make_config(a.sim, a.sim.scenario, a.sim.correlation, a.sim.seed);
  sbr_sim* sim = nullptr;
  check(sbr_simulate(&c, a.sim.workers, &sim));
  SimPtr sp(sim);
  progress("simulate", "p=" + std::to_string(sbr_sim_p(sp.get())));
  check(sbr_sim_save(sp.get(), a.out.c_str()));
  Manifest m = start_manifest("simulate", sub);
  add_config_entries(m, c, "config.");
  m.add("output.dir", a.out);
  m.write(fs::path(a.out) / "run.manifest");
  progress("done", "out=" + a.out);
  return 0;
}

struct BenchArgs {
  SimArgs sim;
  std::vector<std::string> scenarios{"sparse", "medium", "dense"};
  std::vector<std::string> correlations{"low"};
  int seeds = 10;
  std::uint64_t first_seed = 1;
  TuneArgs tune;
  std::string out;
};

int run_bench(const BenchArgs& a, const CLI::App& sub) {
  if (a.seeds < 1) usage_error("--seeds must be >= 1");
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw CliError{2, "io", "cannot create " + a.out};
  const fs::path dir(a.out);
  std::ofstream bench(dir / "bench.csv", std::ios::trunc);
  std::ofstream timing(dir / "timing.csv", std::ios::trunc);
  if (!bench || !timing) throw CliError{2, "io", "cannot write into " + a.out};
  bench << "scenario,correlation,seed,method,test_correlation,sparsity,auc,lambda_cl,lambda_rna,lambda_snp\n";
  timing << "scenario,correlation,seed,method,seconds\n";
  const sbr_tune_options topts = to_tune_options(a.tune);

  Manifest m = start_manifest("bench", sub);
  for (const auto& corr : a.correlations)
    for (const auto& scen : a.scenarios)
      for (int i = 0; i < a.seeds; ++i) {
        const std::uint64_t seed = a.first_seed + static_cast<std::uint64_t>(i);
        const sbr_sim_config c = make_config(a.sim, scen, corr, seed);
        if (c.p_cl == 0 || c.p_rna == 0 || c.p_snp == 0) usage_error("bench needs all three sources");
        if (i == 0) add_config_entries(m, c, "config." + scen + "." + corr + ".");
        sbr_bench_row rows[8];
        std::size_t count = 0;
        check(sbr_bench_run(&c, &topts, a.sim.workers, rows, 8, &count));
        for (std::size_t r = 0; r < count; ++r) {
          const sbr_bench_row& row = rows[r];
          bench << scen << ',' << corr << ',' << seed << ',' << row.method << ',' << fmt(row.test_correlation) << ','
                << fmt(row.sparsity) << ',' << fmt(row.auc);
          for (std::size_t j = 0; j < 3; ++j) bench << ',' << fmt(row.lambda[j]);
          bench << '\n';
          timing << scen << ',' << corr << ',' << seed << ',' << row.method << ',' << fmt(row.seconds) << '\n';
        }
        progress("bench", "scenario=" + scen + " correlation=" + corr + " seed=" + std::to_string(seed));
      }
  if (!bench || !timing) throw CliError{2, "io", "write failed in " + a.out};
  m.add("output.bench", (dir / "bench.csv").string());
  m.add("output.timing", (dir / "timing.csv").string());
  m.write(dir / "run.manifest");
  return 0;
}

// CLI11 reads --config only on the top-level app, so a subcommand's config
// file is expanded into flags before parsing. Flags given on the command line
// take precedence over the file.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw CliError{2, "io", "cannot open config file " + path};
  auto trim = [](std::string t) {
    const auto b = t.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = t.find_last_not_of(" \t\r");
    t = t.substr(b, e - b + 1);
    if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) t = t.substr(1, t.size() - 2);
    return t;
  };
  auto given = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> extra;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) usage_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    for (char& ch : key)
      if (ch == '_') ch = '-';
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value == "true") {
      extra.push_back(flag);
    } else if (value != "false") {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scalable Bayesian regression with source-specific shrinkage"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sbr_version()));

  std::string config_file;  // consumed by expand_config
  auto with_config = [&config_file](CLI::App* sub) {
    sub->add_option("--config", config_file, "key = value file; command-line flags take precedence");
  };

  FitArgs fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "tune shrinkage levels and fit the dense posterior");
  with_config(fit_cmd);
  add_data_options(fit_cmd, fit.data, true);
  add_tune_options(fit_cmd, fit.tune);
  fit_cmd->add_option("--lambda", fit.lambda, "comma-separated shrinkage levels; skips tuning");
  fit_cmd->add_option("--out", fit.out, "fit file")->required();
  fit_cmd->add_option("--trace", fit.trace, "CSV of every tuning evaluation");
  fit_cmd->add_option("--gram-cache", fit.gram_cache, "directory for cached Gram matrices");
  fit_cmd->add_option("--manifest", fit.manifest, "manifest path (default: run.manifest next to --out)");
  fit_cmd->add_flag("--drop-constant", fit.drop_constant, "drop constant columns instead of failing");
  fit_cmd->add_flag("--no-variances", fit.no_variances, "skip the posterior variances");
  fit_cmd->add_option("--workers", fit.workers, "worker threads")->capture_default_str();
  fit_cmd->add_option("--block-size", fit.block_size, "columns per variance block (0 = automatic)")->capture_default_str();

  PredictArgs pred;
  CLI::App* pred_cmd = app.add_subcommand("predict", "predict new rows from a fit or sparse file");
  with_config(pred_cmd);
  add_data_options(pred_cmd, pred.data, true);
  pred_cmd->add_option("--model", pred.model, "fit or sparse file")->required();
  pred_cmd->add_option("--out", pred.out, "predictions CSV");
  pred_cmd->add_option("--manifest", pred.manifest, "manifest path");
  pred_cmd->add_flag("--stdout-csv", pred.stdout_csv, "write predictions to standard output");

  SparsifyArgs sp;
  CLI::App* sp_cmd = app.add_subcommand("sparsify", "sparsify a fit by KL-constrained L1 post-processing");
  with_config(sp_cmd);
  sp_cmd->add_option("--fit", sp.fit, "fit file")->required();
  sp_cmd->add_option("--out", sp.out, "sparse solution file")->required();
  sp_cmd->add_option("--manifest", sp.manifest, "manifest path");
  sp_cmd->add_option("--method", sp.method, "solver")->check(CLI::IsMember({"general", "relaxed"}))->capture_default_str();
  sp_cmd->add_option("--control", sp.control, "sample-size control for the relaxed threshold")
      ->check(CLI::IsMember({"none", "logn", "sqrtn", "sqrtlogn"}))
      ->capture_default_str();
  sp_cmd->add_option("--penalty", sp.penalty, "penalty form")
      ->check(CLI::IsMember({"adaptive", "scalar", "pcr"}))
      ->capture_default_str();
  sp_cmd->add_option("--alpha", sp.alpha, "scalar penalty, or multiplier on adaptive penalties")->capture_default_str();
  sp_cmd->add_option("--pcr-xi", sp.pcr_xi, "credible-region size; selects the pCR penalty");
  sp_cmd->add_option("--kl-scale", sp.kl_scale, "sigma^2 summary used for the KL scale")
      ->check(CLI::IsMember({"integrated", "mean", "mode"}))
      ->capture_default_str();
  sp_cmd->add_option("--tol", sp.tol, "coordinate descent tolerance (general)")->capture_default_str();
  sp_cmd->add_option("--max-sweeps", sp.max_sweeps, "coordinate descent sweep limit (general)")->capture_default_str();
  add_data_options(sp_cmd, sp.data, true);
  sp_cmd->add_option("--gram-cache", sp.gram_cache, "directory for cached Gram matrices (general)");
  sp_cmd->add_flag("--drop-constant", sp.drop_constant, "drop constant columns instead of failing (general)");
  sp_cmd->add_option("--workers", sp.workers, "worker threads")->capture_default_str();

  SimulateArgs sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate a simulated multi-source dataset");
  with_config(sim_cmd);
  add_sim_options(sim_cmd, sim.sim, true);
  sim_cmd->add_option("--out", sim.out, "output directory")->required();

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "evaluate ridge, SBR, SSBR and cSSBR over simulated scenarios");
  with_config(bench_cmd);
  add_sim_options(bench_cmd, bench.sim, false);
  bench_cmd->add_option("--scenarios", bench.scenarios, "scenarios to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"sparse", "medium", "dense"}))
      ->capture_default_str();
  bench_cmd->add_option("--correlations", bench.correlations, "correlation levels to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"low", "high"}))
      ->capture_default_str();
  bench_cmd->add_option("--seeds", bench.seeds, "replicates per scenario")->capture_default_str();
  bench_cmd->add_option("--first-seed", bench.first_seed, "seed of the first replicate")->capture_default_str();
  add_tune_options(bench_cmd, bench.tune);
  bench_cmd->add_option("--out", bench.out, "output directory")->required();

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: code=%d kind=%s message=%s\n", e.code, e.kind.c_str(), e.message.c_str());
    return e.code;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    std::fprintf(stderr, "error: code=1 kind=usage message=%s\n", msg.c_str());
    return 1;
  }

  try {
    if (*fit_cmd) return run_fit(fit, *fit_cmd);
    if (*pred_cmd) return run_predict(pred, *pred_cmd);
    if (*sp_cmd) return run_sparsify(sp, *sp_cmd);
    if (*sim_cmd) return run_simulate(sim, *sim_cmd);
    if (*bench_cmd) return run_bench(bench, *bench_cmd);
  } catch (const CliError& e) {
    std::string msg = e.message;
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    std::fprintf(stderr, "error: code=%d kind=%s message=%s\n", e.code, e.kind.c_str(), msg.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: code=3 kind=internal message=%s\n", e.what());
    return 3;
  }
  return 1;
}
