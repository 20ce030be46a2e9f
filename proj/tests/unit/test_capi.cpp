// Exercises libsbr only through its C header.
#include "doctest.h"

#include <sbr/sbr.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace {

struct Data {
  size_t n;
  std::vector<double> y;
  std::vector<std::vector<double>> x;  // row-major per source
  std::vector<size_t> dims;
  std::vector<std::string> names;
};

Data make_data(size_t n, std::vector<size_t> dims, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Data d{n, {}, {}, dims, {}};
  for (size_t k = 0; k < dims.size(); ++k) {
    d.names.push_back("src" + std::to_string(k));
    std::vector<double> xs(n * dims[k]);
    for (double& v : xs) v = 3.0 + 2.0 * z(rng);
    d.x.push_back(xs);
  }
  d.y.resize(n);
  for (size_t i = 0; i < n; ++i) d.y[i] = d.x[0][i * dims[0]] + 0.5 * z(rng) + 10.0;
  return d;
}

sbr_dataset* make(const Data& d, bool with_y = true) {
  std::vector<const char*> names;
  std::vector<const double*> xs;
  for (size_t k = 0; k < d.dims.size(); ++k) {
    names.push_back(d.names[k].c_str());
    xs.push_back(d.x[k].data());
  }
  sbr_dataset* ds = nullptr;
  REQUIRE(sbr_dataset_from_arrays(d.n, with_y ? d.y.data() : nullptr, d.dims.size(), names.data(), d.dims.data(),
                                  xs.data(), &ds) == SBR_OK);
  return ds;
}

struct Pipeline {
  sbr_dataset* raw = nullptr;
  sbr_dataset* std_ds = nullptr;
  sbr_gram* gram = nullptr;
  ~Pipeline() {
    sbr_gram_free(gram);
    sbr_dataset_free(std_ds);
    sbr_dataset_free(raw);
  }
};

void build(Pipeline& p, const Data& d) {
  p.raw = make(d);
  size_t dropped = 99;
  REQUIRE(sbr_dataset_standardize(p.raw, 0, &p.std_ds, &dropped) == SBR_OK);
  CHECK(dropped == 0);
  REQUIRE(sbr_gram_build(p.std_ds, 1, nullptr, &p.gram) == SBR_OK);
}

}  // namespace

TEST_CASE("version, build info and status names") {
  CHECK(std::string(sbr_version()).size() > 0);
  CHECK(std::string(sbr_build_info()).find("eigen=") != std::string::npos);
  CHECK(std::string(sbr_status_name(SBR_OK)) == "ok");
  CHECK(std::string(sbr_status_name(SBR_ERR_DATA)) == "data");
}

TEST_CASE("dataset handles report their shape") {
  const Data d = make_data(7, {3, 5}, 1);
  sbr_dataset* ds = make(d);
  CHECK(sbr_dataset_n(ds) == 7);
  CHECK(sbr_dataset_k(ds) == 2);
  CHECK(sbr_dataset_source_dim(ds, 1) == 5);
  CHECK(std::string(sbr_dataset_source_name(ds, 0)) == "src0");
  CHECK(sbr_dataset_source_name(ds, 5) == nullptr);
  std::vector<double> y(7);
  CHECK(sbr_dataset_response(ds, y.data(), y.size()) == SBR_OK);
  CHECK(y == d.y);
  CHECK(sbr_dataset_response(ds, y.data(), 3) != SBR_OK);
  sbr_dataset_free(ds);
}

TEST_CASE("errors carry a status and a message") {
  sbr_dataset* ds = nullptr;
  CHECK(sbr_dataset_from_arrays(3, nullptr, 1, nullptr, nullptr, nullptr, &ds) == SBR_ERR_USAGE);
  CHECK(std::string(sbr_last_error()).size() > 0);

  // A constant column is a data error unless dropped.
  std::vector<double> x{1, 5, 2, 5, 3, 5};
  std::vector<double> y{1, 2, 4};
  const char* name = "A";
  const size_t dim = 2;
  const double* xp = x.data();
  REQUIRE(sbr_dataset_from_arrays(3, y.data(), 1, &name, &dim, &xp, &ds) == SBR_OK);
  sbr_dataset* s = nullptr;
  CHECK(sbr_dataset_standardize(ds, 0, &s, nullptr) == SBR_ERR_DATA);
  CHECK(std::string(sbr_last_error()).find("zero-variance") != std::string::npos);
  size_t dropped = 0;
  CHECK(sbr_dataset_standardize(ds, 1, &s, &dropped) == SBR_OK);
  CHECK(dropped == 1);
  sbr_dataset_free(s);

  // Fitting needs standardized data.
  sbr_gram* g = nullptr;
  CHECK(sbr_gram_build(ds, 1, nullptr, &g) == SBR_OK);
  sbr_fit* f = nullptr;
  const double lambda = 1.0;
  CHECK(sbr_fit_compute(g, ds, &lambda, 1, SBR_EST_USER, nullptr, &f) == SBR_ERR_USAGE);
  const double bad = -1.0;
  sbr_dataset* st = nullptr;
  REQUIRE(sbr_dataset_standardize(ds, 1, &st, nullptr) == SBR_OK);
  sbr_gram* g2 = nullptr;
  REQUIRE(sbr_gram_build(st, 1, nullptr, &g2) == SBR_OK);
  CHECK(sbr_fit_compute(g2, st, &bad, 1, SBR_EST_USER, nullptr, &f) == SBR_ERR_DOMAIN);
  sbr_gram_free(g2);
  sbr_gram_free(g);
  sbr_dataset_free(st);
  sbr_dataset_free(ds);
}

TEST_CASE("tune, fit, save, load and predict") {
  const Data d = make_data(30, {4, 40}, 2);
  Pipeline p;
  build(p, d);

  sbr_tune_options to;
  sbr_tune_options_default(&to);
  CHECK(to.estimator == SBR_EST_MAP);
  CHECK(to.intercept == 1);
  double lambda[2];
  sbr_tune_result tr;
  REQUIRE(sbr_tune(p.gram, p.std_ds, &to, nullptr, lambda, 2, &tr) == SBR_OK);
  CHECK(lambda[0] > 0.0);
  CHECK(lambda[0] < lambda[1]);  // the first source carries the signal
  CHECK(tr.evals > 0);

  sbr_fit_options fo;
  sbr_fit_options_default(&fo);
  sbr_fit* fit = nullptr;
  REQUIRE(sbr_fit_compute(p.gram, p.std_ds, lambda, 2, SBR_EST_MAP, &fo, &fit) == SBR_OK);
  sbr_fit_summary sum;
  REQUIRE(sbr_fit_get_summary(fit, &sum) == SBR_OK);
  CHECK(sum.n == 30);
  CHECK(sum.p == 44);
  CHECK(sum.k == 2);
  CHECK(sum.sigma2_shape == 15.0);
  CHECK(sum.sigma2_scale == doctest::Approx(sum.q_lambda / 2.0));
  CHECK(sum.has_variances == 1);
  CHECK(sum.is_sparse == 0);
  CHECK(sbr_fit_source_dim(fit, 1) == 40);
  CHECK(std::string(sbr_fit_source_name(fit, 1)) == "src1");

  std::vector<double> beta(44), var(44);
  REQUIRE(sbr_fit_coefficients(fit, beta.data(), beta.size()) == SBR_OK);
  REQUIRE(sbr_fit_variances(fit, var.data(), var.size()) == SBR_OK);
  for (size_t j = 0; j < 44; ++j) CHECK(var[j] > 0.0);
  CHECK(sbr_fit_coefficients(fit, beta.data(), 10) != SBR_OK);

  const auto dir = std::filesystem::temp_directory_path() / "sbr_capi_fit";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.sbrfit").string();
  REQUIRE(sbr_fit_save(fit, path.c_str()) == SBR_OK);
  sbr_fit* loaded = nullptr;
  REQUIRE(sbr_fit_load(path.c_str(), &loaded) == SBR_OK);
  std::vector<double> beta2(44);
  REQUIRE(sbr_fit_coefficients(loaded, beta2.data(), beta2.size()) == SBR_OK);
  CHECK(std::memcmp(beta.data(), beta2.data(), 44 * sizeof(double)) == 0);

  // Predictions come back on the original response scale.
  std::vector<double> pred(30), pred2(30);
  REQUIRE(sbr_fit_predict(fit, p.raw, pred.data(), pred.size()) == SBR_OK);
  REQUIRE(sbr_fit_predict(loaded, p.raw, pred2.data(), pred2.size()) == SBR_OK);
  CHECK(pred == pred2);
  double mean = 0.0;
  for (double v : pred) mean += v / 30.0;
  double ymean = 0.0;
  for (double v : d.y) ymean += v / 30.0;
  CHECK(mean == doctest::Approx(ymean).epsilon(1e-9));
  double r = 0.0;
  REQUIRE(sbr_metric_correlation(pred.data(), d.y.data(), 30, &r) == SBR_OK);
  CHECK(r > 0.5);

  // A dataset with the wrong shape is rejected and names the source.
  const Data wrong = make_data(5, {4, 39}, 3);
  sbr_dataset* w = make(wrong, false);
  CHECK(sbr_fit_predict(fit, w, pred.data(), 5) == SBR_ERR_DATA);
  CHECK(std::string(sbr_last_error()).find("src1") != std::string::npos);
  sbr_dataset_free(w);

  sbr_fit_free(loaded);
  sbr_fit_free(fit);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sparsify: relaxed and general routes") {
  const Data d = make_data(25, {5, 30}, 4);
  Pipeline p;
  build(p, d);
  const double lambda[2] = {1.0, 20.0};
  sbr_fit* fit = nullptr;
  REQUIRE(sbr_fit_compute(p.gram, p.std_ds, lambda, 2, SBR_EST_USER, nullptr, &fit) == SBR_OK);

  sbr_sparse_options so;
  sbr_sparse_options_default(&so);
  sbr_sparse* relaxed = nullptr;
  REQUIRE(sbr_sparsify(fit, nullptr, nullptr, &so, &relaxed) == SBR_OK);
  sbr_sparse_summary rs;
  REQUIRE(sbr_sparse_get_summary(relaxed, &rs) == SBR_OK);
  CHECK(rs.p == 35);
  CHECK(rs.nonzero < 35);
  CHECK(rs.f_n == doctest::Approx(std::log(25.0)));
  CHECK(std::string(rs.method) == "relaxed_controlled");

  so.control = SBR_CONTROL_NONE;
  sbr_sparse* plain = nullptr;
  REQUIRE(sbr_sparsify(fit, nullptr, nullptr, &so, &plain) == SBR_OK);
  sbr_sparse_summary ps;
  REQUIRE(sbr_sparse_get_summary(plain, &ps) == SBR_OK);
  CHECK(ps.nonzero >= rs.nonzero);

  so.method = SBR_SPARSE_GENERAL;
  sbr_sparse* general = nullptr;
  CHECK(sbr_sparsify(fit, nullptr, nullptr, &so, &general) == SBR_ERR_USAGE);
  REQUIRE(sbr_sparsify(fit, p.gram, p.std_ds, &so, &general) == SBR_OK);
  sbr_sparse_summary gs;
  REQUIRE(sbr_sparse_get_summary(general, &gs) == SBR_OK);
  CHECK(gs.converged == 1);

  // pCR with xi = 0 keeps the dense solution.
  so.penalty = SBR_PENALTY_PCR;
  so.pcr_xi = 0.0;
  sbr_sparse* pcr = nullptr;
  REQUIRE(sbr_sparsify(fit, p.gram, p.std_ds, &so, &pcr) == SBR_OK);
  std::vector<double> beta(35), gamma(35);
  REQUIRE(sbr_fit_coefficients(fit, beta.data(), 35) == SBR_OK);
  REQUIRE(sbr_sparse_coefficients(pcr, gamma.data(), 35) == SBR_OK);
  for (size_t j = 0; j < 35; ++j) CHECK(std::abs(beta[j] - gamma[j]) < 1e-9);

  // Sparse files load back as fits and predict with gamma.
  const auto dir = std::filesystem::temp_directory_path() / "sbr_capi_sparse";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "s.sbrfit").string();
  REQUIRE(sbr_sparse_save(relaxed, path.c_str()) == SBR_OK);
  sbr_fit* back = nullptr;
  REQUIRE(sbr_fit_load(path.c_str(), &back) == SBR_OK);
  sbr_fit_summary bs;
  REQUIRE(sbr_fit_get_summary(back, &bs) == SBR_OK);
  CHECK(bs.is_sparse == 1);
  std::vector<double> a(25), b(25);
  REQUIRE(sbr_sparse_predict(relaxed, p.raw, a.data(), 25) == SBR_OK);
  REQUIRE(sbr_fit_predict(back, p.raw, b.data(), 25) == SBR_OK);
  CHECK(a == b);
  sbr_sparse* again = nullptr;
  CHECK(sbr_sparsify(back, nullptr, nullptr, nullptr, &again) == SBR_ERR_USAGE);

  sbr_fit_free(back);
  sbr_sparse_free(pcr);
  sbr_sparse_free(general);
  sbr_sparse_free(plain);
  sbr_sparse_free(relaxed);
  sbr_fit_free(fit);
  std::filesystem::remove_all(dir);
}

TEST_CASE("simulation through the C API") {
  sbr_sim_config cfg;
  REQUIRE(sbr_sim_config_default(SBR_SCENARIO_MEDIUM, SBR_CORR_LOW, 7, &cfg) == SBR_OK);
  CHECK(cfg.p_snp == 100000);
  CHECK(cfg.cl_covariance_path == nullptr);
  REQUIRE(sbr_sim_config_scale(&cfg, 100.0) == SBR_OK);
  CHECK(cfg.p_rna == 20);
  CHECK(cfg.p_snp == 1000);
  CHECK(cfg.p_snp % cfg.snp_blocks == 0);
  cfg.n_test = 50;
  sbr_sim* sim = nullptr;
  REQUIRE(sbr_simulate(&cfg, 2, &sim) == SBR_OK);
  CHECK(sbr_dataset_n(sbr_sim_train(sim)) == 100);
  CHECK(sbr_dataset_n(sbr_sim_test(sim)) == 50);
  const size_t p = sbr_sim_p(sim);
  CHECK(p == 26 + 20 + 1000);
  std::vector<double> beta(p);
  std::vector<unsigned char> support(p);
  REQUIRE(sbr_sim_truth(sim, beta.data(), support.data(), p) == SBR_OK);
  size_t nnz = 0;
  for (size_t j = 0; j < p; ++j) {
    CHECK((beta[j] != 0.0) == (support[j] != 0));
    nnz += support[j];
  }
  CHECK(nnz == 13 + 1 + 100);
  std::vector<double> scores(p);
  for (size_t j = 0; j < p; ++j) scores[j] = std::abs(beta[j]);
  double auc = 0.0;
  REQUIRE(sbr_metric_auc(scores.data(), support.data(), p, &auc) == SBR_OK);
  CHECK(auc == 1.0);
  sbr_sim_free(sim);

  cfg.cl_covariance_path = "/nonexistent/cov.sbrm";
  CHECK(sbr_simulate(&cfg, 1, &sim) == SBR_ERR_IO);
}

TEST_CASE("metrics reject degenerate input") {
  const double a[3] = {1, 1, 1}, b[3] = {1, 2, 3};
  double out = 0.0;
  CHECK(sbr_metric_correlation(a, b, 3, &out) == SBR_ERR_DOMAIN);
  const unsigned char all[3] = {1, 1, 1};
  CHECK(sbr_metric_auc(b, all, 3, &out) == SBR_ERR_DOMAIN);
}
