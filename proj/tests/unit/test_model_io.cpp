#include "doctest.h"

#include "core/fit.hpp"
#include "core/model_io.hpp"
#include "core/sparsify.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

#include <fstream>

using namespace sbr;

namespace {

struct Trained {
  oracle::Instance inst;
  MultiSourceDataset std_ds;
  TrainedModel model;
};

Trained trained(oracle::Gen& g, bool variances) {
  Trained t{oracle::make_instance(g, 12, {4, 9}), {}, {}};
  // Uncentered raw data so the stored statistics matter.
  std::vector<Source> src;
  for (const auto& s : t.inst.ds.sources()) src.push_back(Source{s.name, (s.x.array() * 2.0 + 5.0).matrix(), {}, {}, false});
  t.inst.ds = MultiSourceDataset((t.inst.y.array() * 3.0 - 1.0).matrix(), src);
  t.std_ds = standardize(t.inst.ds);
  const auto cache = GramCache::build(t.std_ds);
  Shrinkage l;
  l.lambda = t.inst.lambda;
  SbrFit fit = posterior_mode(cache, t.std_ds, l);
  if (variances) fit.var_diag = posterior_variances(cache, t.std_ds, l);
  t.model = make_trained_model(fit, t.std_ds);
  return t;
}

std::vector<Matrix> raw_blocks(const MultiSourceDataset& ds) {
  std::vector<Matrix> out;
  for (const auto& s : ds.sources()) out.push_back(s.x);
  return out;
}

}  // namespace

TEST_CASE("fit model file round-trips every value bit-exactly") {
  testing_fs::TempDir dir("mio");
  oracle::Gen g(101);
  const Trained t = trained(g, true);
  write_model_file(dir / "m.sbrfit", to_model_file(t.model));
  const ModelFile f = read_model_file(dir / "m.sbrfit");
  CHECK(model_kind(f) == "fit");
  const TrainedModel back = trained_model_from_file(f);
  CHECK((back.fit.beta.array() == t.model.fit.beta.array()).all());
  CHECK((back.fit.var_diag->array() == t.model.fit.var_diag->array()).all());
  CHECK((back.fit.lambda.lambda.array() == t.model.fit.lambda.lambda.array()).all());
  CHECK(back.fit.q_lambda == t.model.fit.q_lambda);
  CHECK(back.fit.log_marginal == t.model.fit.log_marginal);
  CHECK(back.fit.offsets == t.model.fit.offsets);
  CHECK(back.source_names == t.model.source_names);
  CHECK(back.y_stats.mean == t.model.y_stats.mean);
  CHECK(back.y_stats.sd == t.model.y_stats.sd);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < back.column_stats[k].size(); ++j) {
      CHECK(back.column_stats[k][j].mean == t.model.column_stats[k][j].mean);
      CHECK(back.column_stats[k][j].sd == t.model.column_stats[k][j].sd);
    }
}

TEST_CASE("predict_raw maps back to the response scale") {
  oracle::Gen g(102);
  const Trained t = trained(g, false);
  const Vector raw_pred = predict_raw(t.model, t.model.fit.beta, raw_blocks(t.inst.ds));
  std::vector<Matrix> std_blocks;
  for (const auto& s : t.std_ds.sources()) std_blocks.push_back(s.x);
  const Vector std_pred = predict(t.model.fit, std_blocks);
  const Vector want = (std_pred.array() * t.model.y_stats.sd + t.model.y_stats.mean).matrix();
  CHECK(oracle::max_abs_diff(raw_pred, want) < 1e-12);
}

TEST_CASE("predict_raw names the source on a column mismatch") {
  oracle::Gen g(103);
  const Trained t = trained(g, false);
  std::vector<Matrix> bad = raw_blocks(t.inst.ds);
  bad[1] = Matrix::Zero(3, 8);
  bad[0] = Matrix::Zero(3, 4);
  try {
    predict_raw(t.model, t.model.fit.beta, bad);
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("s1") != std::string::npos);
  }
}

TEST_CASE("sparse model file round-trips") {
  testing_fs::TempDir dir("mio");
  oracle::Gen g(104);
  Trained t = trained(g, true);
  const KlContext ctx = make_kl_context(t.model.fit);
  SparseModel sm;
  sm.base = t.model;
  sm.solution = solve_relaxed(ctx, Penalty{adaptive_penalties(t.model.fit, t.model.fit.lambda)},
                              control_factor(Control::LogN, 12));
  sm.control = Control::LogN;
  sm.penalty_mode = "adaptive";
  write_model_file(dir / "s.sbrfit", to_model_file(sm));
  const ModelFile f = read_model_file(dir / "s.sbrfit");
  CHECK(model_kind(f) == "sparse");
  const SparseModel back = sparse_model_from_file(f);
  CHECK((back.solution.gamma.array() == sm.solution.gamma.array()).all());
  CHECK(back.solution.nonzero_count == sm.solution.nonzero_count);
  CHECK(back.solution.f_n == sm.solution.f_n);
  CHECK(back.control == Control::LogN);
  CHECK(back.penalty_mode == "adaptive");
  CHECK((back.base.fit.beta.array() == sm.base.fit.beta.array()).all());
}

TEST_CASE("model file reader rejects damaged input") {
  testing_fs::TempDir dir("mio");
  {
    std::ofstream out(dir / "junk");
    out << "format = something-else\nend_header\n";
  }
  CHECK_THROWS_AS(trained_model_from_file(read_model_file(dir / "junk")), Error);
  CHECK_THROWS_AS(read_model_file(dir / "missing"), Error);
}

TEST_CASE("double lists round-trip with 17 digits") {
  Vector v(4);
  v << 1.0 / 3.0, -2e-310, 12345678.901234567, 0.1;
  const Vector back = parse_doubles(join_doubles(v), "v");
  CHECK((back.array() == v.array()).all());
  CHECK_THROWS_AS(parse_doubles("1,abc", "v"), Error);
}
