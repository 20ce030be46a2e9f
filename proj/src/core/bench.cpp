#include "core/bench.hpp"

#include "core/fit.hpp"
#include "core/model_io.hpp"
#include "core/sparsify.hpp"

#include <chrono>

namespace sbr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double nonzero_fraction(const Vector& v) {
  return static_cast<double>((v.array() != 0.0).count()) / static_cast<double>(v.size());
}

}  // namespace

std::vector<MethodResult> run_bench_case(const SimConfig& cfg, const BenchOptions& opts) {
  const SimulatedData sim = generate_scenario(cfg, opts.workers);
  const MultiSourceDataset train = standardize(sim.train, true);
  std::vector<Matrix> test_x;
  for (const auto& s : sim.test.sources()) test_x.push_back(s.x);
  const Vector& test_y = sim.test.y();

  auto evaluate = [&](MethodResult& r, const TrainedModel& model, const Vector& coef) {
    const Vector pred = predict_raw(model, coef, test_x);
    r.test_correlation = metric_correlation({pred.data(), static_cast<std::size_t>(pred.size())},
                                            {test_y.data(), static_cast<std::size_t>(test_y.size())});
    r.sparsity = nonzero_fraction(coef);
    const Vector score = coef.cwiseAbs();
    r.auc = metric_auc({score.data(), static_cast<std::size_t>(score.size())}, sim.truth.support);
  };

  std::vector<MethodResult> out;
  const auto t_gram = Clock::now();
  GramOptions gopts;
  gopts.workers = opts.workers;
  const GramCache cache = GramCache::build(train, gopts);
  const double gram_seconds = seconds_since(t_gram);

  {
    const auto t0 = Clock::now();
    TuneConfig tc = opts.tune;
    tc.estimator = Estimator::CV;
    tc.tie_sources = true;
    tc.keep_trace = false;
    const TuneResult tr = tune(cache, train.y(), tc);
    const TrainedModel model = make_trained_model(posterior_mode(cache, train, tr.lambda_hat), train);
    MethodResult r;
    r.method = "ridge";
    r.lambda = tr.lambda_hat.lambda;
    evaluate(r, model, model.fit.beta);
    r.seconds = gram_seconds + seconds_since(t0);
    out.push_back(std::move(r));
  }

  const auto t0 = Clock::now();
  TuneConfig tc = opts.tune;
  tc.tie_sources = false;
  tc.keep_trace = false;
  const TuneResult tr = tune(cache, train.y(), tc);
  SbrFit fit = posterior_mode(cache, train, tr.lambda_hat);
  VarianceOptions vo;
  vo.workers = opts.workers;
  fit.var_diag = posterior_variances(cache, train, tr.lambda_hat, vo);
  const TrainedModel model = make_trained_model(std::move(fit), train);
  const double sbr_seconds = gram_seconds + seconds_since(t0);
  {
    MethodResult r;
    r.method = "sbr";
    r.lambda = tr.lambda_hat.lambda;
    evaluate(r, model, model.fit.beta);
    r.seconds = sbr_seconds;
    out.push_back(std::move(r));
  }

  const KlContext ctx = make_kl_context(model.fit);
  const Vector alpha = adaptive_penalties(model.fit, model.fit.lambda);
  for (Control c : {Control::None, Control::LogN}) {
    const auto ts = Clock::now();
    const SparseSolution sol = solve_relaxed(ctx, alpha, control_factor(c, model.fit.n));
    MethodResult r;
    r.method = c == Control::None ? "ssbr" : "cssbr";
    r.lambda = tr.lambda_hat.lambda;
    evaluate(r, model, sol.gamma);
    r.seconds = sbr_seconds + seconds_since(ts);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sbr
