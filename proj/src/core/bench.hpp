#pragma once

#include "core/common.hpp"
#include "core/simgen.hpp"
#include "core/tuning.hpp"

#include <string>
#include <vector>

namespace sbr {

/// One method's result on one simulated replicate.
struct MethodResult {
  std::string method;  // ridge, sbr, ssbr or cssbr
  double test_correlation = 0.0;
  double sparsity = 1.0;  // fraction of nonzero coefficients
  double auc = 0.0;       // |coefficient| against the true support
  Vector lambda;
  double seconds = 0.0;  // wall time of the method, including shared steps
};

struct BenchOptions {
  std::size_t workers = 1;
  TuneConfig tune;  // estimator is overridden per method
};

/// Simulates one replicate and evaluates single-lambda ridge (LOO-CV), SBR
/// (tuned with `opts.tune.estimator`), relaxed SSBR and relaxed SSBR with
/// log n control on the held-out rows.
std::vector<MethodResult> run_bench_case(const SimConfig& cfg, const BenchOptions& opts = {});

}  // namespace sbr
