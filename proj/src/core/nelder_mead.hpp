#pragma once

#include "core/common.hpp"

#include <functional>

namespace sbr {

struct NelderMeadOptions {
  double ftol = 1e-6;        // spread of simplex objective values
  double xtol = 1e-6;        // max vertex distance from the best vertex (inf-norm)
  int max_evals = 2000;
  double initial_step = 1.0;
};

struct NelderMeadResult {
  Vector x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Box-constrained Nelder-Mead: trial points are clamped to [lower, upper]
/// before evaluation. Standard coefficients (1, 2, 0.5, 0.5).
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const Vector& lower, const Vector& upper, const NelderMeadOptions& opts = {});

}  // namespace sbr
