#pragma once

#include "core/common.hpp"
#include "core/data_model.hpp"
#include "core/gram.hpp"

#include <optional>
#include <span>

namespace sbr {

/// Dense posterior summary for a fixed shrinkage vector.
struct SbrFit {
  Vector beta;                  // length p, sources concatenated in order
  std::vector<Index> offsets;   // K + 1 entries
  Vector w_lambda;              // (I + G_lambda)^{-1} y, length n
  double sigma2_shape = 0.0;    // a = n / 2
  double sigma2_scale = 0.0;    // b = q / 2
  double q_lambda = 0.0;
  double log_marginal = 0.0;    // only lambda-dependent terms
  Shrinkage lambda;
  std::optional<Vector> var_diag;  // diag(Sigma_beta), not scaled by sigma^2
  Index n = 0;

  Index p() const { return beta.size(); }
  Index k() const { return lambda.k(); }
  /// lambda expanded to one entry per coefficient.
  Vector lambda_per_coef() const;
};

/// beta_k = X_k^T w / lambda_k from a single n x n solve. log_marginal is
/// -inf when y = 0.
SbrFit posterior_mode(const GramCache& cache, const MultiSourceDataset& ds, const Shrinkage& lambda);

/// Predictions through the kernel form: [sum_k X_k^pred X_k^T / lambda_k] w.
Vector predict_kernel(const MultiSourceDataset& train, const Vector& w_lambda, const Vector& lambda,
                      std::span<const Matrix> x_pred);

/// Predictions through the coefficient vector: X^pred beta.
Vector predict(const SbrFit& fit, std::span<const Matrix> x_pred);

struct VarianceOptions {
  std::optional<Index> block_size;  // default ceil(p_k / (4 * workers))
  std::size_t workers = 1;
};

/// diag(Sigma_beta) computed per column block as
/// (1 - ||L^{-1} x_j||^2 / lambda_k) / lambda_k with L L^T = I + G_lambda.
Vector posterior_variances(const GramCache& cache, const MultiSourceDataset& ds, const Shrinkage& lambda,
                           const VarianceOptions& opts = {});

/// Same, reusing an existing factorization.
Vector posterior_variances(const CoreSolve& core, const MultiSourceDataset& ds, const Vector& lambda,
                           const VarianceOptions& opts = {});

/// -0.5 log|I + G| - (n/2) log q. Domain error when q == 0.
double log_marginal(const CoreSolve& core, Index n);

struct InverseGamma {
  double shape;
  double scale;
};

InverseGamma sigma2_posterior(const CoreSolve& core, Index n);

}  // namespace sbr
