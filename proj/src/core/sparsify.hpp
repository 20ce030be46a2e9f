#pragma once

#include "core/common.hpp"
#include "core/data_model.hpp"
#include "core/fit.hpp"
#include "core/gram.hpp"

#include <optional>
#include <variant>

namespace sbr {

/// Which posterior summary of sigma^2 fixes the KL scale c = m / q_lambda.
enum class KlScale {
  Integrated,     // m = n (sigma^2 integrated out)
  PosteriorMean,  // m = n - 2
  PosteriorMode,  // m = n + 2
};

/// Multiplier applied to every relaxed threshold.
enum class Control { None, SqrtN, LogN, SqrtLogN };

const char* control_name(Control c);
Control parse_control(const std::string& s);
double control_factor(Control c, Index n);

/// Spectral factors of M = (I + G)^{-1/2} X Lambda^{-1/2}; only the columns
/// with nonzero singular value are kept (rank <= n).
struct SvdFactors {
  Vector d;        // singular values in [0, 1)
  Vector d_tilde;  // d^2 / (1 - d^2)
  Matrix v1;       // p x rank, orthonormal columns
};

struct KlContext {
  Vector beta_hat;
  Vector lambda;    // per coefficient
  Vector var_diag;  // may be empty when only the general solver is used
  double q_lambda = 0.0;
  double c = 0.0;
  Index n = 0;
  std::vector<Index> offsets;
  Vector source_lambda;
  std::optional<SvdFactors> svd;
};

double kl_scale(KlScale s, Index n, double q);

/// Context without SVD factors (enough for the relaxed solver).
KlContext make_kl_context(const SbrFit& fit, KlScale scale = KlScale::Integrated);

/// Adds the SVD factors: eigen-decomposes the n x n matrix M M^T and forms
/// V1 = M^T U D^{-1} in O(n^2 p).
KlContext build_svd_context(const GramCache& cache, const MultiSourceDataset& ds, const SbrFit& fit,
                            KlScale scale = KlScale::Integrated);

/// (c/2) (beta - gamma)^T Sigma^{-1} (beta - gamma) through
/// Sigma^{-1} = Lambda + Lambda^{1/2} V1 Dt V1^T Lambda^{1/2}.
double expected_kl(const KlContext& ctx, const Vector& gamma);

enum class SparseMethod { General, SvdEquivalent, Relaxed, RelaxedControlled };
const char* method_name(SparseMethod m);

using Penalty = std::variant<double, Vector>;

struct SparseSolution {
  Vector gamma;
  Index nonzero_count = 0;
  double sparsity = 0.0;  // nonzero_count / p
  SparseMethod method = SparseMethod::Relaxed;
  Penalty penalties = 0.0;
  double f_n = 1.0;
  bool converged = true;
  int sweeps = 0;
};

struct GeneralOptions {
  double tol = 1e-7;  // relative to max(1, ||beta||_inf)
  int max_sweeps = 10000;
};

/// Minimizes (c/2)||Dt^{1/2} V1^T L^{1/2} d||^2 + (c/2)||L^{1/2} d||^2 + sum_j a_j |g_j|
/// (d = beta - g) by cyclic coordinate descent on the augmented system. An
/// infinite a_j pins g_j to zero.
SparseSolution solve_general(const KlContext& ctx, const Penalty& alpha, const GeneralOptions& opts = {});

/// The same objective with an explicit p x p precision matrix (c/2) d^T P d;
/// the direct route for small p.
SparseSolution solve_general_dense(const Vector& beta_hat, const Matrix& precision, double c,
                                   const Penalty& alpha, const GeneralOptions& opts = {});

/// Per-coefficient soft threshold at v_j a_j f_n / c.
SparseSolution solve_relaxed(const KlContext& ctx, const Penalty& alpha, double f_n = 1.0);

/// a_jk = |beta_jk|^{-w_k}, w_k = lambda_k / sum_l lambda_l. Zero
/// coefficients get +inf.
Vector adaptive_penalties(const SbrFit& fit, const Shrinkage& lambda);

/// alpha = (c/2) ||beta||_1^{-2} xi.
double pcr_penalty(double xi, const SbrFit& fit, const KlContext& ctx);

/// Smallest scalar alpha for which the general solution is exactly zero.
double alpha_max(const KlContext& ctx);

}  // namespace sbr
