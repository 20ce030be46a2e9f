#include "core/sparsify.hpp"

#include <cmath>
#include <limits>

namespace sbr {

const char* control_name(Control c) {
  switch (c) {
    case Control::None: return "none";
    case Control::SqrtN: return "sqrtn";
    case Control::LogN: return "logn";
    case Control::SqrtLogN: return "sqrtlogn";
  }
  return "none";
}

Control parse_control(const std::string& s) {
  if (s == "none") return Control::None;
  if (s == "sqrtn") return Control::SqrtN;
  if (s == "logn") return Control::LogN;
  if (s == "sqrtlogn") return Control::SqrtLogN;
  fail(ErrorKind::Usage, "unknown control '" + s + "'");
}

double control_factor(Control c, Index n) {
  const double dn = static_cast<double>(n);
  switch (c) {
    case Control::None: return 1.0;
    case Control::SqrtN: return std::sqrt(dn);
    case Control::LogN: return std::log(dn);
    case Control::SqrtLogN: return std::sqrt(std::log(dn));
  }
  return 1.0;
}

const char* method_name(SparseMethod m) {
  switch (m) {
    case SparseMethod::General: return "general";
    case SparseMethod::SvdEquivalent: return "svd_equivalent";
    case SparseMethod::Relaxed: return "relaxed";
    case SparseMethod::RelaxedControlled: return "relaxed_controlled";
  }
  return "relaxed";
}

double kl_scale(KlScale s, Index n, double q) {
  require(q > 0.0, ErrorKind::Domain, "KL scale undefined for q_lambda = 0");
  double m = static_cast<double>(n);
  if (s == KlScale::PosteriorMean) m -= 2.0;
  if (s == KlScale::PosteriorMode) m += 2.0;
  require(m > 0.0, ErrorKind::Domain, "KL scale needs n > 2 for the posterior-mean variant");
  return m / q;
}

KlContext make_kl_context(const SbrFit& fit, KlScale scale) {
  KlContext ctx;
  ctx.beta_hat = fit.beta;
  ctx.lambda = fit.lambda_per_coef();
  ctx.source_lambda = fit.lambda.lambda;
  ctx.offsets = fit.offsets;
  ctx.q_lambda = fit.q_lambda;
  ctx.n = fit.n;
  ctx.c = kl_scale(scale, fit.n, fit.q_lambda);
  if (fit.var_diag) ctx.var_diag = *fit.var_diag;
  return ctx;
}

KlContext build_svd_context(const GramCache& cache, const MultiSourceDataset& ds, const SbrFit& fit,
                            KlScale scale) {
  KlContext ctx = make_kl_context(fit, scale);
  require(ds.p() == fit.p() && ds.k() == fit.k(), ErrorKind::Data, "SVD context: dataset does not match fit");

  // M M^T = (I+G)^{-1/2} G (I+G)^{-1/2} shares eigenvectors with G; an
  // eigenvalue w of G maps to d^2 = w / (1 + w) and d~ = d^2/(1-d^2) = w.
  const Matrix g = assemble_g(cache, fit.lambda.lambda);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, "eigendecomposition of M M^T failed");
  const Vector omega = eig.eigenvalues().cwiseMax(0.0);
  const double cutoff = 1e-12 * std::max(1.0, omega.maxCoeff());

  std::vector<Index> keep;
  for (Index i = omega.size() - 1; i >= 0; --i)
    if (omega[i] > cutoff) keep.push_back(i);
  const Index rank = static_cast<Index>(keep.size());

  SvdFactors svd;
  svd.d.resize(rank);
  svd.d_tilde.resize(rank);
  Matrix u(ds.n(), rank);
  for (Index r = 0; r < rank; ++r) {
    const double w = omega[keep[static_cast<std::size_t>(r)]];
    double d2 = w / (1.0 + w);
    if (d2 >= 1.0) {
      if (d2 > 1.0 + 1e-8) fail(ErrorKind::Numerical, "singular value of M exceeds 1");
      d2 = 1.0 - 1e-12;
    }
    svd.d[r] = std::sqrt(d2);
    svd.d_tilde[r] = w;
    u.col(r) = eig.eigenvectors().col(keep[static_cast<std::size_t>(r)]) / std::sqrt(w);
  }
  svd.v1.resize(ds.p(), rank);
  const auto off = ds.offsets();
  for (Index k = 0; k < ds.k(); ++k) {
    const double s = 1.0 / std::sqrt(fit.lambda.lambda[k]);
    svd.v1.middleRows(off[static_cast<std::size_t>(k)], ds.p(k)).noalias() = s * (ds.source(k).x.transpose() * u);
  }
  ctx.svd = std::move(svd);
  return ctx;
}

double expected_kl(const KlContext& ctx, const Vector& gamma) {
  require(ctx.svd.has_value(), ErrorKind::Usage, "expected_kl needs SVD factors");
  require(gamma.size() == ctx.beta_hat.size(), ErrorKind::Data, "expected_kl: gamma has wrong length");
  const Vector s = ctx.lambda.cwiseSqrt().cwiseProduct(ctx.beta_hat - gamma);
  const Vector t = ctx.svd->v1.transpose() * s;
  return 0.5 * ctx.c * (s.squaredNorm() + t.cwiseAbs2().dot(ctx.svd->d_tilde));
}

namespace {

Vector expand_penalty(const Penalty& alpha, Index p) {
  Vector a;
  if (const double* s = std::get_if<double>(&alpha)) {
    a = Vector::Constant(p, *s);
  } else {
    a = std::get<Vector>(alpha);
    require(a.size() == p, ErrorKind::Data, "penalty vector has wrong length");
  }
  for (Index j = 0; j < p; ++j)
    if (std::isnan(a[j]) || a[j] < 0.0) fail(ErrorKind::Domain, "penalties must be >= 0");
  return a;
}

double soft(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

void finish(SparseSolution& sol) {
  sol.nonzero_count = (sol.gamma.array() != 0.0).count();
  sol.sparsity = sol.gamma.size() ? static_cast<double>(sol.nonzero_count) / static_cast<double>(sol.gamma.size()) : 0.0;
}

// Cyclic coordinate descent for min_g (c/2)(g-b)^T Q (g-b) + sum a_j|g_j|,
// started at g = b. `grad(j)` returns (Q (g - b))_j, `diag(j)` Q_jj and
// `move(j, delta)` updates whatever state grad() reads.
template <class Grad, class Diag, class Move>
void coordinate_descent(SparseSolution& sol, const Vector& beta, const Vector& a, double c,
                        const GeneralOptions& opts, Grad&& grad, Diag&& diag, Move&& move) {
  const Index p = beta.size();
  sol.gamma = beta;
  const double tol = opts.tol * std::max(1.0, beta.cwiseAbs().maxCoeff());

  auto update = [&](Index j) {
    const double old = sol.gamma[j];
    double next;
    if (std::isinf(a[j])) {
      next = 0.0;
    } else {
      const double h = c * diag(j);
      next = soft(h * old - c * grad(j), a[j]) / h;
    }
    const double delta = next - old;
    if (delta != 0.0) {
      sol.gamma[j] = next;
      move(j, delta);
    }
    return std::abs(delta);
  };

  sol.converged = false;
  sol.sweeps = 0;
  bool full = true;
  std::vector<Index> active;
  while (sol.sweeps < opts.max_sweeps) {
    ++sol.sweeps;
    double max_change = 0.0;
    if (full) {
      for (Index j = 0; j < p; ++j) max_change = std::max(max_change, update(j));
      if (max_change < tol) {
        sol.converged = true;
        break;
      }
      active.clear();
      for (Index j = 0; j < p; ++j)
        if (sol.gamma[j] != 0.0) active.push_back(j);
      full = false;
    } else {
      for (Index j : active) max_change = std::max(max_change, update(j));
      if (max_change < tol) full = true;
    }
  }
}

}  // namespace

SparseSolution solve_general(const KlContext& ctx, const Penalty& alpha, const GeneralOptions& opts) {
  require(ctx.svd.has_value(), ErrorKind::Usage, "solve_general needs SVD factors");
  const Index p = ctx.beta_hat.size();
  const Vector a = expand_penalty(alpha, p);
  const auto& svd = *ctx.svd;
  const Index rank = svd.d_tilde.size();

  // Rows of Lambda^{1/2} V1 are read one coordinate at a time.
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Vector sqrt_l = ctx.lambda.cwiseSqrt();
  const RowMajor rows = sqrt_l.asDiagonal() * svd.v1;
  Vector qdiag(p);
  for (Index j = 0; j < p; ++j) qdiag[j] = ctx.lambda[j] + rows.row(j).cwiseAbs2().dot(svd.d_tilde.transpose());

  Vector r = Vector::Zero(rank);  // V1^T Lambda^{1/2} (g - b)
  Vector dr = Vector::Zero(rank);  // Dt r
  SparseSolution sol;
  coordinate_descent(
      sol, ctx.beta_hat, a, ctx.c, opts,
      [&](Index j) { return ctx.lambda[j] * (sol.gamma[j] - ctx.beta_hat[j]) + rows.row(j).dot(dr.transpose()); },
      [&](Index j) { return qdiag[j]; },
      [&](Index j, double delta) {
        r.noalias() += delta * rows.row(j).transpose();
        dr = svd.d_tilde.cwiseProduct(r);
      });
  sol.method = SparseMethod::SvdEquivalent;
  sol.penalties = alpha;
  finish(sol);
  return sol;
}

SparseSolution solve_general_dense(const Vector& beta_hat, const Matrix& precision, double c, const Penalty& alpha,
                                   const GeneralOptions& opts) {
  const Index p = beta_hat.size();
  require(precision.rows() == p && precision.cols() == p, ErrorKind::Data, "precision must be p x p");
  require(c > 0.0, ErrorKind::Domain, "c must be > 0");
  const Vector a = expand_penalty(alpha, p);
  Vector g = Vector::Zero(p);  // Q (gamma - beta)
  SparseSolution sol;
  coordinate_descent(
      sol, beta_hat, a, c, opts, [&](Index j) { return g[j]; }, [&](Index j) { return precision(j, j); },
      [&](Index j, double delta) { g.noalias() += delta * precision.col(j); });
  sol.method = SparseMethod::General;
  sol.penalties = alpha;
  finish(sol);
  return sol;
}

SparseSolution solve_relaxed(const KlContext& ctx, const Penalty& alpha, double f_n) {
  const Index p = ctx.beta_hat.size();
  require(ctx.var_diag.size() == p, ErrorKind::Usage, "relaxed solver needs posterior variances");
  require(f_n > 0.0, ErrorKind::Domain, "f_n must be > 0");
  const Vector a = expand_penalty(alpha, p);
  SparseSolution sol;
  sol.gamma.resize(p);
  for (Index j = 0; j < p; ++j) {
    const double b = ctx.beta_hat[j];
    if (std::isinf(a[j]) || b == 0.0) {
      sol.gamma[j] = 0.0;
      continue;
    }
    const double t = ctx.var_diag[j] * a[j] * f_n / ctx.c;
    sol.gamma[j] = std::abs(b) > t ? b - std::copysign(t, b) : 0.0;
  }
  sol.method = f_n == 1.0 ? SparseMethod::Relaxed : SparseMethod::RelaxedControlled;
  sol.penalties = alpha;
  sol.f_n = f_n;
  finish(sol);
  return sol;
}

Vector adaptive_penalties(const SbrFit& fit, const Shrinkage& lambda) {
  require(lambda.k() == fit.k(), ErrorKind::Domain, "adaptive_penalties: K mismatch");
  require((fit.beta.array() != 0.0).any(), ErrorKind::Data, "adaptive_penalties: all coefficients are zero");
  const double total = lambda.lambda.sum();
  Vector out(fit.p());
  for (Index k = 0; k < fit.k(); ++k) {
    const double w = lambda.lambda[k] / total;
    const auto kk = static_cast<std::size_t>(k);
    for (Index j = fit.offsets[kk]; j < fit.offsets[kk + 1]; ++j) {
      const double b = std::abs(fit.beta[j]);
      out[j] = b == 0.0 ? std::numeric_limits<double>::infinity() : std::pow(b, -w);
    }
  }
  return out;
}

double pcr_penalty(double xi, const SbrFit& fit, const KlContext& ctx) {
  require(xi >= 0.0, ErrorKind::Domain, "pCR penalty needs xi >= 0");
  const double l1 = fit.beta.lpNorm<1>();
  require(l1 > 0.0, ErrorKind::Domain, "pCR penalty undefined for ||beta||_1 = 0");
  return 0.5 * ctx.c * xi / (l1 * l1);
}

double alpha_max(const KlContext& ctx) {
  require(ctx.svd.has_value(), ErrorKind::Usage, "alpha_max needs SVD factors");
  const Vector sqrt_l = ctx.lambda.cwiseSqrt();
  const Vector t = ctx.svd->v1.transpose() * sqrt_l.cwiseProduct(ctx.beta_hat);
  const Vector qb = ctx.lambda.cwiseProduct(ctx.beta_hat) +
                    sqrt_l.cwiseProduct(ctx.svd->v1 * ctx.svd->d_tilde.cwiseProduct(t));
  return ctx.c * qb.cwiseAbs().maxCoeff();
}

}  // namespace sbr
