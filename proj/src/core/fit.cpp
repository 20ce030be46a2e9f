#include "core/fit.hpp"

#include <cmath>
#include <limits>

namespace sbr {

Vector SbrFit::lambda_per_coef() const {
  Vector out(p());
  for (Index k = 0; k < lambda.k(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    out.segment(offsets[kk], offsets[kk + 1] - offsets[kk]).setConstant(lambda.lambda[k]);
  }
  return out;
}

double log_marginal(const CoreSolve& core, Index n) {
  if (!(core.q > 0.0)) fail(ErrorKind::Domain, "log marginal undefined for q_lambda = 0 (y = 0)");
  return -0.5 * core.logdet - 0.5 * static_cast<double>(n) * std::log(core.q);
}

InverseGamma sigma2_posterior(const CoreSolve& core, Index n) {
  return {0.5 * static_cast<double>(n), 0.5 * core.q};
}

SbrFit posterior_mode(const GramCache& cache, const MultiSourceDataset& ds, const Shrinkage& lambda) {
  lambda.validate();
  require(lambda.k() == ds.k() && cache.k() == ds.k(), ErrorKind::Domain, "posterior_mode: K mismatch");
  require(ds.has_response(), ErrorKind::Data, "posterior_mode: dataset has no response");
  const CoreSolve core = core_solve(assemble_g(cache, lambda.lambda), ds.y());

  SbrFit fit;
  fit.n = ds.n();
  fit.offsets = ds.offsets();
  fit.lambda = lambda;
  fit.w_lambda = core.w;
  fit.q_lambda = core.q;
  const auto ig = sigma2_posterior(core, ds.n());
  fit.sigma2_shape = ig.shape;
  fit.sigma2_scale = ig.scale;
  fit.log_marginal = core.q > 0.0 ? log_marginal(core, ds.n()) : -std::numeric_limits<double>::infinity();
  fit.beta.resize(ds.p());
  for (Index k = 0; k < ds.k(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    fit.beta.segment(fit.offsets[kk], ds.p(k)).noalias() = ds.source(k).x.transpose() * core.w;
    fit.beta.segment(fit.offsets[kk], ds.p(k)) /= lambda.lambda[k];
  }
  return fit;
}

Vector predict_kernel(const MultiSourceDataset& train, const Vector& w_lambda, const Vector& lambda,
                      std::span<const Matrix> x_pred) {
  require(static_cast<Index>(x_pred.size()) == train.k(), ErrorKind::Data,
          "prediction input has " + std::to_string(x_pred.size()) + " sources, expected " +
              std::to_string(train.k()));
  const Index m = x_pred.empty() ? 0 : x_pred.front().rows();
  Vector out = Vector::Zero(m);
  for (Index k = 0; k < train.k(); ++k) {
    const Matrix& xp = x_pred[static_cast<std::size_t>(k)];
    const auto& src = train.source(k);
    require(xp.cols() == src.x.cols(), ErrorKind::Data,
            "source '" + src.name + "': prediction input has " + std::to_string(xp.cols()) +
                " columns, expected " + std::to_string(src.x.cols()));
    require(xp.rows() == m, ErrorKind::Data, "prediction sources disagree on row count");
    if (m == 0) continue;
    const Matrix cross = xp * src.x.transpose();  // m x n
    out.noalias() += (cross * w_lambda) / lambda[k];
  }
  return out;
}

Vector predict(const SbrFit& fit, std::span<const Matrix> x_pred) {
  require(static_cast<Index>(x_pred.size()) == fit.k(), ErrorKind::Data,
          "prediction input has " + std::to_string(x_pred.size()) + " sources, expected " +
              std::to_string(fit.k()));
  const Index m = x_pred.empty() ? 0 : x_pred.front().rows();
  Vector out = Vector::Zero(m);
  for (Index k = 0; k < fit.k(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const Matrix& xp = x_pred[kk];
    const Index pk = fit.offsets[kk + 1] - fit.offsets[kk];
    require(xp.cols() == pk, ErrorKind::Data,
            "source " + std::to_string(k + 1) + ": prediction input has " + std::to_string(xp.cols()) +
                " columns, expected " + std::to_string(pk));
    require(xp.rows() == m, ErrorKind::Data, "prediction sources disagree on row count");
    if (m > 0) out.noalias() += xp * fit.beta.segment(fit.offsets[kk], pk);
  }
  return out;
}

Vector posterior_variances(const CoreSolve& core, const MultiSourceDataset& ds, const Vector& lambda,
                           const VarianceOptions& opts) {
  require(lambda.size() == ds.k(), ErrorKind::Domain, "posterior_variances: K mismatch");
  if (opts.block_size && *opts.block_size < 1) fail(ErrorKind::Usage, "block_size must be >= 1");
  const auto workers = std::max<std::size_t>(1, opts.workers);
  const auto offsets = ds.offsets();
  Vector out(ds.p());
  const auto L = core.chol.matrixL();

  for (Index k = 0; k < ds.k(); ++k) {
    const Matrix& x = ds.source(k).x;
    const Index pk = x.cols();
    const Index w4 = 4 * static_cast<Index>(workers);
    Index block = opts.block_size.value_or((pk + w4 - 1) / w4);
    block = std::max<Index>(1, std::min(block, pk));
    // floor(p_k / B) columns per block, remainder folded into the last block.
    const Index nblocks = std::max<Index>(1, pk / block);
    const double inv_l = 1.0 / lambda[k];
    const Index base = offsets[static_cast<std::size_t>(k)];
    parallel_ranges(static_cast<std::size_t>(nblocks), workers,
                    [&](std::size_t, std::size_t b0, std::size_t b1) {
                      for (std::size_t b = b0; b < b1; ++b) {
                        const Index c0 = static_cast<Index>(b) * block;
                        const Index width = (static_cast<Index>(b) + 1 == nblocks) ? pk - c0 : block;
                        Matrix z = x.middleCols(c0, width);
                        L.solveInPlace(z);
                        out.segment(base + c0, width) =
                            inv_l * (1.0 - inv_l * z.colwise().squaredNorm().transpose().array()).matrix();
                      }
                    });
  }
  return out;
}

Vector posterior_variances(const GramCache& cache, const MultiSourceDataset& ds, const Shrinkage& lambda,
                           const VarianceOptions& opts) {
  lambda.validate();
  const Vector y = ds.has_response() ? ds.y() : Vector::Zero(ds.n());
  const CoreSolve core = core_solve(assemble_g(cache, lambda.lambda), y);
  return posterior_variances(core, ds, lambda.lambda, opts);
}

}  // namespace sbr
