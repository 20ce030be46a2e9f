#include "core/gram.hpp"

#include "core/matrix_io.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace sbr {

const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::CV: return "cv";
    case Estimator::ML: return "ml";
    case Estimator::MAP: return "map";
    case Estimator::User: return "user";
  }
  return "user";
}

Estimator parse_estimator(const std::string& s) {
  if (s == "cv") return Estimator::CV;
  if (s == "ml") return Estimator::ML;
  if (s == "map") return Estimator::MAP;
  if (s == "user") return Estimator::User;
  fail(ErrorKind::Usage, "unknown estimator '" + s + "'");
}

void Shrinkage::validate(double upper) const {
  require(lambda.size() >= 1, ErrorKind::Domain, "empty shrinkage vector");
  for (Index k = 0; k < lambda.size(); ++k) {
    const double l = lambda[k];
    if (!(std::isfinite(l) && l > 0.0))
      fail(ErrorKind::Domain, "lambda[" + std::to_string(k) + "] must be finite and > 0");
    if (l > upper * (1.0 + 1e-12))
      fail(ErrorKind::Domain, "lambda[" + std::to_string(k) + "] exceeds upper bound");
  }
}

namespace {

// Binary-counter cascade: slot i holds the sum of 2^i consecutive blocks.
class PairwiseAccumulator {
 public:
  explicit PairwiseAccumulator(Index n) : n_(n) {}

  void push(Matrix&& block_sum) {
    Matrix carry = std::move(block_sum);
    std::size_t level = 0;
    while (level < slots_.size() && slots_[level]) {
      carry += *slots_[level];
      slots_[level].reset();
      ++level;
    }
    if (level == slots_.size()) slots_.emplace_back();
    slots_[level] = std::move(carry);
  }

  Matrix finish() {
    Matrix total = Matrix::Zero(n_, n_);
    bool first = true;
    for (auto& s : slots_) {
      if (!s) continue;
      if (first) {
        total = std::move(*s);
        first = false;
      } else {
        total += *s;
      }
    }
    return total;
  }

 private:
  Index n_;
  std::vector<std::optional<Matrix>> slots_;
};

Matrix pairwise_reduce(std::vector<Matrix>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return std::move(parts[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  Matrix left = pairwise_reduce(parts, lo, mid);
  left += pairwise_reduce(parts, mid, hi);
  return left;
}

}  // namespace

Matrix compute_gram(const Matrix& x, const GramOptions& opts) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (n == 0) return Matrix(0, 0);
  const Index block = std::max<Index>(1, opts.block_cols);
  const std::size_t nblocks = p == 0 ? 0 : static_cast<std::size_t>((p + block - 1) / block);
  if (nblocks == 0) return Matrix::Zero(n, n);

  std::vector<Matrix> partial(std::min(std::max<std::size_t>(1, opts.workers), nblocks));
  parallel_ranges(nblocks, partial.size(), [&](std::size_t w, std::size_t b0, std::size_t b1) {
    PairwiseAccumulator acc(n);
    for (std::size_t b = b0; b < b1; ++b) {
      const Index c0 = static_cast<Index>(b) * block;
      const Index width = std::min(block, p - c0);
      Matrix g = Matrix::Zero(n, n);
      g.selfadjointView<Eigen::Lower>().rankUpdate(x.middleCols(c0, width));
      acc.push(std::move(g));
    }
    partial[w] = acc.finish();
  });
  Matrix g = pairwise_reduce(partial, 0, partial.size());
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

GramCache::GramCache(std::vector<Matrix> grams, std::vector<Index> dims)
    : grams_(std::move(grams)), dims_(std::move(dims)) {
  require(!grams_.empty(), ErrorKind::Data, "Gram cache needs at least one source");
  require(grams_.size() == dims_.size(), ErrorKind::Data, "Gram cache dims mismatch");
  n_ = grams_.front().rows();
  for (const auto& g : grams_)
    require(g.rows() == n_ && g.cols() == n_, ErrorKind::Data, "Gram matrices must all be n x n");
}

std::string gram_cache_filename(const Matrix& x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx.gram", static_cast<unsigned long long>(content_hash(x)));
  return buf;
}

GramCache GramCache::build(const MultiSourceDataset& ds, const GramOptions& opts,
                           const std::optional<std::filesystem::path>& cache_dir) {
  std::vector<Matrix> grams;
  if (cache_dir) std::filesystem::create_directories(*cache_dir);
  for (const auto& src : ds.sources()) {
    if (cache_dir) {
      const auto file = *cache_dir / gram_cache_filename(src.x);
      if (std::filesystem::exists(file)) {
        Matrix g = read_sbrm(file);
        if (g.rows() == ds.n() && g.cols() == ds.n()) {
          grams.push_back(std::move(g));
          continue;
        }
      }
      grams.push_back(compute_gram(src.x, opts));
      write_sbrm(file, grams.back());
    } else {
      grams.push_back(compute_gram(src.x, opts));
    }
  }
  return GramCache(std::move(grams), ds.dims());
}

Matrix assemble_g(const GramCache& cache, const Vector& lambda) {
  require(lambda.size() == cache.k(), ErrorKind::Domain,
          "lambda has " + std::to_string(lambda.size()) + " entries, cache has " + std::to_string(cache.k()) +
              " sources");
  Matrix g = Matrix::Zero(cache.n(), cache.n());
  for (Index k = 0; k < cache.k(); ++k) {
    if (!(lambda[k] > 0.0) || !std::isfinite(lambda[k]))
      fail(ErrorKind::Domain, "lambda[" + std::to_string(k) + "] must be finite and > 0");
    g.noalias() += cache.gram(k) / lambda[k];
  }
  return g;
}

namespace {

// Unblocked factorization used only to locate the failing pivot.
Index first_bad_pivot(Matrix a) {
  const Index n = a.rows();
  for (Index j = 0; j < n; ++j) {
    double d = a(j, j) - a.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) return j;
    d = std::sqrt(d);
    a(j, j) = d;
    for (Index i = j + 1; i < n; ++i) a(i, j) = (a(i, j) - a.row(i).head(j).dot(a.row(j).head(j))) / d;
  }
  return -1;
}

}  // namespace

CoreSolve core_solve(const Matrix& g_lambda, const Vector& y) {
  const Index n = g_lambda.rows();
  require(g_lambda.cols() == n && y.size() == n, ErrorKind::Data, "core_solve: shape mismatch");
  Matrix a = g_lambda;
  a.diagonal().array() += 1.0;
  CoreSolve out;
  out.chol.compute(a);
  if (out.chol.info() != Eigen::Success) {
    const Index pivot = first_bad_pivot(a);
    fail(ErrorKind::Numerical,
         "Cholesky of I + G_lambda failed at pivot " + std::to_string(pivot < 0 ? n : pivot));
  }
  out.w = out.chol.solve(y);
  out.q = y.dot(out.w);
  out.logdet = 2.0 * out.chol.matrixLLT().diagonal().array().log().sum();
  return out;
}

InterceptSolve intercept_solve(const Matrix& g_lambda, const Vector& y) {
  const Index n = g_lambda.rows();
  require(g_lambda.cols() == n && y.size() == n, ErrorKind::Data, "intercept_solve: shape mismatch");
  require(n >= 2, ErrorKind::Data, "intercept_solve: needs n >= 2");
  // Householder reflector H = I - 2 u u^T with H 1 = -sqrt(n) e_1; its last
  // n - 1 columns span the complement of the ones vector.
  const double sn = std::sqrt(static_cast<double>(n));
  Vector u = Vector::Ones(n);
  u[0] += sn;
  u.normalize();
  const Vector gu = g_lambda * u;
  const double ugu = u.dot(gu);
  Matrix hgh = g_lambda - 2.0 * u * gu.transpose() - 2.0 * gu * u.transpose() + 4.0 * ugu * u * u.transpose();
  Matrix a = hgh.bottomRightCorner(n - 1, n - 1);
  a = 0.5 * (a + a.transpose());
  a.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> chol(a);
  if (chol.info() != Eigen::Success) {
    const Index pivot = first_bad_pivot(a);
    fail(ErrorKind::Numerical,
         "Cholesky of the intercept-reduced system failed at pivot " + std::to_string(pivot < 0 ? n - 1 : pivot));
  }
  const Vector hy = y - 2.0 * u * u.dot(y);
  const Vector qty = hy.tail(n - 1);
  const Vector z = chol.solve(qty);

  InterceptSolve out;
  out.q = qty.dot(z);
  out.logdet = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
  Vector full = Vector::Zero(n);
  full.tail(n - 1) = z;
  out.r = full - 2.0 * u * u.dot(full);
  // Q^T = rows 1..n-1 of H; P_ii = ||L^{-1} Q^T e_i||^2.
  Matrix qt = -2.0 * u.tail(n - 1) * u.transpose();
  for (Index i = 0; i < n - 1; ++i) qt(i, i + 1) += 1.0;
  chol.matrixL().solveInPlace(qt);
  out.p_diag = qt.colwise().squaredNorm().transpose();
  return out;
}

Matrix CoreSolve::inverse() const {
  return chol.solve(Matrix::Identity(n(), n()));
}

}  // namespace sbr
