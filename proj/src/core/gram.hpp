#pragma once

#include "core/common.hpp"
#include "core/data_model.hpp"

#include <filesystem>
#include <limits>
#include <optional>

namespace sbr {

enum class Estimator { CV, ML, MAP, User };

const char* estimator_name(Estimator e);
Estimator parse_estimator(const std::string& s);

/// Source-specific shrinkage levels lambda_1..lambda_K (all > 0).
struct Shrinkage {
  Vector lambda;
  Estimator estimator = Estimator::User;

  Index k() const { return lambda.size(); }
  /// Throws Domain unless every entry is finite and in (0, upper].
  void validate(double upper = std::numeric_limits<double>::infinity()) const;
};

struct GramOptions {
  std::size_t workers = 1;
  Index block_cols = 512;
};

/// X X^T accumulated over column blocks. Each worker owns a contiguous run of
/// blocks and sums them pairwise (binary-counter cascade); the per-worker
/// partials are then reduced pairwise in index order. Output is bit-stable
/// for a fixed (workers, block_cols).
Matrix compute_gram(const Matrix& x, const GramOptions& opts = {});

/// Per-source Gram matrices G_k = X_k X_k^T, computed once.
class GramCache {
 public:
  GramCache() = default;
  GramCache(std::vector<Matrix> grams, std::vector<Index> dims);

  static GramCache build(const MultiSourceDataset& ds, const GramOptions& opts = {},
                         const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

  Index n() const { return n_; }
  Index k() const { return static_cast<Index>(grams_.size()); }
  const Matrix& gram(Index k) const { return grams_[static_cast<std::size_t>(k)]; }
  const std::vector<Index>& dims() const { return dims_; }

 private:
  std::vector<Matrix> grams_;
  std::vector<Index> dims_;
  Index n_ = 0;
};

/// File name used for a cached Gram matrix of `x`.
std::string gram_cache_filename(const Matrix& x);

/// G_lambda = sum_k G_k / lambda_k.
Matrix assemble_g(const GramCache& cache, const Vector& lambda);

/// Everything downstream needs from one factorization of I + G_lambda.
struct CoreSolve {
  Vector w;            // (I + G)^{-1} y
  double q = 0.0;      // y^T w
  double logdet = 0.0; // log |I + G|
  Eigen::LLT<Matrix> chol;

  Index n() const { return w.size(); }
  /// (I + G)^{-1}, formed explicitly (n x n).
  Matrix inverse() const;
};

CoreSolve core_solve(const Matrix& g_lambda, const Vector& y);

/// The same system with an unpenalized intercept integrated out: y is
/// reduced to its n - 1 contrasts Q^T y (Q an orthonormal basis of the
/// complement of the ones vector) with covariance I + Q^T G Q. With
/// P = Q (I + Q^T G Q)^{-1} Q^T, r = P y is the residual of the fit with a
/// refitted intercept and P_ii its leave-one-out denominator. Working in the
/// reduced basis keeps these stable when G is centered and lambda is tiny.
struct InterceptSolve {
  Vector r;        // P y
  Vector p_diag;   // diag(P)
  double q = 0.0;  // y^T P y
  double logdet = 0.0;  // log |I + Q^T G Q|
  Index dof() const { return r.size() - 1; }
};

InterceptSolve intercept_solve(const Matrix& g_lambda, const Vector& y);

}  // namespace sbr
