#pragma once

#include "core/common.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sbr {

struct ColumnStats {
  double mean = 0.0;
  double sd = 1.0;
  // false for a constant column removed from the model; such a column is
  // held as zeros after standardization so indices never shift.
  bool kept = true;
};

struct Source {
  std::string name;
  Matrix x;  // n x p_k
  std::vector<std::string> column_names;
  std::vector<ColumnStats> stats;  // filled by standardize()
  bool standardized = false;

  Index cols() const { return x.cols(); }
};

/// Response plus K named feature blocks sharing the same n rows.
/// A dataset loaded for prediction may carry an empty response.
class MultiSourceDataset {
 public:
  MultiSourceDataset() = default;
  MultiSourceDataset(Vector y, std::vector<Source> sources);

  Index n() const { return n_; }
  Index k() const { return static_cast<Index>(sources_.size()); }
  Index p() const;
  Index p(Index k) const { return sources_[static_cast<std::size_t>(k)].x.cols(); }
  /// Offset of source k's first column in the concatenated coefficient vector.
  std::vector<Index> offsets() const;

  const Vector& y() const { return y_; }
  bool has_response() const { return y_.size() > 0; }
  const std::vector<Source>& sources() const { return sources_; }
  const Source& source(Index k) const { return sources_[static_cast<std::size_t>(k)]; }
  std::vector<Index> dims() const;

  bool y_standardized() const { return y_standardized_; }
  const ColumnStats& y_stats() const { return y_stats_; }
  bool standardized() const;

  /// Concatenated n x p design; for oracles and small problems only.
  Matrix dense_design() const;

 private:
  friend MultiSourceDataset standardize(const MultiSourceDataset&, bool);
  Vector y_;
  std::vector<Source> sources_;
  Index n_ = 0;
  bool y_standardized_ = false;
  ColumnStats y_stats_;
};

/// Column means and sample standard deviations (n - 1 denominator).
std::vector<ColumnStats> column_stats(const Matrix& x);

/// Centers and scales every column and the response. Constant columns are an
/// error unless drop_constant is set, in which case they are zeroed and
/// marked kept=false.
MultiSourceDataset standardize(const MultiSourceDataset& ds, bool drop_constant = false);

/// Applies stored training statistics to new raw data.
Matrix apply_stats(const Matrix& raw, std::span<const ColumnStats> stats);

/// Indices of the constant columns of x (sample sd == 0).
std::vector<Index> constant_columns(const Matrix& x);

struct SourceFile {
  std::string name;
  std::filesystem::path path;
};

/// Reads a response and per-source matrices (CSV or SBRM, detected by the
/// magic bytes). `response` may be empty for prediction inputs.
MultiSourceDataset load_dataset(std::span<const SourceFile> sources,
                                const std::optional<std::filesystem::path>& response);

}  // namespace sbr
