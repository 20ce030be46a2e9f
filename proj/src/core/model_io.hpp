#pragma once

#include "core/common.hpp"
#include "core/data_model.hpp"
#include "core/fit.hpp"
#include "core/sparsify.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sbr {

// Layout: "key = value" lines, an "end_header" line, then one SBRM matrix
// whose rows are named by the "blob_rows" key (one column per coefficient).
struct ModelFile {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<std::string> row_names;
  Matrix rows;

  void set(const std::string& key, const std::string& value);
  std::optional<std::string> find(const std::string& key) const;
  /// Data error when the key is absent.
  const std::string& get(const std::string& key) const;
  bool has_row(const std::string& name) const;
  Vector row(const std::string& name) const;
};

void write_model_file(const std::filesystem::path& path, const ModelFile& file);
ModelFile read_model_file(const std::filesystem::path& path);

/// A dense fit together with what prediction on raw data needs.
struct TrainedModel {
  SbrFit fit;
  std::vector<std::string> source_names;
  std::vector<std::vector<ColumnStats>> column_stats;  // per source
  ColumnStats y_stats;
};

TrainedModel make_trained_model(SbrFit fit, const MultiSourceDataset& standardized_train);

/// Coefficients (beta or gamma) applied to raw inputs: each source is mapped
/// through its training statistics and the result is returned on the
/// original response scale. Column-count mismatches name the source.
Vector predict_raw(const TrainedModel& model, const Vector& coef, std::span<const Matrix> raw);

struct SparseModel {
  TrainedModel base;
  SparseSolution solution;
  Control control = Control::None;
  KlScale kl_scale = KlScale::Integrated;
  std::string penalty_mode;  // adaptive, scalar or pcr
};

ModelFile to_model_file(const TrainedModel& m);
ModelFile to_model_file(const SparseModel& m);

/// Reads either kind; `kind` is "fit" or "sparse".
std::string model_kind(const ModelFile& f);
TrainedModel trained_model_from_file(const ModelFile& f);
SparseModel sparse_model_from_file(const ModelFile& f);

const char* kl_scale_name(KlScale s);
KlScale parse_kl_scale(const std::string& s);

/// Comma-joined values with 17 significant digits.
std::string join_doubles(const Vector& v);
Vector parse_doubles(const std::string& s, const std::string& what);

}  // namespace sbr
