#include "core/data_model.hpp"

#include "core/matrix_io.hpp"

#include <cmath>
#include <numeric>

namespace sbr {

MultiSourceDataset::MultiSourceDataset(Vector y, std::vector<Source> sources)
    : y_(std::move(y)), sources_(std::move(sources)) {
  require(!sources_.empty(), ErrorKind::Data, "dataset needs at least one source");
  n_ = sources_.front().x.rows();
  for (const auto& s : sources_) {
    require(s.x.cols() >= 1, ErrorKind::Data, "source '" + s.name + "' has no columns");
    require(s.x.rows() == n_, ErrorKind::Data,
            "dimension mismatch: source '" + s.name + "' has " + std::to_string(s.x.rows()) +
                " rows, expected " + std::to_string(n_));
    require(s.x.allFinite(), ErrorKind::Data, "source '" + s.name + "' has non-finite entries");
  }
  require(y_.size() == 0 || y_.size() == n_, ErrorKind::Data,
          "dimension mismatch: response has " + std::to_string(y_.size()) + " rows, sources have " +
              std::to_string(n_));
  require(y_.allFinite(), ErrorKind::Data, "response has non-finite entries");
}

Index MultiSourceDataset::p() const {
  Index total = 0;
  for (const auto& s : sources_) total += s.x.cols();
  return total;
}

std::vector<Index> MultiSourceDataset::offsets() const {
  std::vector<Index> off(sources_.size() + 1, 0);
  for (std::size_t k = 0; k < sources_.size(); ++k) off[k + 1] = off[k] + sources_[k].x.cols();
  return off;
}

std::vector<Index> MultiSourceDataset::dims() const {
  std::vector<Index> d;
  for (const auto& s : sources_) d.push_back(s.x.cols());
  return d;
}

bool MultiSourceDataset::standardized() const {
  if (has_response() && !y_standardized_) return false;
  return std::all_of(sources_.begin(), sources_.end(), [](const Source& s) { return s.standardized; });
}

Matrix MultiSourceDataset::dense_design() const {
  Matrix x(n_, p());
  Index off = 0;
  for (const auto& s : sources_) {
    x.middleCols(off, s.x.cols()) = s.x;
    off += s.x.cols();
  }
  return x;
}

std::vector<ColumnStats> column_stats(const Matrix& x) {
  std::vector<ColumnStats> out(static_cast<std::size_t>(x.cols()));
  const double n = static_cast<double>(x.rows());
  for (Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).sum() / n;
    const double ss = (x.col(j).array() - mean).square().sum();
    const double sd = x.rows() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    out[static_cast<std::size_t>(j)] = {mean, sd, true};
  }
  return out;
}

std::vector<Index> constant_columns(const Matrix& x) {
  std::vector<Index> out;
  for (Index j = 0; j < x.cols(); ++j) {
    const double first = x(0, j);
    if ((x.col(j).array() == first).all()) out.push_back(j);
  }
  return out;
}

Matrix apply_stats(const Matrix& raw, std::span<const ColumnStats> stats) {
  require(static_cast<std::size_t>(raw.cols()) == stats.size(), ErrorKind::Data,
          "column count " + std::to_string(raw.cols()) + " does not match training (" +
              std::to_string(stats.size()) + ")");
  Matrix out(raw.rows(), raw.cols());
  for (Index j = 0; j < raw.cols(); ++j) {
    const auto& st = stats[static_cast<std::size_t>(j)];
    if (!st.kept)
      out.col(j).setZero();
    else
      out.col(j) = (raw.col(j).array() - st.mean) / st.sd;
  }
  return out;
}

MultiSourceDataset standardize(const MultiSourceDataset& ds, bool drop_constant) {
  require(ds.n() >= 2, ErrorKind::Data, "standardization needs at least two rows");
  std::vector<Source> out_sources;
  for (const auto& src : ds.sources()) {
    Source s = src;
    if (src.standardized) {
      out_sources.push_back(std::move(s));
      continue;
    }
    auto stats = column_stats(src.x);
    const auto constant = constant_columns(src.x);
    if (!constant.empty()) {
      if (!drop_constant) {
        std::string list;
        for (std::size_t i = 0; i < constant.size() && i < 20; ++i)
          list += (i ? "," : "") + std::to_string(constant[i] + 1);
        if (constant.size() > 20) list += ",...";
        fail(ErrorKind::Data, "zero-variance columns in source '" + src.name + "' (1-based): " + list);
      }
      for (Index j : constant) stats[static_cast<std::size_t>(j)].kept = false;
    }
    s.x = apply_stats(src.x, stats);
    s.stats = std::move(stats);
    s.standardized = true;
    out_sources.push_back(std::move(s));
  }

  Vector y = ds.y();
  ColumnStats ystats = ds.y_stats();
  bool y_std = ds.y_standardized();
  if (ds.has_response() && !y_std) {
    Matrix ym = y;
    ystats = column_stats(ym).front();
    require(ystats.sd > 0.0, ErrorKind::Data, "response has zero variance");
    y = (y.array() - ystats.mean) / ystats.sd;
    y_std = true;
  }
  MultiSourceDataset out(std::move(y), std::move(out_sources));
  out.y_standardized_ = y_std;
  out.y_stats_ = ystats;
  return out;
}

MultiSourceDataset load_dataset(std::span<const SourceFile> sources,
                                const std::optional<std::filesystem::path>& response) {
  require(!sources.empty(), ErrorKind::Usage, "at least one source is required");
  Vector y;
  if (response) {
    auto r = read_matrix(*response);
    if (r.values.cols() == 1)
      y = r.values.col(0);
    else if (r.values.rows() == 1)
      y = r.values.row(0).transpose();
    else
      fail(ErrorKind::Data, response->string() + ": response must be a single column");
  }
  std::vector<Source> blocks;
  for (const auto& sf : sources) {
    auto m = read_matrix(sf.path);
    if (response && m.values.rows() != y.size())
      fail(ErrorKind::Data, "dimension mismatch: source '" + sf.name + "' has " +
                                std::to_string(m.values.rows()) + " rows, response has " +
                                std::to_string(y.size()));
    if (!blocks.empty() && m.values.rows() != blocks.front().x.rows())
      fail(ErrorKind::Data, "dimension mismatch: source '" + sf.name + "' has " +
                                std::to_string(m.values.rows()) + " rows, expected " +
                                std::to_string(blocks.front().x.rows()));
    Source s;
    s.name = sf.name;
    s.x = std::move(m.values);
    s.column_names = std::move(m.header);
    blocks.push_back(std::move(s));
  }
  return MultiSourceDataset(std::move(y), std::move(blocks));
}

}  // namespace sbr
