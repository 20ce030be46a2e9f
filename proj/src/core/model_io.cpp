#include "core/model_io.hpp"

#include "core/matrix_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace sbr {

namespace {

constexpr const char* kFormatTag = "sbr-model 1";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>)
      out += v[i];
    else
      out += std::to_string(v[i]);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  const Vector v = parse_doubles(s, what);
  require(v.size() == 1, ErrorKind::Data, what + ": expected one number");
  return v[0];
}

Index parse_index(const std::string& s, const std::string& what) {
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  require(r.ec == std::errc() && r.ptr == s.data() + s.size() && v >= 0, ErrorKind::Data,
          what + ": not a count: '" + s + "'");
  return static_cast<Index>(v);
}

void add_common_header(ModelFile& f, const TrainedModel& m, const std::string& kind) {
  const SbrFit& fit = m.fit;
  f.set("format", kFormatTag);
  f.set("kind", kind);
  f.set("n", std::to_string(fit.n));
  f.set("p", std::to_string(fit.p()));
  f.set("K", std::to_string(fit.k()));
  f.set("sources", join(m.source_names));
  std::vector<Index> dims;
  for (std::size_t k = 0; k + 1 < fit.offsets.size(); ++k) dims.push_back(fit.offsets[k + 1] - fit.offsets[k]);
  f.set("dims", join(dims));
  f.set("lambda", join_doubles(fit.lambda.lambda));
  f.set("estimator", estimator_name(fit.lambda.estimator));
  f.set("a", format_double(fit.sigma2_shape));
  f.set("b", format_double(fit.sigma2_scale));
  f.set("q_lambda", format_double(fit.q_lambda));
  f.set("log_marginal", format_double(fit.log_marginal));
  f.set("y_mean", format_double(m.y_stats.mean));
  f.set("y_sd", format_double(m.y_stats.sd));
}

void add_stat_rows(ModelFile& f, const TrainedModel& m, std::vector<Vector>& rows) {
  const Index p = m.fit.p();
  Vector mean(p), sd(p), kept(p);
  Index j = 0;
  for (const auto& src : m.column_stats)
    for (const auto& s : src) {
      mean[j] = s.mean;
      sd[j] = s.sd;
      kept[j] = s.kept ? 1.0 : 0.0;
      ++j;
    }
  require(j == p, ErrorKind::Data, "model: column statistics do not cover every coefficient");
  for (const char* name : {"mean", "sd", "kept"}) f.row_names.push_back(name);
  rows.push_back(mean);
  rows.push_back(sd);
  rows.push_back(kept);
}

Matrix stack(const std::vector<Vector>& rows, Index p) {
  Matrix out(static_cast<Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = rows[i].transpose();
  return out;
}

}  // namespace

void ModelFile::set(const std::string& key, const std::string& value) {
  for (auto& kv : header)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  header.emplace_back(key, value);
}

std::optional<std::string> ModelFile::find(const std::string& key) const {
  for (const auto& kv : header)
    if (kv.first == key) return kv.second;
  return std::nullopt;
}

const std::string& ModelFile::get(const std::string& key) const {
  for (const auto& kv : header)
    if (kv.first == key) return kv.second;
  fail(ErrorKind::Data, "model file: missing key '" + key + "'");
}

bool ModelFile::has_row(const std::string& name) const {
  return std::find(row_names.begin(), row_names.end(), name) != row_names.end();
}

Vector ModelFile::row(const std::string& name) const {
  const auto it = std::find(row_names.begin(), row_names.end(), name);
  require(it != row_names.end(), ErrorKind::Data, "model file: missing row '" + name + "'");
  return rows.row(it - row_names.begin()).transpose();
}

void write_model_file(const std::filesystem::path& path, const ModelFile& file) {
  require(static_cast<Index>(file.row_names.size()) == file.rows.rows(), ErrorKind::Usage,
          "model file: row names do not match the blob");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& [k, v] : file.header)
    if (k != "blob_rows") out << k << " = " << v << '\n';
  out << "blob_rows = " << join(file.row_names) << '\n';
  out << "end_header\n";
  write_sbrm(out, file.rows);
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

ModelFile read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  ModelFile f;
  std::string line;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      ended = true;
      break;
    }
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    require(eq != std::string::npos, ErrorKind::Data, path.string() + ": malformed header line '" + t + "'");
    f.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  require(ended, ErrorKind::Data, path.string() + ": missing end_header");
  require(f.find("format").value_or("") == kFormatTag, ErrorKind::Data, path.string() + ": not an sbr model file");
  f.row_names = split(f.get("blob_rows"), ',');
  f.rows = read_sbrm(in, path.string());
  require(f.rows.rows() == static_cast<Index>(f.row_names.size()), ErrorKind::Data,
          path.string() + ": blob row count does not match blob_rows");
  return f;
}

TrainedModel make_trained_model(SbrFit fit, const MultiSourceDataset& ds) {
  require(ds.standardized(), ErrorKind::Usage, "model needs the standardized training data");
  TrainedModel m;
  for (const auto& s : ds.sources()) {
    m.source_names.push_back(s.name);
    m.column_stats.push_back(s.stats);
  }
  m.y_stats = ds.y_stats();
  m.fit = std::move(fit);
  return m;
}

Vector predict_raw(const TrainedModel& model, const Vector& coef, std::span<const Matrix> raw) {
  const auto& off = model.fit.offsets;
  const std::size_t k = model.source_names.size();
  require(raw.size() == k, ErrorKind::Data,
          "prediction input has " + std::to_string(raw.size()) + " sources, model has " + std::to_string(k));
  require(coef.size() == off.back(), ErrorKind::Usage, "coefficient vector length does not match the model");
  const Index n = raw.empty() ? 0 : raw[0].rows();
  Vector out = Vector::Zero(n);
  for (std::size_t i = 0; i < k; ++i) {
    const Index pk = off[i + 1] - off[i];
    if (raw[i].cols() != pk)
      fail(ErrorKind::Data, "source '" + model.source_names[i] + "' has " + std::to_string(raw[i].cols()) +
                                " columns, model expects " + std::to_string(pk));
    require(raw[i].rows() == n, ErrorKind::Data, "source '" + model.source_names[i] + "' has a different row count");
    out.noalias() += apply_stats(raw[i], model.column_stats[i]) * coef.segment(off[i], pk);
  }
  return (out.array() * model.y_stats.sd + model.y_stats.mean).matrix();
}

ModelFile to_model_file(const TrainedModel& m) {
  ModelFile f;
  add_common_header(f, m, "fit");
  std::vector<Vector> rows{m.fit.beta};
  f.row_names.push_back("beta");
  if (m.fit.var_diag) {
    rows.push_back(*m.fit.var_diag);
    f.row_names.push_back("var");
  }
  add_stat_rows(f, m, rows);
  f.rows = stack(rows, m.fit.p());
  return f;
}

ModelFile to_model_file(const SparseModel& m) {
  ModelFile f;
  add_common_header(f, m.base, "sparse");
  const SparseSolution& s = m.solution;
  f.set("method", method_name(s.method));
  f.set("control", control_name(m.control));
  f.set("f_n", format_double(s.f_n));
  f.set("kl_scale", kl_scale_name(m.kl_scale));
  f.set("penalty_mode", m.penalty_mode);
  if (const double* a = std::get_if<double>(&s.penalties)) f.set("alpha", format_double(*a));
  f.set("nonzero", std::to_string(s.nonzero_count));
  f.set("sparsity", format_double(s.sparsity));
  f.set("converged", s.converged ? "1" : "0");
  f.set("sweeps", std::to_string(s.sweeps));
  std::vector<Vector> rows{s.gamma, m.base.fit.beta};
  f.row_names = {"gamma", "beta"};
  if (const Vector* a = std::get_if<Vector>(&s.penalties)) {
    rows.push_back(*a);
    f.row_names.push_back("alpha");
  }
  add_stat_rows(f, m.base, rows);
  f.rows = stack(rows, m.base.fit.p());
  return f;
}

std::string model_kind(const ModelFile& f) {
  const std::string& k = f.get("kind");
  require(k == "fit" || k == "sparse", ErrorKind::Data, "model file: unknown kind '" + k + "'");
  return k;
}

TrainedModel trained_model_from_file(const ModelFile& f) {
  TrainedModel m;
  SbrFit& fit = m.fit;
  fit.n = parse_index(f.get("n"), "n");
  const Index p = parse_index(f.get("p"), "p");
  const Index k = parse_index(f.get("K"), "K");
  m.source_names = split(f.get("sources"), ',');
  const auto dims = split(f.get("dims"), ',');
  require(static_cast<Index>(m.source_names.size()) == k && static_cast<Index>(dims.size()) == k, ErrorKind::Data,
          "model file: sources/dims do not match K");
  fit.offsets = {0};
  for (const auto& d : dims) fit.offsets.push_back(fit.offsets.back() + parse_index(d, "dims"));
  require(fit.offsets.back() == p && f.rows.cols() == p, ErrorKind::Data, "model file: dims do not sum to p");
  fit.lambda.lambda = parse_doubles(f.get("lambda"), "lambda");
  require(fit.lambda.k() == k, ErrorKind::Data, "model file: lambda length does not match K");
  fit.lambda.estimator = parse_estimator(f.get("estimator"));
  fit.sigma2_shape = parse_double(f.get("a"), "a");
  fit.sigma2_scale = parse_double(f.get("b"), "b");
  fit.q_lambda = parse_double(f.get("q_lambda"), "q_lambda");
  fit.log_marginal = parse_double(f.get("log_marginal"), "log_marginal");
  fit.beta = f.row("beta");
  if (f.has_row("var")) fit.var_diag = f.row("var");
  m.y_stats.mean = parse_double(f.get("y_mean"), "y_mean");
  m.y_stats.sd = parse_double(f.get("y_sd"), "y_sd");

  const Vector mean = f.row("mean"), sd = f.row("sd"), kept = f.row("kept");
  for (Index s = 0; s < k; ++s) {
    std::vector<ColumnStats> st;
    for (Index j = fit.offsets[s]; j < fit.offsets[s + 1]; ++j) st.push_back({mean[j], sd[j], kept[j] != 0.0});
    m.column_stats.push_back(std::move(st));
  }
  return m;
}

SparseModel sparse_model_from_file(const ModelFile& f) {
  require(model_kind(f) == "sparse", ErrorKind::Data, "model file is not a sparse solution");
  SparseModel m;
  m.base = trained_model_from_file(f);
  SparseSolution& s = m.solution;
  s.gamma = f.row("gamma");
  const std::string method = f.get("method");
  bool known = false;
  for (SparseMethod sm : {SparseMethod::General, SparseMethod::SvdEquivalent, SparseMethod::Relaxed,
                          SparseMethod::RelaxedControlled})
    if (method == method_name(sm)) {
      s.method = sm;
      known = true;
    }
  require(known, ErrorKind::Data, "model file: unknown method '" + method + "'");
  m.control = parse_control(f.get("control"));
  m.kl_scale = parse_kl_scale(f.get("kl_scale"));
  m.penalty_mode = f.get("penalty_mode");
  s.f_n = parse_double(f.get("f_n"), "f_n");
  if (f.has_row("alpha"))
    s.penalties = f.row("alpha");
  else
    s.penalties = parse_double(f.get("alpha"), "alpha");
  s.nonzero_count = parse_index(f.get("nonzero"), "nonzero");
  s.sparsity = parse_double(f.get("sparsity"), "sparsity");
  s.converged = f.get("converged") == "1";
  s.sweeps = static_cast<int>(parse_index(f.get("sweeps"), "sweeps"));
  return m;
}

const char* kl_scale_name(KlScale s) {
  switch (s) {
    case KlScale::Integrated: return "integrated";
    case KlScale::PosteriorMean: return "mean";
    case KlScale::PosteriorMode: return "mode";
  }
  return "integrated";
}

KlScale parse_kl_scale(const std::string& s) {
  if (s == "integrated") return KlScale::Integrated;
  if (s == "mean") return KlScale::PosteriorMean;
  if (s == "mode") return KlScale::PosteriorMode;
  fail(ErrorKind::Usage, "unknown KL scale '" + s + "' (expected integrated, mean or mode)");
}

std::string join_doubles(const Vector& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

Vector parse_doubles(const std::string& s, const std::string& what) {
  const auto parts = split(s, ',');
  require(!parts.empty(), ErrorKind::Data, what + ": empty list");
  Vector out(static_cast<Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& t = parts[i];
    double v = 0.0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    require(r.ec == std::errc() && r.ptr == t.data() + t.size(), ErrorKind::Data,
            what + ": not a number: '" + t + "'");
    out[static_cast<Index>(i)] = v;
  }
  return out;
}

}  // namespace sbr
