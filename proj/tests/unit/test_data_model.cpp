#include "doctest.h"

#include "core/data_model.hpp"
#include "core/matrix_io.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

#include <fstream>

using namespace sbr;
using testing_fs::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

std::string csv_rows(const Matrix& m) {
  std::string s;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) s += (j ? "," : "") + format_double(m(i, j));
    s += "\n";
  }
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an sbr::Error");
  return ErrorKind::Usage;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("load_dataset: two CSV sources and a response") {
  TempDir dir("dm");
  oracle::Gen g(1);
  write_text(dir / "a.csv", "c1,c2,c3\n" + csv_rows(g.gaussian(10, 3)));
  write_text(dir / "b.csv", csv_rows(g.gaussian(10, 5)));
  write_text(dir / "y.csv", "y\n" + csv_rows(g.gaussian(10, 1)));
  const std::vector<SourceFile> src{{"A", dir / "a.csv"}, {"B", dir / "b.csv"}};
  const auto ds = load_dataset(src, dir / "y.csv");
  CHECK(ds.n() == 10);
  CHECK(ds.k() == 2);
  CHECK(ds.p() == 8);
  CHECK(ds.source(0).column_names == std::vector<std::string>{"c1", "c2", "c3"});
  CHECK(ds.offsets() == std::vector<Index>{0, 3, 8});
}

TEST_CASE("load_dataset: row-count mismatch is a data error") {
  TempDir dir("dm");
  oracle::Gen g(2);
  write_text(dir / "a.csv", csv_rows(g.gaussian(9, 2)));
  write_text(dir / "y.csv", csv_rows(g.gaussian(10, 1)));
  const std::vector<SourceFile> src{{"A", dir / "a.csv"}};
  CHECK(kind_of([&] { load_dataset(src, dir / "y.csv"); }) == ErrorKind::Data);
  CHECK(message_of([&] { load_dataset(src, dir / "y.csv"); }).find("'A'") != std::string::npos);
}

TEST_CASE("load_dataset: NaN token reports its coordinates") {
  TempDir dir("dm");
  write_text(dir / "a.csv", "1,2\n3,NaN\n5,6\n");
  write_text(dir / "y.csv", "1\n2\n3\n");
  const std::vector<SourceFile> src{{"A", dir / "a.csv"}};
  const std::string msg = message_of([&] { load_dataset(src, dir / "y.csv"); });
  CHECK(msg.find("non-finite") != std::string::npos);
  CHECK(msg.find("row 2, col 2") != std::string::npos);
}

TEST_CASE("load_dataset: response may be omitted for prediction inputs") {
  TempDir dir("dm");
  write_text(dir / "a.csv", "1,2\n3,4\n");
  const std::vector<SourceFile> src{{"A", dir / "a.csv"}};
  const auto ds = load_dataset(src, std::nullopt);
  CHECK_FALSE(ds.has_response());
  CHECK(ds.n() == 2);
}

TEST_CASE("standardize: column (1,2,3) maps to (-1,0,1)") {
  Source s;
  s.name = "A";
  s.x = Matrix(3, 1);
  s.x << 1, 2, 3;
  Vector y(3);
  y << 1, 4, 2;
  const auto out = standardize(MultiSourceDataset(y, {s}));
  CHECK(out.source(0).x(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std::abs(out.source(0).x(1, 0)) < 1e-15);
  CHECK(out.source(0).x(2, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(out.source(0).stats[0].mean == 2.0);
  CHECK(out.source(0).stats[0].sd == 1.0);
  CHECK(std::abs(out.y().sum()) < 1e-14);
  CHECK(out.standardized());
}

TEST_CASE("standardize: constant column is an error unless dropped") {
  Source s;
  s.name = "A";
  s.x = Matrix(3, 2);
  s.x << 5, 1, 5, 2, 5, 4;
  Vector y(3);
  y << 1, 2, 3;
  const MultiSourceDataset ds(y, {s});
  CHECK(kind_of([&] { standardize(ds); }) == ErrorKind::Data);
  CHECK(message_of([&] { standardize(ds); }).find("(1-based): 1") != std::string::npos);
  const auto out = standardize(ds, true);
  CHECK_FALSE(out.source(0).stats[0].kept);
  CHECK(out.source(0).x.col(0).isZero(0.0));
  CHECK(out.source(0).stats[1].kept);
  CHECK(out.p() == 2);
}

TEST_CASE("standardize is idempotent on random data") {
  oracle::Gen g(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = g.integer(3, 30);
    auto inst = oracle::make_instance(g, n, g.split(g.integer(2, 40), g.integer(1, 3)));
    const auto once = standardize(inst.ds);
    // Rebuild from the standardized values so nothing is skipped by flags.
    std::vector<Source> fresh;
    for (const auto& s : once.sources()) fresh.push_back(Source{s.name, s.x, {}, {}, false});
    const auto twice = standardize(MultiSourceDataset(once.y(), fresh));
    for (Index k = 0; k < once.k(); ++k)
      CHECK((twice.source(k).x - once.source(k).x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((twice.y() - once.y()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("apply_stats reproduces the training transform") {
  oracle::Gen g(4);
  auto inst = oracle::make_instance(g, 12, {4, 7});
  const auto std_ds = standardize(inst.ds);
  for (Index k = 0; k < 2; ++k) {
    const Matrix again = apply_stats(inst.ds.source(k).x, std_ds.source(k).stats);
    CHECK((again - std_ds.source(k).x).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(kind_of([&] { apply_stats(Matrix::Zero(3, 5), std_ds.source(0).stats); }) == ErrorKind::Data);
}

TEST_CASE("SBRM round trip after standardization is bit-exact") {
  TempDir dir("dm");
  oracle::Gen g(5);
  auto inst = oracle::make_instance(g, 15, {6, 9});
  const auto std_ds = standardize(inst.ds);
  std::vector<SourceFile> files;
  for (Index k = 0; k < std_ds.k(); ++k) {
    const auto p = dir / (std_ds.source(k).name + ".sbrm");
    write_sbrm(p, std_ds.source(k).x);
    files.push_back({std_ds.source(k).name, p});
  }
  write_sbrm(dir / "y.sbrm", Matrix(std_ds.y()));
  const auto back = load_dataset(files, dir / "y.sbrm");
  for (Index k = 0; k < std_ds.k(); ++k) CHECK((back.source(k).x.array() == std_ds.source(k).x.array()).all());
  CHECK((back.y().array() == std_ds.y().array()).all());
}

TEST_CASE("CSV with 17 significant digits round-trips every double") {
  TempDir dir("dm");
  oracle::Gen g(6);
  Matrix m = g.gaussian(7, 4, 1e3);
  m(0, 0) = 1.0 / 3.0;
  m(1, 1) = -5e-300;
  write_csv(dir / "m.csv", m, {"a", "b", "c", "d"});
  const auto back = read_csv(dir / "m.csv");
  CHECK((back.values.array() == m.array()).all());
  CHECK(back.header.size() == 4);
}

TEST_CASE("SBRM reader rejects a bad magic and truncation") {
  TempDir dir("dm");
  write_text(dir / "bad.sbrm", "NOTSBRM0");
  CHECK(kind_of([&] { read_sbrm(dir / "bad.sbrm"); }) == ErrorKind::Io);
  write_sbrm(dir / "ok.sbrm", Matrix::Ones(4, 4));
  std::filesystem::resize_file(dir / "ok.sbrm", 40);
  CHECK(kind_of([&] { read_sbrm(dir / "ok.sbrm"); }) == ErrorKind::Io);
}
