#include "doctest.h"

#include "support/tempdir.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Run cli(const testing_fs::TempDir& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + SBR_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::map<std::string, std::string> manifest(const fs::path& p) {
  std::map<std::string, std::string> m;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return m;
}

// Single-column CSV with a header line.
std::vector<double> column(const std::string& text) {
  std::vector<double> v;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line))
    if (!line.empty()) v.push_back(std::stod(line));
  return v;
}

double summary_value(const std::string& text, const std::string& key) {
  const auto at = text.find(key + "=");
  REQUIRE(at != std::string::npos);
  return std::stod(text.substr(at + key.size() + 1));
}

const char* kTiny = "--scale 100 --n-train 60 --n-test 40 --seed 5";

}  // namespace

TEST_CASE("help and version exit cleanly; parse errors exit 1") {
  testing_fs::TempDir dir("cli");
  CHECK(cli(dir, "--help").code == 0);
  const Run v = cli(dir, "--version");
  CHECK(v.code == 0);
  CHECK_FALSE(v.out.empty());
  const Run bad = cli(dir, "fit --no-such-flag");
  CHECK(bad.code == 1);
  CHECK(bad.err.find("error: code=1 kind=usage") != std::string::npos);
  CHECK(cli(dir, "").code == 1);
  CHECK(cli(dir, "sparsify --fit x --out y --method bogus").code == 1);
}

TEST_CASE("simulate, fit, predict round trip") {
  testing_fs::TempDir dir("cli");
  const std::string sim = (dir / "sim").string();
  REQUIRE(cli(dir, std::string("simulate --scenario sparse ") + kTiny + " --out " + sim).code == 0);
  CHECK(fs::exists(dir / "sim" / "train" / "sources.list"));
  CHECK(fs::exists(dir / "sim" / "test" / "y.sbrm"));
  CHECK(fs::exists(dir / "sim" / "truth.csv"));
  const auto sm = manifest(dir / "sim" / "run.manifest");
  CHECK(sm.at("command") == "simulate");
  CHECK(slurp(dir / "sim" / "train" / "sources.list") == "CL\nRNA\nSNP\n");

  const std::string fit = (dir / "m.sbrfit").string();
  const Run f = cli(dir, "fit --drop-constant --estimator map --data " + sim + "/train --out " + fit + " --trace " +
                             (dir / "trace.csv").string());
  REQUIRE_MESSAGE(f.code == 0, f.err);
  CHECK(fs::exists(fit));
  const auto fm = manifest(dir / "run.manifest");
  CHECK(fm.at("command") == "fit");
  CHECK(fm.at("result.estimator") == "map");
  CHECK(fm.count("result.lambda") == 1);
  CHECK(fm.at("output.fit") == fit);
  CHECK(slurp(dir / "trace.csv").size() > 0);

  const Run p = cli(dir, "predict --model " + fit + " --data " + sim + "/test --out " + (dir / "pred.csv").string());
  REQUIRE_MESSAGE(p.code == 0, p.err);
  const std::vector<double> pred = column(slurp(dir / "pred.csv"));
  CHECK(pred.size() == 40);
  CHECK(p.err.find("summary: test_correlation=") != std::string::npos);

  // Only the CSV goes to stdout.
  const Run s = cli(dir, "predict --model " + fit + " --data " + sim + "/test --stdout-csv");
  REQUIRE(s.code == 0);
  CHECK(s.out.rfind("prediction\n", 0) == 0);
  const std::vector<double> again = column(s.out);
  REQUIRE(again.size() == pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) CHECK(again[i] == doctest::Approx(pred[i]).epsilon(1e-15));
}

TEST_CASE("predict names the source whose width does not match") {
  testing_fs::TempDir dir("cli");
  const std::string sim = (dir / "sim").string();
  const std::string other = (dir / "other").string();
  REQUIRE(cli(dir, std::string("simulate ") + kTiny + " --out " + sim).code == 0);
  REQUIRE(cli(dir, std::string("simulate ") + kTiny + " --p-rna 7 --out " + other).code == 0);
  const std::string fit = (dir / "m.sbrfit").string();
  REQUIRE(cli(dir, "fit --drop-constant --estimator ml --data " + sim + "/train --out " + fit).code == 0);
  const Run p = cli(dir, "predict --model " + fit + " --data " + other + "/test --out " + (dir / "p.csv").string());
  CHECK(p.code == 2);
  CHECK(p.err.find("RNA") != std::string::npos);
  CHECK(p.err.find("error: code=2") != std::string::npos);
}

TEST_CASE("fixed lambda, config files and flag precedence") {
  testing_fs::TempDir dir("cli");
  const std::string sim = (dir / "sim").string();
  REQUIRE(cli(dir, std::string("simulate ") + kTiny + " --out " + sim).code == 0);

  CHECK(cli(dir, "fit --drop-constant --data " + sim + "/train --lambda 1,2 --out " + (dir / "x.sbrfit").string()).code == 1);
  const Run fixed = cli(dir, "fit --drop-constant --data " + sim + "/train --lambda 1,10,100 --out " + (dir / "l.sbrfit").string());
  REQUIRE(fixed.code == 0);
  CHECK(manifest(dir / "run.manifest").at("result.estimator") == "user");

  {
    std::ofstream cfg(dir / "fit.cfg");
    cfg << "estimator = cv\nrestarts = 2\n";
  }
  const std::string base = "fit --drop-constant --config " + (dir / "fit.cfg").string() + " --data " + sim + "/train --out " +
                           (dir / "c.sbrfit").string();
  REQUIRE(cli(dir, base).code == 0);
  auto m = manifest(dir / "run.manifest");
  CHECK(m.at("result.estimator") == "cv");
  CHECK(m.at("option.restarts") == "2");
  REQUIRE(cli(dir, base + " --estimator ml").code == 0);
  m = manifest(dir / "run.manifest");
  CHECK(m.at("result.estimator") == "ml");
  CHECK(m.at("option.restarts") == "2");
  const Run missing = cli(dir, "fit --config " + (dir / "nope.cfg").string() + " --data " + sim + "/train --out x");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.cfg") != std::string::npos);
}

TEST_CASE("fits are reproducible across runs and worker counts") {
  testing_fs::TempDir dir("cli");
  const std::string sim = (dir / "sim").string();
  REQUIRE(cli(dir, std::string("simulate --scenario medium ") + kTiny + " --out " + sim).code == 0);
  const std::string args = "fit --drop-constant --estimator map --data " + sim + "/train";
  REQUIRE(cli(dir, args + " --workers 1 --out " + (dir / "a.sbrfit").string()).code == 0);
  REQUIRE(cli(dir, args + " --workers 1 --out " + (dir / "b.sbrfit").string()).code == 0);
  REQUIRE(cli(dir, args + " --workers 3 --out " + (dir / "c.sbrfit").string()).code == 0);
  CHECK(slurp(dir / "a.sbrfit") == slurp(dir / "b.sbrfit"));

  auto preds = [&](const char* model) {
    const Run r = cli(dir, "predict --model " + (dir / model).string() + " --data " + sim + "/test --stdout-csv");
    REQUIRE(r.code == 0);
    return column(r.out);
  };
  const auto pa = preds("a.sbrfit");
  const auto pc = preds("c.sbrfit");
  REQUIRE(pa.size() == pc.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) worst = std::max(worst, std::abs(pa[i] - pc[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("sparsify relaxed logn keeps the dense accuracy at desk scale") {
  testing_fs::TempDir dir("cli");
  const std::string sim = (dir / "sim").string();
  REQUIRE(cli(dir, "simulate --scenario medium --p-rna 500 --p-snp 10000 --n-test 1000 --seed 11 --out " + sim).code ==
          0);
  const std::string fit = (dir / "m.sbrfit").string();
  REQUIRE(cli(dir, "fit --drop-constant --data " + sim + "/train --out " + fit).code == 0);
  const Run dense = cli(dir, "predict --model " + fit + " --data " + sim + "/test --out " + (dir / "d.csv").string());
  REQUIRE(dense.code == 0);

  const std::string sparse = (dir / "s.sbrfit").string();
  const Run sp = cli(dir, "sparsify --fit " + fit + " --method relaxed --control logn --out " + sparse);
  REQUIRE_MESSAGE(sp.code == 0, sp.err);
  CHECK(summary_value(sp.err, "f_n") == doctest::Approx(std::log(100.0)));
  CHECK(summary_value(sp.err, "nonzero") < 10526.0);
  const auto sm = manifest(dir / "run.manifest");
  CHECK(sm.at("command") == "sparsify");
  CHECK(sm.at("output.sparse") == sparse);

  const Run sparse_pred =
      cli(dir, "predict --model " + sparse + " --data " + sim + "/test --out " + (dir / "s.csv").string());
  REQUIRE(sparse_pred.code == 0);
  const double r_dense = summary_value(dense.err, "test_correlation");
  const double r_sparse = summary_value(sparse_pred.err, "test_correlation");
  MESSAGE("dense " << r_dense << " sparse " << r_sparse);
  CHECK(std::abs(r_dense - r_sparse) < 0.05);
}

TEST_CASE("sparsify general needs the training data") {
  testing_fs::TempDir dir("cli");
  const std::string sim = (dir / "sim").string();
  REQUIRE(cli(dir, std::string("simulate ") + kTiny + " --out " + sim).code == 0);
  const std::string fit = (dir / "m.sbrfit").string();
  REQUIRE(cli(dir, "fit --drop-constant --data " + sim + "/train --out " + fit).code == 0);
  CHECK(cli(dir, "sparsify --fit " + fit + " --method general --out " + (dir / "g.sbrfit").string()).code != 0);
  const Run g = cli(dir, "sparsify --fit " + fit + " --method general --drop-constant --data " + sim + "/train --out " +
                             (dir / "g.sbrfit").string());
  REQUIRE_MESSAGE(g.code == 0, g.err);
  CHECK(g.err.find("summary: method=") != std::string::npos);
}

TEST_CASE("bench writes one row per method") {
  testing_fs::TempDir dir("cli");
  const Run b = cli(dir, "bench --scale 100 --n-train 50 --n-test 30 --scenarios sparse --seeds 1 --restarts 2 --out " +
                             (dir / "b").string());
  REQUIRE_MESSAGE(b.code == 0, b.err);
  std::istringstream in(slurp(dir / "b" / "bench.csv"));
  std::string line;
  int rows = 0;
  std::getline(in, line);
  CHECK(line.rfind("scenario,correlation,seed,method", 0) == 0);
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);
  CHECK(fs::exists(dir / "b" / "timing.csv"));
}
