#include "core/simgen.hpp"

#include <cmath>
#include <numeric>

namespace sbr {

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ull));
}

void SimConfig::validate() const {
  require(n_train >= 2 && n_test >= 0, ErrorKind::Usage, "simulation needs n_train >= 2, n_test >= 0");
  require(p_cl >= 0 && p_rna >= 0 && p_snp >= 0 && p_cl + p_rna + p_snp >= 1, ErrorKind::Usage,
          "simulation needs at least one covariate");
  if (p_snp > 0) {
    require(snp_blocks >= 1 && p_snp >= snp_blocks, ErrorKind::Usage, "simulation needs p_snp >= B >= 1");
    require(p_snp % snp_blocks == 0, ErrorKind::Usage, "p_snp must be a multiple of the block count");
    require(p_snp / snp_blocks >= 2, ErrorKind::Usage, "SNP block size must be >= 2");
  }
  require(rna_block_size >= 1, ErrorKind::Usage, "rna_block_size must be >= 1");
  for (double s : {s_cl, s_rna, s_snp})
    require(s >= 0.0 && s <= 1.0, ErrorKind::Usage, "sparsity fractions must lie in [0, 1]");
  if (cl_covariance)
    require(cl_covariance->rows() == p_cl && cl_covariance->cols() == p_cl, ErrorKind::Data,
            "CL covariance must be p_cl x p_cl");
  if (rna_covariance)
    require(rna_covariance->rows() == p_rna && rna_covariance->cols() == p_rna, ErrorKind::Data,
            "RNA covariance must be p_rna x p_rna");
  require(gnd_shape > 0.0 && gnd_scale > 0.0 && snp_scale_factor > 0.0 && cl_cov_scale > 0.0, ErrorKind::Usage,
          "GND and scale parameters must be > 0");
}

Scenario parse_scenario(const std::string& s) {
  if (s == "sparse") return Scenario::Sparse;
  if (s == "medium") return Scenario::Medium;
  if (s == "dense") return Scenario::Dense;
  fail(ErrorKind::Usage, "unknown scenario '" + s + "'");
}

Correlation parse_correlation(const std::string& s) {
  if (s == "low") return Correlation::Low;
  if (s == "high") return Correlation::High;
  fail(ErrorKind::Usage, "unknown correlation level '" + s + "'");
}

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Sparse: return "sparse";
    case Scenario::Medium: return "medium";
    case Scenario::Dense: return "dense";
  }
  return "sparse";
}

const char* correlation_name(Correlation c) { return c == Correlation::Low ? "low" : "high"; }

SimConfig make_sim_config(Scenario s, Correlation c, std::uint64_t seed) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.s_snp = s == Scenario::Sparse ? 0.01 : s == Scenario::Medium ? 0.10 : 0.50;
  // Block size 100 (low correlation) or 1000 (high correlation).
  cfg.snp_blocks = cfg.p_snp / (c == Correlation::Low ? 100 : 1000);
  return cfg;
}

Vector sample_gnd(double mu, double sigma, double u, Index count, Rng& rng) {
  require(sigma > 0.0 && u > 0.0 && std::isfinite(sigma) && std::isfinite(u), ErrorKind::Domain,
          "GND needs sigma > 0 and u > 0");
  require(count >= 0, ErrorKind::Domain, "GND count must be >= 0");
  std::gamma_distribution<double> gamma(1.0 / u, 1.0);
  std::bernoulli_distribution coin(0.5);
  const double scale = u * std::pow(sigma, u);
  Vector out(count);
  for (Index i = 0; i < count; ++i) {
    const double g = gamma(rng);
    const double mag = std::pow(scale * g, 1.0 / u);
    out[i] = mu + (coin(rng) ? mag : -mag);
  }
  return out;
}

Matrix bartlett_factor(Index s, double dof, Rng& rng) {
  require(s >= 1 && dof > static_cast<double>(s) - 1.0, ErrorKind::Domain, "Wishart needs dof > S - 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a = Matrix::Zero(s, s);
  for (Index i = 0; i < s; ++i) {
    std::chi_squared_distribution<double> chi(dof - static_cast<double>(i));
    a(i, i) = std::sqrt(chi(rng));
    // Probability-zero singular draw.
    if (a(i, i) < 1e-10) a(i, i) = 1e-10;
    for (Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  return a;
}

std::vector<Matrix> gen_block_covariance(Index s, Index b, std::uint64_t seed) {
  require(s >= 2, ErrorKind::Domain, "inverse-Wishart blocks need S >= 2");
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(b));
  for (Index i = 0; i < b; ++i) {
    Rng rng(substream_seed(seed, 7, static_cast<std::uint64_t>(i)));
    const Matrix a = bartlett_factor(s, static_cast<double>(s), rng);
    // (A A^T)^{-1} = A^{-T} A^{-1}
    Matrix ainv = Matrix::Identity(s, s);
    a.triangularView<Eigen::Lower>().solveInPlace(ainv);
    Matrix sigma = ainv.transpose() * ainv;
    sigma = 0.5 * (sigma + sigma.transpose());
    out.push_back(std::move(sigma));
  }
  return out;
}

Matrix discretize_snp(const Matrix& x) {
  return x.unaryExpr([](double v) {
    const double a = std::abs(v);
    return a < 1.5 ? 0.0 : (a < 2.5 ? 1.0 : 2.0);
  });
}

namespace {

enum SourceId : std::uint64_t { kCl = 1, kRna = 2, kSnp = 3, kCoef = 100, kNoise = 200 };

// rows x S Gaussian block with covariance scale * IW(dof, I_S), drawn as
// x^T = z^T A^{-1} from the Bartlett factor A.
void gaussian_block(Eigen::Ref<Matrix> out, double dof, double scale, Rng& rng) {
  const Index s = out.cols();
  const Matrix a = bartlett_factor(s, dof, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < s; ++j)
    for (Index i = 0; i < out.rows(); ++i) out(i, j) = normal(rng);
  a.triangularView<Eigen::Lower>().solveInPlace<Eigen::OnTheRight>(out);
  if (scale != 1.0) out *= std::sqrt(scale);
}

Matrix block_design(Index rows, Index p, Index block_size, double dof_offset, double scale, std::uint64_t seed,
                    std::uint64_t source, std::size_t workers) {
  Matrix x(rows, p);
  const Index nblocks = (p + block_size - 1) / block_size;
  parallel_ranges(static_cast<std::size_t>(nblocks), workers, [&](std::size_t, std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const Index c0 = static_cast<Index>(b) * block_size;
      const Index width = std::min(block_size, p - c0);
      Rng rng(substream_seed(seed, source, b));
      gaussian_block(x.middleCols(c0, width), static_cast<double>(width) + dof_offset, scale, rng);
    }
  });
  return x;
}

// rows x p Gaussian draws with a given covariance: x = L z, L L^T = sigma.
Matrix covariance_design(Index rows, const Matrix& sigma, std::uint64_t seed, std::uint64_t source,
                         const std::string& name) {
  Eigen::LLT<Matrix> llt(0.5 * (sigma + sigma.transpose()));
  require(llt.info() == Eigen::Success, ErrorKind::Data, name + " covariance is not positive definite");
  Rng rng(substream_seed(seed, source, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(rows, sigma.rows());
  for (Index j = 0; j < z.cols(); ++j)
    for (Index i = 0; i < rows; ++i) z(i, j) = normal(rng);
  return z * llt.matrixL().transpose();
}

void draw_effects(Vector& beta, std::vector<bool>& support, Index offset, Index p, double frac, double sigma,
                  double u, Rng& rng) {
  const Index count = std::min<Index>(p, static_cast<Index>(std::llround(frac * static_cast<double>(p))));
  std::vector<Index> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), 0);
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, p - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  const Vector values = sample_gnd(0.0, sigma, u, count, rng);
  for (Index i = 0; i < count; ++i) {
    const Index j = offset + idx[static_cast<std::size_t>(i)];
    beta[j] = values[i];
    support[static_cast<std::size_t>(j)] = true;
  }
}

}  // namespace

SimulatedData generate_scenario(const SimConfig& cfg, std::size_t workers) {
  cfg.validate();
  const Index rows = cfg.n_train + cfg.n_test;

  struct Block {
    std::string name;
    Matrix x;
    double frac;
    double sigma;
  };
  std::vector<Block> blocks;
  if (cfg.p_cl > 0)
    blocks.push_back({"CL",
                      cfg.cl_covariance
                          ? covariance_design(rows, *cfg.cl_covariance, cfg.seed, kCl, "CL")
                          : block_design(rows, cfg.p_cl, cfg.p_cl, 2.0, cfg.cl_cov_scale, cfg.seed, kCl, workers),
                      cfg.s_cl, cfg.gnd_scale});
  if (cfg.p_rna > 0)
    blocks.push_back({"RNA",
                      cfg.rna_covariance
                          ? covariance_design(rows, *cfg.rna_covariance, cfg.seed, kRna, "RNA")
                          : block_design(rows, cfg.p_rna, cfg.rna_block_size, 2.0, 1.0, cfg.seed, kRna, workers),
                      cfg.s_rna, cfg.gnd_scale});
  if (cfg.p_snp > 0) {
    const Index s = cfg.p_snp / cfg.snp_blocks;
    Matrix x = block_design(rows, cfg.p_snp, s, 0.0, 1.0, cfg.seed, kSnp, workers);
    x = discretize_snp(x);
    blocks.push_back({"SNP", std::move(x), cfg.s_snp, cfg.gnd_scale * cfg.snp_scale_factor});
  }

  SimTruth truth;
  Index p = 0;
  truth.offsets.push_back(0);
  for (const auto& b : blocks) truth.offsets.push_back(p += b.x.cols());
  truth.beta = Vector::Zero(p);
  truth.support.assign(static_cast<std::size_t>(p), false);
  truth.sigma_eps = cfg.noise_sd;
  Rng coef_rng(substream_seed(cfg.seed, kCoef));
  for (std::size_t k = 0; k < blocks.size(); ++k)
    draw_effects(truth.beta, truth.support, truth.offsets[k], blocks[k].x.cols(), blocks[k].frac, blocks[k].sigma,
                 cfg.gnd_shape, coef_rng);

  Vector y = Vector::Zero(rows);
  for (std::size_t k = 0; k < blocks.size(); ++k)
    y.noalias() += blocks[k].x * truth.beta.segment(truth.offsets[k], blocks[k].x.cols());
  Rng noise_rng(substream_seed(cfg.seed, kNoise));
  std::normal_distribution<double> normal(0.0, cfg.noise_sd);
  for (Index i = 0; i < rows; ++i) y[i] += normal(noise_rng);

  std::vector<Source> train_sources;
  std::vector<Source> test_sources;
  for (auto& b : blocks) {
    Source tr;
    tr.name = b.name;
    tr.x = b.x.topRows(cfg.n_train);
    Source te;
    te.name = b.name;
    te.x = b.x.bottomRows(cfg.n_test);
    b.x.resize(0, 0);
    train_sources.push_back(std::move(tr));
    test_sources.push_back(std::move(te));
  }
  return {MultiSourceDataset(y.head(cfg.n_train), std::move(train_sources)),
          MultiSourceDataset(y.tail(cfg.n_test), std::move(test_sources)), std::move(truth)};
}

double metric_correlation(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorKind::Domain, "correlation needs equal lengths >= 2");
  const auto n = static_cast<Index>(a.size());
  Eigen::Map<const Vector> x(a.data(), n), y(b.data(), n);
  const Vector xc = x.array() - x.mean();
  const Vector yc = y.array() - y.mean();
  const double sx = xc.norm();
  const double sy = yc.norm();
  require(sx > 0.0 && sy > 0.0, ErrorKind::Domain, "correlation undefined for zero-variance input");
  return std::clamp(xc.dot(yc) / (sx * sy), -1.0, 1.0);
}

double metric_auc(std::span<const double> scores, const std::vector<bool>& mask) {
  require(scores.size() == mask.size(), ErrorKind::Domain, "AUC: scores and mask differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // average 1-based rank of the tie group
    for (std::size_t t = i; t < j; ++t)
      if (mask[order[t]]) {
        rank_sum += mid;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  require(pos > 0 && neg > 0, ErrorKind::Domain, "AUC needs both classes in the mask");
  const double dp = static_cast<double>(pos);
  return (rank_sum - dp * (dp + 1.0) / 2.0) / (dp * static_cast<double>(neg));
}

}  // namespace sbr
