#include "wassreg/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wassreg/errors.hpp"
#include "wassreg/rng.hpp"

namespace wassreg::datagen {

namespace {

// Stream index reserved for the r_thresh pilot sample, far away from pair
// indices.
constexpr std::uint64_t kPilotStream = 0xfffffffffff00000ULL;

Matrix rotation(double theta) {
  return Matrix{{std::cos(theta), -std::sin(theta)}, {std::sin(theta), std::cos(theta)}};
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Source cloud of one GMM pair; consumes the stream as documented.
Matrix gmm_source(const GmmGenConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.dim;
  const auto w = rng.dirichlet_ones(cfg.components);
  Matrix means(cfg.components, d);
  for (auto& v : means.storage()) v = rng.uniform(cfg.mean_low, cfg.mean_high);
  Matrix x(cfg.k, d);
  for (std::size_t l = 0; l < cfg.k; ++l) {
    const std::size_t c = rng.categorical(w);
    for (std::size_t j = 0; j < d; ++j) x(l, j) = means(c, j) + cfg.component_sigma * rng.normal();
  }
  return x;
}

double rms_radius(const Matrix& x) {
  double s = 0.0;
  for (double v : x.storage()) s += v * v;
  return std::sqrt(s / static_cast<double>(x.rows()));
}

std::vector<double> column_mean(const Matrix& x) {
  std::vector<double> m(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) m[c] += x(r, c);
  for (auto& v : m) v /= static_cast<double>(x.rows());
  return m;
}

}  // namespace

void GaussianGenConfig::validate() const {
  if (n < 1 || k < 1) throw ValidationError("gauss: n and k must be >= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ValidationError("gauss: sigma must be >= 0");
  if (!(mean_low < mean_high)) throw ValidationError("gauss: mean box needs low < high");
}

void GmmGenConfig::validate() const {
  if (n < 1 || k < 1) throw ValidationError("gmm: n and k must be >= 1");
  if (dim < 2) throw ValidationError("gmm: dim must be >= 2");
  if (components < 1) throw ValidationError("gmm: components must be >= 1");
  if (!(mean_low < mean_high)) throw ValidationError("gmm: mean box needs L < U");
  if (!(component_sigma >= 0.0)) throw ValidationError("gmm: component sigma must be >= 0");
  if (!(gamma > 0.0)) throw ValidationError("gmm: gamma must be > 0");
  if (!(tau >= 0.0)) throw ValidationError("gmm: tau must be >= 0");
  for (double v : {mean_low, mean_high, component_sigma, alpha_rot, kappa0, kappa1, gamma, beta, tau})
    if (!std::isfinite(v)) throw ValidationError("gmm: parameters must be finite");
  if (r_thresh && !std::isfinite(*r_thresh)) throw ValidationError("gmm: r_thresh must be finite");
}

AffineTruth gaussian_truth(std::span<const double> m) {
  if (m.size() != 2) throw DimensionError("gaussian_truth: mean must be 2-dimensional");
  const double theta = 2.0 * std::hypot(m[0], m[1]);
  return {rotation(theta), {0.5 * m[0], 0.5 * m[1]}, theta, 1.0};
}

MeasurePair gaussian_pair(const GaussianGenConfig& cfg, std::uint64_t index,
                          std::optional<std::array<double, 2>> forced) {
  Rng rng(derive_seed(cfg.seed, index));
  std::array<double, 2> m{rng.uniform(cfg.mean_low, cfg.mean_high), rng.uniform(cfg.mean_low, cfg.mean_high)};
  if (forced) m = *forced;
  Matrix x(cfg.k, 2);
  for (std::size_t j = 0; j < cfg.k; ++j)
    for (std::size_t c = 0; c < 2; ++c) x(j, c) = m[c] + rng.normal();
  const double e0 = cfg.noise_sigma * rng.normal();
  const double e1 = cfg.noise_sigma * rng.normal();
  const AffineTruth t = gaussian_truth(m);
  Matrix y(cfg.k, 2);
  for (std::size_t j = 0; j < cfg.k; ++j) {
    y(j, 0) = t.A(0, 0) * x(j, 0) + t.A(0, 1) * x(j, 1) + t.a[0] + e0;
    y(j, 1) = t.A(1, 0) * x(j, 0) + t.A(1, 1) * x(j, 1) + t.a[1] + e1;
  }
  return {index, make_uniform_measure(std::move(x)), make_uniform_measure(std::move(y))};
}

RegressionDataset gen_gaussian_pairs(const GaussianGenConfig& cfg) {
  cfg.validate();
  RegressionDataset out(2);
  for (std::size_t i = 0; i < cfg.n; ++i) out.add(gaussian_pair(cfg, i));
  return out;
}

AffineTruth gmm_truth(double r, std::span<const double> m_bar, const GmmGenConfig& cfg, double r_thresh) {
  const std::size_t d = cfg.dim;
  if (m_bar.size() != d) throw DimensionError("gmm_truth: mean has wrong dimension");
  const double lambda = logistic((r_thresh - r) / cfg.gamma);
  const double theta = cfg.alpha_rot * r;
  const double shear = cfg.kappa0 + cfg.kappa1 * r;
  const Matrix R = rotation(theta);
  const Matrix S{{1.0, shear}, {0.0, 1.0}};
  AffineTruth t{Matrix::identity(d), std::vector<double>(d), theta, lambda};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) t.A(i, j) = lambda * R(i, j) + (1.0 - lambda) * S(i, j);
  for (std::size_t i = 0; i < d; ++i) t.a[i] = cfg.beta * m_bar[i];
  return t;
}

double resolve_r_thresh(const GmmGenConfig& cfg) {
  cfg.validate();
  if (cfg.r_thresh) return *cfg.r_thresh;
  std::vector<double> radii(kPilotSize);
  for (std::size_t i = 0; i < kPilotSize; ++i) {
    Rng rng(derive_seed(cfg.seed, kPilotStream + i));
    radii[i] = rms_radius(gmm_source(cfg, rng));
  }
  std::sort(radii.begin(), radii.end());
  return 0.5 * (radii[kPilotSize / 2 - 1] + radii[kPilotSize / 2]);
}

RegressionDataset gen_gmm_pairs(const GmmGenConfig& cfg) {
  cfg.validate();
  const double r_thresh = resolve_r_thresh(cfg);
  const std::size_t d = cfg.dim;
  RegressionDataset out(d);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Rng rng(derive_seed(cfg.seed, i));
    Matrix x = gmm_source(cfg, rng);
    const AffineTruth t = gmm_truth(rms_radius(x), column_mean(x), cfg, r_thresh);
    Matrix y(cfg.k, d);
    for (std::size_t l = 0; l < cfg.k; ++l)
      for (std::size_t r = 0; r < d; ++r) {
        double s = t.a[r];
        for (std::size_t c = 0; c < d; ++c) s += t.A(r, c) * x(l, c);
        y(l, r) = s;
      }
    for (std::size_t l = 0; l < cfg.k; ++l)
      for (std::size_t r = 0; r < d; ++r) y(l, r) += cfg.tau * rng.normal();
    out.add({i, make_uniform_measure(std::move(x)), make_uniform_measure(std::move(y))});
  }
  return out;
}

namespace {

EmpiricalMeasure take_points(const EmpiricalMeasure& m, std::span<const std::size_t> idx) {
  Matrix pts(idx.size(), m.dim());
  std::vector<double> w(idx.size());
  double total = 0.0;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto row = m.point(idx[j]);
    std::copy(row.begin(), row.end(), pts.row(j).begin());
    total += (w[j] = m.weights()[idx[j]]);
  }
  if (m.is_uniform() || !(total > 0.0)) return make_uniform_measure(std::move(pts));
  for (auto& v : w) v /= total;
  return EmpiricalMeasure(std::move(pts), std::move(w));
}

}  // namespace

RegressionDataset subsample_regime(const RegressionDataset& master, std::size_t n, std::size_t k,
                                   std::uint64_t subset_seed) {
  if (n > master.size())
    throw ValidationError("subsample: asked for " + std::to_string(n) + " pairs, master has " +
                          std::to_string(master.size()));
  if (k == 0) throw ValidationError("subsample: k must be >= 1");
  for (const auto& p : master.pairs())
    if (k > p.source.size() || k > p.target.size())
      throw ValidationError("subsample: asked for " + std::to_string(k) + " points, pair " + std::to_string(p.id) +
                            " has fewer");
  Rng rng(subset_seed);
  const auto chosen = rng.sample_indices(master.size(), n);
  RegressionDataset out(master.dim());
  for (std::size_t i : chosen) {
    const MeasurePair& p = master[i];
    Rng prng(derive_seed(subset_seed, p.id));
    const auto src_idx = prng.sample_indices(p.source.size(), k);
    const auto tgt_idx = p.source.size() == p.target.size() ? src_idx : prng.sample_indices(p.target.size(), k);
    out.add({p.id, take_points(p.source, src_idx), take_points(p.target, tgt_idx)});
  }
  return out;
}

}  // namespace wassreg::datagen
