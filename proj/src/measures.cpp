#include "wassreg/measures.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "wassreg/errors.hpp"

namespace wassreg {

EmpiricalMeasure::EmpiricalMeasure(Matrix points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.rows() == 0) throw DimensionError("empirical measure needs at least one point");
  if (points_.cols() == 0) throw DimensionError("empirical measure needs dimension >= 1");
  if (weights_.size() != points_.rows())
    throw DimensionError("weight count " + std::to_string(weights_.size()) + " != point count " +
                         std::to_string(points_.rows()));
  for (double v : points_.storage())
    if (!std::isfinite(v)) throw ValidationError("non-finite coordinate in empirical measure");
  double total = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("weights must be finite and nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance)
    throw ValidationError("weights sum to " + std::to_string(total) + ", expected 1");
}

bool EmpiricalMeasure::is_uniform() const {
  const double u = 1.0 / static_cast<double>(size());
  return std::all_of(weights_.begin(), weights_.end(),
                     [u](double w) { return std::abs(w - u) <= 1e-12; });
}

EmpiricalMeasure make_uniform_measure(Matrix points) {
  const std::size_t k = points.rows();
  if (k == 0) throw DimensionError("cannot build a measure from an empty point set");
  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  return EmpiricalMeasure(std::move(points), std::move(w));
}

EmpiricalMeasure translate(const EmpiricalMeasure& m, std::span<const double> shift) {
  if (shift.size() != m.dim()) throw DimensionError("shift dimension mismatch");
  Matrix p = m.points();
  for (std::size_t j = 0; j < p.rows(); ++j)
    for (std::size_t c = 0; c < p.cols(); ++c) p(j, c) += shift[c];
  return EmpiricalMeasure(std::move(p), std::vector<double>(m.weights().begin(), m.weights().end()));
}

EmpiricalMeasure permute(const EmpiricalMeasure& m, std::span<const std::size_t> perm) {
  if (perm.size() != m.size()) throw DimensionError("permutation length mismatch");
  Matrix p(m.size(), m.dim());
  std::vector<double> w(m.size());
  for (std::size_t j = 0; j < perm.size(); ++j) {
    const auto src = m.point(perm[j]);
    std::copy(src.begin(), src.end(), p.row(j).begin());
    w[j] = m.weights()[perm[j]];
  }
  return EmpiricalMeasure(std::move(p), std::move(w));
}

std::vector<double> mean(const EmpiricalMeasure& m) {
  std::vector<double> out(m.dim(), 0.0);
  for (std::size_t j = 0; j < m.size(); ++j)
    for (std::size_t c = 0; c < m.dim(); ++c) out[c] += m.weights()[j] * m.points()(j, c);
  return out;
}

namespace {

double sq_dist(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double t = x[c] - y[c];
    s += t * t;
  }
  return s;
}

}  // namespace

double diameter(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim() != b.dim()) throw DimensionError("diameter: dimension mismatch");
  // Bounding-box diagonal would be cheaper but loose; clouds here are small
  // enough for the exact pairwise maximum.
  double best = 0.0;
  const EmpiricalMeasure* ms[2] = {&a, &b};
  for (int s = 0; s < 2; ++s)
    for (int t = s; t < 2; ++t)
      for (std::size_t i = 0; i < ms[s]->size(); ++i)
        for (std::size_t j = 0; j < ms[t]->size(); ++j)
          best = std::max(best, sq_dist(ms[s]->point(i), ms[t]->point(j)));
  return std::sqrt(best);
}

RegressionDataset::RegressionDataset(std::size_t dim, std::vector<MeasurePair> pairs) : dim_(dim) {
  if (dim == 0) throw DimensionError("dataset dimension must be >= 1");
  pairs_.reserve(pairs.size());
  for (auto& p : pairs) add(std::move(p));
}

void RegressionDataset::add(MeasurePair pair) {
  if (pair.source.dim() != dim_ || pair.target.dim() != dim_)
    throw DimensionError("pair " + std::to_string(pair.id) + " has dimension " +
                          std::to_string(pair.source.dim()) + "/" + std::to_string(pair.target.dim()) +
                          ", dataset dimension is " + std::to_string(dim_));
  for (const auto& p : pairs_)
    if (p.id == pair.id) throw ValidationError("duplicate pair id " + std::to_string(pair.id));
  pairs_.push_back(std::move(pair));
}

void RegressionDataset::add(EmpiricalMeasure source, EmpiricalMeasure target) {
  std::uint64_t id = 0;
  for (const auto& p : pairs_) id = std::max(id, p.id + 1);
  add(MeasurePair{id, std::move(source), std::move(target)});
}

bool operator==(const RegressionDataset& a, const RegressionDataset& b) {
  if (a.dim_ != b.dim_ || a.pairs_.size() != b.pairs_.size()) return false;
  for (std::size_t i = 0; i < a.pairs_.size(); ++i) {
    const auto& p = a.pairs_[i];
    const auto& q = b.pairs_[i];
    if (p.id != q.id || !(p.source == q.source) || !(p.target == q.target)) return false;
  }
  return true;
}

}  // namespace wassreg
