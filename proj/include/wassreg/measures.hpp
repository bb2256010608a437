#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "wassreg/matrix.hpp"

namespace wassreg {

// Weighted point cloud sum_j w_j delta_{x_j} in R^d.
//
// Construction validates: k >= 1, d >= 1, finite coordinates, nonnegative
// weights summing to one within 1e-9. Instances are immutable afterwards.
class EmpiricalMeasure {
 public:
  static constexpr double kWeightSumTolerance = 1e-9;

  EmpiricalMeasure(Matrix points, std::vector<double> weights);

  std::size_t size() const { return points_.rows(); }
  std::size_t dim() const { return points_.cols(); }
  const Matrix& points() const { return points_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> point(std::size_t j) const { return points_.row(j); }

  // True when every weight equals 1/k to within 1e-12.
  bool is_uniform() const;

  friend bool operator==(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    return a.points_ == b.points_ && a.weights_ == b.weights_;
  }

 private:
  Matrix points_;
  std::vector<double> weights_;
};

// Uniform weights 1/k over the rows of `points`.
EmpiricalMeasure make_uniform_measure(Matrix points);

// Same weights, points shifted by `shift`.
EmpiricalMeasure translate(const EmpiricalMeasure& m, std::span<const double> shift);

// Reorders support points (and their weights): row j of the result is row
// perm[j] of the input.
EmpiricalMeasure permute(const EmpiricalMeasure& m, std::span<const std::size_t> perm);

// Weighted mean of the support.
std::vector<double> mean(const EmpiricalMeasure& m);

// Largest Euclidean distance between any two support points of a and b
// (including pairs within the same measure).
double diameter(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

struct MeasurePair {
  std::uint64_t id = 0;
  EmpiricalMeasure source;
  EmpiricalMeasure target;
};

// Ordered (source, target) pairs sharing an ambient dimension. Source and
// target of one pair may have different support sizes. Ids are unique.
class RegressionDataset {
 public:
  explicit RegressionDataset(std::size_t dim) : dim_(dim) {}
  RegressionDataset(std::size_t dim, std::vector<MeasurePair> pairs);

  // Appends a pair; throws on dimension mismatch or duplicate id.
  void add(MeasurePair pair);
  void add(EmpiricalMeasure source, EmpiricalMeasure target);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const MeasurePair& operator[](std::size_t i) const { return pairs_[i]; }
  const std::vector<MeasurePair>& pairs() const { return pairs_; }

  friend bool operator==(const RegressionDataset& a, const RegressionDataset& b);

 private:
  std::size_t dim_;
  std::vector<MeasurePair> pairs_;
};

enum class DatasetFormat { binary, json };

// Picks the format from the extension: ".json" -> json, anything else binary.
DatasetFormat format_for_path(const std::filesystem::path& path);

void save_dataset(const RegressionDataset& data, const std::filesystem::path& path,
                  DatasetFormat format);
RegressionDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);

// In-memory codecs used by the file functions.
std::vector<std::uint8_t> encode_binary(const RegressionDataset& data);
RegressionDataset decode_binary(std::span<const std::uint8_t> bytes);
std::string encode_json(const RegressionDataset& data);
RegressionDataset decode_json(std::string_view text);

}  // namespace wassreg
