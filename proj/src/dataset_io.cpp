#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json_util.hpp"
#include "wassreg/errors.hpp"
#include "wassreg/measures.hpp"

namespace wassreg {

namespace {

// Binary layout, all little-endian:
//   magic "WRDS" | u32 version | u64 dim | u64 n
//   per pair: u64 id | u64 k_src | f64 points[k_src*dim] | f64 weights[k_src]
//             u64 k_tgt | f64 points[k_tgt*dim] | f64 weights[k_tgt]
constexpr char kMagic[4] = {'W', 'R', 'D', 'S'};
constexpr std::uint32_t kBinaryVersion = 1;
constexpr int kJsonVersion = 1;
constexpr const char* kJsonFormatTag = "wassreg-dataset";

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(le<std::uint64_t>(what)); }
  void expect_magic() {
    need(4, "magic");
    if (std::memcmp(in_.data(), kMagic, 4) != 0) throw ParseError("not a .wrd dataset (bad magic)", 0);
    pos_ = 4;
  }
  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n)
      throw ParseError(std::string("truncated dataset while reading ") + what, pos_);
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_measure(Writer& w, const EmpiricalMeasure& m) {
  w.le<std::uint64_t>(m.size());
  for (double v : m.points().storage()) w.f64(v);
  for (double v : m.weights()) w.f64(v);
}

EmpiricalMeasure read_measure(Reader& r, std::size_t dim) {
  const std::size_t at = r.pos();
  const auto k = r.le<std::uint64_t>("support size");
  // Each point needs (dim + 1) doubles; reject absurd sizes before allocating.
  if (k == 0 || k > r.remaining() / (8 * (dim + 1)))
    throw ParseError("invalid support size " + std::to_string(k), at);
  Matrix pts(k, dim);
  for (double& v : pts.storage()) v = r.f64("points");
  std::vector<double> w(k);
  for (double& v : w) v = r.f64("weights");
  return EmpiricalMeasure(std::move(pts), std::move(w));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

namespace detail {

json measure_to_json(const EmpiricalMeasure& m) {
  json pts = json::array();
  for (std::size_t j = 0; j < m.size(); ++j) {
    const auto row = m.point(j);
    pts.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return json{{"points", std::move(pts)},
              {"weights", std::vector<double>(m.weights().begin(), m.weights().end())}};
}

EmpiricalMeasure measure_from_json(const json& j) {
  require_known_keys(j, {"points", "weights"}, "measure");
  if (!j.contains("points") || !j["points"].is_array())
    throw ValidationError("measure: missing 'points' array");
  const auto& pts = j["points"];
  if (pts.empty()) throw DimensionError("measure: empty point set");
  const std::size_t k = pts.size();
  const std::size_t d = pts[0].size();
  Matrix m(k, d);
  for (std::size_t r = 0; r < k; ++r) {
    if (!pts[r].is_array() || pts[r].size() != d)
      throw DimensionError("measure: point " + std::to_string(r) + " has inconsistent dimension");
    for (std::size_t c = 0; c < d; ++c) m(r, c) = pts[r][c].get<double>();
  }
  std::vector<double> w;
  if (j.contains("weights")) {
    w = j["weights"].get<std::vector<double>>();
  } else {
    w.assign(k, 1.0 / static_cast<double>(k));
  }
  return EmpiricalMeasure(std::move(m), std::move(w));
}

json matrix_to_json(const Matrix& m) {
  return json{{"shape", {m.rows(), m.cols()}}, {"data", m.storage()}};
}

Matrix matrix_from_json(const json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw ValidationError("matrix shape must have two entries");
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != shape[0] * shape[1]) throw DimensionError("matrix data does not match shape");
  return Matrix(shape[0], shape[1], std::move(data));
}

void require_known_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                [&](const char* k) { return item.key() == k; });
    if (!ok) throw ValidationError(std::string(where) + ": unknown key '" + item.key() + "'");
  }
}

json parse_json_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte;
    const std::size_t upto = std::min(byte, text.size());
    const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw ParseError("JSON parse error at line " + std::to_string(line) + ", byte " + std::to_string(byte) +
                         ": " + e.what(),
                     byte, line);
  }
}

}  // namespace detail

std::vector<std::uint8_t> encode_binary(const RegressionDataset& data) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kBinaryVersion);
  w.le<std::uint64_t>(data.dim());
  w.le<std::uint64_t>(data.size());
  for (const auto& p : data.pairs()) {
    w.le<std::uint64_t>(p.id);
    write_measure(w, p.source);
    write_measure(w, p.target);
  }
  return w.take();
}

RegressionDataset decode_binary(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic();
  const auto version = r.le<std::uint32_t>("version");
  if (version != kBinaryVersion)
    throw ParseError("unsupported .wrd version " + std::to_string(version), 4);
  const auto dim = r.le<std::uint64_t>("dim");
  if (dim == 0) throw ParseError("dataset dimension must be >= 1", 8);
  const auto n = r.le<std::uint64_t>("pair count");
  RegressionDataset out(dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto id = r.le<std::uint64_t>("pair id");
    auto src = read_measure(r, dim);
    auto tgt = read_measure(r, dim);
    out.add(MeasurePair{id, std::move(src), std::move(tgt)});
  }
  if (!r.at_end()) throw ParseError("trailing bytes after last pair", r.pos());
  return out;
}

std::string encode_json(const RegressionDataset& data) {
  using detail::json;
  json pairs = json::array();
  for (const auto& p : data.pairs())
    pairs.push_back(json{{"id", p.id},
                         {"source", detail::measure_to_json(p.source)},
                         {"target", detail::measure_to_json(p.target)}});
  json doc{{"format", kJsonFormatTag}, {"version", kJsonVersion}, {"dim", data.dim()}, {"pairs", std::move(pairs)}};
  return doc.dump(1) + "\n";
}

RegressionDataset decode_json(std::string_view text) {
  using detail::json;
  const json doc = detail::parse_json_text(text);
  detail::require_known_keys(doc, {"format", "version", "dim", "pairs"}, "dataset");
  if (doc.value("format", std::string()) != kJsonFormatTag)
    throw ParseError("not a wassreg dataset (format tag missing)", 0);
  if (!doc.contains("version") || doc["version"] != kJsonVersion)
    throw ParseError("unsupported dataset version", 0);
  try {
    const auto dim = doc.at("dim").get<std::size_t>();
    RegressionDataset out(dim);
    for (const auto& p : doc.at("pairs")) {
      detail::require_known_keys(p, {"id", "source", "target"}, "pair");
      out.add(MeasurePair{p.at("id").get<std::uint64_t>(), detail::measure_from_json(p.at("source")),
                          detail::measure_from_json(p.at("target"))});
    }
    return out;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("dataset: ") + e.what());
  }
}

DatasetFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".json" ? DatasetFormat::json : DatasetFormat::binary;
}

void save_dataset(const RegressionDataset& data, const std::filesystem::path& path, DatasetFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  if (format == DatasetFormat::binary) {
    const auto bytes = encode_binary(data);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    out << encode_json(data);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

RegressionDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  const auto bytes = read_file(path);
  if (format == DatasetFormat::binary) return decode_binary(bytes);
  return decode_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace wassreg
