#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "oracles.hpp"
#include "wassreg/errors.hpp"
#include "wassreg/measures.hpp"
#include "wassreg/rng.hpp"

using namespace wassreg;

namespace {

RegressionDataset random_dataset(Rng& rng, std::size_t n, std::size_t d) {
  RegressionDataset data(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ka = 1 + rng.below(6);
    const std::size_t kb = 1 + rng.below(6);
    // Mix uniform and weighted measures, and awkward values.
    auto a = rng.uniform() < 0.5 ? oracle::random_cloud(rng, ka, d, 1e3) : oracle::random_weighted_cloud(rng, ka, d);
    auto b = oracle::random_weighted_cloud(rng, kb, d);
    data.add(MeasurePair{3 * i + 1, std::move(a), std::move(b)});
  }
  return data;
}

std::filesystem::path temp_file(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_SUITE("measures") {
  TEST_CASE("construction validates points and weights") {
    CHECK_THROWS_AS(EmpiricalMeasure(Matrix(0, 2), {}), DimensionError);
    CHECK_THROWS_AS(EmpiricalMeasure(Matrix(2, 2), {0.5}), DimensionError);
    CHECK_THROWS_AS(EmpiricalMeasure(Matrix(2, 1), {0.7, 0.7}), ValidationError);
    CHECK_THROWS_AS(EmpiricalMeasure(Matrix(2, 1), {1.5, -0.5}), ValidationError);
    Matrix bad(1, 2);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(make_uniform_measure(bad), ValidationError);
    CHECK(make_uniform_measure(Matrix(4, 3)).is_uniform());
  }

  TEST_CASE("mean, translate, permute, diameter") {
    const auto m = EmpiricalMeasure(Matrix{{0.0, 0.0}, {4.0, 2.0}}, {0.25, 0.75});
    const auto mu = mean(m);
    CHECK(mu[0] == doctest::Approx(3.0));
    CHECK(mu[1] == doctest::Approx(1.5));
    const double t[2] = {1.0, -1.0};
    const auto moved = translate(m, t);
    CHECK(moved.point(1)[0] == 5.0);
    CHECK(moved.weights()[1] == 0.75);
    const std::size_t perm[2] = {1, 0};
    const auto p = permute(m, perm);
    CHECK(p.point(0)[0] == 4.0);
    CHECK(p.weights()[0] == 0.75);
    CHECK(diameter(m, translate(m, t)) == doctest::Approx(std::hypot(5.0, 1.0)));
  }

  TEST_CASE("dataset rejects mismatched dimensions and duplicate ids") {
    RegressionDataset data(2);
    data.add(make_uniform_measure(Matrix(3, 2)), make_uniform_measure(Matrix(5, 2)));
    CHECK_THROWS_AS(data.add(make_uniform_measure(Matrix(3, 3)), make_uniform_measure(Matrix(3, 2))), DimensionError);
    CHECK_THROWS_AS(data.add(MeasurePair{0, make_uniform_measure(Matrix(1, 2)), make_uniform_measure(Matrix(1, 2))}),
                    ValidationError);
  }

  TEST_CASE("binary and json round trips are the identity") {
    Rng rng(3);
    for (int trial = 0; trial < 25; ++trial) {
      const auto data = random_dataset(rng, 1 + rng.below(5), 1 + rng.below(4));
      CHECK(decode_binary(encode_binary(data)) == data);
      CHECK(decode_json(encode_json(data)) == data);
    }
  }

  TEST_CASE("file round trip picks the format from the extension") {
    Rng rng(5);
    const auto data = random_dataset(rng, 4, 2);
    const auto bin = temp_file("wassreg_rt.wrd");
    const auto js = temp_file("wassreg_rt.json");
    CHECK(format_for_path(bin) == DatasetFormat::binary);
    CHECK(format_for_path(js) == DatasetFormat::json);
    save_dataset(data, bin, format_for_path(bin));
    save_dataset(data, js, format_for_path(js));
    CHECK(load_dataset(bin, DatasetFormat::binary) == data);
    CHECK(load_dataset(js, DatasetFormat::json) == data);
    std::filesystem::remove(bin);
    std::filesystem::remove(js);
    CHECK_THROWS_AS(load_dataset(temp_file("wassreg_missing.wrd"), DatasetFormat::binary), IoError);
  }

  TEST_CASE("truncated or corrupt binary input is a parse error") {
    Rng rng(9);
    const auto bytes = encode_binary(random_dataset(rng, 3, 2));
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1})
      CHECK_THROWS_AS(decode_binary(std::span(bytes).first(cut)), ParseError);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_binary(bad), ParseError);
    auto longer = bytes;
    longer.push_back(0);
    CHECK_THROWS_AS(decode_binary(longer), ParseError);
  }

  TEST_CASE("malformed json reports a location") {
    try {
      decode_json("{\n  \"format\": \"wassreg-dataset\",\n  oops\n}");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(decode_json("{\"format\":\"other\"}"), ParseError);
    CHECK_THROWS_AS(decode_json(R"({"format":"wassreg-dataset","version":1,"dim":2,"pairs":[],"extra":1})"),
                    ValidationError);
    CHECK_THROWS_AS(
        decode_json(R"({"format":"wassreg-dataset","version":1,"dim":2,"pairs":[{"id":0,"source":{"points":[[0,0]]},"target":{"points":[[0]]}}]})"),
        Error);
  }
}
