// Copyright 2026 The xaiens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <limits>
#include <numeric>

#include "support.hpp"
#include "xaiens/core_model.hpp"
#include "xaiens/normalization.hpp"

using namespace xaiens;
using xaiens::testing::single_method;

namespace {

bool has_message(const ValidationReport& report, const std::string& needle) {
  return std::any_of(report.begin(), report.end(),
                     [&](const std::string& m) { return m.find(needle) != std::string::npos; });
}

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::EmptyData;
}

}  // namespace

TEST_CASE("validate_bundle accepts a well-formed set") {
  std::mt19937_64 rng(1);
  const auto set = xaiens::testing::random_set(rng, 3, Shape{1, 2, 2}, 2);
  CHECK(validate_bundle(set).empty());
}

TEST_CASE("validate_bundle names the non-finite element") {
  std::mt19937_64 rng(2);
  auto set = xaiens::testing::random_set(rng, 3, Shape{1, 2, 2}, 2);
  set.data[1](2, 3) = std::numeric_limits<double>::quiet_NaN();
  const auto report = validate_bundle(set);
  REQUIRE_FALSE(report.empty());
  CHECK(has_message(report, "non-finite value at (m1, 2, 3)"));
  CHECK(code_of([&] { require_valid(set); }) == Errc::ValidationError);
}

TEST_CASE("validate_bundle reports mask shape mismatch") {
  std::mt19937_64 rng(3);
  const auto set = xaiens::testing::random_set(rng, 2, Shape{1, 3, 3}, 1);
  MaskSet masks;
  masks.height = 4;
  masks.width = 4;
  masks.masks = RowMatrixXd::Zero(2, 16);
  masks.instance_ids = set.instance_ids;
  CHECK(has_message(validate_bundle(set, &masks), "mask/explanation shape mismatch"));
}

TEST_CASE("validate_bundle rejects non-binary masks") {
  std::mt19937_64 rng(4);
  const auto set = xaiens::testing::random_set(rng, 2, Shape{1, 2, 2}, 1);
  MaskSet masks{2, 2, RowMatrixXd::Zero(2, 4), set.instance_ids};
  masks.masks(0, 1) = 0.5;
  CHECK(has_message(validate_bundle(set, &masks), "non-binary mask value"));
}

TEST_CASE("method lookup") {
  std::mt19937_64 rng(5);
  const auto set = xaiens::testing::random_set(rng, 2, Shape{1, 2, 2}, 3);
  CHECK(set.method_index("m2") == 2);
  CHECK(code_of([&] { (void)set.method_index("nope"); }) == Errc::UnknownMethod);
}

TEST_CASE("attribution indexing is C order") {
  AttributionTensor t(Shape{2, 2, 3});
  t.values = Eigen::ArrayXd::LinSpaced(12, 0, 11);
  CHECK(t(1, 0, 2) == 8.0);
  CHECK(t.channel(1)(1, 1) == 10.0);
  CHECK_THROWS_AS(AttributionTensor(Shape{1, 2, 2}, Eigen::ArrayXd::Zero(3)), Error);
}

TEST_CASE("from_tensors and select keep alignment") {
  const Shape s{1, 1, 2};
  AttributionTensor a(s, Eigen::Array2d(1, 2));
  AttributionTensor b(s, Eigen::Array2d(3, 4));
  const auto set = ExplanationSet::from_tensors({"x", "y"}, {{a, b}, {b, a}}, {"i0", "i1"});
  CHECK(set.data[0](1, 0) == 3.0);
  CHECK(set.data[1](1, 1) == 2.0);
  const auto sub = set.select({1});
  CHECK(sub.instance_ids == std::vector<std::string>{"i1"});
  CHECK(sub.data[1](0, 0) == 1.0);
}

TEST_CASE("enum names round-trip") {
  for (auto k : {NormalizationKind::None, NormalizationKind::Standard, NormalizationKind::Robust,
                 NormalizationKind::SecondMoment}) {
    CHECK(parse_normalization(to_string(k)) == k);
  }
  for (auto k : {AggregationKind::Max, AggregationKind::Min, AggregationKind::Avg, AggregationKind::MaxAbs}) {
    CHECK(parse_aggregation(to_string(k)) == k);
  }
  for (auto s : {Strategy::NormEnsemble, Strategy::Autoweighted, Strategy::Supervised}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK(code_of([] { parse_aggregation("median"); }) == Errc::ConfigError);
}

TEST_CASE("compute_stats on small fixtures") {
  SUBCASE("population std") {
    const auto set = single_method({1, 2, 3, 4}, Shape{1, 2, 2});
    const auto s = compute_stats(set, "m");
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.std == doctest::Approx(xaiens::testing::ref_pop_std({1, 2, 3, 4})).epsilon(1e-12));
    CHECK(s.std == doctest::Approx(1.118034).epsilon(1e-6));
  }
  SUBCASE("median and IQR") {
    const std::vector<double> v{1, 2, 3, 4, 100};
    const auto s = compute_stats(single_method(v, Shape{1, 1, 5}), "m");
    CHECK(s.median == xaiens::testing::ref_quantile(v, 0.5));
    CHECK(s.median == 3.0);
    CHECK(s.iqr == 2.0);
  }
  SUBCASE("constant") {
    const auto s = compute_stats(single_method({7, 7, 7, 7}, Shape{1, 2, 2}), "m");
    CHECK(s.mean == 7.0);
    CHECK(s.std == 0.0);
    CHECK(s.iqr == 0.0);
  }
}

TEST_CASE("compute_stats is permutation invariant") {
  std::mt19937_64 rng(11);
  auto set = xaiens::testing::random_set(rng, 6, Shape{2, 3, 3}, 1);
  const auto before = compute_stats(set, "m0");
  std::vector<double> v = xaiens::testing::flat(set.data[0]);
  std::shuffle(v.begin(), v.end(), rng);
  std::copy(v.begin(), v.end(), set.data[0].data());
  const auto after = compute_stats(set, "m0");
  CHECK(after.mean == before.mean);
  CHECK(after.std == before.std);
  CHECK(after.median == before.median);
  CHECK(after.iqr == before.iqr);
}

TEST_CASE("normalize_standard") {
  const auto out = normalize_standard(single_method({1, 2, 3, 4}, Shape{1, 2, 2}));
  const double expected[] = {-1.3416, -0.4472, 0.4472, 1.3416};
  for (int k = 0; k < 4; ++k) CHECK(out.data[0].data()[k] == doctest::Approx(expected[k]).epsilon(1e-4));

  SUBCASE("identity on standardized data") {
    const std::vector<double> v{-1.0, 1.0, -1.0, 1.0};
    const auto same = normalize_standard(single_method(v, Shape{1, 2, 2}));
    for (int k = 0; k < 4; ++k) CHECK(same.data[0].data()[k] == doctest::Approx(v[k]).epsilon(1e-9));
  }
  SUBCASE("constant is degenerate") {
    CHECK(code_of([] { normalize_standard(single_method({2, 2, 2, 2}, Shape{1, 2, 2})); }) == Errc::DegenerateSpread);
  }
}

TEST_CASE("normalize_robust") {
  const auto out = normalize_robust(single_method({1, 2, 3, 4, 100}, Shape{1, 1, 5}));
  const double expected[] = {-1, -0.5, 0, 0.5, 48.5};
  for (int k = 0; k < 5; ++k) CHECK(out.data[0].data()[k] == doctest::Approx(expected[k]).epsilon(1e-12));
  CHECK(code_of([] { normalize_robust(single_method({1, 1, 1}, Shape{1, 1, 3})); }) == Errc::DegenerateSpread);

  SUBCASE("degenerate message names the method") {
    try {
      normalize_robust(single_method({1, 1, 1}, Shape{1, 1, 3}));
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("'m'") != std::string::npos);
    }
  }
}

TEST_CASE("normalize_second_moment") {
  SUBCASE("single channel") {
    const auto out = normalize_second_moment(single_method({3, 4}, Shape{1, 1, 2}));
    CHECK(out.data[0](0, 0) == doctest::Approx(6.0));
    CHECK(out.data[0](0, 1) == doctest::Approx(8.0));
  }
  SUBCASE("channel average") {
    // Channel 0 {-1, 1}: std 1. Channel 1 {-3, 3}: std 3. Average 2.
    const auto out = normalize_second_moment(single_method({-1, 1, -3, 3}, Shape{2, 1, 2}));
    const double expected[] = {-0.5, 0.5, -1.5, 1.5};
    for (int k = 0; k < 4; ++k) CHECK(out.data[0].data()[k] == doctest::Approx(expected[k]));
  }
  SUBCASE("signs preserved") {
    std::mt19937_64 rng(9);
    const auto set = xaiens::testing::random_set(rng, 4, Shape{3, 4, 4}, 2);
    const auto out = normalize_second_moment(set);
    for (std::size_t e = 0; e < 2; ++e)
      for (Index k = 0; k < set.data[e].size(); ++k)
        CHECK((set.data[e].data()[k] > 0) == (out.data[e].data()[k] > 0));
  }
}

TEST_CASE("normalize none is the identity") {
  std::mt19937_64 rng(12);
  const auto set = xaiens::testing::random_set(rng, 3, Shape{1, 2, 2}, 2);
  const auto out = normalize(set, NormalizationKind::None);
  for (std::size_t e = 0; e < 2; ++e) CHECK(xaiens::testing::bit_equal(out.data[e], set.data[e]));
}

TEST_CASE("normalization records carry the statistics used") {
  std::mt19937_64 rng(13);
  const auto set = xaiens::testing::random_set(rng, 5, Shape{2, 3, 3}, 3);
  const auto res = normalize_with_records(set, NormalizationKind::Robust);
  REQUIRE(res.records.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    const auto v = xaiens::testing::flat(set.data[e]);
    CHECK(res.records[e].method == set.methods[e]);
    CHECK(res.records[e].center == doctest::Approx(xaiens::testing::ref_quantile(v, 0.5)).epsilon(1e-12));
    CHECK(res.records[e].scale ==
          doctest::Approx(xaiens::testing::ref_quantile(v, 0.75) - xaiens::testing::ref_quantile(v, 0.25)).epsilon(1e-12));
  }
}

TEST_CASE("float32 precision rounds through single precision") {
  std::mt19937_64 rng(14);
  const auto set = xaiens::testing::random_set(rng, 2, Shape{1, 3, 3}, 1);
  const auto out = normalize_standard(set, NormalizeOptions{Precision::Float32, 1});
  for (Index k = 0; k < out.data[0].size(); ++k) {
    const double v = out.data[0].data()[k];
    CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }
}

TEST_CASE("normalization does not depend on the thread count") {
  std::mt19937_64 rng(15);
  const auto set = xaiens::testing::random_set(rng, 7, Shape{3, 5, 5}, 5);
  for (auto kind : {NormalizationKind::Standard, NormalizationKind::Robust, NormalizationKind::SecondMoment}) {
    const auto one = normalize(set, kind, NormalizeOptions{Precision::Float64, 1});
    const auto many = normalize(set, kind, NormalizeOptions{Precision::Float64, 4});
    for (std::size_t e = 0; e < set.num_methods(); ++e) CHECK(xaiens::testing::bit_equal(one.data[e], many.data[e]));
  }
}
