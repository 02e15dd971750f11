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

#include "support.hpp"
#include "xaiens/ensemble_autoweighted.hpp"
#include "xaiens/ensemble_basic.hpp"
#include "xaiens/normalization.hpp"

using namespace xaiens;

namespace {

AttributionTensor vec(std::initializer_list<double> v) {
  Eigen::ArrayXd a(static_cast<Index>(v.size()));
  Index k = 0;
  for (double x : v) a(k++) = x;
  return AttributionTensor(Shape{1, 1, a.size()}, a);
}

void check_values(const AttributionTensor& t, std::initializer_list<double> expected) {
  REQUIRE(t.values.size() == static_cast<Index>(expected.size()));
  Index k = 0;
  for (double x : expected) CHECK(t.values(k++) == doctest::Approx(x));
}

// Flatten, standardize each method with explicit loops, then average.
RowMatrixXd brute_force_standard_avg(const ExplanationSet& set) {
  RowMatrixXd out = RowMatrixXd::Zero(set.num_instances(), set.shape.size());
  for (const auto& m : set.data) {
    const auto v = xaiens::testing::flat(m);
    const double mu = xaiens::testing::ref_mean(v);
    const double sd = xaiens::testing::ref_pop_std(v);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) out(i, j) += (m(i, j) - mu) / sd;
  }
  return out / static_cast<double>(set.num_methods());
}

PerturbationEvidence uniform_evidence(const ExplanationSet& set) {
  PerturbationEvidence ev;
  ev.input_distances = RowMatrixXd::Constant(1, set.num_instances(), 1.0);
  for (const auto& m : set.methods) {
    MethodEvidence me;
    me.perturbed = {set.method(m)};
    me.alt_models = {set.method(m), set.method(m)};
    ev.methods[m] = me;
  }
  return ev;
}

}  // namespace

TEST_CASE("aggregate examples") {
  const std::vector<AttributionTensor> pair{vec({1, -1}), vec({3, 1})};
  check_values(aggregate(pair, AggregationKind::Avg), {2, 0});
  check_values(aggregate(pair, AggregationKind::Max), {3, 1});
  check_values(aggregate(pair, AggregationKind::Min), {1, -1});
  const std::vector<AttributionTensor> abs_pair{vec({-3, 1}), vec({2, -2})};
  check_values(aggregate(abs_pair, AggregationKind::MaxAbs), {-3, -2});
}

TEST_CASE("aggregate contract") {
  CHECK_THROWS_AS(aggregate(std::span<const AttributionTensor>{}, AggregationKind::Avg), Error);
  const std::vector<AttributionTensor> mixed{vec({1, 2}), vec({1, 2, 3})};
  try {
    aggregate(mixed, AggregationKind::Max);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ShapeMismatch);
  }
}

TEST_CASE("max-abs keeps the earliest candidate on a magnitude tie") {
  std::vector<double> v{2.0, -2.0};
  CHECK(reduce_values(v, AggregationKind::MaxAbs) == 2.0);
  v = {-2.0, 2.0};
  CHECK(reduce_values(v, AggregationKind::MaxAbs) == -2.0);
}

TEST_CASE("avg of identical values is exact") {
  std::vector<double> v(7, 0.1);
  CHECK(reduce_values(v, AggregationKind::Avg) == 0.1);
}

TEST_CASE("single method ensemble equals its normalized explanation") {
  std::mt19937_64 rng(21);
  const auto set = xaiens::testing::random_set(rng, 4, Shape{2, 3, 3}, 1);
  for (auto norm : {NormalizationKind::None, NormalizationKind::Standard, NormalizationKind::Robust,
                    NormalizationKind::SecondMoment}) {
    const auto normalized = normalize(set, norm);
    for (auto kind : {AggregationKind::Max, AggregationKind::Min, AggregationKind::Avg, AggregationKind::MaxAbs}) {
      const auto r = norm_ensemble_xai(set, norm, kind);
      CHECK(xaiens::testing::bit_equal(r.tensors, normalized.data[0]));
      CHECK(r.strategy == Strategy::NormEnsemble);
      CHECK(r.normalization == norm);
      CHECK(r.aggregator == kind);
    }
  }
}

TEST_CASE("two identical methods average to the common explanation") {
  std::mt19937_64 rng(22);
  auto set = xaiens::testing::random_set(rng, 3, Shape{1, 4, 4}, 1);
  set.methods.push_back("copy");
  set.data.push_back(set.data[0]);
  const auto r = norm_ensemble_xai(set, NormalizationKind::None, AggregationKind::Avg);
  CHECK(xaiens::testing::bit_equal(r.tensors, set.data[0]));
}

TEST_CASE("standard + avg matches a brute-force reimplementation") {
  std::mt19937_64 rng(23);
  const auto set = xaiens::testing::random_set(rng, 5, Shape{2, 3, 4}, 3);
  const auto r = norm_ensemble_xai(set, NormalizationKind::Standard, AggregationKind::Avg);
  const RowMatrixXd ref = brute_force_standard_avg(set);
  CHECK((r.tensors - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sign cancellation is reported for avg") {
  ExplanationSet set;
  set.shape = Shape{1, 2, 2};
  set.methods = {"a", "b"};
  set.instance_ids = {"x", "y"};
  RowMatrixXd a(2, 4);
  a << 1, -2, 3, -4, 5, -6, 7, -8;
  set.data = {a, -a};
  const auto r = norm_ensemble_xai(set, NormalizationKind::None, AggregationKind::Avg);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("cancellation") != std::string::npos);
  CHECK(norm_ensemble_xai(set, NormalizationKind::None, AggregationKind::Max).warnings.empty());
}

TEST_CASE("stability score") {
  ExplanationSet set = xaiens::testing::single_method({0, 0, 0, 0}, Shape{1, 1, 4});
  PerturbationEvidence ev;
  ev.input_distances.resize(2, 1);
  ev.input_distances << 1.0, 1.0;
  MethodEvidence me;
  me.baseline = set.data[0];

  SUBCASE("unchanged explanations") {
    me.perturbed = {set.data[0], set.data[0]};
    ev.methods["m"] = me;
    CHECK(stability_score(ev, "m") == 1.0);
  }
  SUBCASE("explanation moves as much as the input") {
    RowMatrixXd shifted = set.data[0];
    shifted(0, 0) = 1.0;
    me.perturbed = {shifted, shifted};
    ev.methods["m"] = me;
    CHECK(stability_score(ev, "m") == doctest::Approx(0.5));
  }
  SUBCASE("ratios 1 and 3") {
    RowMatrixXd one = set.data[0];
    one(0, 0) = 1.0;
    RowMatrixXd three = set.data[0];
    three(0, 2) = 3.0;
    me.perturbed = {one, three};
    ev.methods["m"] = me;
    CHECK(stability_score(ev, "m") == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("missing evidence") {
    CHECK_THROWS_AS(stability_score(ev, "m"), Error);
  }
}

TEST_CASE("consistency score") {
  const Index n = 9;
  RowMatrixXd base = RowMatrixXd::Random(2, n);
  PerturbationEvidence ev;
  MethodEvidence me;

  SUBCASE("identical models") {
    me.alt_models = {base, base};
    ev.methods["m"] = me;
    CHECK(consistency_score(ev, "m") == 1.0);
  }
  SUBCASE("constant difference") {
    const double c = 0.3;
    me.alt_models = {base, (base.array() + c).matrix()};
    ev.methods["m"] = me;
    CHECK(consistency_score(ev, "m") == doctest::Approx(1.0 / (1.0 + c * std::sqrt(double(n)) / double(n))));
  }
  SUBCASE("the worst pair decides") {
    RowMatrixXd near = base;
    near(0, 0) += 0.1;
    RowMatrixXd far = base;
    far(1, 3) += 2.0;
    me.alt_models = {base, near, far};
    ev.methods["m"] = me;
    double worst = 0.0;
    for (const auto* a : {&base, &near, &far})
      for (const auto* b : {&base, &near, &far})
        for (Index i = 0; i < 2; ++i) worst = std::max(worst, (a->row(i) - b->row(i)).norm() / double(n));
    CHECK(consistency_score(ev, "m") == doctest::Approx(1.0 / (1.0 + worst)));
  }
}

TEST_CASE("autoweighted with explicit scores") {
  ExplanationSet set;
  set.shape = Shape{1, 1, 4};
  set.methods = {"a", "b"};
  set.instance_ids = {"x"};
  RowMatrixXd a(1, 4), b(1, 4);
  a << 1, 2, 3, 4;
  b << 4, 0, 0, 8;
  set.data = {a, b};

  EnsembleScores scores{{"a", 0, 0, 0.2, 0.25}, {"b", 0, 0, 0.6, 0.75}};
  const auto r = autoweighted_ensemble(set, scores);
  const auto normalized = normalize_standard(set);
  for (Index j = 0; j < 4; ++j) {
    const double expected = 0.25 * normalized.data[0](0, j) + 0.75 * normalized.data[1](0, j);
    CHECK(r.tensors(0, j) == doctest::Approx(expected).epsilon(1e-12));
  }
  REQUIRE(r.weights);
  CHECK((*r.weights)[1] == 0.75);

  SUBCASE("degenerate weighting selects one method") {
    const auto only_b = autoweighted_ensemble(set, EnsembleScores{{"a", 0, 0, 0, 0.0}, {"b", 0, 0, 1, 1.0}});
    CHECK((only_b.tensors - normalized.data[1]).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("weights must sum to one") {
    CHECK_THROWS_AS(autoweighted_ensemble(set, EnsembleScores{{"a", 0, 0, 0, 0.5}, {"b", 0, 0, 0, 0.6}}), Error);
  }
}

TEST_CASE("ensemble_scores normalizes ES into weights") {
  std::mt19937_64 rng(24);
  const auto set = xaiens::testing::random_set(rng, 3, Shape{1, 2, 2}, 2);
  PerturbationEvidence ev = uniform_evidence(set);
  RowMatrixXd moved = set.data[1];
  moved.array() += 1.0;
  ev.methods["m1"].perturbed = {moved};
  const auto scores = ensemble_scores(with_baselines(ev, set), set.methods);
  REQUIRE(scores.size() == 2);
  CHECK(scores[0].es == 1.0);
  CHECK(scores[1].stability < 1.0);
  CHECK(scores[0].normalized_weight + scores[1].normalized_weight == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(scores[0].normalized_weight > scores[1].normalized_weight);
}

TEST_CASE("uniform evidence reproduces norm-avg") {
  std::mt19937_64 rng(25);
  const auto set = xaiens::testing::random_set(rng, 4, Shape{3, 4, 4}, 4);
  const auto aw = autoweighted_ensemble(set, uniform_evidence(set));
  const auto avg = norm_ensemble_xai(set, NormalizationKind::Standard, AggregationKind::Avg);
  CHECK((aw.tensors - avg.tensors).cwiseAbs().maxCoeff() <= 1e-9);
  for (double w : *aw.weights) CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("autoweighted needs evidence for every method") {
  std::mt19937_64 rng(26);
  const auto set = xaiens::testing::random_set(rng, 2, Shape{1, 2, 2}, 2);
  PerturbationEvidence ev = uniform_evidence(set);
  ev.methods.erase("m1");
  try {
    autoweighted_ensemble(set, ev);
    FAIL("expected MissingEvidence");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingEvidence);
  }
}
