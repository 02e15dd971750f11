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
#include "xaiens/ensemble_supervised.hpp"
#include "xaiens/krr.hpp"
#include "xaiens/metrics.hpp"
#include "xaiens/normalization.hpp"

using namespace xaiens;
namespace t = xaiens::testing;

TEST_CASE("gram matrices") {
  SUBCASE("linear on orthogonal rows") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Identity(2, 3);
    const Eigen::MatrixXd K = krr::gram_matrix(X, krr::Kernel::linear());
    CHECK(K.isApprox(Eigen::MatrixXd::Identity(2, 2)));
  }
  SUBCASE("rbf scalar check") {
    Eigen::MatrixXd X(2, 1);
    X << 0, 2;
    const Eigen::MatrixXd K = krr::gram_matrix(X, krr::Kernel::rbf(0.5));
    CHECK(K(0, 0) == 1.0);
    CHECK(K(1, 1) == 1.0);
    CHECK(K(0, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    CHECK(K(0, 1) == doctest::Approx(0.13534).epsilon(1e-4));
    CHECK(K(1, 0) == K(0, 1));
  }
  SUBCASE("rbf matches explicit distances") {
    const Eigen::MatrixXd A = Eigen::MatrixXd::Random(5, 4);
    const Eigen::MatrixXd B = Eigen::MatrixXd::Random(3, 4);
    const Eigen::MatrixXd K = krr::cross_gram(A, B, krr::Kernel::rbf(0.7));
    CHECK((K - t::ref_rbf_gram(A, B, 0.7)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("default gamma is one over the dimension") {
    CHECK(krr::Kernel::rbf().resolved(8).gamma == 0.125);
  }
  SUBCASE("polynomial") {
    Eigen::MatrixXd X(2, 2);
    X << 1, 2, 3, 4;
    const Eigen::MatrixXd K = krr::gram_matrix(X, krr::Kernel::polynomial(2, 1.0));
    CHECK(K(0, 1) == doctest::Approx(144.0));  // (1*3 + 2*4 + 1)^2
  }
}

TEST_CASE("krr scalar closed form") {
  Eigen::MatrixXd X(1, 1), Y(1, 1);
  X << 1;
  Y << 2;
  const auto model = krr::krr_fit(X, Y, krr::Kernel::linear(), 1.0, Eigen::VectorXd::Ones(1));
  CHECK(model.dual_coefficients(0, 0) == doctest::Approx(1.0));
  CHECK(krr::krr_predict(model, X)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("krr matches a dense solve") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 5);
  const Eigen::MatrixXd Y = Eigen::MatrixXd::Random(5, 3);
  Eigen::VectorXd w(5);
  for (Index i = 0; i < 5; ++i) w(i) = u(rng);
  const auto kernel = krr::Kernel::rbf(0.3);
  const auto model = krr::krr_fit(X, Y, kernel, 0.5, w);
  const Eigen::MatrixXd ref = t::dense_dual_solve(t::ref_rbf_gram(X, X, 0.3), 0.5, w, Y);
  CHECK((model.dual_coefficients - ref).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(model.jitter == 0.0);
}

TEST_CASE("hand-solved three point system") {
  // Linear kernel on x = {1, 2, 3}, y = {1, 2, 2}, lambda = 1, w = 1:
  // (x x^T + I) a = y. With s = x.y = 11 and |x|^2 = 14, a = y - x s / 15.
  Eigen::MatrixXd X(3, 1), Y(3, 1);
  X << 1, 2, 3;
  Y << 1, 2, 2;
  const auto model = krr::krr_fit(X, Y, krr::Kernel::linear(), 1.0, Eigen::VectorXd::Ones(3));
  for (Index i = 0; i < 3; ++i) {
    CHECK(model.dual_coefficients(i, 0) == doctest::Approx(Y(i, 0) - X(i, 0) * 11.0 / 15.0).epsilon(1e-12));
  }
}

TEST_CASE("linear kernel dual equals primal weighted ridge") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 4);
    const Eigen::MatrixXd Y = Eigen::MatrixXd::Random(6, 2);
    Eigen::VectorXd w(6);
    for (Index i = 0; i < 6; ++i) w(i) = u(rng);
    const double lambda = u(rng);
    const auto model = krr::krr_fit(X, Y, krr::Kernel::linear(), lambda, w);
    const Eigen::MatrixXd B = t::primal_weighted_ridge(X, Y, w, lambda);
    CHECK((krr::krr_predict(model, X) - X * B).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("tiny ridge interpolates") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 3);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Random(6, 2);
  const auto model = krr::krr_fit(X, Y, krr::Kernel::rbf(1.0), 1e-12, Eigen::VectorXd::Ones(6));
  CHECK((krr::krr_predict(model, X) - Y).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("rbf predictions decay far from the data") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 2);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Ones(4, 2);
  const auto model = krr::krr_fit(X, Y, krr::Kernel::rbf(1.0), 0.1, Eigen::VectorXd::Ones(4));
  Eigen::MatrixXd far(1, 2);
  far << 100, 100;
  CHECK(krr::krr_predict(model, far).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("heavier samples are fitted more closely") {
  Eigen::MatrixXd X(3, 1), Y(3, 1);
  X << 0, 0.1, 1;
  Y << 0, 1, 0;
  auto residual = [&](double weight) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(3);
    w(1) = weight;
    const auto m = krr::krr_fit(X, Y, krr::Kernel::rbf(1.0), 1.0, w);
    return std::abs(krr::krr_predict(m, X)(1, 0) - 1.0);
  };
  double prev = residual(0.5);
  for (double weight : {1.0, 2.0, 5.0, 20.0}) {
    const double r = residual(weight);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("krr contract") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 2);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Random(4, 1);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(4);
  auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::EmptyData;
  };
  CHECK(code([&] { krr::krr_fit(X, Eigen::MatrixXd(Y.topRows(3)), krr::Kernel::linear(), 1.0, w); }) ==
        Errc::DimensionMismatch);
  CHECK(code([&] { krr::krr_fit(X, Y, krr::Kernel::linear(), 0.0, w); }) == Errc::PreconditionViolation);
  krr::FitOptions tight;
  tight.byte_budget = krr::fit_bytes<double>(4) - 1;
  CHECK(code([&] { krr::krr_fit(X, Y, krr::Kernel::linear(), 1.0, w, tight); }) == Errc::BudgetExceeded);
  Eigen::MatrixXd bad = X;
  bad(0, 0) = std::nan("");
  CHECK(code([&] { krr::krr_fit(bad, Y, krr::Kernel::linear(), 1.0, w); }) == Errc::NonFiniteInput);
}

TEST_CASE("float32 fits agree with float64") {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 3);
  const Eigen::MatrixXd Y = Eigen::MatrixXd::Random(6, 2);
  const auto m64 = krr::krr_fit(X, Y, krr::Kernel::rbf(0.5), 1.0, Eigen::VectorXd::Ones(6));
  const auto m32 = krr::krr_fit(Eigen::MatrixXf(X.cast<float>()), Eigen::MatrixXf(Y.cast<float>()),
                                krr::Kernel::rbf(0.5), 1.0, Eigen::VectorXf::Ones(6));
  CHECK((m32.dual_coefficients.cast<double>() - m64.dual_coefficients).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("mask weights") {
  MaskSet m{1, 4, RowMatrixXd::Zero(2, 4), {"a", "b"}};
  m.masks.row(0) << 1, 1, 0, 0;
  m.masks.row(1) << 1, 1, 1, 1;
  const auto w = mask_weights(m);
  CHECK(w(0) == doctest::Approx(4.0 / 3.0));
  CHECK(w(1) == doctest::Approx(2.0 / 3.0));

  SUBCASE("equal areas") {
    m.masks.row(0) << 0, 1, 1, 1;
    m.masks.row(1) << 1, 1, 1, 0;
    const auto eq = mask_weights(m);
    CHECK(eq(0) == 1.0);
    CHECK(eq(1) == 1.0);
  }
  SUBCASE("empty mask warns") {
    m.masks.row(0).setZero();
    std::vector<std::string> warnings;
    const auto ew = mask_weights(m, &warnings);
    CHECK(warnings.size() == 1);
    CHECK(ew(0) == doctest::Approx(2 * (1.0 / 1.0) / (1.0 + 0.25)));
  }
}

TEST_CASE("design matrix") {
  ExplanationSet set;
  set.shape = Shape{1, 2, 2};
  set.methods = {"a", "b"};
  set.instance_ids = t::make_ids(3);
  RowMatrixXd a(3, 4), b(3, 4);
  a << 1, -1, 2, -2, 0, 1, 0, -1, 3, 0, 0, 1;
  b << 5, 5, -5, 5, 1, 2, 3, 4, 0, 0, 1, 0;
  set.data = {a, b};
  MaskSet masks{2, 2, RowMatrixXd::Zero(3, 4), set.instance_ids};
  masks.masks << 1, 0, 0, 0, 0, 1, 1, 0, 1, 1, 1, 1;

  const auto d = build_design(set, &masks);
  CHECK(d.X.rows() == 3);
  CHECK(d.X.cols() == 8);
  CHECK(d.Y.rows() == 3);
  CHECK(d.Y.cols() == 4);

  // Second-moment scaling then concatenation, by hand.
  const double sa = t::ref_pop_std(t::flat(a));
  const double sb = t::ref_pop_std(t::flat(b));
  for (Index j = 0; j < 4; ++j) {
    CHECK(d.X(2, j) == doctest::Approx(a(2, j) / sa));
    CHECK(d.X(2, 4 + j) == doctest::Approx(b(2, j) / sb));
  }

  SUBCASE("method order permutes column blocks") {
    ExplanationSet swapped = set;
    std::swap(swapped.methods[0], swapped.methods[1]);
    std::swap(swapped.data[0], swapped.data[1]);
    const auto ds = build_design(swapped, &masks);
    CHECK(ds.X.leftCols(4) == d.X.rightCols(4));
    CHECK(ds.X.rightCols(4) == d.X.leftCols(4));
  }
  SUBCASE("masks are required") {
    try {
      build_design(set, nullptr);
      FAIL("expected MissingMasks");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MissingMasks);
    }
  }
}

TEST_CASE("fold bookkeeping") {
  SUBCASE("leave one out") {
    const auto folds = make_folds(4, KFold{4});
    REQUIRE(folds.size() == 4);
    for (Index f = 0; f < 4; ++f) {
      CHECK(folds[f].predict == std::vector<Index>{f});
      CHECK(folds[f].train.size() == 3);
      CHECK(std::find(folds[f].train.begin(), folds[f].train.end(), f) == folds[f].train.end());
    }
  }
  SUBCASE("uneven folds") {
    const auto folds = make_folds(7, KFold{3});
    CHECK(folds[0].predict.size() == 3);
    CHECK(folds[1].predict.size() == 2);
    CHECK(folds[2].predict.size() == 2);
  }
  SUBCASE("too few instances") {
    try {
      make_folds(3, KFold{5});
      FAIL("expected TooFewInstances");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::TooFewInstances);
    }
  }
  SUBCASE("stratified holdout") {
    const auto folds = make_folds(10, Holdout{0.2, {0, 0, 0, 0, 0, 1, 1, 1, 1, 1}});
    REQUIRE(folds.size() == 1);
    CHECK(folds[0].train == std::vector<Index>{0, 1, 2, 3, 5, 6, 7, 8});
    CHECK(folds[0].predict.size() == 10);
  }
}

namespace {

// Blob masks at a few fixed positions; the single "explanation" is the mask.
struct Separable {
  ExplanationSet set;
  MaskSet masks;
};

Separable separable(Index n, Index side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_int_distribution<Index> jitter(0, 1);
  Separable s;
  s.set.shape = Shape{1, side, side};
  s.set.methods = {"mask"};
  s.set.instance_ids = t::make_ids(n);
  s.masks = MaskSet{side, side, RowMatrixXd::Zero(n, side * side), s.set.instance_ids};
  const Index half = side / 2;
  for (Index i = 0; i < n; ++i) {
    const int q = pick(rng);
    const Index h0 = (q / 2) * half;
    const Index w0 = (q % 2) * half;
    const Index extra = jitter(rng);
    for (Index h = h0; h < h0 + half - 1 + extra; ++h)
      for (Index w = w0; w < w0 + half - 1; ++w) s.masks.masks(i, h * side + w) = 1.0;
  }
  s.set.data = {s.masks.masks};
  return s;
}

double pointing_rate(const EnsembleResult& r, const MaskSet& masks) {
  int hits = 0;
  for (Index i = 0; i < r.num_instances(); ++i) hits += pointing_game(r.tensor(i), masks.masks.row(i));
  return static_cast<double>(hits) / static_cast<double>(r.num_instances());
}

}  // namespace

TEST_CASE("separable synthetic data is recovered out of fold") {
  const auto s = separable(40, 8, 33);
  SupervisedOptions opts;
  opts.ridge = 1e-3;
  const auto out = supervised_xai(s.set, &s.masks, opts);
  CHECK(out.ensemble.shape == Shape{1, 8, 8});
  CHECK(pointing_rate(out.ensemble, s.masks) == 1.0);
  for (bool b : out.in_sample) CHECK_FALSE(b);
}

TEST_CASE("poisoning a mask never reaches its own prediction") {
  const auto s = separable(20, 6, 34);
  SupervisedOptions opts;
  opts.split = KFold{4};
  opts.ridge = 1e-3;
  const auto clean = supervised_xai(s.set, &s.masks, opts);

  auto poisoned = s.masks;
  const Index victim = 7;
  poisoned.masks.row(victim) = (1.0 - poisoned.masks.row(victim).array()).matrix();
  const auto dirty = supervised_xai(s.set, &poisoned, opts);

  const std::size_t fold = clean.fold_of[victim];
  for (Index i = 0; i < 20; ++i) {
    const bool same = t::bit_equal(clean.ensemble.tensors.row(i), dirty.ensemble.tensors.row(i));
    if (clean.fold_of[static_cast<std::size_t>(i)] == fold) {
      CHECK(same);
    } else {
      CHECK_FALSE(same);
    }
  }
}

TEST_CASE("supervised output is clamped and audited") {
  const auto s = separable(12, 6, 35);
  SupervisedOptions opts;
  opts.split = KFold{3};
  opts.ridge = 1e-6;
  opts.kernel = krr::Kernel::linear();
  opts.center_bias_audit = true;
  const auto out = supervised_xai(s.set, &s.masks, opts);
  CHECK(out.ensemble.tensors.minCoeff() >= 0.0);
  CHECK(out.ensemble.tensors.maxCoeff() <= 1.0);
  CHECK_FALSE(out.radial_profile.empty());
  if (out.out_of_range_fraction > 0.0) CHECK_FALSE(out.ensemble.warnings.empty());
}

TEST_CASE("supervised results do not depend on thread count") {
  const auto s = separable(25, 6, 36);
  SupervisedOptions opts;
  opts.threads = 1;
  const auto one = supervised_xai(s.set, &s.masks, opts);
  opts.threads = 5;
  const auto many = supervised_xai(s.set, &s.masks, opts);
  CHECK(t::bit_equal(one.ensemble.tensors, many.ensemble.tensors));
}

TEST_CASE("radial profile") {
  RowMatrixXd maps = RowMatrixXd::Zero(1, 9);
  maps(0, 4) = 1.0;  // centre of a 3x3 map
  const auto profile = radial_profile(maps, 3, 3);
  REQUIRE(profile.size() == 2);
  CHECK(profile[0] == 1.0);
  CHECK(profile[1] == 0.0);
}
