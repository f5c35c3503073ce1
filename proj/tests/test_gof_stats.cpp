#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "invbag/gof_stats.hpp"
#include "invbag/nn_index.hpp"
#include "invbag/reference.hpp"
#include "oracles.hpp"

using namespace invbag;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, int n, bool with_ties) {
  std::vector<double> v(static_cast<std::size_t>(n));
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> small(0, 4);
  for (auto& x : v) x = with_ties ? small(rng) : normal(rng);
  return v;
}

std::vector<double> column(const FeatureMatrix& m, Index j) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, j);
  return v;
}

}  // namespace

// -- KS -----------------------------------------------------------------------

TEST_CASE("ks examples") {
  const std::vector<double> a{1, 2, 3};
  CHECK(ks_two_sample(a, a) == 0.0);
  CHECK(ks_two_sample(std::vector<double>{0, 1}, std::vector<double>{10, 11}) == 1.0);
  CHECK(ks_two_sample(a, std::vector<double>{2, 3, 4}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(ks_two_sample(std::vector<double>{}, a), InvalidInput);
}

TEST_CASE("ks matches frozen reference values") {
  struct Case {
    std::vector<double> a, b;
    double expected;
  };
  const std::vector<Case> cases{
      {{1, 2, 3}, {2, 3, 4}, 1.0 / 3.0},
      {{0, 1}, {100, 101}, 1.0},
      {{0, 1}, {0.5, 1.5}, 0.5},
      {{1, 2, 2, 3, 5}, {2, 2, 4, 6, 6, 7}, 0.5},
      {{0.3, -1.2, 2.5, 0.0, 0.7, 1.1}, {0.0, 0.0, 3.1, -0.4}, 0.4166666666666667},
  };
  for (const auto& c : cases) CHECK(ks_two_sample(c.a, c.b) == doctest::Approx(c.expected).epsilon(1e-14));
}

TEST_CASE("ks properties") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 40);
  for (int trial = 0; trial < 300; ++trial) {
    const bool ties = trial % 2 == 0;
    const auto a = random_vector(rng, size(rng), ties);
    const auto b = random_vector(rng, size(rng), ties);
    const double d = ks_two_sample(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == ks_two_sample(b, a));
    CHECK(ks_two_sample(a, a) == 0.0);
    CHECK(oracle::relative_error(d, oracle::ks(a, b)) <= 1e-10);

    auto transform = [](std::vector<double> v) {
      for (auto& x : v) x = std::exp(0.5 * x) + x * x * x;
      return v;
    };
    CHECK(ks_two_sample(transform(a), transform(b)) == d);
  }
}

// -- AD -----------------------------------------------------------------------

TEST_CASE("ad matches frozen midrank reference values") {
  struct Case {
    std::vector<double> a, b;
    double expected;
  };
  const std::vector<Case> cases{
      {{1, 2, 3}, {2, 3, 4}, 1.0},
      {{0, 1}, {100, 101}, 1.7272727272727275},
      {{0, 1}, {0.5, 1.5}, 0.6363636363636362},
      {{1, 2, 2, 3, 5}, {2, 2, 4, 6, 6, 7}, 1.5968226875493035},
      {{0.3, -1.2, 2.5, 0.0, 0.7, 1.1}, {0.0, 0.0, 3.1, -0.4}, 0.6819303572786449},
  };
  for (const auto& c : cases) {
    CHECK(ad_two_sample(c.a, c.b) == doctest::Approx(c.expected).epsilon(1e-12));
    CHECK(ad_two_sample(c.b, c.a) == doctest::Approx(c.expected).epsilon(1e-12));
  }
}

TEST_CASE("ad examples") {
  const std::vector<double> a{0.3, 1.7, -0.2, 2.2, 0.9};
  const double same = ad_two_sample(a, a);
  CHECK(same == doctest::Approx(0.0));
  auto perturbed = a;
  perturbed[2] += 0.8;
  CHECK(same < ad_two_sample(a, perturbed));

  CHECK(ad_two_sample(std::vector<double>{0, 1}, std::vector<double>{100, 101}) >
        ad_two_sample(std::vector<double>{0, 1}, std::vector<double>{0.5, 1.5}));

  const double single = ad_two_sample(std::vector<double>{0}, std::vector<double>{0});
  CHECK(std::isfinite(single));
  CHECK(single == 0.0);
  CHECK_THROWS_AS(ad_two_sample(std::vector<double>{}, a), InvalidInput);
}

TEST_CASE("ad is symmetric, nonnegative and rank based") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(1, 30);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_vector(rng, size(rng), trial % 2 == 0);
    const auto b = random_vector(rng, size(rng), trial % 2 == 0);
    const double v = ad_two_sample(a, b);
    CHECK(std::isfinite(v));
    CHECK(v >= -1e-12);
    CHECK(v == doctest::Approx(ad_two_sample(b, a)).epsilon(1e-12));
    auto shift = [](std::vector<double> x) {
      for (auto& e : x) e = 3.0 * e + 1.0;
      return x;
    };
    CHECK(ad_two_sample(shift(a), shift(b)) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("combine_per_feature") {
  const std::vector<double> v{0.1, 0.4, 0.2};
  CHECK(combine_per_feature(v, Combine::max) == 0.4);
  CHECK(combine_per_feature(v, Combine::mean) == doctest::Approx(0.7 / 3.0).epsilon(1e-15));
  const std::vector<double> one{0.7};
  CHECK(combine_per_feature(one, Combine::max) == 0.7);
  CHECK(combine_per_feature(one, Combine::mean) == 0.7);
  CHECK_THROWS_AS(combine_per_feature(std::vector<double>{}, Combine::max), InvalidInput);
}

TEST_CASE("per_feature_statistic applies the test column by column") {
  std::mt19937_64 rng(2);
  const FeatureMatrix a = oracle::random_matrix(rng, 15, 3);
  const FeatureMatrix b = oracle::random_matrix(rng, 25, 3, 0.4);
  std::vector<double> ks, ad;
  for (Index j = 0; j < 3; ++j) {
    ks.push_back(oracle::ks(column(a, j), column(b, j)));
    ad.push_back(ad_two_sample(column(a, j), column(b, j)));
  }
  CHECK(per_feature_statistic(a, b, StatisticKind::ks, Combine::max) ==
        doctest::Approx(*std::max_element(ks.begin(), ks.end())).epsilon(1e-14));
  CHECK(per_feature_statistic(a, b, StatisticKind::ad, Combine::mean) ==
        doctest::Approx((ad[0] + ad[1] + ad[2]) / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(per_feature_statistic(a, b, StatisticKind::energy_log, Combine::max), InvalidInput);
}

// -- energy -------------------------------------------------------------------

TEST_CASE("energy examples") {
  const EnergyParams log0{EnergyWeight::log, 0.0, 1.0};
  FeatureMatrix a(1, 1), b(1, 1);
  a << 0;
  b << 1;
  CHECK(energy_statistic(a, b, log0) == 0.0);

  FeatureMatrix a2(2, 1);
  a2 << 0, 2;
  CHECK(energy_statistic(a2, b, log0) == doctest::Approx(-0.25 * std::log(2.0)).epsilon(1e-14));
  CHECK(energy_statistic(a2, b, log0) == doctest::Approx(-0.1733).epsilon(1e-3));

  CHECK_THROWS_AS(energy_statistic(a2, FeatureMatrix(1, 2), log0), InvalidInput);
  CHECK_THROWS_AS(energy_statistic(FeatureMatrix(0, 1), b, log0), InvalidInput);
}

TEST_CASE("energy matches the double-loop oracle and is symmetric") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<Index> rows(1, 50), cols(1, 5);
  const std::vector<std::pair<EnergyParams, oracle::Weight>> weights{
      {{EnergyWeight::log, 1e-9, 1.0}, oracle::Weight::log},
      {{EnergyWeight::inverse, 1e-3, 1.0}, oracle::Weight::inverse},
      {{EnergyWeight::gaussian, 1e-9, 0.7}, oracle::Weight::gaussian},
  };
  for (int trial = 0; trial < 150; ++trial) {
    const Index d = cols(rng);
    const FeatureMatrix a = oracle::random_matrix(rng, rows(rng), d);
    const FeatureMatrix b = oracle::random_matrix(rng, rows(rng), d, 0.3);
    const auto& [params, w] = weights[static_cast<std::size_t>(trial % 3)];
    const double got = energy_statistic(a, b, params);
    const double want = oracle::energy(oracle::to_points(a), oracle::to_points(b), w, params.epsilon,
                                       params.sigma);
    CHECK(oracle::relative_error(got, want) <= 1e-10);
    CHECK(energy_statistic(b, a, params) == doctest::Approx(got).epsilon(1e-12));
  }
}

TEST_CASE("energy with epsilon stays finite on coincident points") {
  FeatureMatrix a = FeatureMatrix::Zero(3, 2);
  FeatureMatrix b = FeatureMatrix::Zero(2, 2);
  for (auto w : {EnergyWeight::log, EnergyWeight::inverse}) {
    CHECK(std::isfinite(energy_statistic(a, b, EnergyParams{w, 1e-9, 1.0})));
    CHECK_THROWS_AS(energy_statistic(a, b, EnergyParams{w, 0.0, 1.0}), InvalidInput);
  }
}

TEST_CASE("energy separates same from shifted distributions") {
  std::mt19937_64 rng(23);
  const EnergyParams p{EnergyWeight::log, 1e-9, 1.0};
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const FeatureMatrix ref = oracle::random_matrix(rng, 200, 2);
    const FeatureMatrix same = oracle::random_matrix(rng, 200, 2);
    const FeatureMatrix shifted = oracle::random_matrix(rng, 200, 2, 1.0);
    if (energy_statistic(same, ref, p) < energy_statistic(shifted, ref, p)) ++wins;
  }
  CHECK(wins >= 99);
}

// -- nearest neighbours ---------------------------------------------------------

TEST_CASE("nn index examples") {
  std::mt19937_64 rng(31);
  const FeatureMatrix pts = oracle::random_matrix(rng, 50, 3);
  const NNIndex index(pts);
  const auto nb = index.nearest(pts.row(7).data());
  CHECK(nb.row == 7);
  CHECK(nb.distance == 0.0);

  const auto points = oracle::to_points(pts);
  for (int q = 0; q < 20; ++q) {
    const FeatureMatrix query = oracle::random_matrix(rng, 1, 3);
    const auto [row, dist] = oracle::nearest(points, oracle::to_points(query)[0]);
    const auto got = index.nearest(query.data());
    CHECK(got.row == static_cast<Index>(row));
    CHECK(got.distance == dist);
  }

  FeatureMatrix single(1, 2);
  single << 4, 5;
  const NNIndex one(single);
  const FeatureMatrix far = FeatureMatrix::Constant(1, 2, -9.0);
  CHECK(one.nearest(far.data()).row == 0);
  CHECK_THROWS_AS(NNIndex(FeatureMatrix(0, 2)), InvalidInput);
}

TEST_CASE("nn index matches linear scan with exclusion, ties and k neighbours") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    // Integer grid coordinates force many equidistant candidates.
    std::uniform_int_distribution<int> coord(0, 4);
    const Index n = 1 + trial * 5;
    FeatureMatrix pts(n, 2);
    for (Index i = 0; i < n; ++i) pts.row(i) << coord(rng), coord(rng);
    const NNIndex index(pts, 3);
    const auto points = oracle::to_points(pts);
    for (Index i = 0; i < n; ++i) {
      const auto want = oracle::nearest(points, points[static_cast<std::size_t>(i)],
                                        static_cast<std::size_t>(i));
      const auto got = index.nearest(pts.row(i).data(), i);
      if (n == 1) {
        CHECK(got.row == -1);
        continue;
      }
      CHECK(got.row == static_cast<Index>(want.first));
      CHECK(got.distance == want.second);

      // k nearest: sort every candidate by (distance, row).
      std::vector<std::pair<double, Index>> all;
      for (Index j = 0; j < n; ++j) {
        if (j != i) all.emplace_back(row_distance(pts, i, pts, j), j);
      }
      std::sort(all.begin(), all.end());
      const Index k = std::min<Index>(4, n - 1);
      const auto knn = index.k_nearest(pts.row(i).data(), k, i);
      REQUIRE(static_cast<Index>(knn.size()) == k);
      for (Index j = 0; j < k; ++j) {
        CHECK(knn[static_cast<std::size_t>(j)].row == all[static_cast<std::size_t>(j)].second);
        CHECK(knn[static_cast<std::size_t>(j)].distance == all[static_cast<std::size_t>(j)].first);
      }
    }
  }
}

TEST_CASE("nn ratio examples") {
  FeatureMatrix train(100, 1);
  for (Index i = 0; i < 100; ++i) train(i, 0) = static_cast<double>(i);
  const NNIndex index(train);
  FeatureMatrix subset(2, 1);
  subset << 50.5, 51.5;
  CHECK(nn_ratio_statistic(subset, index, 1e-9) == doctest::Approx(std::log(0.5)).epsilon(1e-6));

  FeatureMatrix inside(3, 1);
  inside << 3, 10, 42;
  const double t = nn_ratio_statistic(inside, index, 1e-9);
  CHECK(t < 0.0);
  CHECK(t == doctest::Approx((std::log(1e-9 / (7 + 1e-9)) * 2 + std::log(1e-9 / (32 + 1e-9))) / 3));

  CHECK_THROWS_AS(nn_ratio_statistic(FeatureMatrix::Zero(1, 1), index, 1e-9), InvalidInput);
}

TEST_CASE("nn ratio with the index equals the linear-scan oracle") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<Index> rows(2, 50), cols(1, 5), train_rows(1, 60);
  for (int trial = 0; trial < 200; ++trial) {
    const Index d = cols(rng);
    const FeatureMatrix train = oracle::random_matrix(rng, train_rows(rng), d);
    FeatureMatrix subset = oracle::random_matrix(rng, rows(rng), d, 0.5);
    if (trial % 4 == 0) subset.row(1) = subset.row(0);  // duplicated row
    const NNIndex index(train);
    for (double eps : {1e-9, 0.1}) {
      const double got = nn_ratio_statistic(subset, index, eps);
      const double want = oracle::nn_ratio(oracle::to_points(subset), oracle::to_points(train), eps);
      CHECK(oracle::relative_error(got, want) <= 1e-10);
    }
  }
}

TEST_CASE("nn ratio is large for far subsets") {
  std::mt19937_64 rng(43);
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const FeatureMatrix train = oracle::random_matrix(rng, 300, 3);
    const NNIndex index(train);
    const double same = nn_ratio_statistic(oracle::random_matrix(rng, 30, 3), index);
    const double far = nn_ratio_statistic(oracle::random_matrix(rng, 30, 3, 100.0), index);
    if (far > same) ++wins;
  }
  CHECK(wins == 100);
}

// -- training reference -------------------------------------------------------

TEST_CASE("training reference scores match the public statistic functions exactly") {
  std::mt19937_64 rng(47);
  const FeatureMatrix train = oracle::random_matrix(rng, 120, 3);
  const FeatureMatrix subset = oracle::random_matrix(rng, 15, 3, 0.2);
  for (auto kind : {StatisticKind::ks, StatisticKind::ad, StatisticKind::energy_log,
                    StatisticKind::energy_inverse, StatisticKind::energy_gaussian,
                    StatisticKind::nn_ratio}) {
    StatisticSpec spec;
    spec.kind = kind;
    spec.combine = Combine::mean;
    const TrainingReference ref(train, spec);
    double want = 0.0;
    if (is_one_dimensional(kind)) {
      want = per_feature_statistic(subset, train, kind, spec.combine);
      CHECK(ref.score(subset) == doctest::Approx(want).epsilon(1e-14));
    } else if (kind == StatisticKind::nn_ratio) {
      want = nn_ratio_statistic(subset, NNIndex(train), spec.nn_epsilon);
      CHECK(ref.score(subset) == want);
    } else {
      want = energy_statistic(subset, train, energy_params_for(spec));
      CHECK(ref.score(subset) == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("held-out training subsets are scored against the remaining rows") {
  std::mt19937_64 rng(53);
  const FeatureMatrix train = oracle::random_matrix(rng, 60, 2);
  const SubsetIndex rows{3, 3, 10, 17, 42, 10};
  const FeatureMatrix subset = gather(train, rows);

  SubsetIndex kept;
  for (Index i = 0; i < train.rows(); ++i) {
    if (std::find(rows.begin(), rows.end(), i) == rows.end()) kept.push_back(i);
  }
  const FeatureMatrix rest = gather(train, kept);

  for (auto kind : {StatisticKind::ks, StatisticKind::ad, StatisticKind::energy_log,
                    StatisticKind::energy_gaussian, StatisticKind::nn_ratio}) {
    StatisticSpec spec;
    spec.kind = kind;
    const TrainingReference ref(train, spec);
    const TrainingReference reduced(rest, spec);
    CHECK(ref.train_subset(subset, rows) == doctest::Approx(reduced.score(subset)).epsilon(1e-10));
  }
}

TEST_CASE("statistic names round-trip") {
  for (auto kind : {StatisticKind::ks, StatisticKind::ad, StatisticKind::energy_log,
                    StatisticKind::energy_inverse, StatisticKind::energy_gaussian,
                    StatisticKind::nn_ratio}) {
    CHECK(parse_statistic_kind(to_string(kind)) == kind);
  }
  CHECK(parse_combine("mean") == Combine::mean);
  CHECK_THROWS_AS(parse_statistic_kind("chi2"), InvalidInput);
  StatisticSpec bad;
  bad.nn_epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}
