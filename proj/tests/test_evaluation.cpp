#include <algorithm>
#include <random>

#include "doctest.h"
#include "invbag/evaluation.hpp"

using namespace invbag;

namespace {

std::vector<Label> labels_from(std::initializer_list<int> v) {
  std::vector<Label> out;
  for (int x : v) out.push_back(x ? Label::signal : Label::background);
  return out;
}

}  // namespace

TEST_CASE("four-event example") {
  Eigen::VectorXd scores(4);
  scores << 4, 3, 2, 1;
  const auto c = purity_efficiency_curve(scores, labels_from({1, 0, 1, 0}));
  REQUIRE(c.points.size() == 4);
  const double want[4][3] = {{4, 0.5, 1.0}, {3, 0.5, 0.5}, {2, 1.0, 2.0 / 3.0}, {1, 1.0, 0.5}};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(c.points[i].threshold == want[i][0]);
    CHECK(c.points[i].efficiency == want[i][1]);
    CHECK(c.points[i].purity == doctest::Approx(want[i][2]).epsilon(1e-15));
  }
}

TEST_CASE("curve errors") {
  Eigen::VectorXd scores(3);
  scores << 1, 2, 3;
  CHECK_THROWS_AS(purity_efficiency_curve(scores, labels_from({0, 0, 0})), InvalidInput);
  CHECK_THROWS_AS(purity_efficiency_curve(scores, labels_from({1, 1, 1})), InvalidInput);
  CHECK_THROWS_AS(purity_efficiency_curve(scores, labels_from({1, 0})), InvalidInput);
  scores(1) = std::nan("");
  CHECK_THROWS_AS(purity_efficiency_curve(scores, labels_from({1, 0, 0})), InvalidInput);
}

TEST_CASE("perfect scores give purity one below keep-all") {
  const Index n = 100;
  Eigen::VectorXd scores(n);
  std::vector<Label> labels(n, Label::background);
  for (Index i = 0; i < n; ++i) {
    scores(i) = static_cast<double>(i);
    if (i >= 96) labels[static_cast<std::size_t>(i)] = Label::signal;
  }
  const auto c = purity_efficiency_curve(scores, labels);
  for (const auto& p : c.points) {
    if (p.efficiency < 1.0) CHECK(p.purity == 1.0);
  }
  CHECK(c.points.back().purity == 0.04);
  CHECK(c.area == doctest::Approx(1.0));
}

TEST_CASE("random scores give the signal fraction") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  const Index n = 10000;
  Eigen::VectorXd scores(n);
  std::vector<Label> labels(n);
  for (Index i = 0; i < n; ++i) {
    scores(i) = u(rng);
    labels[static_cast<std::size_t>(i)] = i % 25 == 0 ? Label::signal : Label::background;
  }
  const auto c = purity_efficiency_curve(scores, labels);
  CHECK(std::abs(c.area - c.signal_fraction()) < 0.02);
  for (double e : {0.3, 0.5, 0.7, 1.0}) CHECK(std::abs(c.purity_at(e) - 0.04) < 0.02);
}

TEST_CASE("curve invariants on randomized vectors") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> size(2, 60), levels(1, 8);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = size(rng);
    std::uniform_int_distribution<int> value(0, levels(rng));
    Eigen::VectorXd scores(n);
    std::vector<Label> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      scores(i) = value(rng);
      labels[static_cast<std::size_t>(i)] = rng() % 3 == 0 ? Label::signal : Label::background;
    }
    labels[0] = Label::signal;
    labels[1] = Label::background;
    const auto c = purity_efficiency_curve(scores, labels);

    const double fraction = static_cast<double>(std::count(labels.begin(), labels.end(), Label::signal)) /
                            static_cast<double>(n);
    CHECK(c.points.back().efficiency == 1.0);
    CHECK(c.points.back().purity == fraction);
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      CHECK(c.points[i].purity >= 0.0);
      CHECK(c.points[i].purity <= 1.0);
      if (i > 0) {
        CHECK(c.points[i].threshold < c.points[i - 1].threshold);
        CHECK(c.points[i].efficiency >= c.points[i - 1].efficiency);
      }
      // Tie atomicity: each point keeps exactly the events scoring at least
      // its threshold.
      Index kept = 0, kept_signal = 0;
      for (Index j = 0; j < n; ++j) {
        if (scores(j) >= c.points[i].threshold) {
          ++kept;
          if (labels[static_cast<std::size_t>(j)] == Label::signal) ++kept_signal;
        }
      }
      CHECK(c.points[i].purity == static_cast<double>(kept_signal) / static_cast<double>(kept));
    }
    CHECK(c.area >= 0.0);
    CHECK(c.area <= 1.0);

    const Eigen::VectorXd transformed = scores.unaryExpr([](double x) { return 3.0 * std::exp(x) + 1.0; });
    const auto t = purity_efficiency_curve(transformed, labels);
    REQUIRE(t.points.size() == c.points.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      CHECK(t.points[i].efficiency == c.points[i].efficiency);
      CHECK(t.points[i].purity == c.points[i].purity);
    }
    CHECK(t.area == c.area);
  }
}

TEST_CASE("untried events rank last") {
  ScoreVector s;
  s.score = Eigen::VectorXd(3);
  s.score << 0.5, -std::numeric_limits<double>::infinity(), 0.2;
  s.untried = {false, true, false};
  const auto c = purity_efficiency_curve(s, labels_from({0, 1, 1}));
  CHECK(c.points.back().efficiency == 1.0);
  CHECK(c.points.size() == 3);
  CHECK(c.points[1].efficiency == 0.5);
}

TEST_CASE("subset separation") {
  const std::vector<double> a{1, 2, 2, 5};
  CHECK(subset_separation(a, a) == 0.5);
  CHECK(subset_separation(std::vector<double>{1, 2}, std::vector<double>{3, 4}) == 1.0);
  CHECK(subset_separation(std::vector<double>{1, 3}, std::vector<double>{2, 4}) == 0.75);
  CHECK_THROWS_AS(subset_separation(std::vector<double>{}, a), InvalidInput);

  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(30 + static_cast<std::size_t>(trial)), y(20);
    for (auto& v : x) v = normal(rng);
    for (auto& v : y) v = normal(rng) + 0.5;
    CHECK(subset_separation(x, y) + subset_separation(y, x) == doctest::Approx(1.0).epsilon(1e-15));
    double wins = 0;
    for (double yi : y)
      for (double xi : x) wins += yi > xi ? 1.0 : (yi == xi ? 0.5 : 0.0);
    CHECK(subset_separation(x, y) == doctest::Approx(wins / static_cast<double>(x.size() * y.size())));
  }
}

TEST_CASE("dominance report") {
  const Index n = 200;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u;
  Eigen::VectorXd perfect(n), random(n), noisy(n);
  std::vector<Label> labels(n, Label::background);
  for (Index i = 0; i < n; ++i) {
    const bool sig = i % 10 == 0;
    labels[static_cast<std::size_t>(i)] = sig ? Label::signal : Label::background;
    perfect(i) = sig ? 1.0 + u(rng) : u(rng);
    random(i) = u(rng);
    noisy(i) = (sig ? 0.5 : 0.0) + u(rng);
  }
  const auto cp = purity_efficiency_curve(perfect, labels);
  const auto cr = purity_efficiency_curve(random, labels);
  const auto cn = purity_efficiency_curve(noisy, labels);

  const auto self = curve_dominance_report({{"a", cn}, {"b", cn}});
  CHECK(self.purity[0] == self.purity[1]);
  CHECK(self.efficiency_grid.size() == 10);
  CHECK(self.efficiency_grid.back() == 1.0);

  const auto table = curve_dominance_report({{"perfect", cp}, {"random", cr}, {"noisy", cn}});
  for (std::size_t g = 0; g + 1 < table.efficiency_grid.size(); ++g) {
    CHECK(table.purity[0][g] > table.purity[1][g]);
  }
  const std::vector<const PurityEfficiencyCurve*> curves{&cp, &cr, &cn};
  for (std::size_t c = 0; c < curves.size(); ++c) {
    CHECK(table.areas[c] == curves[c]->area);
    for (std::size_t g = 0; g < table.efficiency_grid.size(); ++g) {
      CHECK(table.purity[c][g] == curves[c]->purity_at(table.efficiency_grid[g]));
    }
  }

  CHECK_THROWS_AS(curve_dominance_report({{"only", cp}}), InvalidInput);
  Eigen::VectorXd shorter = random.head(100);
  const auto other = purity_efficiency_curve(shorter, std::span<const Label>(labels.data(), 100));
  CHECK_THROWS_AS(curve_dominance_report({{"a", cp}, {"b", other}}), InvalidInput);
}

TEST_CASE("purity interpolation") {
  Eigen::VectorXd scores(4);
  scores << 4, 3, 2, 1;
  const auto c = purity_efficiency_curve(scores, labels_from({1, 0, 1, 0}));
  CHECK(c.purity_at(0.5) == 1.0);
  CHECK(c.purity_at(0.75) == doctest::Approx(0.5 + 0.5 * (2.0 / 3.0 - 0.5)));
  CHECK(c.purity_at(1.0) == doctest::Approx(2.0 / 3.0));
  CHECK(c.purity_at(0.25) == 1.0);
  CHECK(mean_grid_purity(c) > 0.5);
}
