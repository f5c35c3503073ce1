#include <random>

#include "doctest.h"
#include "invbag/core.hpp"
#include "invbag/random.hpp"
#include "oracles.hpp"

using namespace invbag;

TEST_CASE("fit_scaling examples") {
  FeatureMatrix m(3, 3);
  m << 1, 5, -1, 2, 5, 0, 3, 5, 1;
  const auto p = fit_scaling(m);
  CHECK(p.mean(0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p.sd(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.mean(1) == 5.0);
  CHECK(p.sd(1) == 1.0);
  CHECK(std::abs(p.mean(2)) < 1e-15);
  CHECK(p.sd(2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit_scaling rejects an empty matrix and handles one row") {
  CHECK_THROWS_AS(fit_scaling(FeatureMatrix(0, 2)), InvalidInput);
  FeatureMatrix one(1, 2);
  one << 4, -1;
  const auto p = fit_scaling(one);
  CHECK(p.sd(0) == 1.0);
  CHECK(p.sd(1) == 1.0);
}

TEST_CASE("apply_scaling examples") {
  FeatureMatrix m(1, 1);
  m << 3;
  ScalingParams<double> p{Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, 1.0)};
  CHECK(apply_scaling(m, p)(0, 0) == 1.0);

  std::mt19937_64 rng(1);
  const FeatureMatrix x = oracle::random_matrix(rng, 20, 4);
  ScalingParams<double> id{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4)};
  CHECK(apply_scaling(x, id) == x);
  CHECK_THROWS_AS(apply_scaling(FeatureMatrix(2, 3), id), InvalidInput);
}

TEST_CASE("standardization properties") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_real_distribution<double> scale(0.01, 100.0), offset(-1e3, 1e3);
    FeatureMatrix x = oracle::random_matrix(rng, 2 + trial, 5);
    for (Index j = 0; j < x.cols(); ++j) {
      x.col(j) = (x.col(j).array() * scale(rng) + offset(rng)).matrix();
    }
    const auto p = fit_scaling(x);
    const FeatureMatrix z = apply_scaling(x, p);
    const FeatureMatrix back = unscale(z, p);
    CHECK((back - x).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff()));
    for (Index j = 0; j < z.cols(); ++j) {
      const double mean = z.col(j).mean();
      const double sd =
          std::sqrt((z.col(j).array() - mean).square().sum() / static_cast<double>(z.rows() - 1));
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(sd - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("gather examples and properties") {
  FeatureMatrix m(3, 2);
  m << 1, 2, 3, 4, 5, 6;
  const auto dup = gather(m, {0, 0});
  REQUIRE(dup.rows() == 2);
  CHECK(dup.row(0) == dup.row(1));
  CHECK(dup.row(0) == m.row(0));

  const auto rev = gather(m, {2, 1, 0});
  for (Index i = 0; i < 3; ++i) CHECK(rev.row(i) == m.row(2 - i));
  CHECK(gather(m, {0, 1, 2}) == m);
  CHECK_THROWS_AS(gather(m, {3}), InvalidInput);
  CHECK_THROWS_AS(gather(m, {-1}), InvalidInput);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Index> pick(0, 2);
  for (int size = 0; size < 30; ++size) {
    SubsetIndex s;
    for (int j = 0; j < size; ++j) s.push_back(pick(rng));
    const auto g = gather(m, s);
    CHECK(g.rows() == size);
    CHECK(g.cols() == m.cols());
  }
}

TEST_CASE("labeled dataset bookkeeping") {
  LabeledDataset d;
  d.features = FeatureMatrix::Zero(4, 2);
  d.labels = {Label::background, Label::signal, Label::background, Label::background};
  CHECK(d.count(Label::signal) == 1);
  CHECK(d.background_fraction() == 0.75);
  CHECK_NOTHROW(d.validate());
  d.labels.pop_back();
  CHECK_THROWS_AS(d.validate(), InvalidInput);
}

TEST_CASE("validate_features rejects non-finite entries") {
  FeatureMatrix m = FeatureMatrix::Zero(2, 2);
  CHECK_NOTHROW(validate_features(m));
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate_features(m), InvalidInput);
  m(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate_features(m), InvalidInput);
  CHECK_THROWS_AS(validate_features(FeatureMatrix(0, 3)), InvalidInput);
}

TEST_CASE("seed derivation separates stages") {
  CHECK(derive_seed(1, SeedStage::calibration) != derive_seed(1, SeedStage::bagging));
  CHECK(derive_seed(1, SeedStage::bagging) != derive_seed(2, SeedStage::bagging));
  CHECK(mix_seed(5, 0) == mix_seed(5, 0));
}
