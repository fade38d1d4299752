#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "embclust/error.hpp"
#include "embclust/reduce.hpp"
#include "oracles.hpp"

using namespace embclust;
using doctest::Approx;

TEST_CASE("gap on a 2x2x2 row") {
  FeatureMatrix m;
  m.ids = {"a"};
  m.data.resize(1, 8);
  m.data << 1, 3, 5, 7, 2, 2, 2, 2;
  m.dim_shape = {2, 2, 2};
  const auto g = gap(m);
  REQUIRE(g.cols() == 2);
  CHECK(g.data(0, 0) == 4.0);
  CHECK(g.data(0, 1) == 2.0);
  CHECK(g.ids == m.ids);
}

TEST_CASE("gap widths and brute-force means") {
  std::mt19937_64 rng(1);
  auto dense = FeatureMatrix::from_data(oracle::gaussian(rng, 2, 1024 * 49));
  dense.dim_shape = {1024, 7, 7};
  CHECK(gap(dense).cols() == 1024);

  auto gram = FeatureMatrix::from_data(oracle::gaussian(rng, 3, 512 * 512));
  gram.dim_shape = {512, 512};
  const auto g = gap(gram);
  REQUIRE(g.cols() == 512);
  for (Eigen::Index r = 0; r < 3; ++r)
    for (int c : {0, 17, 511}) {
      double s = 0.0;
      for (int t = 0; t < 512; ++t) s += gram.data(r, c * 512 + t);
      CHECK(g.data(r, c) == Approx(s / 512).epsilon(1e-12));
    }
}

TEST_CASE("gap errors without a shape") {
  auto m = FeatureMatrix::from_data(Eigen::MatrixXd::Ones(2, 4));
  CHECK_THROWS_AS(gap(m), Error);
  m.dim_shape = {4};
  CHECK_THROWS_AS(gap(m), Error);
}

TEST_CASE("gap permutation properties") {
  std::mt19937_64 rng(2);
  auto m = FeatureMatrix::from_data(oracle::gaussian(rng, 5, 3 * 4));
  m.dim_shape = {3, 4};
  const auto base = gap(m);

  auto rows = m;
  rows.data = m.data.colwise().reverse();
  std::reverse(rows.ids.begin(), rows.ids.end());
  CHECK(gap(rows).data.isApprox(base.data.colwise().reverse(), 1e-14));

  auto spatial = m;
  for (int c = 0; c < 3; ++c) spatial.data.middleCols(c * 4, 4) = m.data.middleCols(c * 4, 4).rowwise().reverse();
  CHECK(gap(spatial).data.isApprox(base.data, 1e-14));
}

TEST_CASE("pca on the line y = 2x") {
  Eigen::MatrixXd x(5, 2);
  for (int i = 0; i < 5; ++i) x.row(i) << i - 1.0, 2.0 * (i - 1.0);
  const auto m = FeatureMatrix::from_data(x);
  const auto model = pca_fit(m, 1);
  CHECK(model.components(0, 0) == Approx(1.0 / std::sqrt(5.0)).epsilon(1e-10));
  CHECK(model.components(0, 1) == Approx(2.0 / std::sqrt(5.0)).epsilon(1e-10));
  CHECK(model.explained_variance(0) / model.total_variance == Approx(1.0).epsilon(1e-10));

  const auto t = pca_transform(model, m);
  const double mean = t.data.mean();
  const double var = (t.data.array() - mean).square().sum() / 4.0;
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const double total = (x.rowwise() - mu).array().square().sum() / 4.0;
  CHECK(var == Approx(total).epsilon(1e-10));
}

TEST_CASE("pca matches a hand 2x2 eigen solve") {
  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 1, 0, 0, 1;
  const auto model = pca_fit(FeatureMatrix::from_data(x), 2);
  // covariance (n-1): [[1/3, -1/6], [-1/6, 1/3]]
  const double a = 1.0 / 3.0, b = -1.0 / 6.0;
  const double l1 = a + std::abs(b), l2 = a - std::abs(b);
  CHECK(model.explained_variance(0) == Approx(l1).epsilon(1e-12));
  CHECK(model.explained_variance(1) == Approx(l2).epsilon(1e-12));
  // eigenvector for l1 is (1,-1)/sqrt2; sign rule makes the largest-magnitude
  // entry positive, first index on ties
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(model.components(0, 0)) == Approx(s).epsilon(1e-12));
  CHECK(std::abs(model.components(0, 1)) == Approx(s).epsilon(1e-12));
  CHECK(model.components(0, 0) * model.components(0, 1) == Approx(-0.5).epsilon(1e-12));
  CHECK(model.components(1, 0) * model.components(1, 1) == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pca invariants") {
  std::mt19937_64 rng(4);
  const auto m = FeatureMatrix::from_data(oracle::gaussian(rng, 30, 6) * 3.0);
  const auto full = pca_fit(m, 6);
  const Eigen::MatrixXd gram = full.components * full.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
  for (int i = 1; i < 6; ++i) CHECK(full.explained_variance(i) <= full.explained_variance(i - 1));
  CHECK(full.explained_variance.sum() == Approx(full.total_variance).epsilon(1e-8));
  CHECK((pca_inverse_transform(full, pca_transform(full, m)).data - m.data).cwiseAbs().maxCoeff() < 1e-8);

  double last = INFINITY;
  for (int p = 1; p <= 6; ++p) {
    const auto model = pca_fit(m, p);
    const double err = (pca_inverse_transform(model, pca_transform(model, m)).data - m.data).squaredNorm();
    CHECK(err <= last + 1e-9);
    last = err;
  }

  FeatureMatrix mean_row = FeatureMatrix::from_data(full.mean.transpose());
  CHECK(pca_transform(full, mean_row).data.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pca argument errors") {
  std::mt19937_64 rng(5);
  const auto m = FeatureMatrix::from_data(oracle::gaussian(rng, 4, 3));
  CHECK_THROWS_AS(pca_fit(m, 0), Error);
  CHECK_THROWS_AS(pca_fit(m, 4), Error);
  const auto model = pca_fit(m, 2);
  CHECK_THROWS_AS(pca_transform(model, FeatureMatrix::from_data(Eigen::MatrixXd::Ones(2, 5))), Error);
}

TEST_CASE("pca flags rank deficiency") {
  Eigen::MatrixXd x(6, 3);
  for (int i = 0; i < 6; ++i) x.row(i) << i, 2.0 * i, -i;
  const auto model = pca_fit(FeatureMatrix::from_data(x), 2);
  CHECK(model.rank_deficient);
  CHECK(model.num_components() == 1);
}

TEST_CASE("iterative pca agrees with the dense solver") {
  std::mt19937_64 rng(6);
  Eigen::MatrixXd x = oracle::gaussian(rng, 40, 12);
  x.col(0) *= 6.0;
  x.col(3) *= 4.0;
  x.col(7) *= 2.5;
  const auto m = FeatureMatrix::from_data(x);
  const auto dense = pca_fit(m, 3);
  PcaOptions iter;
  iter.dense_limit = 4;
  const auto approx = pca_fit(m, 3, iter);
  CHECK((dense.explained_variance - approx.explained_variance).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((dense.components - approx.components).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("pca model save/load") {
  std::mt19937_64 rng(8);
  const auto model = pca_fit(FeatureMatrix::from_data(oracle::gaussian(rng, 10, 4)), 3);
  const auto path = std::filesystem::temp_directory_path() / "embclust_test_pca.fmat";
  save_pca(model, path);
  const auto back = load_pca(path);
  std::filesystem::remove(path);
  CHECK((back.components - model.components).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((back.mean - model.mean).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(back.num_components() == 3);
}

TEST_CASE("standardize") {
  Eigen::MatrixXd x(2, 1);
  x << 1, 3;
  auto s = standardize(FeatureMatrix::from_data(x));
  CHECK(s.data(0, 0) == Approx(-1.0));
  CHECK(s.data(1, 0) == Approx(1.0));

  s = standardize(FeatureMatrix::from_data(Eigen::MatrixXd::Constant(3, 1, 5.0)));
  CHECK(s.data.isZero());

  CHECK_THROWS_AS(standardize(FeatureMatrix::from_data(Eigen::MatrixXd::Ones(1, 3))), Error);

  std::mt19937_64 rng(9);
  const auto m = FeatureMatrix::from_data(oracle::gaussian(rng, 20, 4, 7.0).array() + 3.0);
  const auto z = standardize(m);
  for (int c = 0; c < 4; ++c) {
    double mean = 0.0, var = 0.0;
    for (int r = 0; r < 20; ++r) mean += z.data(r, c) / 20.0;
    for (int r = 0; r < 20; ++r) var += (z.data(r, c) - mean) * (z.data(r, c) - mean) / 20.0;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-12);
  }
  CHECK((standardize(z).data - z.data).cwiseAbs().maxCoeff() < 1e-12);
}
