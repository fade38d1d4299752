#include <doctest.h>

#include "embclust/error.hpp"
#include "embclust/kmeans.hpp"
#include "embclust/metrics.hpp"
#include "embclust/synth.hpp"
#include "oracles.hpp"

using namespace embclust;
using doctest::Approx;

TEST_CASE("default shape and balance") {
  SynthSpec spec;
  spec.seed = 3;
  const auto d = generate(spec);
  CHECK(d.features.rows() == 500);
  CHECK(d.features.cols() == 512);
  const auto sizes = cluster_sizes(d.truth);
  REQUIRE(sizes.size() == 10);
  for (long s : sizes) CHECK(s == 50);
  CHECK_FALSE(d.super_labels.has_value());
}

TEST_CASE("same seed gives identical data") {
  SynthSpec spec;
  spec.dim = 16;
  spec.seed = 5;
  CHECK(generate(spec).features.data == generate(spec).features.data);
  auto other = spec;
  other.seed = 6;
  CHECK(generate(spec).features.data != generate(other).features.data);
}

TEST_CASE("zero noise collapses to the means and k-means recovers them") {
  SynthSpec spec;
  spec.dim = 8;
  spec.noise_sigma = 0.0;
  spec.seed = 2;
  const auto d = generate(spec);
  for (Eigen::Index i = 0; i < d.features.rows(); ++i)
    CHECK(d.features.data.row(i) == d.means.row(d.truth.labels[i]));
  CHECK(std::isinf(separation_ratio(d.features, d.truth)));
  CHECK(adjusted_rand(d.truth.labels, kmeans_fit(d.features, 10, 0).assignments) == 1.0);

  spec.noise_sigma = spec.center_scale / 100.0;
  const auto e = generate(spec);
  CHECK(adjusted_rand(e.truth.labels, kmeans_fit(e.features, 10, 0).assignments) == 1.0);
}

TEST_CASE("hierarchical mode") {
  SynthSpec spec;
  spec.n_clusters = 6;
  spec.hierarchy = Hierarchy{2, 3};
  spec.dim = 16;
  spec.seed = 4;
  const auto d = generate(spec);
  REQUIRE(d.super_labels.has_value());
  CHECK(d.super_labels->num_labels() == 2);
  for (std::size_t i = 0; i < d.truth.size(); ++i) CHECK(d.super_labels->labels[i] == d.truth.labels[i] / 3);
  const auto top = kmeans_fit(d.features, 2, 1);
  CHECK(adjusted_rand(d.super_labels->labels, top.assignments) >= 0.95);

  spec.n_clusters = 5;
  CHECK_THROWS_AS(generate(spec), Error);
}

TEST_CASE("separation ratio") {
  Eigen::MatrixXd x(4, 1);
  x << -1, 1, 9, 11;
  const std::vector<int> l = {0, 0, 1, 1};
  CHECK(separation_ratio(x, l) == Approx(10.0));
  const Eigen::MatrixXd moved = x.array() + 123.0;
  CHECK(separation_ratio(moved, l) == Approx(10.0));
  CHECK_THROWS_AS(separation_ratio(x, {0, 0, 0, 0}), Error);
}

TEST_CASE("spec validation") {
  SynthSpec spec;
  spec.points_per_cluster = 0;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.points_per_cluster = 2;
  spec.noise_sigma = -1.0;
  CHECK_THROWS_AS(spec.validate(), Error);
}
