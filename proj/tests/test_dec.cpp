#include <doctest.h>

#include <random>

#include "embclust/dec.hpp"
#include "embclust/error.hpp"
#include "embclust/metrics.hpp"
#include "oracles.hpp"

using namespace embclust;
using doctest::Approx;

namespace {

// Scalar target distribution, one entry at a time.
Eigen::MatrixXd scalar_target(const Eigen::MatrixXd& q) {
  const auto n = q.rows(), k = q.cols();
  std::vector<double> f(k, 0.0);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < n; ++i) f[j] += q(i, j);
  Eigen::MatrixXd p(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    double denom = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) denom += q(i, j) * q(i, j) / f[j];
    for (Eigen::Index j = 0; j < k; ++j) p(i, j) = q(i, j) * q(i, j) / f[j] / denom;
  }
  return p;
}

Eigen::MatrixXd random_stochastic(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k) {
  std::uniform_real_distribution<double> u(1e-3, 1.0);
  Eigen::MatrixXd m(n, k);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  m.array().colwise() /= m.rowwise().sum().array();
  return m;
}

MlpParams linear_identity(Eigen::Index d) {
  MlpParams p;
  for (int l = 0; l < 2; ++l) {
    p.weights.push_back(Eigen::MatrixXd::Identity(d, d));
    p.biases.push_back(Eigen::VectorXd::Zero(d));
    p.activations.push_back(Activation::identity);
  }
  return p;
}

// k distinct well-separated points, each repeated m times.
Eigen::MatrixXd repeated_points(int k, int m, std::vector<int>& truth) {
  Eigen::MatrixXd x(k * m, 2);
  truth.clear();
  for (int c = 0; c < k; ++c)
    for (int r = 0; r < m; ++r) {
      x.row(c * m + r) << 20.0 * c, (c % 2) * 15.0;
      truth.push_back(c);
    }
  return x;
}

}  // namespace

TEST_CASE("soft assignment hand values") {
  Eigen::MatrixXd z(1, 2), c1(1, 2);
  z << 3, 4;
  c1 << 0, 0;
  CHECK(soft_assign(z, c1)(0, 0) == 1.0);

  Eigen::MatrixXd c2(2, 2);
  c2 << 1, 4, 5, 4;
  const auto q = soft_assign(z, c2);
  CHECK(q(0, 0) == Approx(0.5));
  CHECK(q(0, 1) == Approx(0.5));

  Eigen::MatrixXd c3(2, 2);
  c3 << 3, 4, 3, 5;
  const auto r = soft_assign(z, c3);
  CHECK(r(0, 0) == Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r(0, 1) == Approx(1.0 / 3.0).epsilon(1e-15));

  CHECK_THROWS_AS(soft_assign(z, Eigen::MatrixXd(0, 2)), Error);
  CHECK_THROWS_AS(soft_assign(z, Eigen::MatrixXd::Zero(2, 3)), Error);
}

TEST_CASE("target distribution") {
  Eigen::MatrixXd q(2, 2);
  q << 0.8, 0.2, 0.6, 0.4;
  const auto t = target_distribution(q);
  CHECK(t.frequencies(0) == Approx(1.4));
  CHECK(t.frequencies(1) == Approx(0.6));
  const auto ref = scalar_target(q);
  CHECK((t.p - ref).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(t.p(0, 0) == Approx(0.8727).epsilon(1e-4));
  CHECK(t.p(0, 1) == Approx(0.1273).epsilon(1e-3));
  CHECK(t.p(1, 0) == Approx(0.4909).epsilon(1e-4));
  CHECK(t.p(1, 1) == Approx(0.5091).epsilon(1e-4));

  Eigen::MatrixXd one(1, 3);
  one << 0.2, 0.5, 0.3;
  CHECK((target_distribution(one).p - one).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::abs(kl_loss(target_distribution(one).p, one)) < 1e-15);

  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, 4, 0.25);
  CHECK((target_distribution(uniform).p - uniform).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd dead(2, 2);
  dead << 1, 0, 1, 0;
  CHECK_THROWS_AS(target_distribution(dead), Error);
}

TEST_CASE("rows of Q and P sum to one on random states") {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + static_cast<int>(rng() % 12), k = 1 + static_cast<int>(rng() % 6);
    const auto z = oracle::gaussian(rng, n, 3, 2.0);
    const auto c = oracle::gaussian(rng, k, 3, 2.0);
    const auto q = soft_assign(z, c);
    const auto p = target_distribution(q).p;
    worst = std::max(worst, (q.rowwise().sum().array() - 1.0).abs().maxCoeff());
    worst = std::max(worst, (p.rowwise().sum().array() - 1.0).abs().maxCoeff());
    CHECK((q.array() > 0.0).all());
    if (n == 1) CHECK((p - q).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("sharpening under equal frequencies") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 1000; ++t) {
    const int k = 2 + static_cast<int>(rng() % 5);
    const Eigen::RowVectorXd row = random_stochastic(rng, 1, k);
    // all cyclic shifts of one row: every column sums to 1
    Eigen::MatrixXd q(k, k);
    for (int s = 0; s < k; ++s)
      for (int j = 0; j < k; ++j) q(s, (j + s) % k) = row(j);
    const auto tgt = target_distribution(q);
    CHECK((tgt.frequencies.array() - 1.0).abs().maxCoeff() < 1e-12);
    for (int i = 0; i < k; ++i) {
      Eigen::Index qa = 0, pa = 0;
      const double qm = q.row(i).maxCoeff(&qa);
      const double pm = tgt.p.row(i).maxCoeff(&pa);
      CHECK(pm >= qm - 1e-15);
      CHECK(pa == qa);
    }
  }
}

TEST_CASE("kl loss") {
  Eigen::MatrixXd p(1, 2), q(1, 2);
  p << 1, 0;
  q << 0.5, 0.5;
  CHECK(kl_loss(p, q) == Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(kl_loss(q, q) == 0.0);

  std::mt19937_64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + static_cast<int>(rng() % 8), k = 1 + static_cast<int>(rng() % 6);
    const auto a = random_stochastic(rng, n, k);
    const auto b = random_stochastic(rng, n, k);
    CHECK(kl_loss(a, b) >= 0.0);
    const Eigen::MatrixXd ar = a.rowwise().reverse(), br = b.rowwise().reverse();
    CHECK(kl_loss(ar, br) == Approx(kl_loss(a, b)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(kl_loss(p, Eigen::MatrixXd::Ones(2, 2)), Error);
}

TEST_CASE("kl gradients match central differences") {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int k = 1 + static_cast<int>(rng() % 5);
    const int d = 1 + static_cast<int>(rng() % 4);
    Eigen::MatrixXd z = oracle::gaussian(rng, n, d, 1.5);
    Eigen::MatrixXd c = oracle::gaussian(rng, k, d, 1.5);
    const Eigen::MatrixXd p = target_distribution(soft_assign(oracle::gaussian(rng, n, d), c)).p;
    const auto loss = [&] { return kl_loss(p, soft_assign(z, c)); };
    const auto g = kl_grads(z, c, p, soft_assign(z, c));
    worst = std::max(worst, oracle::rel_error(g.d_latent, oracle::central_diff(z, loss)));
    worst = std::max(worst, oracle::rel_error(g.d_centroids, oracle::central_diff(c, loss)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("kl gradients: stationary at P = Q and translation equivariant") {
  std::mt19937_64 rng(5);
  const auto z = oracle::gaussian(rng, 5, 3);
  const auto c = oracle::gaussian(rng, 2, 3);
  const auto q = soft_assign(z, c);
  const auto g0 = kl_grads(z, c, q, q);
  CHECK(g0.d_latent.cwiseAbs().maxCoeff() < 1e-15);
  CHECK(g0.d_centroids.cwiseAbs().maxCoeff() < 1e-15);

  const auto p = target_distribution(q).p;
  const auto g = kl_grads(z, c, p, q);
  const Eigen::RowVector3d shift(3.0, -7.0, 0.5);
  const Eigen::MatrixXd zs = z.rowwise() + shift, cs = c.rowwise() + shift;
  const auto gs = kl_grads(zs, cs, p, soft_assign(zs, cs));
  CHECK((g.d_latent - gs.d_latent).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.d_centroids - gs.d_centroids).cwiseAbs().maxCoeff() < 1e-12);
  // the loss depends on differences only, so the gradients cancel
  CHECK((g.d_latent.colwise().sum() + g.d_centroids.colwise().sum()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hard labels break ties low") {
  Eigen::MatrixXd q(2, 3);
  q << 0.4, 0.4, 0.2, 0.1, 0.3, 0.6;
  CHECK(hard_labels(q) == std::vector<int>{0, 2});
}

TEST_CASE("dec on repeated distinct points converges at the first check") {
  std::vector<int> truth;
  const auto x = repeated_points(4, 6, truth);
  DecConfig cfg;
  cfg.k = 4;
  cfg.target_update_interval = 50;
  const auto r = dec_fit(x, linear_identity(2), cfg);
  CHECK(r.converged);
  CHECK(r.steps == 50);
  REQUIRE(r.history.size() == 2);
  CHECK(r.history[1].label_change_fraction == 0.0);
  CHECK(adjusted_rand(truth, r.state.assignments) == 1.0);
  CHECK(r.state.assignments == r.init_assignments);
}

TEST_CASE("dec config defaults and validation") {
  DecConfig cfg;
  CHECK(cfg.max_iter == 8000);
  CHECK(cfg.convergence_tol == 1e-4);
  CHECK(cfg.target_update_interval == 100);
  cfg.convergence_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.convergence_tol = 1e-4;
  cfg.max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  std::vector<int> truth;
  const auto x = repeated_points(2, 2, truth);
  DecConfig big;
  big.k = 5;
  CHECK_THROWS_AS(dec_fit(x, linear_identity(2), big), Error);
  big.k = 2;
  CHECK_THROWS_AS(dec_fit(Eigen::MatrixXd::Ones(4, 3), linear_identity(2), big), Error);
}

TEST_CASE("dec determinism, frozen decoder, and no-motion convergence") {
  std::mt19937_64 rng(6);
  Eigen::MatrixXd x(60, 4);
  for (int c = 0; c < 3; ++c) {
    const Eigen::RowVectorXd mu = oracle::gaussian(rng, 1, 4, 6.0);
    x.middleRows(c * 20, 20) = oracle::gaussian(rng, 20, 4).rowwise() + mu;
  }
  const auto params = init_params({4, 8, 3, 8, 4}, 2);
  DecConfig cfg;
  cfg.k = 3;
  cfg.max_iter = 400;
  cfg.seed = 9;
  const auto a = dec_fit(x, params, cfg);
  const auto b = dec_fit(x, params, cfg);
  CHECK(a.state.assignments == b.state.assignments);
  CHECK(a.latent == b.latent);
  for (std::size_t l = params.bottleneck(); l < params.num_layers(); ++l)
    CHECK(a.params.weights[l] == params.weights[l]);

  cfg.batch_size = 16;
  const auto m1 = dec_fit(x, params, cfg);
  const auto m2 = dec_fit(x, params, cfg);
  CHECK(m1.state.assignments == m2.state.assignments);

  // Updates too small to move any label: stops at the first check with the
  // k-means labels intact.
  cfg.batch_size = 0;
  cfg.optimizer.lr = 1e-12;
  const auto still = dec_fit(x, params, cfg);
  CHECK(still.converged);
  CHECK(still.steps == cfg.target_update_interval);
  CHECK(still.state.assignments == still.init_assignments);
}

TEST_CASE("subcluster") {
  std::vector<int> truth;
  const auto x = repeated_points(3, 4, truth);
  auto m = FeatureMatrix::from_data(x);
  std::vector<int> labels = {0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2};
  SubclusterConfig cfg;
  cfg.layer_dims = {2, 2, 2};
  cfg.reuse_params = linear_identity(2);

  const auto exact = subcluster(m, labels, 0, 3, cfg);
  CHECK(exact.labels.labels == std::vector<int>{0, 1, 2});
  CHECK(exact.labels.ids == std::vector<std::string>{"r0", "r1", "r2"});

  const auto largest = subcluster(m, labels, kLargestCluster, 2, cfg);
  CHECK(largest.cluster_id == 1);
  CHECK(largest.members.size() == 5);

  CHECK_THROWS_AS(subcluster(m, labels, 0, 4, cfg), Error);
  CHECK_THROWS_AS(subcluster(m, labels, 7, 1, cfg), Error);
  CHECK(largest_cluster({2, 2, 1, 0, 1}) == 1);
}
