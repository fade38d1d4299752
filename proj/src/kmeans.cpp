#include "embclust/kmeans.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "embclust/error.hpp"

namespace embclust {

namespace {

void check_k(const Eigen::MatrixXd& x, int k) {
  if (k < 1) fail(ErrorCode::invalid_argument, "k must be >= 1");
  if (k > x.rows())
    fail(ErrorCode::invalid_argument, "k = " + std::to_string(k) + " exceeds row count " +
                                          std::to_string(x.rows()));
}

Eigen::MatrixXd cluster_means(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                              const Eigen::MatrixXd& previous) {
  const auto k = previous.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sums.row(labels[i]) += x.row(i);
    counts(labels[i]) += 1.0;
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    if (counts(j) > 0)
      sums.row(j) /= counts(j);
    else
      sums.row(j) = previous.row(j);
  }
  return sums;
}

// Moves the point farthest from its centroid into each empty cluster.
void repair_empty(const Eigen::MatrixXd& x, Eigen::MatrixXd& centroids, std::vector<int>& labels,
                  Eigen::VectorXd& sq_dist) {
  const auto k = centroids.rows();
  std::vector<int> counts(k, 0);
  for (int l : labels) ++counts[l];
  for (Eigen::Index j = 0; j < k; ++j) {
    if (counts[j] > 0) continue;
    Eigen::Index far = -1;
    double best = -1.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (counts[labels[i]] > 1 && sq_dist(i) > best) {
        best = sq_dist(i);
        far = i;
      }
    }
    if (far < 0) break;
    --counts[labels[far]];
    labels[far] = static_cast<int>(j);
    ++counts[j];
    centroids.row(j) = x.row(far);
    sq_dist(far) = 0.0;
  }
}

}  // namespace

std::vector<int> assign_nearest(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centroids,
                                Eigen::VectorXd* sq_dist) {
  if (x.cols() != centroids.cols())
    fail(ErrorCode::dimension_mismatch, "centroid width does not match data width");
  std::vector<int> labels(x.rows(), 0);
  if (sq_dist) sq_dist->resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
      const double d = (x.row(i) - centroids.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    labels[i] = arg;
    if (sq_dist) (*sq_dist)(i) = best;
  }
  return labels;
}

double within_cluster_ss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centroids,
                         const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) total += (x.row(i) - centroids.row(labels[i])).squaredNorm();
  return total;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& x, int k, std::uint64_t seed) {
  check_k(x, k);
  const auto n = x.rows();
  std::mt19937_64 rng(seed);
  std::vector<bool> taken(n, false);
  Eigen::MatrixXd centroids(k, x.cols());

  auto pick_uniform_free = [&]() {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!taken[i]) free.push_back(i);
    std::uniform_int_distribution<std::size_t> u(0, free.size() - 1);
    return free[u(rng)];
  };

  Eigen::Index first = pick_uniform_free();
  taken[first] = true;
  centroids.row(0) = x.row(first);
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = (x.row(i) - centroids.row(0)).squaredNorm();

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!taken[i]) total += d2(i);
    Eigen::Index chosen = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[i] || d2(i) <= 0.0) continue;
        acc += d2(i);
        chosen = i;
        if (acc > target) break;
      }
    }
    if (chosen < 0) chosen = pick_uniform_free();
    taken[chosen] = true;
    centroids.row(c) = x.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), (x.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

ClusterState lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd centroids, const KMeansOptions& opts) {
  if (opts.max_iter < 1) fail(ErrorCode::invalid_argument, "max_iter must be >= 1");
  ClusterState state;
  Eigen::VectorXd sq_dist;
  for (int it = 0; it < opts.max_iter; ++it) {
    auto labels = assign_nearest(x, centroids, &sq_dist);
    repair_empty(x, centroids, labels, sq_dist);
    state.wcss_history.push_back(sq_dist.sum());
    Eigen::MatrixXd next = cluster_means(x, labels, centroids);
    const double shift = (next - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(next);
    state.iterations = it + 1;
    if (shift < opts.tol) break;
  }
  state.assignments = assign_nearest(x, centroids, &sq_dist);
  state.wcss = sq_dist.sum();
  state.wcss_history.push_back(state.wcss);
  state.centroids = std::move(centroids);
  return state;
}

ClusterState kmeans_fit(const Eigen::MatrixXd& x, int k, std::uint64_t seed, const KMeansOptions& opts) {
  check_k(x, k);
  if (opts.n_init < 1) fail(ErrorCode::invalid_argument, "n_init must be >= 1");
  std::mt19937_64 seeds(seed);
  ClusterState best;
  bool have = false;
  for (int r = 0; r < opts.n_init; ++r) {
    auto state = lloyd(x, kmeanspp_init(x, k, seeds()), opts);
    if (!have || state.wcss < best.wcss) {
      best = std::move(state);
      have = true;
    }
  }
  return best;
}

KneeResult find_knee(const std::vector<int>& ks, const std::vector<double>& wcss) {
  if (ks.size() != wcss.size() || ks.size() < 2)
    fail(ErrorCode::invalid_argument, "knee detection needs at least two curve points");
  KneeResult out;
  out.k = ks.front();
  out.distances.assign(ks.size(), 0.0);

  const double k0 = ks.front(), k1 = ks.back();
  const double w0 = wcss.front(), w1 = wcss.back();
  const double wspan = w0 - w1;
  if (!(std::abs(wspan) > 0.0)) return out;

  // Normalized curve runs from (0, 1) to (1, 0); chord is x + y = 1.
  double best = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double u = (ks[i] - k0) / (k1 - k0);
    const double v = (wcss[i] - w1) / wspan;
    // Signed: positive below the chord, where a convex knee lies.
    out.distances[i] = (1.0 - u - v) / std::sqrt(2.0);
    if (out.distances[i] > best) {
      best = out.distances[i];
      out.k = ks[i];
    }
  }
  out.knee_found = best > 1e-9;
  if (!out.knee_found) out.k = ks.front();
  return out;
}

ElbowResult elbow_select(const Eigen::MatrixXd& x, int k_min, int k_max, std::uint64_t seed,
                         const KMeansOptions& opts) {
  if (k_min < 1 || k_min >= k_max || k_max > x.rows())
    fail(ErrorCode::invalid_argument, "elbow range must satisfy 1 <= k_min < k_max <= n");
  ElbowResult out;
  for (int k = k_min; k <= k_max; ++k) {
    out.ks.push_back(k);
    out.wcss.push_back(kmeans_fit(x, k, seed, opts).wcss);
  }
  auto knee = find_knee(out.ks, out.wcss);
  out.k = knee.k;
  out.knee_found = knee.knee_found;
  out.distances = std::move(knee.distances);
  return out;
}

}  // namespace embclust
