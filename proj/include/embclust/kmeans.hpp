#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "embclust/tensor_io.hpp"

namespace embclust {

struct ClusterState {
  Eigen::MatrixXd centroids;  // k x z
  std::vector<int> assignments;
  double wcss = 0.0;
  // wcss after every assignment step of the kept run, ending with the
  // final assignment.
  std::vector<double> wcss_history;
  int iterations = 0;

  int k() const { return static_cast<int>(centroids.rows()); }
};

struct KMeansOptions {
  int n_init = 10;
  int max_iter = 300;
  double tol = 1e-6;  // on max centroid displacement
};

/// Nearest centroid per row; ties go to the lowest index. Writes the
/// squared distance of each row to its centroid into `sq_dist` if given.
std::vector<int> assign_nearest(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centroids,
                                Eigen::VectorXd* sq_dist = nullptr);

double within_cluster_ss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centroids,
                         const std::vector<int>& labels);

/// k-means++ seeding: first row uniform, then D^2-weighted, distinct rows.
Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& x, int k, std::uint64_t seed);

/// Lloyd iterations from the given centroids.
ClusterState lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd centroids, const KMeansOptions& opts);

/// Best of `opts.n_init` k-means++ seeded Lloyd runs (lowest wcss).
ClusterState kmeans_fit(const Eigen::MatrixXd& x, int k, std::uint64_t seed,
                        const KMeansOptions& opts = {});

inline ClusterState kmeans_fit(const FeatureMatrix& m, int k, std::uint64_t seed,
                               const KMeansOptions& opts = {}) {
  return kmeans_fit(m.data, k, seed, opts);
}

struct KneeResult {
  int k = 0;
  bool knee_found = false;
  std::vector<double> distances;  // per k, on the unit-normalized curve
};

/// Point of the curve farthest from the chord joining its endpoints after
/// both axes are scaled to [0, 1]. A curve with no point off the chord
/// reports knee_found = false and the first k.
KneeResult find_knee(const std::vector<int>& ks, const std::vector<double>& wcss);

struct ElbowResult {
  int k = 0;
  bool knee_found = false;
  std::vector<int> ks;
  std::vector<double> wcss;
  std::vector<double> distances;
};

ElbowResult elbow_select(const Eigen::MatrixXd& x, int k_min, int k_max, std::uint64_t seed,
                         const KMeansOptions& opts = {});

inline ElbowResult elbow_select(const FeatureMatrix& m, int k_min, int k_max, std::uint64_t seed,
                                const KMeansOptions& opts = {}) {
  return elbow_select(m.data, k_min, k_max, seed, opts);
}

}  // namespace embclust
