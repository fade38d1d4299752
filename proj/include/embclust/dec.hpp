#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "embclust/autoencoder.hpp"
#include "embclust/error.hpp"
#include "embclust/kmeans.hpp"
#include "embclust/tensor_io.hpp"

namespace embclust {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Student's t kernel (one degree of freedom) between each row of `z`
/// and each centroid: (1 + ||z_i - c_j||^2)^-1, n x k.
template <class DZ, class DC>
MatrixX<typename DZ::Scalar> student_kernel(const Eigen::MatrixBase<DZ>& z,
                                            const Eigen::MatrixBase<DC>& centroids) {
  using Scalar = typename DZ::Scalar;
  if (z.cols() != centroids.cols())
    fail(ErrorCode::dimension_mismatch, "latent width does not match centroid width");
  MatrixX<Scalar> kern(z.rows(), centroids.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < centroids.rows(); ++j)
      kern(i, j) = Scalar(1) / (Scalar(1) + (z.row(i) - centroids.row(j)).squaredNorm());
  return kern;
}

/// Soft assignment q_ij: the kernel normalized over centroids per row.
template <class DZ, class DC>
MatrixX<typename DZ::Scalar> soft_assign(const Eigen::MatrixBase<DZ>& z,
                                         const Eigen::MatrixBase<DC>& centroids) {
  if (centroids.rows() < 1) fail(ErrorCode::invalid_argument, "soft assignment needs k >= 1");
  MatrixX<typename DZ::Scalar> q = student_kernel(z, centroids);
  q.array().colwise() /= q.rowwise().sum().array();
  return q;
}

template <class Scalar>
struct TargetDistribution {
  MatrixX<Scalar> p;
  VectorX<Scalar> frequencies;  // f_j = sum_i q_ij
};

/// p_ij = (q_ij^2 / f_j) / sum_j' (q_ij'^2 / f_j') with soft cluster
/// frequencies f_j = sum_i q_ij.
template <class Derived>
TargetDistribution<typename Derived::Scalar> target_distribution(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  TargetDistribution<Scalar> out;
  out.frequencies = q.colwise().sum().transpose();
  if (!(out.frequencies.array() > Scalar(0)).all())
    fail(ErrorCode::numeric, "soft cluster frequency is zero");
  // q * (q / f) keeps p == q exactly when a single row makes f == q
  out.p = (q.array() * (q.array().rowwise() / out.frequencies.transpose().array())).matrix();
  out.p.array().colwise() /= out.p.rowwise().sum().array();
  return out;
}

/// KL(P || Q) = sum_ij p_ij log(p_ij / q_ij), natural log; p_ij = 0 terms
/// contribute nothing.
template <class DP, class DQ>
typename DP::Scalar kl_loss(const Eigen::MatrixBase<DP>& p, const Eigen::MatrixBase<DQ>& q) {
  using Scalar = typename DP::Scalar;
  if (p.rows() != q.rows() || p.cols() != q.cols())
    fail(ErrorCode::dimension_mismatch, "P and Q shapes differ");
  Scalar total(0);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (p(i, j) > Scalar(0)) total += p(i, j) * std::log(p(i, j) / q(i, j));
  return total;
}

template <class Scalar>
struct KlGradients {
  MatrixX<Scalar> d_latent;     // n x z
  MatrixX<Scalar> d_centroids;  // k x z
};

/// Gradient of kl_loss(P, soft_assign(z, c)) with P held fixed.
///
///   dL/dz_i =  2 sum_j (p_ij - s_i q_ij) k_ij (z_i - c_j)
///   dL/dc_j = -2 sum_i (p_ij - s_i q_ij) k_ij (z_i - c_j)
///
/// with k_ij the Student's t kernel and s_i = sum_j p_ij (1 for a valid P).
template <class DZ, class DC, class DP, class DQ>
KlGradients<typename DZ::Scalar> kl_grads(const Eigen::MatrixBase<DZ>& z,
                                          const Eigen::MatrixBase<DC>& centroids,
                                          const Eigen::MatrixBase<DP>& p,
                                          const Eigen::MatrixBase<DQ>& q) {
  using Scalar = typename DZ::Scalar;
  const auto n = z.rows();
  const auto k = centroids.rows();
  if (p.rows() != n || q.rows() != n || p.cols() != k || q.cols() != k)
    fail(ErrorCode::dimension_mismatch, "P/Q shapes do not match latent and centroids");
  const MatrixX<Scalar> kern = student_kernel(z, centroids);
  const VectorX<Scalar> row_mass = p.rowwise().sum();
  // w_ij = 2 (p_ij - s_i q_ij) k_ij
  MatrixX<Scalar> w = (p - (q.array().colwise() * row_mass.array()).matrix()).cwiseProduct(kern) * Scalar(2);

  KlGradients<Scalar> g;
  // sum_j w_ij (z_i - c_j) = z_i sum_j w_ij - (W C)_i
  g.d_latent = (z.array().colwise() * w.rowwise().sum().array()).matrix() - w * centroids;
  // -sum_i w_ij (z_i - c_j) = c_j sum_i w_ij - (W^T Z)_j
  g.d_centroids = (centroids.array().colwise() * w.colwise().sum().transpose().array()).matrix() -
                  w.transpose() * z;
  return g;
}

/// Row-wise argmax, lowest index on ties.
template <class Derived>
std::vector<int> hard_labels(const Eigen::MatrixBase<Derived>& q) {
  std::vector<int> out(q.rows(), 0);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < q.cols(); ++j)
      if (q(i, j) > q(i, arg)) arg = j;
    out[i] = static_cast<int>(arg);
  }
  return out;
}

struct DecConfig {
  int k = 10;
  int max_iter = 8000;            // optimizer steps
  double convergence_tol = 1e-4;  // on the fraction of changed hard labels
  int target_update_interval = 100;
  int batch_size = 0;  // 0: full batch
  OptimizerConfig optimizer;
  KMeansOptions kmeans;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DecHistoryEntry {
  int update_index = 0;
  int step = 0;
  double kl_loss = 0.0;
  double label_change_fraction = 0.0;
};

struct DecResult {
  ClusterState state;  // refined centroids, final argmax labels, latent wcss
  MlpParams params;    // encoder refined, decoder untouched
  std::vector<DecHistoryEntry> history;
  std::vector<int> init_assignments;
  Eigen::MatrixXd init_centroids;
  Eigen::MatrixXd init_latent;
  Eigen::MatrixXd latent;
  bool converged = false;
  int steps = 0;
};

/// Encodes, seeds centroids with k-means on the latent points, then
/// minimizes KL(P || Q) over encoder weights and centroids. P is
/// recomputed every `target_update_interval` steps; training stops once
/// the fraction of hard labels changed between two consecutive P updates
/// drops below `convergence_tol`, or after `max_iter` steps.
DecResult dec_fit(const Eigen::MatrixXd& x, const MlpParams& params, const DecConfig& config);

inline constexpr int kLargestCluster = -1;

int largest_cluster(const std::vector<int>& labels);

struct SubclusterConfig {
  std::vector<Eigen::Index> layer_dims;  // autoencoder dims for the members
  PretrainOptions pretrain;
  DecConfig dec;                         // dec.k is overridden by sub_k
  std::optional<MlpParams> reuse_params; // skips pretraining when set
};

struct SubclusterResult {
  int cluster_id = 0;
  std::vector<Eigen::Index> members;  // rows of the input matrix
  LabelVector labels;                 // local 0..sub_k-1, member ids
  ClusterState state;
};

/// Re-runs pretraining and DEC on the members of one cluster.
/// `cluster_id == kLargestCluster` selects the most populated cluster.
SubclusterResult subcluster(const FeatureMatrix& m, const std::vector<int>& labels, int cluster_id,
                            int sub_k, const SubclusterConfig& config);

}  // namespace embclust
