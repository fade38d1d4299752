#pragma once

#include <filesystem>

#include <Eigen/Dense>

#include "embclust/tensor_io.hpp"

namespace embclust {

/// Global average pooling: treats dim_shape[0] as channels and averages
/// each channel over all trailing positions. Needs dim_shape with >= 2 dims.
FeatureMatrix gap(const FeatureMatrix& m);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // p x d, orthonormal rows
  Eigen::VectorXd explained_variance;
  double total_variance = 0.0;
  bool rank_deficient = false;  // fewer components than requested

  Eigen::Index dim() const { return mean.size(); }
  Eigen::Index num_components() const { return components.rows(); }
};

struct PcaOptions {
  // Above this input dimension the covariance is not formed; top-p
  // directions come from orthogonal iteration instead.
  Eigen::Index dense_limit = 4096;
  int max_iter = 500;
  double tol = 1e-12;
};

PcaModel pca_fit(const FeatureMatrix& m, Eigen::Index p, const PcaOptions& opts = {});
FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& m);
FeatureMatrix pca_inverse_transform(const PcaModel& model, const FeatureMatrix& m);

void save_pca(const PcaModel& model, const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);

/// Column-wise zero mean and unit population std. Zero-variance columns
/// become zeros.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> standardize_columns(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = x.rows();
  Mat out(n, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Scalar mean(0);
    for (Eigen::Index i = 0; i < n; ++i) mean += x(i, j);
    mean /= Scalar(n);
    Scalar var(0);
    for (Eigen::Index i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= Scalar(n);
    const Scalar sd = std::sqrt(var);
    const bool constant = !(sd > Scalar(0)) || sd <= std::abs(mean) * Scalar(1e-14);
    for (Eigen::Index i = 0; i < n; ++i) out(i, j) = constant ? Scalar(0) : (x(i, j) - mean) / sd;
  }
  return out;
}

FeatureMatrix standardize(const FeatureMatrix& m);

}  // namespace embclust
