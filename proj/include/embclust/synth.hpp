#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "embclust/tensor_io.hpp"

namespace embclust {

struct Hierarchy {
  int super_count = 1;
  int sub_per_super = 1;
};

/// Planted Gaussian blobs. Cluster means are N(0, center_scale^2 I);
/// points are mean + N(0, noise_sigma^2 I). With a hierarchy, super means
/// are drawn first and each sub mean sits at super + N(0, (center_scale/4)^2 I).
struct SynthSpec {
  int n_clusters = 10;
  int points_per_cluster = 50;
  int dim = 512;
  double center_scale = 10.0;
  double noise_sigma = 1.0;
  std::optional<Hierarchy> hierarchy;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  FeatureMatrix features;
  LabelVector truth;                       // planted cluster per row
  std::optional<LabelVector> super_labels; // hierarchical mode only
  Eigen::MatrixXd means;                   // n_clusters x dim
};

/// Rows are grouped by cluster, ids "p00000", "p00001", ...
SynthData generate(const SynthSpec& spec);

/// min distance between cluster centroids / max intra-cluster std, where a
/// cluster's std is sqrt(mean ||x - centroid||^2). +infinity when every
/// cluster has zero spread.
double separation_ratio(const Eigen::MatrixXd& x, const std::vector<int>& labels);
double separation_ratio(const FeatureMatrix& m, const LabelVector& truth);

nlohmann::json to_json(const SynthSpec& spec);

}  // namespace embclust
