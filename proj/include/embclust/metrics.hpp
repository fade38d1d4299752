#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "embclust/tensor_io.hpp"

namespace embclust {

/// Counts of (true class, predicted cluster) pairs with marginals.
struct ContingencyTable {
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts;
  Eigen::Matrix<long, Eigen::Dynamic, 1> row_sums;
  Eigen::Matrix<long, Eigen::Dynamic, 1> col_sums;
  long n = 0;
};

ContingencyTable contingency(const std::vector<int>& truth, const std::vector<int>& pred);

/// Mean silhouette with Euclidean distances; points in singleton clusters
/// score 0. Throws undefined_metric with fewer than two non-empty clusters.
double silhouette(const Eigen::MatrixXd& x, const std::vector<int>& labels);

/// [B / (k - 1)] / [W / (n - k)]; +infinity when W = 0. Needs
/// 2 <= k <= n - 1 non-empty clusters.
double calinski_harabasz(const Eigen::MatrixXd& x, const std::vector<int>& labels);

/// Pair-counting ARI. When the max index equals the expected index the
/// result is 1 if the index also equals it, else 0.
double adjusted_rand(const std::vector<int>& truth, const std::vector<int>& pred);

struct VMeasure {
  double homogeneity = 1.0;
  double completeness = 1.0;
  double v = 1.0;
};

/// Natural-log entropies; H(C) = 0 gives h = 1, H(K) = 0 gives c = 1.
VMeasure v_measure_parts(const std::vector<int>& truth, const std::vector<int>& pred);
double v_measure(const std::vector<int>& truth, const std::vector<int>& pred);

/// Count per label value 0..max(labels).
std::vector<long> cluster_sizes(const std::vector<int>& labels);

double silhouette(const FeatureMatrix& m, const LabelVector& labels);
double calinski_harabasz(const FeatureMatrix& m, const LabelVector& labels);
double adjusted_rand(const LabelVector& truth, const LabelVector& pred);
double v_measure(const LabelVector& truth, const LabelVector& pred);
std::vector<long> cluster_sizes(const LabelVector& labels);

struct MetricsReport {
  std::optional<double> sc;  // empty: undefined for this labeling
  std::optional<double> chi;
  bool chi_infinite = false;
  std::optional<double> ari;
  std::optional<double> vmes;
  std::vector<long> cluster_sizes;
  int k = 0;
  std::string feature_name;
  std::string method;
  std::string metric_space;
  nlohmann::json config = nlohmann::json::object();
};

/// SC and CHI on `x`; ARI and V-measure only when `truth` is given.
MetricsReport evaluate(const Eigen::MatrixXd& x, const std::vector<int>& pred,
                       const std::vector<int>* truth = nullptr);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace embclust
