#include "embclust/synth.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "embclust/error.hpp"

namespace embclust {

void SynthSpec::validate() const {
  if (n_clusters < 1 || points_per_cluster < 1 || dim < 1)
    fail(ErrorCode::invalid_argument, "cluster count, points per cluster and dim must be >= 1");
  if (!(noise_sigma >= 0.0) || !(center_scale >= 0.0))
    fail(ErrorCode::invalid_argument, "noise_sigma and center_scale must be >= 0");
  if (hierarchy) {
    if (hierarchy->super_count < 1 || hierarchy->sub_per_super < 1)
      fail(ErrorCode::invalid_argument, "hierarchy counts must be >= 1");
    if (hierarchy->super_count * hierarchy->sub_per_super != n_clusters)
      fail(ErrorCode::invalid_argument, "n_clusters must equal super_count * sub_per_super");
  }
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index len, double scale) {
    Eigen::RowVectorXd v(len);
    for (Eigen::Index i = 0; i < len; ++i) v(i) = normal(rng) * scale;
    return v;
  };

  SynthData out;
  out.means.resize(spec.n_clusters, spec.dim);
  std::vector<int> super_of(spec.n_clusters, 0);
  if (spec.hierarchy) {
    const auto& h = *spec.hierarchy;
    for (int s = 0; s < h.super_count; ++s) {
      const Eigen::RowVectorXd super_mean = draw(spec.dim, spec.center_scale);
      for (int u = 0; u < h.sub_per_super; ++u) {
        const int c = s * h.sub_per_super + u;
        out.means.row(c) = super_mean + draw(spec.dim, spec.center_scale / 4.0);
        super_of[c] = s;
      }
    }
  } else {
    for (int c = 0; c < spec.n_clusters; ++c) out.means.row(c) = draw(spec.dim, spec.center_scale);
  }

  const Eigen::Index n = static_cast<Eigen::Index>(spec.n_clusters) * spec.points_per_cluster;
  FeatureMatrix& f = out.features;
  f.data.resize(n, spec.dim);
  f.ids.reserve(n);
  std::vector<long long> labels, supers;
  char buf[32];
  for (int c = 0; c < spec.n_clusters; ++c) {
    for (int p = 0; p < spec.points_per_cluster; ++p) {
      const auto row = static_cast<Eigen::Index>(f.ids.size());
      f.data.row(row) = out.means.row(c) + draw(spec.dim, spec.noise_sigma);
      std::snprintf(buf, sizeof buf, "p%05lld", static_cast<long long>(row));
      f.ids.emplace_back(buf);
      labels.push_back(c);
      supers.push_back(super_of[c]);
    }
  }
  out.truth = LabelVector::from_raw(f.ids, labels);
  if (spec.hierarchy) out.super_labels = LabelVector::from_raw(f.ids, supers);
  return out;
}

double separation_ratio(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    fail(ErrorCode::dimension_mismatch, "label count does not match row count");
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(k, x.cols());
  std::vector<long> sizes(k, 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    centroids.row(labels[i]) += x.row(i);
    ++sizes[labels[i]];
  }
  std::vector<int> present;
  for (int c = 0; c < k; ++c)
    if (sizes[c] > 0) {
      centroids.row(c) /= static_cast<double>(sizes[c]);
      present.push_back(c);
    }
  if (present.size() < 2) fail(ErrorCode::invalid_argument, "separation ratio needs at least two clusters");

  std::vector<double> spread(k, 0.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) spread[labels[i]] += (x.row(i) - centroids.row(labels[i])).squaredNorm();
  double max_std = 0.0;
  for (int c : present) max_std = std::max(max_std, std::sqrt(spread[c] / static_cast<double>(sizes[c])));

  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < present.size(); ++a)
    for (std::size_t b = a + 1; b < present.size(); ++b)
      min_dist = std::min(min_dist, (centroids.row(present[a]) - centroids.row(present[b])).norm());

  // spread at round-off level of the coordinates counts as none
  if (max_std <= 64.0 * std::numeric_limits<double>::epsilon() * x.cwiseAbs().maxCoeff())
    return std::numeric_limits<double>::infinity();
  return min_dist / max_std;
}

double separation_ratio(const FeatureMatrix& m, const LabelVector& truth) {
  return separation_ratio(m.data, align_to(truth, m.ids).labels);
}

nlohmann::json to_json(const SynthSpec& spec) {
  nlohmann::json j;
  j["n_clusters"] = spec.n_clusters;
  j["points_per_cluster"] = spec.points_per_cluster;
  j["dim"] = spec.dim;
  j["center_scale"] = spec.center_scale;
  j["noise_sigma"] = spec.noise_sigma;
  j["seed"] = spec.seed;
  if (spec.hierarchy) {
    j["super_count"] = spec.hierarchy->super_count;
    j["sub_per_super"] = spec.hierarchy->sub_per_super;
  } else {
    j["hierarchy"] = nullptr;
  }
  return j;
}

}  // namespace embclust
