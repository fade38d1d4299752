#include "embclust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "embclust/error.hpp"

namespace embclust {

namespace {

int label_count(const std::vector<int>& labels) {
  if (labels.empty()) return 0;
  const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
  if (*lo < 0) fail(ErrorCode::invalid_argument, "labels must be non-negative");
  return *hi + 1;
}

void check_rows(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    fail(ErrorCode::dimension_mismatch, "label count does not match row count");
}

double comb2(double v) { return v * (v - 1.0) / 2.0; }

double entropy(const Eigen::Matrix<long, Eigen::Dynamic, 1>& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i)
    if (counts(i) > 0) {
      const double p = static_cast<double>(counts(i)) / n;
      h -= p * std::log(p);
    }
  return h;
}

}  // namespace

ContingencyTable contingency(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size())
    fail(ErrorCode::dimension_mismatch, "labelings have different lengths");
  ContingencyTable t;
  const int r = label_count(truth);
  const int s = label_count(pred);
  t.counts.setZero(r, s);
  for (std::size_t i = 0; i < truth.size(); ++i) ++t.counts(truth[i], pred[i]);
  t.row_sums = t.counts.rowwise().sum();
  t.col_sums = t.counts.colwise().sum().transpose();
  t.n = static_cast<long>(truth.size());
  return t;
}

double silhouette(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  check_rows(x, labels);
  const auto n = x.rows();
  const int k = label_count(labels);
  std::vector<long> sizes(k, 0);
  for (int l : labels) ++sizes[l];
  const auto nonempty = std::count_if(sizes.begin(), sizes.end(), [](long c) { return c > 0; });
  if (nonempty < 2) fail(ErrorCode::undefined_metric, "silhouette needs at least two non-empty clusters");

  double total = 0.0;
  std::vector<double> sums(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) sums[labels[j]] += (x.row(i) - x.row(j)).norm();
    const int own = labels[i];
    if (sizes[own] < 2) continue;  // singleton: s(i) = 0
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double calinski_harabasz(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  check_rows(x, labels);
  const auto n = x.rows();
  const int slots = label_count(labels);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(slots, x.cols());
  std::vector<long> sizes(slots, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    sums.row(labels[i]) += x.row(i);
    ++sizes[labels[i]];
  }
  const long k = std::count_if(sizes.begin(), sizes.end(), [](long c) { return c > 0; });
  if (k < 2 || k > n - 1)
    fail(ErrorCode::undefined_metric, "Calinski-Harabasz needs 2 <= k <= n-1 (k = " +
                                          std::to_string(k) + ", n = " + std::to_string(n) + ")");
  for (int c = 0; c < slots; ++c)
    if (sizes[c] > 0) sums.row(c) /= static_cast<double>(sizes[c]);
  const Eigen::RowVectorXd mu = x.colwise().mean();

  double between = 0.0;
  for (int c = 0; c < slots; ++c)
    if (sizes[c] > 0) between += static_cast<double>(sizes[c]) * (sums.row(c) - mu).squaredNorm();
  double within = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) within += (x.row(i) - sums.row(labels[i])).squaredNorm();

  if (within == 0.0) return std::numeric_limits<double>::infinity();
  return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

double adjusted_rand(const std::vector<int>& truth, const std::vector<int>& pred) {
  const auto t = contingency(truth, pred);
  double index = 0.0, rows = 0.0, cols = 0.0;
  for (Eigen::Index i = 0; i < t.counts.size(); ++i) index += comb2(static_cast<double>(t.counts.data()[i]));
  for (Eigen::Index i = 0; i < t.row_sums.size(); ++i) rows += comb2(static_cast<double>(t.row_sums(i)));
  for (Eigen::Index j = 0; j < t.col_sums.size(); ++j) cols += comb2(static_cast<double>(t.col_sums(j)));
  const double pairs = comb2(static_cast<double>(t.n));
  if (pairs == 0.0) return 1.0;
  const double expected = rows * cols / pairs;
  const double max_index = 0.5 * (rows + cols);
  if (max_index == expected) return index == expected ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

VMeasure v_measure_parts(const std::vector<int>& truth, const std::vector<int>& pred) {
  const auto t = contingency(truth, pred);
  VMeasure out;
  if (t.n == 0) return out;
  const double n = static_cast<double>(t.n);
  const double h_c = entropy(t.row_sums, n);
  const double h_k = entropy(t.col_sums, n);
  double h_c_given_k = 0.0, h_k_given_c = 0.0;
  for (Eigen::Index c = 0; c < t.counts.rows(); ++c) {
    for (Eigen::Index k = 0; k < t.counts.cols(); ++k) {
      const double nck = static_cast<double>(t.counts(c, k));
      if (nck == 0.0) continue;
      h_c_given_k -= nck / n * std::log(nck / static_cast<double>(t.col_sums(k)));
      h_k_given_c -= nck / n * std::log(nck / static_cast<double>(t.row_sums(c)));
    }
  }
  out.homogeneity = h_c == 0.0 ? 1.0 : 1.0 - h_c_given_k / h_c;
  out.completeness = h_k == 0.0 ? 1.0 : 1.0 - h_k_given_c / h_k;
  const double sum = out.homogeneity + out.completeness;
  out.v = sum == 0.0 ? 0.0 : 2.0 * out.homogeneity * out.completeness / sum;
  return out;
}

double v_measure(const std::vector<int>& truth, const std::vector<int>& pred) {
  return v_measure_parts(truth, pred).v;
}

std::vector<long> cluster_sizes(const std::vector<int>& labels) {
  std::vector<long> sizes(label_count(labels), 0);
  for (int l : labels) ++sizes[l];
  return sizes;
}

double silhouette(const FeatureMatrix& m, const LabelVector& labels) {
  return silhouette(m.data, align_to(labels, m.ids).labels);
}

double calinski_harabasz(const FeatureMatrix& m, const LabelVector& labels) {
  return calinski_harabasz(m.data, align_to(labels, m.ids).labels);
}

double adjusted_rand(const LabelVector& truth, const LabelVector& pred) {
  return adjusted_rand(truth.labels, align_to(pred, truth.ids).labels);
}

double v_measure(const LabelVector& truth, const LabelVector& pred) {
  return v_measure(truth.labels, align_to(pred, truth.ids).labels);
}

std::vector<long> cluster_sizes(const LabelVector& labels) { return cluster_sizes(labels.labels); }

MetricsReport evaluate(const Eigen::MatrixXd& x, const std::vector<int>& pred,
                       const std::vector<int>* truth) {
  MetricsReport r;
  r.cluster_sizes = cluster_sizes(pred);
  r.k = static_cast<int>(r.cluster_sizes.size());
  try {
    r.sc = silhouette(x, pred);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::undefined_metric) throw;
  }
  try {
    const double chi = calinski_harabasz(x, pred);
    r.chi_infinite = std::isinf(chi);
    if (!r.chi_infinite) r.chi = chi;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::undefined_metric) throw;
  }
  if (truth) {
    r.ari = adjusted_rand(*truth, pred);
    r.vmes = v_measure(*truth, pred);
  }
  return r;
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["sc"] = report.sc ? nlohmann::json(*report.sc) : nlohmann::json(nullptr);
  j["chi"] = report.chi ? nlohmann::json(*report.chi) : nlohmann::json(nullptr);
  j["chi_infinite"] = report.chi_infinite;
  if (report.ari) j["ari"] = *report.ari;
  if (report.vmes) j["vmes"] = *report.vmes;
  j["cluster_sizes"] = report.cluster_sizes;
  j["k"] = report.k;
  j["feature_name"] = report.feature_name;
  j["method"] = report.method;
  j["metric_space"] = report.metric_space;
  j["config"] = report.config;
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  if (!j.at("sc").is_null()) r.sc = j.at("sc").get<double>();
  if (!j.at("chi").is_null()) r.chi = j.at("chi").get<double>();
  r.chi_infinite = j.value("chi_infinite", false);
  if (j.contains("ari")) r.ari = j.at("ari").get<double>();
  if (j.contains("vmes")) r.vmes = j.at("vmes").get<double>();
  r.cluster_sizes = j.at("cluster_sizes").get<std::vector<long>>();
  r.k = j.at("k").get<int>();
  r.feature_name = j.value("feature_name", "");
  r.method = j.value("method", "");
  r.metric_space = j.value("metric_space", "");
  r.config = j.value("config", nlohmann::json::object());
  return r;
}

}  // namespace embclust
