#include "embclust/reduce.hpp"

#include <cmath>
#include <random>

#include "embclust/error.hpp"

namespace embclust {

namespace {

// Largest-magnitude entry of every row made positive.
void fix_signs(Eigen::MatrixXd& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    Eigen::Index arg = 0;
    rows.row(r).cwiseAbs().maxCoeff(&arg);
    if (rows(r, arg) < 0) rows.row(r) *= -1.0;
  }
}

// Top-p eigenpairs of Xc^T Xc / (n-1) without forming the d x d matrix.
void orthogonal_iteration(const Eigen::MatrixXd& centered, Eigen::Index p, const PcaOptions& opts,
                          Eigen::MatrixXd& vectors, Eigen::VectorXd& values) {
  const auto d = centered.cols();
  const double scale = 1.0 / static_cast<double>(centered.rows() - 1);
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd basis(d, p);
  for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = normal(rng);
  basis = Eigen::HouseholderQR<Eigen::MatrixXd>(basis).householderQ() * Eigen::MatrixXd::Identity(d, p);

  Eigen::VectorXd previous = Eigen::VectorXd::Zero(p);
  for (int it = 0; it < opts.max_iter; ++it) {
    Eigen::MatrixXd next = centered.transpose() * (centered * basis) * scale;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(next);
    basis = qr.householderQ() * Eigen::MatrixXd::Identity(d, p);
    Eigen::VectorXd diag = qr.matrixQR().diagonal().cwiseAbs().head(p);
    if ((diag - previous).norm() <= opts.tol * std::max(1.0, diag.norm())) break;
    previous = diag;
  }

  // Rayleigh-Ritz on the converged subspace.
  Eigen::MatrixXd projected = centered * basis;
  Eigen::MatrixXd small = projected.transpose() * projected * scale;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(small);
  values = eig.eigenvalues().reverse();
  vectors = basis * eig.eigenvectors().rowwise().reverse();
}

}  // namespace

FeatureMatrix gap(const FeatureMatrix& m) {
  if (m.dim_shape.size() < 2)
    fail(ErrorCode::invalid_argument,
         "gap needs the raw per-row tensor shape (dim_shape with channels first and >= 2 dims)");
  const auto channels = static_cast<Eigen::Index>(m.dim_shape[0]);
  if (channels == 0 || m.cols() % channels != 0)
    fail(ErrorCode::dimension_mismatch, "dim_shape does not match column count");
  const auto spatial = m.cols() / channels;

  Eigen::MatrixXd out(m.rows(), channels);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (Eigen::Index s = 0; s < spatial; ++s) sum += m.data(i, c * spatial + s);
      out(i, c) = sum / static_cast<double>(spatial);
    }
  }
  return with_data(m, std::move(out));
}

PcaModel pca_fit(const FeatureMatrix& m, Eigen::Index p, const PcaOptions& opts) {
  const auto n = m.rows();
  const auto d = m.cols();
  if (p < 1 || p > std::min(n - 1, d))
    fail(ErrorCode::invalid_argument, "pca target dimension " + std::to_string(p) +
                                          " outside [1, min(n-1, d)] = [1, " +
                                          std::to_string(std::min(n - 1, d)) + "]");

  PcaModel model;
  model.mean = m.data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = m.data.rowwise() - model.mean.transpose();
  model.total_variance = centered.squaredNorm() / static_cast<double>(n - 1);

  Eigen::MatrixXd vectors;  // d x p, columns descending
  Eigen::VectorXd values;
  if (d <= opts.dense_limit) {
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) fail(ErrorCode::numeric, "covariance eigensolve failed");
    values = eig.eigenvalues().reverse().head(p);
    vectors = eig.eigenvectors().rowwise().reverse().leftCols(p);
  } else {
    orthogonal_iteration(centered, p, opts, vectors, values);
  }

  const double floor = 1e-10 * std::max(values.size() > 0 ? values(0) : 0.0, 0.0);
  Eigen::Index keep = 0;
  while (keep < values.size() && values(keep) > floor) ++keep;
  if (keep == 0) keep = std::min<Eigen::Index>(1, values.size());
  model.rank_deficient = keep < p;

  model.components = vectors.leftCols(keep).transpose();
  fix_signs(model.components);
  model.explained_variance = values.head(keep).cwiseMax(0.0);
  return model;
}

FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& m) {
  if (m.cols() != model.dim())
    fail(ErrorCode::dimension_mismatch, "pca model expects " + std::to_string(model.dim()) +
                                            " columns, got " + std::to_string(m.cols()));
  Eigen::MatrixXd out = (m.data.rowwise() - model.mean.transpose()) * model.components.transpose();
  return with_data(m, std::move(out));
}

FeatureMatrix pca_inverse_transform(const PcaModel& model, const FeatureMatrix& m) {
  if (m.cols() != model.num_components())
    fail(ErrorCode::dimension_mismatch, "projection width does not match component count");
  Eigen::MatrixXd out = (m.data * model.components).rowwise() + model.mean.transpose();
  return with_data(m, std::move(out));
}

void save_pca(const PcaModel& model, const std::filesystem::path& path) {
  std::vector<Section> sections;
  sections.push_back({"mean", FeatureMatrix::from_data(model.mean.transpose())});
  sections.push_back({"components", FeatureMatrix::from_data(model.components)});
  Eigen::MatrixXd variances(1, model.explained_variance.size() + 1);
  variances << model.explained_variance.transpose(), model.total_variance;
  sections.push_back({"variances", FeatureMatrix::from_data(variances)});
  write_sections(sections, path);
}

PcaModel load_pca(const std::filesystem::path& path) {
  const auto sections = read_sections(path);
  PcaModel model;
  model.mean = find_section(sections, "mean").data.row(0).transpose();
  model.components = find_section(sections, "components").data;
  const auto& v = find_section(sections, "variances").data;
  if (v.cols() != model.components.rows() + 1 || model.components.cols() != model.mean.size())
    fail(ErrorCode::dimension_mismatch, "inconsistent pca archive");
  model.explained_variance = v.row(0).head(model.components.rows()).transpose();
  model.total_variance = v(0, v.cols() - 1);
  return model;
}

FeatureMatrix standardize(const FeatureMatrix& m) {
  if (m.rows() < 2) fail(ErrorCode::invalid_argument, "standardize needs at least 2 rows");
  return with_data(m, standardize_columns(m.data));
}

}  // namespace embclust
