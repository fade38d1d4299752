#include "embclust/dec.hpp"

#include <utility>
#include <algorithm>
#include <numeric>
#include <random>

namespace embclust {

void DecConfig::validate() const {
  if (k < 1) fail(ErrorCode::invalid_argument, "k must be >= 1");
  if (max_iter < 1) fail(ErrorCode::invalid_argument, "max_iter must be >= 1");
  if (!(convergence_tol > 0.0 && convergence_tol < 1.0))
    fail(ErrorCode::invalid_argument, "convergence tolerance must lie in (0, 1)");
  if (target_update_interval < 1) fail(ErrorCode::invalid_argument, "update interval must be >= 1");
  if (batch_size < 0) fail(ErrorCode::invalid_argument, "batch size must be >= 0");
}

DecResult dec_fit(const Eigen::MatrixXd& x, const MlpParams& params, const DecConfig& config) {
  config.validate();
  params.validate_autoencoder();
  if (x.cols() != params.input_dim())
    fail(ErrorCode::dimension_mismatch, "network expects " + std::to_string(params.input_dim()) +
                                            " inputs, got " + std::to_string(x.cols()));
  if (config.k > x.rows())
    fail(ErrorCode::invalid_argument, "k = " + std::to_string(config.k) + " exceeds row count");

  const auto n = x.rows();
  const std::size_t enc_layers = params.bottleneck();
  // The decoder plays no part from here on.
  MlpParams encoder = params.prefix(enc_layers);

  DecResult result;
  result.init_latent = encode(params, x);
  const auto init = kmeans_fit(result.init_latent, config.k, config.seed, config.kmeans);
  result.init_assignments = init.assignments;
  result.init_centroids = init.centroids;
  Eigen::MatrixXd centroids = init.centroids;

  const Eigen::Index batch = config.batch_size == 0 ? n : std::min<Eigen::Index>(config.batch_size, n);
  std::mt19937_64 rng(config.seed ^ 0xdec0dec0dec0ULL);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::Index cursor = n;

  Optimizer opt(config.optimizer);
  Eigen::MatrixXd target;
  std::vector<int> last_labels = init.assignments;
  Eigen::MatrixXd xb, pb;

  for (int step = 0; step < config.max_iter; ++step) {
    if (step % config.target_update_interval == 0) {
      const Eigen::MatrixXd z = forward(encoder, x).output();
      const Eigen::MatrixXd q = soft_assign(z, centroids);
      target = target_distribution(q).p;
      const auto labels = hard_labels(q);
      long changed = 0;
      for (Eigen::Index i = 0; i < n; ++i) changed += labels[i] != last_labels[i];
      const double fraction = static_cast<double>(changed) / static_cast<double>(n);
      const double loss = kl_loss(target, q);
      if (!std::isfinite(loss)) fail(ErrorCode::numeric, "KL loss became non-finite");
      result.history.push_back({static_cast<int>(result.history.size()), step, loss, fraction});
      last_labels = labels;
      if (step > 0 && fraction < config.convergence_tol) {
        result.converged = true;
        break;
      }
    }

    if (batch == n) {
      xb = x;
      pb = target;
    } else {
      xb.resize(batch, x.cols());
      pb.resize(batch, target.cols());
      for (Eigen::Index r = 0; r < batch; ++r) {
        if (cursor == n) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        xb.row(r) = x.row(order[cursor]);
        pb.row(r) = target.row(order[cursor]);
        ++cursor;
      }
    }

    const auto cache = forward(encoder, xb);
    const Eigen::MatrixXd qb = soft_assign(cache.output(), centroids);
    auto g = kl_grads(cache.output(), centroids, pb, qb);
    const double scale = 1.0 / static_cast<double>(batch);
    g.d_latent *= scale;
    g.d_centroids *= scale;
    MlpParams enc_grads = backward(encoder, cache, g.d_latent);

    auto pblocks = blocks_of(encoder);
    GradBlocks gblocks = blocks_of(std::as_const(enc_grads));
    pblocks.emplace_back(centroids.data(), centroids.size());
    gblocks.emplace_back(g.d_centroids.data(), g.d_centroids.size());
    opt.step(pblocks, gblocks);
    result.steps = step + 1;
  }

  result.params = params;
  for (std::size_t l = 0; l < enc_layers; ++l) {
    result.params.weights[l] = encoder.weights[l];
    result.params.biases[l] = encoder.biases[l];
  }
  result.latent = forward(encoder, x).output();
  if (!result.latent.allFinite() || !centroids.allFinite())
    fail(ErrorCode::numeric, "DEC refinement produced non-finite values");
  const Eigen::MatrixXd q = soft_assign(result.latent, centroids);
  result.state.assignments = hard_labels(q);
  result.state.wcss = within_cluster_ss(result.latent, centroids, result.state.assignments);
  result.state.wcss_history = {result.state.wcss};
  result.state.iterations = result.steps;
  result.state.centroids = std::move(centroids);
  return result;
}

int largest_cluster(const std::vector<int>& labels) {
  if (labels.empty()) fail(ErrorCode::invalid_argument, "no labels");
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<long> counts(k, 0);
  for (int l : labels) ++counts[l];
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

SubclusterResult subcluster(const FeatureMatrix& m, const std::vector<int>& labels, int cluster_id,
                            int sub_k, const SubclusterConfig& config) {
  if (labels.size() != static_cast<std::size_t>(m.rows()))
    fail(ErrorCode::dimension_mismatch, "label count does not match row count");
  if (sub_k < 1) fail(ErrorCode::invalid_argument, "sub_k must be >= 1");

  SubclusterResult out;
  out.cluster_id = cluster_id == kLargestCluster ? largest_cluster(labels) : cluster_id;
  const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  if (out.cluster_id < 0 || out.cluster_id >= k)
    fail(ErrorCode::invalid_argument, "cluster id " + std::to_string(out.cluster_id) + " out of range");

  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == out.cluster_id) out.members.push_back(static_cast<Eigen::Index>(i));
  const auto count = static_cast<int>(out.members.size());
  if (count < sub_k)
    fail(ErrorCode::invalid_argument, "cluster " + std::to_string(out.cluster_id) + " has " +
                                          std::to_string(count) + " members, fewer than sub_k = " +
                                          std::to_string(sub_k));

  const FeatureMatrix sub = select_rows(m, out.members);
  std::vector<int> local(count, 0);

  if (count == sub_k) {
    std::iota(local.begin(), local.end(), 0);
    out.state.centroids = sub.data;
    out.state.assignments = local;
    out.state.wcss = 0.0;
  } else {
    MlpParams params;
    if (config.reuse_params) {
      params = *config.reuse_params;
    } else {
      auto opts = config.pretrain;
      opts.batch_size = std::min(opts.batch_size, count);
      params = pretrain(sub.data, config.layer_dims, config.dec.seed, opts).params;
    }
    DecConfig dec = config.dec;
    dec.k = sub_k;
    auto fit = dec_fit(sub.data, params, dec);
    out.state = std::move(fit.state);
    local = out.state.assignments;
  }
  out.labels = LabelVector::from_labels(sub, std::move(local));
  return out;
}

}  // namespace embclust
