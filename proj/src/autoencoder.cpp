#include "embclust/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "embclust/error.hpp"

namespace embclust {

namespace {

void apply_activation(Eigen::MatrixXd& h, Activation act) {
  if (act == Activation::relu) h = h.cwiseMax(0.0);
}

void check_input(const MlpParams& params, const Eigen::MatrixXd& x) {
  if (params.num_layers() == 0) fail(ErrorCode::invalid_argument, "network has no layers");
  if (x.cols() != params.input_dim())
    fail(ErrorCode::dimension_mismatch, "network expects " + std::to_string(params.input_dim()) +
                                            " inputs, got " + std::to_string(x.cols()));
}

Eigen::MatrixXd run_layers(const MlpParams& net, const Eigen::MatrixXd& x, std::size_t layers) {
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd next = (h * net.weights[l].transpose()).rowwise() + net.biases[l].transpose();
    apply_activation(next, net.activations[l]);
    h = std::move(next);
  }
  return h;
}

}  // namespace

std::vector<Eigen::Index> MlpParams::layer_dims() const {
  std::vector<Eigen::Index> dims;
  if (weights.empty()) return dims;
  dims.push_back(weights.front().cols());
  for (const auto& w : weights) dims.push_back(w.rows());
  return dims;
}

MlpParams MlpParams::prefix(std::size_t layers) const {
  MlpParams out;
  out.weights.assign(weights.begin(), weights.begin() + layers);
  out.biases.assign(biases.begin(), biases.begin() + layers);
  out.activations.assign(activations.begin(), activations.begin() + layers);
  return out;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams out = *this;
  for (auto& w : out.weights) w.setZero();
  for (auto& b : out.biases) b.setZero();
  return out;
}

void MlpParams::validate() const {
  if (weights.empty()) fail(ErrorCode::invalid_argument, "network has no layers");
  if (biases.size() != weights.size() || activations.size() != weights.size())
    fail(ErrorCode::dimension_mismatch, "weights, biases and activations differ in length");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (biases[l].size() != weights[l].rows())
      fail(ErrorCode::dimension_mismatch, "bias " + std::to_string(l) + " has wrong length");
    if (l > 0 && weights[l].cols() != weights[l - 1].rows())
      fail(ErrorCode::dimension_mismatch, "layer " + std::to_string(l) + " input width mismatch");
    if (!weights[l].allFinite() || !biases[l].allFinite())
      fail(ErrorCode::non_finite, "layer " + std::to_string(l) + " has non-finite parameters");
  }
}

void MlpParams::validate_autoencoder() const {
  validate();
  const auto dims = layer_dims();
  if (num_layers() % 2 != 0 || !std::equal(dims.begin(), dims.end(), dims.rbegin()))
    fail(ErrorCode::invalid_argument, "autoencoder layer dims must be symmetric");
}

MlpParams init_params(const std::vector<Eigen::Index>& layer_dims, std::uint64_t seed, bool linear) {
  if (layer_dims.size() < 3 || layer_dims.size() % 2 == 0)
    fail(ErrorCode::invalid_argument, "autoencoder needs an odd number (>= 3) of layer dims");
  if (!std::equal(layer_dims.begin(), layer_dims.end(), layer_dims.rbegin()))
    fail(ErrorCode::invalid_argument, "autoencoder layer dims must be symmetric");
  for (auto d : layer_dims)
    if (d <= 0) fail(ErrorCode::invalid_argument, "layer dims must be positive");

  std::mt19937_64 rng(seed);
  MlpParams p;
  const std::size_t layers = layer_dims.size() - 1;
  const std::size_t bottleneck = layers / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto fan_in = layer_dims[l];
    const auto fan_out = layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) w(r, c) = u(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    const bool hidden = (l + 1 != bottleneck) && (l + 1 != layers);
    p.activations.push_back(hidden && !linear ? Activation::relu : Activation::identity);
  }
  return p;
}

ForwardCache forward(const MlpParams& net, const Eigen::MatrixXd& x) {
  check_input(net, x);
  ForwardCache cache;
  cache.inputs.reserve(net.num_layers() + 1);
  cache.inputs.push_back(x);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    cache.pre.push_back((cache.inputs.back() * net.weights[l].transpose()).rowwise() +
                        net.biases[l].transpose());
    Eigen::MatrixXd h = cache.pre.back();
    apply_activation(h, net.activations[l]);
    cache.inputs.push_back(std::move(h));
  }
  return cache;
}

MlpParams backward(const MlpParams& net, const ForwardCache& cache, const Eigen::MatrixXd& d_output,
                   Eigen::MatrixXd* d_input) {
  MlpParams grads = net.zeros_like();
  Eigen::MatrixXd delta = d_output;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    if (net.activations[l] == Activation::relu)
      delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    grads.weights[l].noalias() = delta.transpose() * cache.inputs[l];
    grads.biases[l] = delta.colwise().sum().transpose();
    if (l > 0 || d_input) {
      Eigen::MatrixXd next = delta * net.weights[l];
      delta = std::move(next);
    }
  }
  if (d_input) *d_input = std::move(delta);
  return grads;
}

Eigen::MatrixXd encode(const MlpParams& params, const Eigen::MatrixXd& x) {
  check_input(params, x);
  return run_layers(params, x, params.bottleneck());
}

Eigen::MatrixXd reconstruct(const MlpParams& params, const Eigen::MatrixXd& x) {
  check_input(params, x);
  return run_layers(params, x, params.num_layers());
}

FeatureMatrix encode(const MlpParams& params, const FeatureMatrix& m) {
  return with_data(m, encode(params, m.data));
}

FeatureMatrix reconstruct(const MlpParams& params, const FeatureMatrix& m) {
  return with_data(m, reconstruct(params, m.data));
}

double recon_loss(const MlpParams& params, const Eigen::MatrixXd& x) {
  if (x.rows() == 0) return 0.0;
  const Eigen::MatrixXd out = reconstruct(params, x);
  if (out.cols() != x.cols())
    fail(ErrorCode::dimension_mismatch, "network output width differs from input width");
  return (out - x).squaredNorm() / static_cast<double>(x.rows());
}

MlpParams recon_grad(const MlpParams& params, const Eigen::MatrixXd& x, double* loss) {
  const auto cache = forward(params, x);
  if (cache.output().cols() != x.cols())
    fail(ErrorCode::dimension_mismatch, "network output width differs from input width");
  const double n = static_cast<double>(std::max<Eigen::Index>(x.rows(), 1));
  const Eigen::MatrixXd residual = cache.output() - x;
  if (loss) *loss = residual.squaredNorm() / n;
  return backward(params, cache, residual * (2.0 / n));
}

ParamBlocks blocks_of(MlpParams& params) {
  ParamBlocks out;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    out.emplace_back(params.weights[l].data(), params.weights[l].size());
    out.emplace_back(params.biases[l].data(), params.biases[l].size());
  }
  return out;
}

GradBlocks blocks_of(const MlpParams& grads) {
  GradBlocks out;
  for (std::size_t l = 0; l < grads.num_layers(); ++l) {
    out.emplace_back(grads.weights[l].data(), grads.weights[l].size());
    out.emplace_back(grads.biases[l].data(), grads.biases[l].size());
  }
  return out;
}

namespace {

void check_blocks(const ParamBlocks& params, const GradBlocks& grads,
                  std::vector<Eigen::VectorXd>& slots) {
  if (params.size() != grads.size())
    fail(ErrorCode::dimension_mismatch, "parameter and gradient block counts differ");
  for (std::size_t b = 0; b < params.size(); ++b)
    if (params[b].size() != grads[b].size())
      fail(ErrorCode::dimension_mismatch, "gradient block " + std::to_string(b) + " has wrong size");
  if (slots.empty()) {
    for (const auto& p : params) slots.push_back(Eigen::VectorXd::Zero(p.size()));
  } else if (slots.size() != params.size()) {
    fail(ErrorCode::dimension_mismatch, "optimizer state does not match parameters");
  }
}

}  // namespace

void AdamState::apply(const ParamBlocks& params, const GradBlocks& grads) {
  check_blocks(params, grads, m);
  check_blocks(params, grads, v);
  ++step_count;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (std::size_t b = 0; b < params.size(); ++b) {
    m[b] = beta1 * m[b] + (1.0 - beta1) * grads[b];
    v[b] = beta2 * v[b] + (1.0 - beta2) * grads[b].cwiseAbs2();
    // Eigen::Map is a view: assignment writes through to the tensor.
    auto p = params[b];
    p.array() -= lr * (m[b].array() / c1) / ((v[b].array() / c2).sqrt() + epsilon);
  }
}

void MomentumState::apply(const ParamBlocks& params, const GradBlocks& grads) {
  check_blocks(params, grads, velocity);
  ++step_count;
  for (std::size_t b = 0; b < params.size(); ++b) {
    velocity[b] = momentum * velocity[b] - lr * grads[b];
    auto p = params[b];
    p += velocity[b];
  }
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  state.apply(blocks_of(params), blocks_of(grads));
}

Optimizer::Optimizer(const OptimizerConfig& cfg) {
  if (!(cfg.lr > 0.0)) fail(ErrorCode::invalid_argument, "learning rate must be positive");
  if (cfg.kind == OptimizerConfig::Kind::adam) {
    AdamState s;
    s.lr = cfg.lr;
    s.beta1 = cfg.beta1;
    s.beta2 = cfg.beta2;
    s.epsilon = cfg.epsilon;
    state_ = s;
  } else {
    MomentumState s;
    s.lr = cfg.lr;
    s.momentum = cfg.momentum;
    state_ = s;
  }
}

void Optimizer::step(const ParamBlocks& params, const GradBlocks& grads) {
  std::visit([&](auto& s) { s.apply(params, grads); }, state_);
}

long Optimizer::step_count() const {
  return std::visit([](const auto& s) { return s.step_count; }, state_);
}

PretrainResult pretrain_from(const Eigen::MatrixXd& x, MlpParams init, std::uint64_t seed,
                             const PretrainOptions& opts) {
  init.validate_autoencoder();
  if (opts.epochs < 1) fail(ErrorCode::invalid_argument, "epochs must be >= 1");
  if (opts.batch_size < 1 || opts.batch_size > x.rows())
    fail(ErrorCode::invalid_argument, "batch size must be in [1, n]");
  check_input(init, x);

  PretrainResult result;
  result.params = std::move(init);
  result.initial_loss = recon_loss(result.params, x);

  Optimizer opt(opts.optimizer);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(x.rows());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd batch;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < x.rows(); start += opts.batch_size) {
      const auto len = std::min<Eigen::Index>(opts.batch_size, x.rows() - start);
      batch.resize(len, x.cols());
      for (Eigen::Index r = 0; r < len; ++r) batch.row(r) = x.row(order[start + r]);
      const auto grads = recon_grad(result.params, batch);
      opt.step(blocks_of(result.params), blocks_of(grads));
    }
    const double loss = recon_loss(result.params, x);
    if (!std::isfinite(loss)) fail(ErrorCode::numeric, "pretraining diverged at epoch " + std::to_string(epoch));
    result.epoch_losses.push_back(loss);
  }
  return result;
}

PretrainResult pretrain(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& layer_dims,
                        std::uint64_t seed, const PretrainOptions& opts) {
  if (!layer_dims.empty() && layer_dims.front() != x.cols())
    fail(ErrorCode::dimension_mismatch, "first layer width " + std::to_string(layer_dims.front()) +
                                            " differs from feature width " + std::to_string(x.cols()));
  return pretrain_from(x, init_params(layer_dims, seed, opts.linear), seed, opts);
}

std::vector<Eigen::Index> parse_dims(const std::string& text) {
  std::vector<Eigen::Index> dims;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, '-')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size() || v <= 0)
      fail(ErrorCode::invalid_argument, "bad layer width '" + tok + "' in '" + text + "'");
    dims.push_back(static_cast<Eigen::Index>(v));
  }
  if (dims.size() < 2) fail(ErrorCode::invalid_argument, "need at least input and latent widths in '" + text + "'");
  return dims;
}

std::vector<Eigen::Index> mirror_dims(const std::vector<Eigen::Index>& encoder_dims) {
  std::vector<Eigen::Index> out = encoder_dims;
  for (auto it = encoder_dims.rbegin() + 1; it != encoder_dims.rend(); ++it) out.push_back(*it);
  return out;
}

std::string encode_params(const MlpParams& params) {
  params.validate();
  std::vector<Section> sections;
  Eigen::MatrixXd acts(1, static_cast<Eigen::Index>(params.num_layers()));
  for (std::size_t l = 0; l < params.num_layers(); ++l)
    acts(0, static_cast<Eigen::Index>(l)) = params.activations[l] == Activation::relu ? 1.0 : 0.0;
  sections.push_back({"activations", FeatureMatrix::from_data(acts)});
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    sections.push_back({"W" + std::to_string(l), FeatureMatrix::from_data(params.weights[l])});
    sections.push_back({"b" + std::to_string(l), FeatureMatrix::from_data(params.biases[l].transpose())});
  }
  return encode_sections(sections);
}

MlpParams decode_params(std::string_view bytes) {
  const auto sections = decode_sections(bytes);
  const auto& acts = find_section(sections, "activations").data;
  MlpParams p;
  for (Eigen::Index l = 0; l < acts.cols(); ++l) {
    p.activations.push_back(acts(0, l) != 0.0 ? Activation::relu : Activation::identity);
    p.weights.push_back(find_section(sections, "W" + std::to_string(l)).data);
    p.biases.push_back(find_section(sections, "b" + std::to_string(l)).data.row(0).transpose());
  }
  p.validate();
  return p;
}

void save_params(const MlpParams& params, const std::filesystem::path& path) {
  write_file(path, encode_params(params));
}

MlpParams load_params(const std::filesystem::path& path) { return decode_params(read_file(path)); }

}  // namespace embclust
