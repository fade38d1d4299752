#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "embclust/tensor_io.hpp"

namespace embclust {

enum class Activation { identity, relu };

/// Fully connected stack. Layer l maps width dims[l] to dims[l+1] through
/// y = act(x W^T + b), so weights[l] is dims[l+1] x dims[l].
///
/// An autoencoder has symmetric dims [d, h1, ..., z, ..., h1, d]; its
/// first `bottleneck()` layers form the encoder.
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  std::vector<Activation> activations;

  std::size_t num_layers() const { return weights.size(); }
  std::vector<Eigen::Index> layer_dims() const;
  std::size_t bottleneck() const { return num_layers() / 2; }
  Eigen::Index input_dim() const { return weights.front().cols(); }
  Eigen::Index latent_dim() const { return weights[bottleneck() - 1].rows(); }

  /// Copy of the first `layers` layers.
  MlpParams prefix(std::size_t layers) const;
  MlpParams zeros_like() const;

  /// Shapes chain, biases match, everything finite.
  void validate() const;
  /// validate() plus an even, symmetric layer count.
  void validate_autoencoder() const;
};

/// He-uniform weights in +-sqrt(6 / fan_in), zero biases. ReLU on hidden
/// layers, identity on the bottleneck and output layers (identity
/// everywhere when `linear`).
MlpParams init_params(const std::vector<Eigen::Index>& layer_dims, std::uint64_t seed,
                      bool linear = false);

/// Inputs of every layer plus the final output, and pre-activations.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre;
  const Eigen::MatrixXd& output() const { return inputs.back(); }
};

ForwardCache forward(const MlpParams& net, const Eigen::MatrixXd& x);

/// Gradients for every layer given dLoss/dOutput, optionally dLoss/dInput.
MlpParams backward(const MlpParams& net, const ForwardCache& cache, const Eigen::MatrixXd& d_output,
                   Eigen::MatrixXd* d_input = nullptr);

Eigen::MatrixXd encode(const MlpParams& params, const Eigen::MatrixXd& x);
Eigen::MatrixXd reconstruct(const MlpParams& params, const Eigen::MatrixXd& x);
FeatureMatrix encode(const MlpParams& params, const FeatureMatrix& m);
FeatureMatrix reconstruct(const MlpParams& params, const FeatureMatrix& m);

/// (1/n) sum_i ||psi(phi(x_i)) - x_i||^2
double recon_loss(const MlpParams& params, const Eigen::MatrixXd& x);
MlpParams recon_grad(const MlpParams& params, const Eigen::MatrixXd& x, double* loss = nullptr);

/// Flat views over parameter tensors for the optimizers.
using ParamBlocks = std::vector<Eigen::Map<Eigen::VectorXd>>;
using GradBlocks = std::vector<Eigen::Map<const Eigen::VectorXd>>;

ParamBlocks blocks_of(MlpParams& params);
GradBlocks blocks_of(const MlpParams& grads);

struct AdamState {
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Eigen::VectorXd> m;
  std::vector<Eigen::VectorXd> v;

  void apply(const ParamBlocks& params, const GradBlocks& grads);
};

struct MomentumState {
  long step_count = 0;
  double lr = 0.01;
  double momentum = 0.9;
  std::vector<Eigen::VectorXd> velocity;

  void apply(const ParamBlocks& params, const GradBlocks& grads);
};

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state);

struct OptimizerConfig {
  enum class Kind { adam, sgd_momentum };
  Kind kind = Kind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;
};

class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& cfg);
  void step(const ParamBlocks& params, const GradBlocks& grads);
  long step_count() const;

 private:
  std::variant<AdamState, MomentumState> state_;
};

struct PretrainOptions {
  int epochs = 200;
  int batch_size = 256;
  bool linear = false;
  OptimizerConfig optimizer;
};

struct PretrainResult {
  MlpParams params;
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;  // full-data loss after each epoch
};

/// Mini-batch end-to-end training on the reconstruction loss; batch order
/// is a seeded shuffle per epoch.
PretrainResult pretrain(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& layer_dims,
                        std::uint64_t seed, const PretrainOptions& opts = {});

PretrainResult pretrain_from(const Eigen::MatrixXd& x, MlpParams init, std::uint64_t seed,
                             const PretrainOptions& opts = {});

/// Parses "512-500-10" into {512, 500, 10}.
std::vector<Eigen::Index> parse_dims(const std::string& text);
/// Mirrors encoder widths [d, h1, ..., z] into [d, h1, ..., z, ..., h1, d].
std::vector<Eigen::Index> mirror_dims(const std::vector<Eigen::Index>& encoder_dims);

/// Section archive: "activations" (1 x L, 1 = relu) then "W<l>", "b<l>".
std::string encode_params(const MlpParams& params);
MlpParams decode_params(std::string_view bytes);
void save_params(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_params(const std::filesystem::path& path);

}  // namespace embclust
