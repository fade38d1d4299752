#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "embclust/autoencoder.hpp"
#include "embclust/dec.hpp"
#include "embclust/kmeans.hpp"
#include "embclust/metrics.hpp"
#include "embclust/reduce.hpp"
#include "embclust/tensor_io.hpp"

namespace embclust {

struct ReduceStep {
  enum class Kind { gap, pca, standardize };
  Kind kind = Kind::gap;
  Eigen::Index pca_dim = 0;
};

/// "none", "gap", "std", "pca:P", or a '+'-joined chain such as "gap+pca:64".
std::vector<ReduceStep> parse_reduction(const std::string& text);

FeatureMatrix apply_reduction(const FeatureMatrix& m, const std::vector<ReduceStep>& steps,
                              PcaModel* last_pca = nullptr);

struct PipelineConfig {
  std::filesystem::path features;
  std::filesystem::path truth;  // optional LabelVector CSV
  std::string reduce = "none";
  std::string method = "kmeans";
  int k = 0;
  std::optional<std::pair<int, int>> elbow;
  std::string elbow_space = "input";  // input | latent (dec only)
  std::string dims;                   // encoder widths "D-H1-...-Z"; empty: D-500-500-2000-10
  int epochs = 200;
  int batch_size = 256;
  double pretrain_lr = 1e-3;
  std::string optimizer = "adam";  // adam | sgd
  DecConfig dec;
  int restarts = 10;
  std::uint64_t seed = 0;
  std::string feature_name;

  nlohmann::json to_json() const;
};

/// Files keyed by name, contents as bytes.
using OutputFiles = std::map<std::string, std::string>;

/// Writes every file into `dir` (created if needed).
void write_outputs(const OutputFiles& files, const std::filesystem::path& dir);

struct LoadedInputs {
  FeatureMatrix features;
  std::optional<LabelVector> truth;
};

LoadedInputs load_inputs(const PipelineConfig& config);

/// Encoder dims resolved against the reduced feature width, mirrored into
/// full autoencoder dims.
std::vector<Eigen::Index> autoencoder_dims(const PipelineConfig& config, Eigen::Index input_dim);

struct ClusteringRun {
  LabelVector assignments;
  Eigen::MatrixXd space;  // the space clustering ran in
  std::string metric_space;
  std::optional<DecResult> dec;
  std::optional<PretrainResult> pretrain;
  std::optional<ElbowResult> elbow;
  int k = 0;
};

/// k-means or pretrain + DEC on already reduced features.
ClusteringRun cluster_features(const PipelineConfig& config, const FeatureMatrix& reduced);

struct PipelineResult {
  OutputFiles files;
  MetricsReport report;
  ClusteringRun run;
};

/// reduce -> cluster -> metrics; returns the artifact files without
/// touching the filesystem beyond reading inputs.
PipelineResult run_pipeline(const PipelineConfig& config);

struct SweepRow {
  int param = 0;  // k or bottleneck width
  MetricsReport report;
};

std::vector<SweepRow> ksweep(const PipelineConfig& config, const std::vector<int>& k_list);
std::vector<SweepRow> ksweep(const PipelineConfig& config, const FeatureMatrix& reduced,
                             const std::optional<LabelVector>& truth, const std::vector<int>& k_list);

std::vector<SweepRow> encoder_sweep(const PipelineConfig& config, const std::vector<int>& z_list);
std::vector<SweepRow> encoder_sweep(const PipelineConfig& config, const FeatureMatrix& reduced,
                                    const std::optional<LabelVector>& truth,
                                    const std::vector<int>& z_list);

/// "<param_name>,sc,chi[,ari,vmes]" rows.
std::string format_sweep_csv(const std::vector<SweepRow>& rows, const std::string& param_name);

/// First two principal coordinates. A rank-one input gets a zero second
/// coordinate.
FeatureMatrix project2d(const FeatureMatrix& m);
/// "id,x,y,label" rows.
std::string format_projection_csv(const FeatureMatrix& coords, const LabelVector& labels);

std::string format_elbow_csv(const ElbowResult& elbow);
std::string format_history_csv(const std::vector<DecHistoryEntry>& history);
std::string format_loss_csv(const PretrainResult& pretrain);

/// Parses "5,10,20".
std::vector<int> parse_int_list(const std::string& text);

/// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

int exit_code_for(ErrorCode code);

}  // namespace embclust
