#include "embclust/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "embclust/error.hpp"

namespace embclust {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt_optional(const std::optional<double>& v, bool infinite = false) {
  if (infinite) return "inf";
  return v ? fmt_double(*v) : "nan";
}

OptimizerConfig optimizer_for(const PipelineConfig& config) {
  OptimizerConfig opt;
  if (config.optimizer == "adam")
    opt.kind = OptimizerConfig::Kind::adam;
  else if (config.optimizer == "sgd")
    opt.kind = OptimizerConfig::Kind::sgd_momentum;
  else
    fail(ErrorCode::invalid_argument, "optimizer must be 'adam' or 'sgd'");
  opt.lr = config.pretrain_lr;
  return opt;
}

PretrainOptions pretrain_options(const PipelineConfig& config, Eigen::Index n) {
  PretrainOptions opts;
  opts.epochs = config.epochs;
  opts.batch_size = static_cast<int>(std::min<Eigen::Index>(config.batch_size, n));
  opts.optimizer = optimizer_for(config);
  return opts;
}

DecConfig dec_config_for(const PipelineConfig& config, int k) {
  DecConfig dec = config.dec;
  dec.k = k;
  dec.seed = config.seed;
  dec.optimizer = optimizer_for(config);
  dec.kmeans.n_init = config.restarts;
  return dec;
}

KMeansOptions kmeans_options_for(const PipelineConfig& config) {
  KMeansOptions opts = config.dec.kmeans;
  opts.n_init = config.restarts;
  return opts;
}

std::optional<LabelVector> aligned_truth(const LoadedInputs& in) {
  if (!in.truth) return std::nullopt;
  return align_to(*in.truth, in.features.ids);
}

std::string default_feature_name(const PipelineConfig& config) {
  if (!config.feature_name.empty()) return config.feature_name;
  return config.features.stem().string();
}

}  // namespace

std::vector<ReduceStep> parse_reduction(const std::string& text) {
  std::vector<ReduceStep> steps;
  if (text.empty() || text == "none") return steps;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, '+')) {
    ReduceStep step;
    if (tok == "gap") {
      step.kind = ReduceStep::Kind::gap;
    } else if (tok == "std") {
      step.kind = ReduceStep::Kind::standardize;
    } else if (tok.rfind("pca:", 0) == 0) {
      step.kind = ReduceStep::Kind::pca;
      std::size_t used = 0;
      long long p = 0;
      try {
        p = std::stoll(tok.substr(4), &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != tok.size() - 4 || p < 1)
        fail(ErrorCode::invalid_argument, "bad pca target in '" + tok + "'");
      step.pca_dim = static_cast<Eigen::Index>(p);
    } else {
      fail(ErrorCode::invalid_argument, "unknown reduction '" + tok + "' (none, gap, std, pca:P)");
    }
    steps.push_back(step);
  }
  return steps;
}

FeatureMatrix apply_reduction(const FeatureMatrix& m, const std::vector<ReduceStep>& steps,
                              PcaModel* last_pca) {
  FeatureMatrix cur = m;
  for (const auto& step : steps) {
    switch (step.kind) {
      case ReduceStep::Kind::gap:
        cur = gap(cur);
        break;
      case ReduceStep::Kind::standardize:
        cur = standardize(cur);
        break;
      case ReduceStep::Kind::pca: {
        auto model = pca_fit(cur, step.pca_dim);
        cur = pca_transform(model, cur);
        if (last_pca) *last_pca = std::move(model);
        break;
      }
    }
  }
  return cur;
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j;
  j["features"] = features.string();
  j["truth"] = truth.string();
  j["reduce"] = reduce;
  j["method"] = method;
  j["k"] = k;
  j["elbow"] = elbow ? nlohmann::json(std::to_string(elbow->first) + ":" + std::to_string(elbow->second))
                     : nlohmann::json(nullptr);
  j["elbow_space"] = elbow_space;
  j["dims"] = dims;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["lr"] = pretrain_lr;
  j["optimizer"] = optimizer;
  j["max_iter"] = dec.max_iter;
  j["tol"] = dec.convergence_tol;
  j["update_interval"] = dec.target_update_interval;
  j["dec_batch_size"] = dec.batch_size;
  j["restarts"] = restarts;
  j["kmeans_max_iter"] = dec.kmeans.max_iter;
  j["kmeans_tol"] = dec.kmeans.tol;
  j["seed"] = seed;
  j["feature_name"] = feature_name;
  return j;
}

void write_outputs(const OutputFiles& files, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create output directory '" + dir.string() + "': " + ec.message());
  for (const auto& [name, bytes] : files) {
    const auto target = dir / name;
    const auto tmp = dir / (name + ".tmp");
    write_file(tmp, bytes);
    std::filesystem::rename(tmp, target, ec);
    if (ec) fail(ErrorCode::io, "cannot move '" + tmp.string() + "' into place: " + ec.message());
  }
}

LoadedInputs load_inputs(const PipelineConfig& config) {
  if (config.features.empty()) fail(ErrorCode::invalid_argument, "--features is required");
  LoadedInputs in;
  in.features = read_features(config.features);
  if (!config.truth.empty()) in.truth = read_labels_csv(config.truth);
  return in;
}

std::vector<Eigen::Index> autoencoder_dims(const PipelineConfig& config, Eigen::Index input_dim) {
  std::vector<Eigen::Index> enc;
  if (config.dims.empty()) {
    enc = {input_dim, 500, 500, 2000, 10};
  } else {
    enc = parse_dims(config.dims);
    if (enc.front() != input_dim)
      fail(ErrorCode::dimension_mismatch, "--dims starts with " + std::to_string(enc.front()) +
                                              " but reduced features have " +
                                              std::to_string(input_dim) + " columns");
  }
  return mirror_dims(enc);
}

ClusteringRun cluster_features(const PipelineConfig& config, const FeatureMatrix& reduced) {
  ClusteringRun run;
  const auto kopts = kmeans_options_for(config);
  if (!config.elbow && config.k < 1) fail(ErrorCode::invalid_argument, "either --k or --elbow is required");
  if (config.elbow_space != "input" && config.elbow_space != "latent")
    fail(ErrorCode::invalid_argument, "elbow space must be 'input' or 'latent'");
  run.k = config.k;

  if (config.method == "kmeans") {
    if (config.elbow) {
      run.elbow = elbow_select(reduced, config.elbow->first, config.elbow->second, config.seed, kopts);
      run.k = run.elbow->k;
    }
    auto state = kmeans_fit(reduced, run.k, config.seed, kopts);
    run.assignments = LabelVector::from_labels(reduced, std::move(state.assignments));
    run.space = reduced.data;
    run.metric_space = "input";
    return run;
  }
  if (config.method != "dec") fail(ErrorCode::invalid_argument, "method must be 'kmeans' or 'dec'");

  if (config.elbow && config.elbow_space == "input") {
    run.elbow = elbow_select(reduced, config.elbow->first, config.elbow->second, config.seed, kopts);
    run.k = run.elbow->k;
  }
  const auto dims = autoencoder_dims(config, reduced.cols());
  run.pretrain = pretrain(reduced.data, dims, config.seed, pretrain_options(config, reduced.rows()));
  if (config.elbow && config.elbow_space == "latent") {
    run.elbow = elbow_select(encode(run.pretrain->params, reduced.data), config.elbow->first,
                             config.elbow->second, config.seed, kopts);
    run.k = run.elbow->k;
  }
  run.dec = dec_fit(reduced.data, run.pretrain->params, dec_config_for(config, run.k));
  run.assignments = LabelVector::from_labels(reduced, run.dec->state.assignments);
  run.space = run.dec->latent;
  run.metric_space = "latent";
  return run;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  const auto steps = parse_reduction(config.reduce);
  const auto inputs = load_inputs(config);
  const auto truth = aligned_truth(inputs);

  PcaModel pca;
  const auto reduced = apply_reduction(inputs.features, steps, &pca);

  PipelineResult out;
  out.run = cluster_features(config, reduced);
  const auto& run = out.run;

  out.report = evaluate(run.space, run.assignments.labels, truth ? &truth->labels : nullptr);
  out.report.method = config.method == "dec" ? "DEC" : "K-Means";
  out.report.feature_name = default_feature_name(config);
  out.report.metric_space = run.metric_space;
  out.report.config = config.to_json();
  out.report.config["k_effective"] = run.k;
  out.report.config["reduced_dim"] = reduced.cols();
  if (run.dec) {
    const auto dims = autoencoder_dims(config, reduced.cols());
    out.report.config["dims_effective"] = dims;
    out.report.config["converged"] = run.dec->converged;
    out.report.config["steps"] = run.dec->steps;
  }

  out.files["assignments.csv"] = format_labels_csv(run.assignments);
  out.files["report.json"] = to_json(out.report).dump(2) + "\n";
  if (run.elbow) out.files["elbow.csv"] = format_elbow_csv(*run.elbow);
  if (run.pretrain) out.files["loss.csv"] = format_loss_csv(*run.pretrain);
  if (run.dec) {
    out.files["history.csv"] = format_history_csv(run.dec->history);
    out.files["params.fmat"] = encode_params(run.dec->params);
    out.files["latent.fmat"] = encode_fmat(with_data(reduced, run.dec->latent));
  }
  FeatureMatrix space = with_data(reduced, run.space);
  if (space.cols() >= 2 && space.rows() >= 3)
    out.files["projection.csv"] = format_projection_csv(project2d(space), run.assignments);
  return out;
}

std::vector<SweepRow> ksweep(const PipelineConfig& config, const FeatureMatrix& reduced,
                             const std::optional<LabelVector>& truth, const std::vector<int>& k_list) {
  if (k_list.empty()) fail(ErrorCode::invalid_argument, "k list is empty");
  std::vector<SweepRow> rows;
  std::optional<PretrainResult> pre;
  if (config.method == "dec")
    pre = pretrain(reduced.data, autoencoder_dims(config, reduced.cols()), config.seed,
                   pretrain_options(config, reduced.rows()));
  else if (config.method != "kmeans")
    fail(ErrorCode::invalid_argument, "method must be 'kmeans' or 'dec'");

  for (int k : k_list) {
    SweepRow row;
    row.param = k;
    std::vector<int> labels;
    Eigen::MatrixXd space;
    if (pre) {
      auto fit = dec_fit(reduced.data, pre->params, dec_config_for(config, k));
      labels = std::move(fit.state.assignments);
      space = std::move(fit.latent);
      row.report.metric_space = "latent";
    } else {
      labels = kmeans_fit(reduced, k, config.seed, kmeans_options_for(config)).assignments;
      space = reduced.data;
      row.report.metric_space = "input";
    }
    const auto metric_space = row.report.metric_space;
    row.report = evaluate(space, labels, truth ? &truth->labels : nullptr);
    row.report.metric_space = metric_space;
    row.report.method = config.method;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> ksweep(const PipelineConfig& config, const std::vector<int>& k_list) {
  const auto inputs = load_inputs(config);
  return ksweep(config, apply_reduction(inputs.features, parse_reduction(config.reduce)),
                aligned_truth(inputs), k_list);
}

std::vector<SweepRow> encoder_sweep(const PipelineConfig& config, const FeatureMatrix& reduced,
                                    const std::optional<LabelVector>& truth,
                                    const std::vector<int>& z_list) {
  if (z_list.empty()) fail(ErrorCode::invalid_argument, "z list is empty");
  if (config.k < 1) fail(ErrorCode::invalid_argument, "--k is required for an encoder sweep");
  std::vector<SweepRow> rows;
  for (int z : z_list) {
    if (z < 1) fail(ErrorCode::invalid_argument, "bottleneck width must be >= 1");
    auto enc = autoencoder_dims(config, reduced.cols());
    enc.resize(enc.size() / 2 + 1);
    enc.back() = z;
    const auto pre = pretrain(reduced.data, mirror_dims(enc), config.seed,
                              pretrain_options(config, reduced.rows()));
    auto fit = dec_fit(reduced.data, pre.params, dec_config_for(config, config.k));
    SweepRow row;
    row.param = z;
    row.report = evaluate(fit.latent, fit.state.assignments, truth ? &truth->labels : nullptr);
    row.report.metric_space = "latent";
    row.report.method = "dec";
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> encoder_sweep(const PipelineConfig& config, const std::vector<int>& z_list) {
  const auto inputs = load_inputs(config);
  return encoder_sweep(config, apply_reduction(inputs.features, parse_reduction(config.reduce)),
                       aligned_truth(inputs), z_list);
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows, const std::string& param_name) {
  const bool with_truth = !rows.empty() && rows.front().report.ari.has_value();
  std::string out = param_name + ",sc,chi";
  if (with_truth) out += ",ari,vmes";
  out += "\n";
  for (const auto& row : rows) {
    out += std::to_string(row.param) + "," + fmt_optional(row.report.sc) + "," +
           fmt_optional(row.report.chi, row.report.chi_infinite);
    if (with_truth) out += "," + fmt_optional(row.report.ari) + "," + fmt_optional(row.report.vmes);
    out += "\n";
  }
  return out;
}

FeatureMatrix project2d(const FeatureMatrix& m) {
  if (m.cols() < 2) fail(ErrorCode::invalid_argument, "projection needs at least 2 feature columns");
  if (m.rows() < 3) fail(ErrorCode::invalid_argument, "projection needs at least 3 rows");
  const auto model = pca_fit(m, 2);
  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(m.rows(), 2);
  coords.leftCols(model.num_components()) = pca_transform(model, m).data;
  return with_data(m, std::move(coords));
}

std::string format_projection_csv(const FeatureMatrix& coords, const LabelVector& labels) {
  const auto aligned = align_to(labels, coords.ids);
  std::string out = "id,x,y,label\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    out += coords.ids[i] + "," + fmt_double(coords.data(i, 0)) + "," + fmt_double(coords.data(i, 1)) +
           "," + std::to_string(aligned.labels[i]) + "\n";
  return out;
}

std::string format_elbow_csv(const ElbowResult& elbow) {
  std::string out = "k,wcss\n";
  for (std::size_t i = 0; i < elbow.ks.size(); ++i)
    out += std::to_string(elbow.ks[i]) + "," + fmt_double(elbow.wcss[i]) + "\n";
  return out;
}

std::string format_history_csv(const std::vector<DecHistoryEntry>& history) {
  std::string out = "update_index,kl_loss,label_change_fraction\n";
  for (const auto& h : history)
    out += std::to_string(h.update_index) + "," + fmt_double(h.kl_loss) + "," +
           fmt_double(h.label_change_fraction) + "\n";
  return out;
}

std::string format_loss_csv(const PretrainResult& pretrain) {
  std::string out = "epoch,loss\n";
  out += "0," + fmt_double(pretrain.initial_loss) + "\n";
  for (std::size_t e = 0; e < pretrain.epoch_losses.size(); ++e)
    out += std::to_string(e + 1) + "," + fmt_double(pretrain.epoch_losses[e]) + "\n";
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size() || v < 1 || v > 1'000'000'000)
      fail(ErrorCode::invalid_argument, "bad list entry '" + tok + "' in '" + text + "'");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) fail(ErrorCode::invalid_argument, "empty list");
  return out;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::io:
    case ErrorCode::bad_magic:
    case ErrorCode::version_mismatch:
    case ErrorCode::truncated:
    case ErrorCode::corrupt_header:
    case ErrorCode::duplicate_id:
    case ErrorCode::parse:
    case ErrorCode::ragged_row:
      return kExitIo;
    case ErrorCode::invalid_argument:
    case ErrorCode::dimension_mismatch:
      return kExitConfig;
    case ErrorCode::non_finite:
    case ErrorCode::undefined_metric:
    case ErrorCode::numeric:
      return kExitNumeric;
  }
  return kExitNumeric;
}

}  // namespace embclust
