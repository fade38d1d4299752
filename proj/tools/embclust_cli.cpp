// embclust: command-line front end for the clustering pipeline.
//
//   embclust <subcommand> [--config FILE] [flags...]
//
// A config file holds "key=value" lines whose keys are flag names without
// the leading dashes; flags given on the command line win.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "embclust/dec.hpp"
#include "embclust/error.hpp"
#include "embclust/metrics.hpp"
#include "embclust/pipeline.hpp"
#include "embclust/synth.hpp"

namespace {

using namespace embclust;

std::pair<int, int> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) fail(ErrorCode::invalid_argument, "expected MIN:MAX, got '" + text + "'");
  const auto lo = parse_int_list(text.substr(0, colon));
  const auto hi = parse_int_list(text.substr(colon + 1));
  if (lo.size() != 1 || hi.size() != 1) fail(ErrorCode::invalid_argument, "expected MIN:MAX, got '" + text + "'");
  return {lo[0], hi[0]};
}

// Raw flag values; converted into PipelineConfig after parsing.
struct Flags {
  std::string features, truth, labels, out = "out";
  std::string reduce = "none", method = "kmeans";
  int k = 0;
  std::string elbow, elbow_space = "input";
  std::string dims;
  int epochs = 200, batch_size = 256;
  double lr = 1e-3;
  std::string optimizer = "adam";
  int max_iter = 8000;
  double tol = 1e-4;
  int update_interval = 100;
  int dec_batch_size = 0;
  int restarts = 10;
  std::uint64_t seed = 0;
  std::string feature_name;
  std::string k_list, z_list;
  std::string cluster = "max";
  int sub_k = 2;
  // synth
  int clusters = 10, points = 50, dim = 512;
  double center_scale = 10.0, noise = 1.0;
  std::string hierarchy;
};

void add_pipeline_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--features", f.features, "feature file (.fmat or .csv)");
  cmd->add_option("--truth", f.truth, "ground-truth labels CSV (id,label)");
  cmd->add_option("--reduce", f.reduce, "none | gap | std | pca:P, chained with '+'");
  cmd->add_option("--method", f.method, "kmeans | dec");
  cmd->add_option("--k", f.k, "cluster count");
  cmd->add_option("--elbow", f.elbow, "MIN:MAX range for elbow selection of k");
  cmd->add_option("--elbow-space", f.elbow_space, "input | latent (dec only)");
  cmd->add_option("--dims", f.dims, "encoder widths D-H1-...-Z");
  cmd->add_option("--epochs", f.epochs, "pretraining epochs");
  cmd->add_option("--batch-size", f.batch_size, "pretraining batch size");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--optimizer", f.optimizer, "adam | sgd");
  cmd->add_option("--max-iter", f.max_iter, "DEC optimizer steps");
  cmd->add_option("--tol", f.tol, "DEC label-change convergence threshold");
  cmd->add_option("--update-interval", f.update_interval, "steps between target updates");
  cmd->add_option("--dec-batch-size", f.dec_batch_size, "DEC batch size, 0 = full batch");
  cmd->add_option("--restarts", f.restarts, "k-means restarts");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--feature-name", f.feature_name, "name recorded in the report");
  cmd->add_option("--out", f.out, "output directory");
}

PipelineConfig to_config(const Flags& f) {
  PipelineConfig c;
  c.features = f.features;
  c.truth = f.truth;
  c.reduce = f.reduce;
  c.method = f.method;
  c.k = f.k;
  if (!f.elbow.empty()) c.elbow = parse_range(f.elbow);
  c.elbow_space = f.elbow_space;
  c.dims = f.dims;
  c.epochs = f.epochs;
  c.batch_size = f.batch_size;
  c.pretrain_lr = f.lr;
  c.optimizer = f.optimizer;
  c.dec.max_iter = f.max_iter;
  c.dec.convergence_tol = f.tol;
  c.dec.target_update_interval = f.update_interval;
  c.dec.batch_size = f.dec_batch_size;
  c.restarts = f.restarts;
  c.seed = f.seed;
  c.feature_name = f.feature_name;
  return c;
}

// Splices "--key value" pairs from the --config file in front of the
// command-line flags.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> rest, injected;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty()) return rest;

  const std::string text = read_file(config_path);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::invalid_argument, config_path + ":" + std::to_string(line_no) + ": expected key=value");
    injected.push_back("--" + line.substr(0, eq));
    injected.push_back(line.substr(eq + 1));
  }
  if (rest.empty()) return injected;
  std::vector<std::string> out{rest.front()};
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Deep embedded clustering and evaluation toolkit", "embclust"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "generate planted Gaussian cluster data");
  synth->add_option("--clusters", f.clusters);
  synth->add_option("--points", f.points, "points per cluster");
  synth->add_option("--dim", f.dim);
  synth->add_option("--center-scale", f.center_scale);
  synth->add_option("--noise", f.noise);
  synth->add_option("--hierarchy", f.hierarchy, "SUPER:SUB");
  synth->add_option("--seed", f.seed);
  synth->add_option("--out", f.out);

  auto* reduce = app.add_subcommand("reduce", "apply gap / std / pca to a feature file");
  reduce->add_option("--features", f.features)->required();
  reduce->add_option("--reduce", f.reduce);
  reduce->add_option("--out", f.out);

  auto* kmeans = app.add_subcommand("kmeans", "reduce, k-means, metrics");
  add_pipeline_flags(kmeans, f);
  auto* dec = app.add_subcommand("dec", "reduce, pretrain, DEC, metrics");
  add_pipeline_flags(dec, f);
  auto* runcmd = app.add_subcommand("run", "full pipeline, method chosen by --method");
  add_pipeline_flags(runcmd, f);

  auto* metrics = app.add_subcommand("metrics", "score an existing labeling");
  metrics->add_option("--features", f.features)->required();
  metrics->add_option("--labels", f.labels)->required();
  metrics->add_option("--truth", f.truth);
  metrics->add_option("--reduce", f.reduce);
  metrics->add_option("--feature-name", f.feature_name);
  metrics->add_option("--method", f.method);
  metrics->add_option("--out", f.out);

  auto* elbow = app.add_subcommand("elbow", "wcss curve and knee over a k range");
  elbow->add_option("--features", f.features)->required();
  elbow->add_option("--reduce", f.reduce);
  elbow->add_option("--elbow", f.elbow, "MIN:MAX")->required();
  elbow->add_option("--restarts", f.restarts);
  elbow->add_option("--seed", f.seed);
  elbow->add_option("--out", f.out);

  auto* ks = app.add_subcommand("ksweep", "metrics across several k");
  add_pipeline_flags(ks, f);
  ks->add_option("--k-list", f.k_list, "comma-separated k values")->required();

  auto* enc = app.add_subcommand("encsweep", "metrics across bottleneck widths");
  add_pipeline_flags(enc, f);
  enc->add_option("--z-list", f.z_list, "comma-separated bottleneck widths")->required();

  auto* sub = app.add_subcommand("subcluster", "re-cluster the members of one cluster");
  add_pipeline_flags(sub, f);
  sub->add_option("--labels", f.labels, "existing top-level labels; clustered first when absent");
  sub->add_option("--cluster", f.cluster, "cluster id or 'max'");
  sub->add_option("--sub-k", f.sub_k, "clusters within the selected cluster");

  auto* proj = app.add_subcommand("project2d", "first two principal coordinates per row");
  proj->add_option("--features", f.features)->required();
  proj->add_option("--labels", f.labels);
  proj->add_option("--reduce", f.reduce);
  proj->add_option("--out", f.out);

  auto args = expand_config(argc, argv);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  OutputFiles files;

  if (synth->parsed()) {
    SynthSpec spec;
    spec.n_clusters = f.clusters;
    spec.points_per_cluster = f.points;
    spec.dim = f.dim;
    spec.center_scale = f.center_scale;
    spec.noise_sigma = f.noise;
    spec.seed = f.seed;
    if (!f.hierarchy.empty()) {
      const auto [s, u] = parse_range(f.hierarchy);
      spec.hierarchy = Hierarchy{s, u};
      if (f.clusters == 10 && s * u != 10) spec.n_clusters = s * u;
    }
    const auto data = generate(spec);
    files["features.fmat"] = encode_fmat(data.features);
    files["truth.csv"] = format_labels_csv(data.truth);
    if (data.super_labels) files["super_labels.csv"] = format_labels_csv(*data.super_labels);
    auto sidecar = to_json(spec);
    sidecar["separation_ratio"] = separation_ratio(data.features, data.truth);
    files["spec.json"] = sidecar.dump(2) + "\n";
  } else if (reduce->parsed()) {
    const auto m = read_features(f.features);
    PcaModel pca;
    const auto steps = parse_reduction(f.reduce);
    files["reduced.fmat"] = encode_fmat(apply_reduction(m, steps, &pca));
    if (pca.num_components() > 0) {
      const auto tmp = std::filesystem::temp_directory_path() / "embclust_pca.tmp";
      save_pca(pca, tmp);
      files["pca.fmat"] = read_file(tmp);
      std::filesystem::remove(tmp);
    }
  } else if (kmeans->parsed() || dec->parsed() || runcmd->parsed()) {
    auto config = to_config(f);
    if (kmeans->parsed()) config.method = "kmeans";
    if (dec->parsed()) config.method = "dec";
    files = run_pipeline(config).files;
  } else if (metrics->parsed()) {
    const auto m = apply_reduction(read_features(f.features), parse_reduction(f.reduce));
    const auto pred = align_to(read_labels_csv(f.labels), m.ids);
    std::optional<LabelVector> truth;
    if (!f.truth.empty()) truth = align_to(read_labels_csv(f.truth), m.ids);
    auto report = evaluate(m.data, pred.labels, truth ? &truth->labels : nullptr);
    report.feature_name = f.feature_name.empty() ? std::filesystem::path(f.features).stem().string()
                                                 : f.feature_name;
    report.method = f.method;
    report.metric_space = "input";
    report.config = {{"features", f.features}, {"labels", f.labels}, {"truth", f.truth}, {"reduce", f.reduce}};
    files["report.json"] = to_json(report).dump(2) + "\n";
  } else if (elbow->parsed()) {
    const auto m = apply_reduction(read_features(f.features), parse_reduction(f.reduce));
    const auto [lo, hi] = parse_range(f.elbow);
    KMeansOptions opts;
    opts.n_init = f.restarts;
    const auto res = elbow_select(m, lo, hi, f.seed, opts);
    files["elbow.csv"] = format_elbow_csv(res);
    files["elbow.json"] = nlohmann::json{{"k", res.k}, {"knee_found", res.knee_found}}.dump(2) + "\n";
  } else if (ks->parsed()) {
    const auto rows = ksweep(to_config(f), parse_int_list(f.k_list));
    files["ksweep.csv"] = format_sweep_csv(rows, "k");
  } else if (enc->parsed()) {
    auto config = to_config(f);
    config.method = "dec";
    const auto rows = encoder_sweep(config, parse_int_list(f.z_list));
    files["encsweep.csv"] = format_sweep_csv(rows, "z");
  } else if (sub->parsed()) {
    auto config = to_config(f);
    const auto inputs = load_inputs(config);
    const auto reduced = apply_reduction(inputs.features, parse_reduction(config.reduce));
    std::vector<int> top;
    if (!f.labels.empty()) {
      top = align_to(read_labels_csv(f.labels), reduced.ids).labels;
    } else {
      top = cluster_features(config, reduced).assignments.labels;
      files["assignments.csv"] = format_labels_csv(LabelVector::from_labels(reduced, top));
    }
    const int cluster_id = f.cluster == "max" ? kLargestCluster : parse_int_list(std::to_string(std::stoi(f.cluster) + 1))[0] - 1;
    SubclusterConfig sc;
    auto dims = autoencoder_dims(config, reduced.cols());
    sc.layer_dims = dims;
    sc.pretrain.epochs = config.epochs;
    sc.pretrain.batch_size = config.batch_size;
    sc.pretrain.optimizer.lr = config.pretrain_lr;
    if (config.optimizer == "sgd") sc.pretrain.optimizer.kind = OptimizerConfig::Kind::sgd_momentum;
    sc.dec = config.dec;
    sc.dec.seed = config.seed;
    sc.dec.optimizer = sc.pretrain.optimizer;
    sc.dec.kmeans.n_init = config.restarts;
    const auto res = subcluster(reduced, top, cluster_id, f.sub_k, sc);
    files["sub_assignments.csv"] = format_labels_csv(res.labels);
    nlohmann::json summary;
    summary["cluster_id"] = res.cluster_id;
    summary["members"] = res.members.size();
    summary["sub_k"] = f.sub_k;
    summary["sub_sizes"] = cluster_sizes(res.labels);
    files["subcluster.json"] = summary.dump(2) + "\n";
  } else if (proj->parsed()) {
    const auto m = apply_reduction(read_features(f.features), parse_reduction(f.reduce));
    LabelVector labels;
    if (f.labels.empty())
      labels = LabelVector::from_labels(m, std::vector<int>(m.rows(), 0));
    else
      labels = read_labels_csv(f.labels);
    files["projection.csv"] = format_projection_csv(project2d(m), labels);
  }

  write_outputs(files, f.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const embclust::Error& e) {
    std::cerr << "error [" << embclust::to_string(e.code()) << "]: " << e.what() << "\n";
    return embclust::exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << "\n";
    return embclust::kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error [config]: " << e.what() << "\n";
    return embclust::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return embclust::kExitNumeric;
  }
}
