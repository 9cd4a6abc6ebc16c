#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "occnn/baselines.hpp"
#include "occnn/data_io.hpp"
#include "occnn/error.hpp"
#include "occnn/eval.hpp"
#include "occnn/occnn.hpp"

namespace occnn::cli {

namespace fs = std::filesystem;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::corrupt: return kExitCorrupt;
    case ErrorKind::divergence:
    case ErrorKind::numerical:
    case ErrorKind::convergence: return kExitDivergence;
    default: return kExitUsage;
  }
}

struct Options {
  std::uint64_t seed = 0;

  // Data.
  std::string manifest;
  std::string class_name;
  std::string input;
  std::string format = "auto";
  std::string out;
  std::string loss_out;

  // Methods.
  std::vector<std::string> methods;
  eval::MethodParams params;
  std::string activation = "relu";
  std::string resample = "batch";
  std::string kernel = "rbf";

  // Protocols.
  std::string protocol = "auth";
  std::size_t novel_per_class = 50;
  std::string abnormal_class = "abnormal";
  std::size_t threads = 1;

  // Synthesis.
  std::string kind = "manifold";
  data::SynthParams synth;
};

void add_method_options(CLI::App& cmd, Options& o) {
  auto& t = o.params.train;
  cmd.add_option("--sigma", t.sigma, "Pseudo-negative standard deviation");
  cmd.add_option("--mu", t.mu, "Pseudo-negative mean");
  cmd.add_option("--lr", t.lr, "Adam learning rate");
  cmd.add_option("--batch", t.batch_size, "Target samples per mini-batch (K)");
  cmd.add_option("--epochs", t.epochs, "Training epochs");
  cmd.add_option("--head-dims", o.params.head_dims,
                 "Extractor head widths, comma separated")
      ->delimiter(',')
      ->default_str("D_in,D_in");
  cmd.add_option("--classifier-activation", o.activation, "Activation inside the classifier")
      ->check(CLI::IsMember({"relu", "none"}));
  cmd.add_option("--resample", o.resample, "When pseudo-negatives are redrawn")
      ->check(CLI::IsMember({"batch", "epoch", "once"}));
  cmd.add_option("--kernel", o.kernel, "SVM kernel")->check(CLI::IsMember({"rbf", "linear"}));
  cmd.add_option("--gamma", o.params.gamma, "rbf gamma (0: 1/(D*var(x)))");
  cmd.add_option("--nu", o.params.nu, "OC-SVM nu");
  cmd.add_option("--svdd-c", o.params.svdd_c, "SVDD C (0: 1/(0.1*n))");
  cmd.add_option("--pca-dims", o.params.pca_dims, "MPM PCA dimensions (0: min(16, D, n-1))");
  cmd.add_option("--mpm-lambda", o.params.mpm_lambda, "MPM covariance regularizer");
  cmd.add_option("--quantile", o.params.mpm_quantile, "MPM threshold quantile");
  cmd.add_option("--bsvm-lambda", o.params.bsvm_lambda, "BSVM regularizer");
}

void finalize_params(Options& o) {
  o.params.classifier_activation =
      o.activation == "none" ? nn::Activation::none : nn::Activation::relu;
  o.params.train.resample = parse_resample(o.resample);
  o.params.kernel = baselines::parse_kernel(o.kernel);
  o.params.train.validate();
}

data::FileFormat format_for(const std::string& flag, const fs::path& path) {
  if (flag != "auto") return data::parse_format(flag);
  return path.extension() == ".csv" ? data::FileFormat::csv : data::FileFormat::ocfv;
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::vector<data::LabeledSet> load_manifest_classes(const std::string& path) {
  return data::load_classes(data::load_manifest(path));
}

// ---------------------------------------------------------------- train

int cmd_train(Options& o, std::ostream& out) {
  finalize_params(o);
  const auto classes = load_manifest_classes(o.manifest);
  const auto it = std::ranges::find(classes, o.class_name, &data::LabeledSet::name);
  if (it == classes.end()) fail(ErrorKind::usage, "class '" + o.class_name + "' not in manifest");
  const FeatureSet& x = it->features;
  const std::string method = o.methods.empty() ? "occnn" : o.methods.front();
  const fs::path model_path = o.out;
  const fs::path loss_path = o.loss_out.empty() ? fs::path(o.out + ".loss.csv") : fs::path(o.loss_out);

  auto network_cfg = [&] {
    nn::NetworkConfig cfg = default_network_config(x.d());
    if (!o.params.head_dims.empty()) cfg.head_dims = o.params.head_dims;
    cfg.classifier_activation = o.params.classifier_activation;
    return cfg;
  };
  auto write_loss = [&](const std::vector<double>& history) {
    std::ofstream csv(loss_path, std::ios::trunc);
    if (!csv) fail(ErrorKind::io, "cannot write " + loss_path.string());
    csv << "epoch,loss\n";
    for (std::size_t e = 0; e < history.size(); ++e) csv << e + 1 << ',' << shortest(history[e]) << '\n';
  };

  TrainConfig cfg = o.params.train;
  cfg.seed = o.seed;
  const auto& p = o.params;
  if (method == "occnn") {
    const auto result = train(x, cfg, network_cfg());
    save_model(model_path, result.model);
    write_loss(result.loss_history);
    out << "trained occnn on '" << o.class_name << "' (n=" << x.n() << ", d=" << x.d()
        << "), final loss " << shortest(result.model.final_loss) << '\n';
    out << "sigma=" << shortest(cfg.sigma) << " lr=" << shortest(cfg.lr)
        << " batch=" << cfg.batch_size << " epochs=" << cfg.epochs << " seed=" << cfg.seed << '\n';
    return kExitOk;
  }

  using namespace baselines;
  auto kernel = [&](const Matrix& data) {
    if (p.kernel == KernelKind::rbf && p.gamma > 0.0) return KernelSpec{p.kernel, p.gamma};
    return default_kernel(data, p.kernel);
  };
  BaselineModel model;
  if (method == "ocsvm") {
    model = ocsvm_fit(x, p.nu, kernel(x.data));
  } else if (method == "svdd") {
    model = svdd_fit(x, p.svdd_c > 0.0 ? p.svdd_c : 1.0 / (0.1 * static_cast<double>(x.n())),
                     kernel(x.data));
  } else if (method == "mpm") {
    const std::size_t dims =
        p.pca_dims > 0 ? p.pca_dims : std::min<std::size_t>({16, x.d(), x.n() - 1});
    model = mpm_fit(x, dims, p.mpm_lambda, p.mpm_quantile);
  } else if (method == "bsvm") {
    Rng rng = Rng(o.seed).substream("train");
    model = bsvm_fit(x, cfg.sigma, p.bsvm_lambda, rng);
  } else if (method == "ocsvm_plus") {
    const auto result = train(x, cfg, network_cfg());
    write_loss(result.loss_history);
    KernelSpec k{p.kernel, p.kernel == KernelKind::linear ? 1.0 : p.gamma};
    model = ocsvm_plus_fit(result.model, x, p.nu, k);
  } else {
    fail(ErrorKind::usage, "unknown method '" + method + "'");
  }
  save_baseline(model_path, model);
  out << "trained " << method << " on '" << o.class_name << "' (n=" << x.n() << ", d=" << x.d()
      << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- score

int cmd_score(Options& o, std::ostream& out) {
  std::string magic(4, '\0');
  {
    std::ifstream model_in(o.manifest, std::ios::binary);
    if (!model_in) fail(ErrorKind::io, "cannot open model " + o.manifest);
    model_in.read(magic.data(), 4);
  }
  const fs::path input = o.input;
  const FeatureSet x = data::load_feature_file(input, format_for(o.format, input));

  std::vector<double> scores;
  if (magic == "OCNN") {
    const OcCnnModel model = load_model(fs::path(o.manifest));
    scores = score(model, x.data);
  } else if (magic == "OCBL") {
    const auto model = baselines::load_baseline(fs::path(o.manifest));
    scores = baselines::score(model, x.data);
  } else {
    fail(ErrorKind::corrupt, "bad magic in model file " + o.manifest);
  }

  std::ofstream file;
  std::ostream* sink = &out;
  if (!o.out.empty()) {
    file.open(o.out, std::ios::trunc);
    if (!file) fail(ErrorKind::io, "cannot write " + o.out);
    sink = &file;
  }
  for (double s : scores) *sink << shortest(s) << '\n';
  return kExitOk;
}

// ------------------------------------------------------------ benchmark

int cmd_benchmark(Options& o, std::ostream& out, std::ostream& err) {
  finalize_params(o);
  auto classes = load_manifest_classes(o.manifest);
  const Rng split_rng = Rng(o.seed).substream("splits");
  std::vector<data::ProtocolSplit> splits;
  if (o.protocol == "auth") {
    splits = data::build_auth_protocol(classes, split_rng);
  } else if (o.protocol == "novelty") {
    splits = data::build_novelty_protocol(classes, split_rng, o.novel_per_class);
  } else {
    const auto it = std::ranges::find(classes, o.abnormal_class, &data::LabeledSet::name);
    if (it == classes.end()) {
      fail(ErrorKind::protocol, "abnormality protocol needs a class named '" +
                                    o.abnormal_class + "' in the manifest");
    }
    const FeatureSet abnormal = it->features;
    classes.erase(it);
    splits = data::build_abnormality_protocol(classes, abnormal, split_rng);
  }

  std::vector<std::string> names = o.methods.empty() ? eval::method_names() : o.methods;
  std::vector<eval::Method> methods;
  for (const auto& n : names) methods.push_back(eval::make_method(n, o.params));
  const auto results = eval::run_benchmark(methods, splits, {o.seed, o.threads});

  std::size_t failures = 0;
  for (const auto& r : results) {
    for (const auto& c : r.cells) {
      if (!c.ok()) {
        err << "warning: " << r.method << " failed on " << c.class_tag << ": " << *c.error
            << " (excluded from the mean)\n";
        ++failures;
      }
    }
  }

  const std::string title = "protocol: " + o.protocol + " (" + std::to_string(splits.size()) +
                            " classes, seed " + std::to_string(o.seed) + ")";
  if (!o.out.empty()) {
    std::ofstream csv(o.out, std::ios::trunc);
    if (!csv) fail(ErrorKind::io, "cannot write " + o.out);
    eval::write_results_csv(csv, results);
    std::ofstream table(o.out + ".txt", std::ios::trunc);
    if (!table) fail(ErrorKind::io, "cannot write " + o.out + ".txt");
    eval::write_results_table(table, results, title);
    eval::write_results_table(out, results, title);
  } else {
    eval::write_results_csv(out, results);
  }
  return failures ? kExitPartialFailure : kExitOk;
}

// ---------------------------------------------------------------- synth

int cmd_synth(Options& o, std::ostream& out) {
  const auto kind = data::parse_synth_kind(o.kind);
  const auto fmt = o.format == "auto" ? data::FileFormat::ocfv : data::parse_format(o.format);
  Rng rng = Rng(o.seed).substream("synth");
  const auto classes = data::synth_dataset(kind, o.synth, rng);

  const fs::path dir = o.out;
  fs::create_directories(dir);
  data::DatasetManifest manifest;
  manifest.dim = o.synth.dim;
  manifest.format = fmt;
  manifest.base_dir = dir;
  for (const auto& c : classes) {
    const fs::path file = c.name + (fmt == data::FileFormat::csv ? ".csv" : ".ocfv");
    data::save_feature_file(c.features, dir / file, fmt);
    manifest.classes.emplace_back(c.name, file);
  }
  data::save_manifest(manifest, dir / "manifest.json");
  out << "wrote " << classes.size() << " classes x " << o.synth.n_per_class << " samples (d="
      << o.synth.dim << ") to " << (dir / "manifest.json").string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"One-class classification with pseudo-negative training, baselines and benchmarks",
               "occnn"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", o.seed, "Seed for every random stream");

  auto* train_cmd = app.add_subcommand("train", "Train a model on one class of a manifest");
  train_cmd->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required();
  train_cmd->add_option("--class", o.class_name, "Target class name")->required();
  train_cmd->add_option("--method", o.methods, "occnn | ocsvm | ocsvm_plus | svdd | mpm | bsvm")
      ->expected(1)
      ->default_str("occnn");
  train_cmd->add_option("--out", o.out, "Model output path")->required();
  train_cmd->add_option("--loss-out", o.loss_out, "Loss-history CSV (default <out>.loss.csv)");
  add_method_options(*train_cmd, o);

  auto* score_cmd = app.add_subcommand("score", "Score a feature file with a saved model");
  score_cmd->add_option("--model", o.manifest, "Model file (OCNN or OCBL)")->required();
  score_cmd->add_option("--input", o.input, "Feature file")->required();
  score_cmd->add_option("--format", o.format, "csv | ocfv | auto (by extension)");
  score_cmd->add_option("--out", o.out, "Output file (default stdout)");

  auto* bench_cmd = app.add_subcommand("benchmark", "Run methods over a split protocol");
  bench_cmd->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required();
  bench_cmd->add_option("--protocol", o.protocol, "Split protocol")
      ->check(CLI::IsMember({"abnormality", "auth", "novelty"}));
  bench_cmd->add_option("--method", o.methods, "Methods, comma separated")
      ->delimiter(',')
      ->default_str("all");
  bench_cmd->add_option("--novel-per-class", o.novel_per_class, "Novelty: rows per novel class");
  bench_cmd->add_option("--abnormal-class", o.abnormal_class,
                        "Abnormality: manifest class holding the abnormal pool");
  bench_cmd->add_option("--threads", o.threads, "Worker threads for grid cells");
  bench_cmd->add_option("--out", o.out, "Results CSV (table goes to <out>.txt and stdout)");
  add_method_options(*bench_cmd, o);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset and manifest");
  synth_cmd->add_option("--kind", o.kind, "blobs | ring | manifold");
  synth_cmd->add_option("--classes", o.synth.classes, "Number of classes");
  synth_cmd->add_option("--n", o.synth.n_per_class, "Samples per class");
  synth_cmd->add_option("--dim", o.synth.dim, "Feature dimension");
  synth_cmd->add_option("--separation", o.synth.separation, "Class anchor distance / curve length");
  synth_cmd->add_option("--noise", o.synth.noise, "Isotropic noise standard deviation");
  synth_cmd->add_option("--format", o.format, "ocfv | csv");
  synth_cmd->add_option("--out", o.out, "Output directory")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(o, out);
    if (*score_cmd) return cmd_score(o, out);
    if (*bench_cmd) return cmd_benchmark(o, out, err);
    return cmd_synth(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace occnn::cli
