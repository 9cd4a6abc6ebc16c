#include "occnn/occnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "occnn/error.hpp"

namespace occnn {

const char* to_string(Resample r) noexcept {
  switch (r) {
    case Resample::batch: return "batch";
    case Resample::epoch: return "epoch";
    case Resample::once: return "once";
  }
  return "batch";
}

Resample parse_resample(const std::string& s) {
  if (s == "batch") return Resample::batch;
  if (s == "epoch") return Resample::epoch;
  if (s == "once") return Resample::once;
  fail(ErrorKind::parameter, "unknown resample policy '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail(ErrorKind::parameter, "sigma must be >= 0");
  if (!std::isfinite(mu)) fail(ErrorKind::parameter, "mu must be finite");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail(ErrorKind::parameter, "lr must be > 0");
  if (batch_size < 1) fail(ErrorKind::parameter, "batch_size must be >= 1");
  if (epochs < 1) fail(ErrorKind::parameter, "epochs must be >= 1");
}

nn::NetworkConfig default_network_config(std::size_t input_dim, std::size_t feature_dim) {
  if (feature_dim == 0) feature_dim = input_dim;
  nn::NetworkConfig cfg;
  cfg.input_dim = input_dim;
  cfg.head_dims = {feature_dim, feature_dim};
  return cfg;
}

Matrix generate_pseudo_negatives(Rng& rng, std::size_t k, std::size_t d,
                                 const TrainConfig& cfg) {
  if (k < 1 || d < 1) fail(ErrorKind::parameter, "pseudo-negative batch must be non-empty");
  return gaussian_sample(rng, k, d, cfg.mu, cfg.sigma);
}

LabeledBatch assemble_batch(const Matrix& real, const Matrix& pseudo) {
  if (real.rows() != pseudo.rows() || real.cols() != pseudo.cols()) {
    fail(ErrorKind::input, "assemble_batch: real " + std::to_string(real.rows()) + "x" +
                               std::to_string(real.cols()) + " vs pseudo " +
                               std::to_string(pseudo.rows()) + "x" +
                               std::to_string(pseudo.cols()));
  }
  LabeledBatch b{vstack(real, pseudo), std::vector<int>(2 * real.rows(), 0)};
  std::fill_n(b.labels.begin(), real.rows(), 1);
  return b;
}

namespace {

bool all_finite(const nn::NetworkParams& p) {
  return std::ranges::all_of(p.tensors(), [](auto t) {
    return std::ranges::all_of(t, [](double v) { return std::isfinite(v); });
  });
}

}  // namespace

TrainResult train(const FeatureSet& features, const TrainConfig& cfg,
                  const nn::NetworkConfig& net_cfg) {
  cfg.validate();
  net_cfg.validate();
  if (features.n() == 0) fail(ErrorKind::input, "train: empty feature set");
  if (features.d() != net_cfg.input_dim) {
    fail(ErrorKind::input, "train: feature width " + std::to_string(features.d()) +
                               " != input_dim " + std::to_string(net_cfg.input_dim));
  }
  if (!features.data.all_finite()) fail(ErrorKind::input, "train: non-finite features");

  const Rng root(cfg.seed);
  Rng init_rng = root.substream("init");
  Rng shuffle_rng = root.substream("shuffle");
  Rng noise_rng = root.substream("noise");

  const std::size_t n = features.n();
  const std::size_t d = net_cfg.feature_dim();
  const std::size_t k = std::min(cfg.batch_size, n);

  TrainResult result;
  nn::Network& net = result.model.network;
  net.config = net_cfg;
  net.params = nn::init_params(net_cfg, init_rng);
  auto adam = nn::AdamState::for_params(net.params, cfg.lr);

  Matrix shared_noise;
  if (cfg.resample == Resample::once) shared_noise = generate_pseudo_negatives(noise_rng, k, d, cfg);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.resample == Resample::epoch) {
      shared_noise = generate_pseudo_negatives(noise_rng, k, d, cfg);
    }
    const auto order = permutation(shuffle_rng, n);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += k, ++batches) {
      const std::size_t len = std::min(k, n - start);
      const Matrix real = take_rows(features.data, std::span(order).subspan(start, len));
      Matrix pseudo;
      if (cfg.resample == Resample::batch) {
        pseudo = generate_pseudo_negatives(noise_rng, len, d, cfg);
      } else {
        std::vector<std::size_t> head(len);
        std::iota(head.begin(), head.end(), std::size_t{0});
        pseudo = take_rows(shared_noise, head);
      }
      std::vector<int> labels(2 * len, 0);
      std::fill_n(labels.begin(), len, 1);

      const auto fwd = nn::forward(net, real, pseudo);
      const double loss = nn::bce_loss(fwd.probs, labels);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::divergence, "non-finite loss at epoch " + std::to_string(epoch + 1) +
                                        ", batch " + std::to_string(batches + 1));
      }
      const auto grads = nn::backward(net, fwd.cache, labels);
      nn::adam_step(net.params, grads, adam);
      // An overflowed second moment silently zeroes the step, so it counts too.
      if (!all_finite(net.params) || !all_finite(adam.m) || !all_finite(adam.v)) {
        fail(ErrorKind::divergence, "non-finite parameters after epoch " +
                                        std::to_string(epoch + 1) + ", batch " +
                                        std::to_string(batches + 1));
      }
      loss_sum += loss;
    }
    result.loss_history.push_back(loss_sum / static_cast<double>(batches));
  }
  result.model.config = cfg;
  result.model.final_loss = result.loss_history.back();
  return result;
}

namespace {

std::vector<double> target_column(const Matrix& probs) {
  std::vector<double> out(probs.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = probs(i, nn::kTargetColumn);
  return out;
}

}  // namespace

Matrix extract_features(const OcCnnModel& model, const Matrix& x) {
  return nn::extract_features(model.network, x);
}

std::vector<double> score(const OcCnnModel& model, const Matrix& x) {
  return target_column(nn::classify(model.network, extract_features(model, x)));
}

std::vector<double> score_latent(const OcCnnModel& model, const Matrix& latent) {
  if (latent.cols() != model.feature_dim()) {
    fail(ErrorKind::shape, "score_latent: width " + std::to_string(latent.cols()) +
                               " != feature_dim " + std::to_string(model.feature_dim()));
  }
  const auto& net = model.network;
  const Matrix feats =
      nn::instance_norm(latent, net.config.norm, net.params.norm_scale, net.params.norm_shift);
  return target_column(nn::classify(net, feats));
}

void save_model(std::ostream& out, const OcCnnModel& model) {
  const auto& c = model.config;
  nlohmann::json meta = {
      {"sigma", c.sigma},       {"mu", c.mu},         {"lr", c.lr},
      {"batch_size", c.batch_size}, {"epochs", c.epochs}, {"seed", c.seed},
      {"resample", to_string(c.resample)}, {"final_loss", model.final_loss},
  };
  const std::string text = meta.dump();
  nn::write_network(out, model.network,
                    {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

OcCnnModel load_model(std::istream& in) {
  std::vector<std::uint8_t> meta_bytes;
  OcCnnModel model;
  model.network = nn::read_network(in, &meta_bytes);
  if (meta_bytes.empty()) return model;
  try {
    const auto meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
    auto& c = model.config;
    c.sigma = meta.at("sigma").get<double>();
    c.mu = meta.at("mu").get<double>();
    c.lr = meta.at("lr").get<double>();
    c.batch_size = meta.at("batch_size").get<std::size_t>();
    c.epochs = meta.at("epochs").get<std::size_t>();
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.resample = parse_resample(meta.at("resample").get<std::string>());
    model.final_loss = meta.at("final_loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::corrupt, std::string("bad model metadata: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::corrupt, std::string("bad model metadata: ") + e.what());
  }
  return model;
}

void save_model(const std::filesystem::path& path, const OcCnnModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  save_model(out, model);
}

OcCnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  return load_model(in);
}

}  // namespace occnn
