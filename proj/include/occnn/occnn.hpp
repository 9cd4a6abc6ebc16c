#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "occnn/feature_set.hpp"
#include "occnn/nn.hpp"

namespace occnn {

/// When fresh pseudo-negatives are drawn during training.
enum class Resample { batch, epoch, once };

const char* to_string(Resample r) noexcept;
Resample parse_resample(const std::string& s);

struct TrainConfig {
  double sigma = 0.01;  // pseudo-negative standard deviation
  double mu = 0.0;      // pseudo-negative mean (same for every dimension)
  double lr = 1e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  Resample resample = Resample::batch;

  void validate() const;
};

struct OcCnnModel {
  nn::Network network;
  TrainConfig config;
  double final_loss = 0.0;

  std::size_t input_dim() const noexcept { return network.config.input_dim; }
  std::size_t feature_dim() const noexcept { return network.config.feature_dim(); }
};

/// Head D_in → D → D with ReLU, the default extractor.
nn::NetworkConfig default_network_config(std::size_t input_dim, std::size_t feature_dim = 0);

/// k×d draws from N(mu·1, sigma²·I).
Matrix generate_pseudo_negatives(Rng& rng, std::size_t k, std::size_t d,
                                 const TrainConfig& cfg);

struct LabeledBatch {
  Matrix rows;
  std::vector<int> labels;  // 1 = target, 0 = pseudo-negative
};

/// Real rows first (label 1), then pseudo-negative rows (label 0).
LabeledBatch assemble_batch(const Matrix& real, const Matrix& pseudo);

struct TrainResult {
  OcCnnModel model;
  std::vector<double> loss_history;  // mean batch loss per epoch
};

/// Trains head and classifier against Gaussian pseudo-negatives appended in
/// feature space. Each epoch shuffles the targets and walks them in slices of
/// batch_size; the last short slice is paired with an equal number of
/// pseudo-negatives. Throws ErrorKind::divergence on a non-finite loss.
TrainResult train(const FeatureSet& features, const TrainConfig& cfg,
                  const nn::NetworkConfig& net_cfg);

/// Target-class probability per row of x.
std::vector<double> score(const OcCnnModel& model, const Matrix& x);

/// Target-class probability for points given directly in feature space
/// (before instance normalization), e.g. fresh pseudo-negatives.
std::vector<double> score_latent(const OcCnnModel& model, const Matrix& latent);

/// Normalized head output: the classifier's input representation.
Matrix extract_features(const OcCnnModel& model, const Matrix& x);

void save_model(std::ostream& out, const OcCnnModel& model);
OcCnnModel load_model(std::istream& in);
void save_model(const std::filesystem::path& path, const OcCnnModel& model);
OcCnnModel load_model(const std::filesystem::path& path);

}  // namespace occnn
