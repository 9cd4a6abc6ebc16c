#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "occnn/numerics.hpp"

namespace occnn::nn {

// Column of the two-way softmax that holds the target-class probability.
inline constexpr std::size_t kTargetColumn = 1;
inline constexpr double kProbClamp = 1e-12;

enum class Activation : std::uint8_t { none = 0, relu = 1 };

struct DenseLayer {
  Matrix weights;            // in_dim × out_dim
  std::vector<double> bias;  // out_dim

  std::size_t in_dim() const noexcept { return weights.rows(); }
  std::size_t out_dim() const noexcept { return weights.cols(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct InstanceNormSpec {
  double epsilon = 1e-5;
  bool affine = false;
};

/// Extractor head (dense + ReLU per entry of head_dims), instance norm, then
/// the classifier: dense D→D, activation, dense D→2, softmax. An empty
/// head_dims is a pass-through head with feature_dim == input_dim.
struct NetworkConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> head_dims;
  InstanceNormSpec norm;
  Activation classifier_activation = Activation::relu;

  std::size_t feature_dim() const noexcept {
    return head_dims.empty() ? input_dim : head_dims.back();
  }
  void validate() const;

  friend bool operator==(const NetworkConfig& a, const NetworkConfig& b) {
    return a.input_dim == b.input_dim && a.head_dims == b.head_dims &&
           a.norm.epsilon == b.norm.epsilon && a.norm.affine == b.norm.affine &&
           a.classifier_activation == b.classifier_activation;
  }
};

/// Trainable parameters. Gradients and Adam moments reuse this type so every
/// per-tensor loop walks the same layout.
struct NetworkParams {
  std::vector<DenseLayer> head;
  std::vector<double> norm_scale;  // empty unless norm.affine
  std::vector<double> norm_shift;
  DenseLayer hidden;  // D → D
  DenseLayer output;  // D → 2

  // Every trainable tensor in serialization order: head layers (weights then
  // bias), norm scale/shift when present, hidden, output.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t parameter_count() const;

  static NetworkParams zeros_like(const NetworkParams& p);
  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

struct Network {
  NetworkConfig config;
  NetworkParams params;
};

/// Glorot-uniform weights, zero biases, unit scale / zero shift.
NetworkParams init_params(const NetworkConfig& config, Rng& rng);

/// Parameters of the right shapes, all zero (symmetric model: every score 0.5).
NetworkParams zero_params(const NetworkConfig& config);

/// Per-row standardization across the D channels with population variance.
Matrix instance_norm(const Matrix& x, const InstanceNormSpec& spec,
                     std::span<const double> scale = {},
                     std::span<const double> shift = {});

Matrix softmax(const Matrix& logits);

struct ForwardCache {
  // Head: input to each dense layer and its pre-activation.
  std::vector<Matrix> head_inputs;
  std::vector<Matrix> head_pre;
  std::size_t n_real = 0;  // rows that came through the head
  Matrix norm_input;       // head output with latent rows appended
  Matrix norm_hat;         // standardized, before affine
  std::vector<double> norm_inv_std;
  Matrix features;  // instance-norm output (classifier input)
  Matrix hidden_pre;
  Matrix hidden_act;
  Matrix probs;
  const NetworkParams* params = nullptr;  // identity check for backward
};

struct ForwardResult {
  Matrix features;
  Matrix probs;
  ForwardCache cache;
};

/// Runs x through the head, appends `latent` rows (already in feature space)
/// after the head output, normalizes every row and classifies. `latent` may be
/// empty.
ForwardResult forward(const Network& net, const Matrix& x, const Matrix& latent = {});

/// Head + instance norm only.
Matrix extract_features(const Network& net, const Matrix& x);

/// Classifier probabilities for already-normalized features.
Matrix classify(const Network& net, const Matrix& features);

/// Binary cross-entropy averaged over the batch; labels are 1 for target rows
/// and 0 for pseudo-negatives.
double bce_loss(const Matrix& probs, std::span<const int> labels);

/// Exact gradient of bce_loss ∘ forward with respect to every parameter.
NetworkParams backward(const Network& net, const ForwardCache& cache,
                       std::span<const int> labels);

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
  std::uint64_t step = 0;
  NetworkParams m;
  NetworkParams v;

  static AdamState for_params(const NetworkParams& p, double lr = 1e-4);
};

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state);

// Binary model container ("OCNN", version 1). `metadata` is an opaque block
// appended after the parameters, length-prefixed; empty is allowed.
void write_network(std::ostream& out, const Network& net,
                   std::span<const std::uint8_t> metadata = {});
Network read_network(std::istream& in, std::vector<std::uint8_t>* metadata = nullptr);

}  // namespace occnn::nn
