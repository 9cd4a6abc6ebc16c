#include "occnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "occnn/binary_io.hpp"
#include "occnn/error.hpp"

namespace occnn::nn {

namespace {

constexpr char kMagic[] = "OCNN";
constexpr std::uint16_t kVersion = 1;
constexpr std::uint32_t kMaxDim = 1u << 20;

DenseLayer make_layer(std::size_t in, std::size_t out) {
  return {Matrix(in, out), std::vector<double>(out, 0.0)};
}

Matrix affine(const Matrix& x, const DenseLayer& layer) {
  Matrix out = matmul(x, layer.weights);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
  }
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

void relu_backward_inplace(Matrix& grad, const Matrix& pre) {
  auto g = grad.values();
  auto p = pre.values();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(p[i] > 0.0)) g[i] = 0.0;
}

// Accumulates the gradients of y = x·W + b given dy; returns dx.
Matrix dense_backward(const DenseLayer& layer, const Matrix& input, const Matrix& dy,
                      DenseLayer& grad) {
  grad.weights = matmul(input.transpose(), dy);
  grad.bias.assign(dy.cols(), 0.0);
  for (std::size_t r = 0; r < dy.rows(); ++r)
    for (std::size_t c = 0; c < dy.cols(); ++c) grad.bias[c] += dy(r, c);
  return matmul(dy, layer.weights.transpose());
}

void check_layer(const DenseLayer& layer, std::size_t in, std::size_t out, const char* what) {
  if (layer.in_dim() != in || layer.out_dim() != out || layer.bias.size() != out) {
    fail(ErrorKind::shape, std::string("parameter shape mismatch in ") + what);
  }
}

void check_params(const NetworkConfig& cfg, const NetworkParams& p) {
  if (p.head.size() != cfg.head_dims.size()) fail(ErrorKind::shape, "head depth mismatch");
  std::size_t in = cfg.input_dim;
  for (std::size_t i = 0; i < p.head.size(); ++i) {
    check_layer(p.head[i], in, cfg.head_dims[i], "head layer");
    in = cfg.head_dims[i];
  }
  const std::size_t d = cfg.feature_dim();
  const std::size_t affine_len = cfg.norm.affine ? d : 0;
  if (p.norm_scale.size() != affine_len || p.norm_shift.size() != affine_len) {
    fail(ErrorKind::shape, "instance-norm affine parameter mismatch");
  }
  check_layer(p.hidden, d, d, "classifier hidden layer");
  check_layer(p.output, d, 2, "classifier output layer");
}

}  // namespace

void NetworkConfig::validate() const {
  if (input_dim < 1) fail(ErrorKind::parameter, "input_dim must be >= 1");
  for (auto h : head_dims)
    if (h < 1) fail(ErrorKind::parameter, "head dims must be >= 1");
  if (feature_dim() < 2) {
    fail(ErrorKind::parameter, "feature_dim must be >= 2 for instance normalization");
  }
  if (!(norm.epsilon > 0.0)) fail(ErrorKind::parameter, "instance-norm epsilon must be > 0");
}

std::vector<std::span<double>> NetworkParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& layer : head) {
    out.emplace_back(layer.weights.values());
    out.emplace_back(layer.bias);
  }
  if (!norm_scale.empty()) {
    out.emplace_back(norm_scale);
    out.emplace_back(norm_shift);
  }
  out.emplace_back(hidden.weights.values());
  out.emplace_back(hidden.bias);
  out.emplace_back(output.weights.values());
  out.emplace_back(output.bias);
  return out;
}

std::vector<std::span<const double>> NetworkParams::tensors() const {
  auto mut = const_cast<NetworkParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

NetworkParams NetworkParams::zeros_like(const NetworkParams& p) {
  NetworkParams z = p;
  for (auto t : z.tensors()) std::ranges::fill(t, 0.0);
  return z;
}

NetworkParams zero_params(const NetworkConfig& config) {
  config.validate();
  NetworkParams p;
  std::size_t in = config.input_dim;
  for (auto out : config.head_dims) {
    p.head.push_back(make_layer(in, out));
    in = out;
  }
  const std::size_t d = config.feature_dim();
  if (config.norm.affine) {
    p.norm_scale.assign(d, 1.0);
    p.norm_shift.assign(d, 0.0);
  }
  p.hidden = make_layer(d, d);
  p.output = make_layer(d, 2);
  return p;
}

NetworkParams init_params(const NetworkConfig& config, Rng& rng) {
  NetworkParams p = zero_params(config);
  auto glorot = [&rng](DenseLayer& layer) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
    for (double& w : layer.weights.values()) w = bound * (2.0 * rng.uniform() - 1.0);
  };
  for (auto& layer : p.head) glorot(layer);
  glorot(p.hidden);
  // The D→2 output layer starts at zero so the untrained classifier is
  // exactly uninformative (p = 0.5, loss = ln 2).
  return p;
}

Matrix instance_norm(const Matrix& x, const InstanceNormSpec& spec,
                     std::span<const double> scale, std::span<const double> shift) {
  if (x.cols() < 2) fail(ErrorKind::parameter, "instance_norm needs at least 2 channels");
  if (!(spec.epsilon > 0.0)) fail(ErrorKind::parameter, "instance_norm epsilon must be > 0");
  const bool use_affine = spec.affine && !scale.empty();
  if (use_affine && (scale.size() != x.cols() || shift.size() != x.cols())) {
    fail(ErrorKind::shape, "instance_norm affine parameters do not match width");
  }
  const auto d = static_cast<double>(x.cols());
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row(r);
    auto dst = out.row(r);
    double mean = 0.0;
    for (double v : src) mean += v;
    mean /= d;
    double var = 0.0;
    for (double v : src) var += (v - mean) * (v - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + spec.epsilon);
    for (std::size_t c = 0; c < src.size(); ++c) {
      dst[c] = (src[c] - mean) * inv;
      if (use_affine) dst[c] = dst[c] * scale[c] + shift[c];
    }
  }
  return out;
}

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    auto p = out.row(r);
    const double top = *std::ranges::max_element(z);
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) sum += (p[c] = std::exp(z[c] - top));
    for (double& v : p) v /= sum;
  }
  return out;
}

namespace {

ForwardCache run_classifier(const Network& net, ForwardCache cache) {
  const auto& p = net.params;
  cache.hidden_pre = affine(cache.features, p.hidden);
  cache.hidden_act = net.config.classifier_activation == Activation::relu
                         ? relu(cache.hidden_pre)
                         : cache.hidden_pre;
  cache.probs = softmax(affine(cache.hidden_act, p.output));
  return cache;
}

void normalize_into(const Network& net, ForwardCache& cache) {
  const auto& spec = net.config.norm;
  cache.norm_hat = instance_norm(cache.norm_input, InstanceNormSpec{spec.epsilon, false});
  cache.norm_inv_std.resize(cache.norm_input.rows());
  const auto d = static_cast<double>(cache.norm_input.cols());
  for (std::size_t r = 0; r < cache.norm_input.rows(); ++r) {
    auto src = cache.norm_input.row(r);
    double mean = 0.0;
    for (double v : src) mean += v;
    mean /= d;
    double var = 0.0;
    for (double v : src) var += (v - mean) * (v - mean);
    cache.norm_inv_std[r] = 1.0 / std::sqrt(var / d + spec.epsilon);
  }
  if (spec.affine) {
    cache.features = instance_norm(cache.norm_input, spec, net.params.norm_scale,
                                   net.params.norm_shift);
  } else {
    cache.features = cache.norm_hat;
  }
}

}  // namespace

ForwardResult forward(const Network& net, const Matrix& x, const Matrix& latent) {
  const auto& cfg = net.config;
  check_params(cfg, net.params);
  if (x.cols() != cfg.input_dim && !(x.rows() == 0 && x.cols() == 0)) {
    fail(ErrorKind::shape, "forward: input width " + std::to_string(x.cols()) +
                               " != input_dim " + std::to_string(cfg.input_dim));
  }
  if (!latent.empty() && latent.cols() != cfg.feature_dim()) {
    fail(ErrorKind::shape, "forward: latent width " + std::to_string(latent.cols()) +
                               " != feature_dim " + std::to_string(cfg.feature_dim()));
  }
  if (x.rows() + latent.rows() == 0) fail(ErrorKind::input, "forward: empty batch");
  if (!x.all_finite() || !latent.all_finite()) {
    fail(ErrorKind::input, "forward: non-finite input");
  }

  ForwardCache cache;
  cache.params = &net.params;
  cache.n_real = x.rows();
  Matrix h = x.rows() ? x : Matrix(0, cfg.input_dim);
  for (const auto& layer : net.params.head) {
    cache.head_inputs.push_back(h);
    cache.head_pre.push_back(affine(h, layer));
    h = relu(cache.head_pre.back());
  }
  cache.norm_input = vstack(h, latent);
  normalize_into(net, cache);
  cache = run_classifier(net, std::move(cache));
  return {cache.features, cache.probs, std::move(cache)};
}

Matrix extract_features(const Network& net, const Matrix& x) {
  const auto& cfg = net.config;
  check_params(cfg, net.params);
  if (x.cols() != cfg.input_dim) {
    fail(ErrorKind::shape, "extract_features: input width " + std::to_string(x.cols()) +
                               " != input_dim " + std::to_string(cfg.input_dim));
  }
  if (!x.all_finite()) fail(ErrorKind::input, "extract_features: non-finite input");
  Matrix h = x;
  for (const auto& layer : net.params.head) h = relu(affine(h, layer));
  return instance_norm(h, cfg.norm, net.params.norm_scale, net.params.norm_shift);
}

Matrix classify(const Network& net, const Matrix& features) {
  check_params(net.config, net.params);
  if (features.cols() != net.config.feature_dim()) {
    fail(ErrorKind::shape, "classify: feature width mismatch");
  }
  ForwardCache cache;
  cache.features = features;
  return run_classifier(net, std::move(cache)).probs;
}

double bce_loss(const Matrix& probs, std::span<const int> labels) {
  if (probs.cols() != 2) fail(ErrorKind::shape, "bce_loss: probs must have 2 columns");
  if (probs.rows() != labels.size()) {
    fail(ErrorKind::shape, "bce_loss: " + std::to_string(labels.size()) + " labels for " +
                               std::to_string(probs.rows()) + " rows");
  }
  if (labels.empty()) fail(ErrorKind::input, "bce_loss: empty batch");
  double total = 0.0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] != 0 && labels[j] != 1) {
      fail(ErrorKind::input, "bce_loss: label " + std::to_string(labels[j]) +
                                 " at row " + std::to_string(j) + " is not 0 or 1");
    }
    // Probability assigned to the row's own class: p_target for targets,
    // 1 - p_target (the other softmax column) for pseudo-negatives.
    const std::size_t col = labels[j] == 1 ? kTargetColumn : 1 - kTargetColumn;
    const double q = std::clamp(probs(j, col), kProbClamp, 1.0 - kProbClamp);
    total += std::log(q);
  }
  return -total / static_cast<double>(labels.size());
}

NetworkParams backward(const Network& net, const ForwardCache& cache,
                       std::span<const int> labels) {
  const auto& cfg = net.config;
  const auto& p = net.params;
  if (cache.params != &net.params || cache.probs.rows() != labels.size() ||
      cache.head_inputs.size() != p.head.size() ||
      cache.features.cols() != cfg.feature_dim()) {
    fail(ErrorKind::usage, "backward: cache does not belong to this network/batch");
  }
  const std::size_t n = labels.size();
  NetworkParams grad = NetworkParams::zeros_like(p);

  Matrix dlogits(n, 2);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (labels[j] != 0 && labels[j] != 1) fail(ErrorKind::input, "backward: label not 0/1");
    const std::size_t own = labels[j] == 1 ? kTargetColumn : 1 - kTargetColumn;
    const double q = cache.probs(j, own);
    if (q < kProbClamp || q > 1.0 - kProbClamp) continue;  // clamp is flat there
    const double other = cache.probs(j, 1 - own);
    dlogits(j, own) = -other * inv_n;
    dlogits(j, 1 - own) = other * inv_n;
  }

  Matrix dact = dense_backward(p.output, cache.hidden_act, dlogits, grad.output);
  if (cfg.classifier_activation == Activation::relu) relu_backward_inplace(dact, cache.hidden_pre);
  Matrix dfeat = dense_backward(p.hidden, cache.features, dact, grad.hidden);

  // Instance norm: the Jacobian couples all channels of a row.
  const std::size_t d = cfg.feature_dim();
  if (cfg.norm.affine) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        grad.norm_scale[c] += dfeat(r, c) * cache.norm_hat(r, c);
        grad.norm_shift[c] += dfeat(r, c);
        dfeat(r, c) *= p.norm_scale[c];
      }
    }
  }
  Matrix dnorm(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto dy = dfeat.row(r);
    auto hat = cache.norm_hat.row(r);
    double mean_dy = 0.0;
    double mean_dy_hat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      mean_dy += dy[c];
      mean_dy_hat += dy[c] * hat[c];
    }
    mean_dy /= static_cast<double>(d);
    mean_dy_hat /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      dnorm(r, c) = cache.norm_inv_std[r] * (dy[c] - mean_dy - hat[c] * mean_dy_hat);
    }
  }

  if (p.head.empty()) return grad;
  // Only the rows that came through the head carry gradient into it.
  std::vector<std::size_t> real(cache.n_real);
  for (std::size_t i = 0; i < real.size(); ++i) real[i] = i;
  Matrix dh = take_rows(dnorm, real);
  for (std::size_t l = p.head.size(); l-- > 0;) {
    relu_backward_inplace(dh, cache.head_pre[l]);
    dh = dense_backward(p.head[l], cache.head_inputs[l], dh, grad.head[l]);
  }
  return grad;
}

AdamState AdamState::for_params(const NetworkParams& p, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = NetworkParams::zeros_like(p);
  s.v = NetworkParams::zeros_like(p);
  return s;
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state) {
  auto theta = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  if (g.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    fail(ErrorKind::usage, "adam_step: tensor count mismatch");
  }
  for (std::size_t t = 0; t < theta.size(); ++t) {
    if (g[t].size() != theta[t].size() || m[t].size() != theta[t].size() ||
        v[t].size() != theta[t].size()) {
      fail(ErrorKind::usage, "adam_step: tensor shape mismatch");
    }
  }
  ++state.step;
  const double step = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(state.beta1, step);
  const double correct2 = 1.0 - std::pow(state.beta2, step);
  for (std::size_t t = 0; t < theta.size(); ++t) {
    for (std::size_t i = 0; i < theta[t].size(); ++i) {
      const double gi = g[t][i];
      m[t][i] = state.beta1 * m[t][i] + (1.0 - state.beta1) * gi;
      v[t][i] = state.beta2 * v[t][i] + (1.0 - state.beta2) * gi * gi;
      const double m_hat = m[t][i] / correct1;
      const double v_hat = v[t][i] / correct2;
      theta[t][i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps_hat);
    }
  }
}

void write_network(std::ostream& out, const Network& net,
                   std::span<const std::uint8_t> metadata) {
  const auto& cfg = net.config;
  check_params(cfg, net.params);
  io::Writer w(out);
  w.magic({kMagic, 4});
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(1 + cfg.head_dims.size()));
  w.u32(static_cast<std::uint32_t>(cfg.input_dim));
  for (auto h : cfg.head_dims) w.u32(static_cast<std::uint32_t>(h));
  w.u8(static_cast<std::uint8_t>(cfg.classifier_activation));
  w.u8(cfg.norm.affine ? 1 : 0);
  w.f64(cfg.norm.epsilon);
  for (auto tensor : net.params.tensors())
    for (double v : tensor) w.f32(static_cast<float>(v));
  w.u32(static_cast<std::uint32_t>(metadata.size()));
  if (!metadata.empty()) w.bytes(metadata.data(), metadata.size());
}

Network read_network(std::istream& in, std::vector<std::uint8_t>* metadata) {
  io::Reader r(in);
  r.expect_magic({kMagic, 4});
  const auto version = r.u16();
  if (version != kVersion) {
    fail(ErrorKind::corrupt, "unsupported model version " + std::to_string(version));
  }
  Network net;
  const auto ndims = r.u32();
  if (ndims < 1 || ndims > 64) fail(ErrorKind::corrupt, "implausible layer count");
  net.config.input_dim = r.u32();
  for (std::uint32_t i = 1; i < ndims; ++i) net.config.head_dims.push_back(r.u32());
  for (auto d : net.config.head_dims)
    if (d > kMaxDim) fail(ErrorKind::corrupt, "implausible layer width");
  if (net.config.input_dim > kMaxDim) fail(ErrorKind::corrupt, "implausible input width");
  const auto act = r.u8();
  if (act > 1) fail(ErrorKind::corrupt, "unknown classifier activation tag");
  net.config.classifier_activation = static_cast<Activation>(act);
  const auto affine_flag = r.u8();
  if (affine_flag > 1) fail(ErrorKind::corrupt, "bad affine flag");
  net.config.norm.affine = affine_flag == 1;
  net.config.norm.epsilon = r.f64();
  try {
    net.config.validate();
  } catch (const Error& e) {
    fail(ErrorKind::corrupt, std::string("invalid stored config: ") + e.what());
  }
  net.params = zero_params(net.config);
  for (auto tensor : net.params.tensors()) {
    for (double& v : tensor) {
      v = static_cast<double>(r.f32());
      if (!std::isfinite(v)) fail(ErrorKind::corrupt, "non-finite parameter in model file");
    }
  }
  const auto meta_len = r.u32();
  if (meta_len > (1u << 26)) fail(ErrorKind::corrupt, "implausible metadata length");
  std::vector<std::uint8_t> meta(meta_len);
  if (meta_len) r.bytes(meta.data(), meta.size());
  if (!r.at_end()) fail(ErrorKind::corrupt, "trailing bytes after model payload");
  if (metadata) *metadata = std::move(meta);
  return net;
}

}  // namespace occnn::nn
