#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "../support/oracles.hpp"
#include "occnn/error.hpp"
#include "occnn/nn.hpp"

using namespace occnn;
using namespace occnn::nn;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected occnn::Error");
  return ErrorKind::usage;
}

// Every parameter drawn from N(0, 0.5²), so no layer is degenerate.
Network random_network(const NetworkConfig& cfg, Rng& rng) {
  Network net{cfg, init_params(cfg, rng)};
  for (auto t : net.params.tensors()) {
    const Matrix g = gaussian_sample(rng, 1, t.size(), 0.0, 0.5);
    std::copy(g.values().begin(), g.values().end(), t.begin());
  }
  return net;
}

std::vector<int> batch_labels(std::size_t real, std::size_t pseudo) {
  std::vector<int> labels(real, 1);
  labels.resize(real + pseudo, 0);
  return labels;
}

}  // namespace

TEST_CASE("instance norm: zero mean, unit variance per row") {
  Rng rng(1);
  const Matrix x = gaussian_sample(rng, 5, 7, 3.0, 2.0);
  const Matrix y = instance_norm(x, {});
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double mean = 0.0, var = 0.0;
    for (double v : y.row(r)) mean += v;
    mean /= 7.0;
    for (double v : y.row(r)) var += (v - mean) * (v - mean);
    var /= 7.0;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-5));
  }
  // A constant row maps to zeros instead of dividing by zero.
  const Matrix flat(1, 4, 2.5);
  const Matrix normed = instance_norm(flat, {});
  for (double v : normed.values()) CHECK(v == 0.0);
}

TEST_CASE("softmax rows sum to one and survive large logits") {
  const Matrix p = softmax(Matrix{{1000.0, 1001.0}, {-3.0, 2.0}});
  for (std::size_t r = 0; r < 2; ++r) CHECK(p(r, 0) + p(r, 1) == doctest::Approx(1.0));
  CHECK(p(0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("symmetric model scores 0.5 and loses exactly ln 2") {
  NetworkConfig cfg{6, {5, 4}};
  Rng rng(2);
  Network net{cfg, zero_params(cfg)};
  const Matrix x = gaussian_sample(rng, 9, 6, 1.0, 3.0);
  const Matrix latent = gaussian_sample(rng, 9, 4, 0.0, 0.01);
  const auto out = forward(net, x, latent);
  for (std::size_t r = 0; r < out.probs.rows(); ++r) CHECK(out.probs(r, kTargetColumn) == 0.5);
  const auto labels = batch_labels(9, 9);
  CHECK(std::abs(bce_loss(out.probs, labels) - std::numbers::ln2) < 1e-12);
}

TEST_CASE("freshly initialized network is uninformative") {
  NetworkConfig cfg{8, {8, 8}};
  Rng rng(3);
  Network net{cfg, init_params(cfg, rng)};
  const Matrix x = gaussian_sample(rng, 16, 8, 0.0, 1.0);
  const auto out = forward(net, x);
  for (std::size_t r = 0; r < out.probs.rows(); ++r)
    CHECK(out.probs(r, kTargetColumn) == doctest::Approx(0.5));
}

TEST_CASE("bce loss rejects bad labels and clamps zero probabilities") {
  const Matrix probs{{0.0, 1.0}, {1.0, 0.0}};
  const std::vector<int> wrong{0, 1};
  CHECK(std::isfinite(bce_loss(probs, wrong)));
  CHECK(bce_loss(probs, wrong) == doctest::Approx(-std::log(kProbClamp)));
  const std::vector<int> bad{1, 2};
  CHECK(kind_of([&] { bce_loss(probs, bad); }) == ErrorKind::input);
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d_in = 1 + rng.below(8);
    const std::size_t d = 2 + rng.below(7);
    const std::size_t k = 1 + rng.below(4);
    NetworkConfig cfg{d_in, {d}};
    if (trial % 3 == 1) cfg.head_dims = {d, d};
    if (trial % 4 == 2) cfg.classifier_activation = Activation::none;
    if (trial % 5 == 3) cfg.norm.affine = true;
    Network net = random_network(cfg, rng);
    const Matrix x = gaussian_sample(rng, k, d_in, 0.0, 1.0);
    const Matrix latent = gaussian_sample(rng, k, d, 0.0, 0.5);
    const auto labels = batch_labels(k, k);

    const auto fwd = forward(net, x, latent);
    const auto analytic = oracle::flatten(backward(net, fwd.cache, labels));
    const auto numeric = oracle::numeric_gradient(net, x, latent, labels);
    REQUIRE(analytic.size() == numeric.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-4});
      CHECK(std::abs(analytic[i] - numeric[i]) / scale < 1e-5);
    }
  }
}

TEST_CASE("backward refuses a cache from other parameters") {
  NetworkConfig cfg{3, {3}};
  Rng rng(5);
  Network a{cfg, init_params(cfg, rng)};
  Network b{cfg, init_params(cfg, rng)};
  const Matrix x = gaussian_sample(rng, 2, 3, 0.0, 1.0);
  const auto fwd = forward(a, x);
  const std::vector<int> labels{1, 1};
  CHECK(kind_of([&] { backward(b, fwd.cache, labels); }) == ErrorKind::usage);
}

TEST_CASE("adam first step moves each entry by lr·|g|/(|g|+eps)") {
  NetworkConfig cfg{4, {3}};
  Rng rng(6);
  NetworkParams params = init_params(cfg, rng);
  const NetworkParams before = params;
  NetworkParams grads = NetworkParams::zeros_like(params);
  for (auto t : grads.tensors()) {
    for (double& g : t) g = (rng.uniform() - 0.5) * std::pow(10.0, -6.0 + 8.0 * rng.uniform());
  }
  AdamState state = AdamState::for_params(params, 1e-3);
  adam_step(params, grads, state);
  const auto b = oracle::flatten(before);
  const auto a = oracle::flatten(params);
  const auto g = oracle::flatten(grads);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double expected = 1e-3 * std::abs(g[i]) / (std::abs(g[i]) + 1e-8);
    CHECK(std::abs(std::abs(a[i] - b[i]) - expected) <= 1e-9 * expected);
    CHECK((a[i] - b[i]) * g[i] < 0.0);
  }
}

TEST_CASE("network round-trips byte-identically") {
  NetworkConfig cfg{5, {4, 3}};
  cfg.norm.affine = true;
  Rng rng(7);
  const Network net = random_network(cfg, rng);
  const std::vector<std::uint8_t> meta{'{', '}'};
  std::stringstream first;
  write_network(first, net, meta);
  std::vector<std::uint8_t> meta_back;
  const Network back = read_network(first, &meta_back);
  CHECK(back.config == net.config);
  // Parameters are stored as f32.
  const auto want = oracle::flatten(net.params);
  const auto got = oracle::flatten(back.params);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == static_cast<double>(static_cast<float>(want[i])));
  CHECK(meta_back == meta);
  std::stringstream second;
  write_network(second, back, meta_back);
  CHECK(first.str() == second.str());
}

TEST_CASE("malformed network files are corrupt") {
  NetworkConfig cfg{3, {2}};
  Rng rng(8);
  std::stringstream buf;
  write_network(buf, Network{cfg, init_params(cfg, rng)});
  const std::string bytes = buf.str();

  std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK(kind_of([&] { read_network(truncated); }) == ErrorKind::corrupt);

  std::string wrong = bytes;
  wrong[0] = 'X';
  std::istringstream bad_magic(wrong);
  CHECK(kind_of([&] { read_network(bad_magic); }) == ErrorKind::corrupt);

  std::istringstream trailing(bytes + "junk");
  CHECK(kind_of([&] { read_network(trailing); }) == ErrorKind::corrupt);
}

TEST_CASE("config validation") {
  CHECK(kind_of([] { NetworkConfig{0, {4}}.validate(); }) == ErrorKind::parameter);
  CHECK(kind_of([] { NetworkConfig{4, {1}}.validate(); }) == ErrorKind::parameter);
  const Matrix x(2, 3);
  NetworkConfig cfg{4, {4}};
  Rng rng(9);
  const Network net{cfg, init_params(cfg, rng)};
  CHECK(kind_of([&] { forward(net, x); }) == ErrorKind::shape);
}
