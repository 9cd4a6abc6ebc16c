#pragma once

// Reference implementations the tests compare against. Deliberately naive:
// each one follows the definition directly rather than the library's route.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "occnn/nn.hpp"
#include "occnn/numerics.hpp"

namespace oracle {

using occnn::Matrix;

// Central differences of bce_loss(forward(net, x, latent)) for every
// parameter, in tensors() order.
inline std::vector<double> numeric_gradient(occnn::nn::Network net, const Matrix& x,
                                            const Matrix& latent, std::span<const int> labels,
                                            double h = 1e-6) {
  namespace nn = occnn::nn;
  std::vector<double> grad;
  for (auto t : net.params.tensors()) {
    for (double& p : t) {
      const double saved = p;
      p = saved + h;
      const double up = nn::bce_loss(nn::forward(net, x, latent).probs, labels);
      p = saved - h;
      const double down = nn::bce_loss(nn::forward(net, x, latent).probs, labels);
      p = saved;
      grad.push_back((up - down) / (2.0 * h));
    }
  }
  return grad;
}

inline std::vector<double> flatten(const occnn::nn::NetworkParams& p) {
  std::vector<double> out;
  for (auto t : p.tensors()) out.insert(out.end(), t.begin(), t.end());
  return out;
}

// AUROC as a reduced fraction num/den, counting pairs one by one:
// num = 2·#{t > f} + #{t == f}, den = 2·n·m.
struct PairCount {
  std::uint64_t num = 0;
  std::uint64_t den = 0;
};

inline PairCount pair_count(std::span<const double> target, std::span<const double> negative) {
  PairCount pc;
  for (double t : target) {
    for (double f : negative) {
      if (t > f) pc.num += 2;
      else if (t == f) pc.num += 1;
    }
  }
  pc.den = 2 * target.size() * negative.size();
  return pc;
}

// Euclidean projection onto {0 <= a <= c, sum a = 1} by bisection on the shift.
inline std::vector<double> project_box_simplex(std::span<const double> v, double c) {
  auto mass = [&](double tau) {
    double s = 0.0;
    for (double x : v) s += std::clamp(x - tau, 0.0, c);
    return s;
  };
  double lo = *std::ranges::min_element(v) - c - 1.0;
  double hi = *std::ranges::max_element(v) + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  const double tau = 0.5 * (lo + hi);
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::clamp(v[i] - tau, 0.0, c);
  return a;
}

inline double quadratic(const Matrix& q, std::span<const double> lin, std::span<const double> a) {
  double obj = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double qa = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) qa += q(i, j) * a[j];
    obj += 0.5 * a[i] * qa + lin[i] * a[i];
  }
  return obj;
}

// min ½aᵀQa + linᵀa over the box-simplex by accelerated projected gradient.
// Returns the objective at the final iterate.
inline double projected_gradient_qp(const Matrix& q, std::span<const double> lin, double c,
                                    std::size_t iterations = 100000) {
  const std::size_t n = q.rows();
  double lipschitz = 0.0;  // Frobenius norm bounds the spectral norm
  for (double v : q.values()) lipschitz += v * v;
  lipschitz = std::max(std::sqrt(lipschitz), 1e-12);

  std::vector<double> start(n, 1.0 / static_cast<double>(n));
  std::vector<double> a = project_box_simplex(start, c);
  std::vector<double> y = a, prev = a, g(n);
  double t = 1.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = lin[i];
      for (std::size_t j = 0; j < n; ++j) s += q(i, j) * y[j];
      g[i] = y[i] - s / lipschitz;
    }
    prev = a;
    a = project_box_simplex(g, c);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + (t - 1.0) / t_next * (a[i] - prev[i]);
    t = t_next;
  }
  return quadratic(q, lin, a);
}

}  // namespace oracle
