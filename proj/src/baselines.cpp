#include "occnn/baselines.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "occnn/binary_io.hpp"
#include "occnn/error.hpp"

namespace occnn::baselines {

const char* to_string(KernelKind k) noexcept {
  return k == KernelKind::linear ? "linear" : "rbf";
}

KernelKind parse_kernel(const std::string& s) {
  if (s == "linear") return KernelKind::linear;
  if (s == "rbf") return KernelKind::rbf;
  fail(ErrorKind::parameter, "unknown kernel '" + s + "' (expected linear or rbf)");
}

void KernelSpec::validate() const {
  if (kind == KernelKind::rbf && !(gamma > 0.0 && std::isfinite(gamma))) {
    fail(ErrorKind::parameter, "rbf kernel needs gamma > 0");
  }
}

double KernelSpec::operator()(std::span<const double> a, std::span<const double> b) const {
  if (kind == KernelKind::linear) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-gamma * d2);
}

KernelSpec default_kernel(const Matrix& x, KernelKind kind) {
  KernelSpec k{kind, 1.0};
  if (kind == KernelKind::linear || x.empty()) return k;
  const auto v = x.values();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double e : v) var += (e - mean) * (e - mean);
  var /= static_cast<double>(v.size());
  if (var > 0.0) k.gamma = 1.0 / (static_cast<double>(x.cols()) * var);
  return k;
}

Matrix kernel_matrix(const KernelSpec& k, const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = k(x.row(i), x.row(j));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

namespace {

struct DualSolution {
  std::vector<double> alpha;
  double offset = 0.0;  // multiplier of the Σα = 1 constraint
  double violation = 0.0;
  std::size_t iterations = 0;
};

// min ½αᵀQα + linᵀα  s.t.  0 ≤ αᵢ ≤ c, Σα = 1.
// Gradient G = Qα + lin; optimal when max{G_j : α_j > 0} − min{G_i : α_i < c} ≤ 0.
DualSolution solve_box_simplex(const Matrix& q, std::span<const double> lin, double c,
                               const SolverOptions& opts) {
  const std::size_t n = q.rows();
  DualSolution sol;
  auto& alpha = sol.alpha;
  alpha.assign(n, 0.0);
  if (c * static_cast<double>(n) <= 1.0 + 1e-12) {
    // The box meets the simplex in the single point α = C·1.
    alpha.assign(n, c);
  } else {
    double remaining = 1.0;
    for (std::size_t i = 0; i < n && remaining > 1e-15; ++i) {
      alpha[i] = std::min(c, remaining);
      remaining -= alpha[i];
    }
  }

  std::vector<double> grad(n);
  auto refresh_gradient = [&] {
    for (std::size_t k = 0; k < n; ++k) {
      double g = lin[k];
      auto row = q.row(k);
      for (std::size_t l = 0; l < n; ++l) g += row[l] * alpha[l];
      grad[k] = g;
    }
  };

  struct Pair {
    std::size_t up = SIZE_MAX;    // α may increase
    std::size_t down = SIZE_MAX;  // α may decrease
    double violation = 0.0;
  };
  auto select = [&] {
    Pair p;
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (alpha[k] < c && grad[k] < g_min) {
        g_min = grad[k];
        p.up = k;
      }
      if (alpha[k] > 0.0 && grad[k] > g_max) {
        g_max = grad[k];
        p.down = k;
      }
    }
    if (p.up != SIZE_MAX && p.down != SIZE_MAX) p.violation = g_max - g_min;
    return p;
  };

  const std::size_t cap = opts.max_sweeps * std::max<std::size_t>(n, 1);
  refresh_gradient();
  for (;;) {
    Pair p = select();
    if (p.violation < opts.tolerance) {
      // Incremental updates drift; confirm on a fresh gradient.
      refresh_gradient();
      p = select();
      if (p.violation < opts.tolerance) {
        sol.violation = std::max(p.violation, 0.0);
        break;
      }
    }
    if (sol.iterations >= cap) {
      fail(ErrorKind::convergence, "SMO did not converge after " +
                                       std::to_string(sol.iterations) +
                                       " updates; KKT residual " +
                                       std::to_string(p.violation));
    }
    ++sol.iterations;
    const std::size_t i = p.up;
    const std::size_t j = p.down;
    double curvature = q(i, i) + q(j, j) - 2.0 * q(i, j);
    if (curvature <= 1e-12) curvature = 1e-12;
    const double room_i = c - alpha[i];
    const double room_j = alpha[j];
    const double delta = std::min({p.violation / curvature, room_i, room_j});
    // Snap to the exact bound so the active-set tests above stay exact.
    alpha[i] = delta == room_i ? c : alpha[i] + delta;
    alpha[j] = delta == room_j ? 0.0 : alpha[j] - delta;
    auto qi = q.row(i);
    auto qj = q.row(j);
    for (std::size_t k = 0; k < n; ++k) grad[k] += delta * (qi[k] - qj[k]);
  }

  // Offset: mean gradient over free variables, else the midpoint of the
  // feasible interval [max G at upper bound, min G at lower bound].
  double free_sum = 0.0;
  std::size_t free_count = 0;
  double upper = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    if (alpha[k] > 0.0 && alpha[k] < c) {
      free_sum += grad[k];
      ++free_count;
    } else if (alpha[k] == 0.0) {
      upper = std::min(upper, grad[k]);
    } else {
      lower = std::max(lower, grad[k]);
    }
  }
  if (free_count > 0) {
    sol.offset = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(upper) && std::isfinite(lower)) {
    sol.offset = 0.5 * (upper + lower);
  } else {
    sol.offset = std::isfinite(lower) ? lower : upper;
  }
  return sol;
}

void check_training_set(const FeatureSet& x, const char* what) {
  if (x.n() < 2) fail(ErrorKind::input, std::string(what) + ": need at least 2 samples");
  if (!x.data.all_finite()) fail(ErrorKind::input, std::string(what) + ": non-finite features");
}

void check_width(std::size_t expected, const Matrix& x, const char* what) {
  if (x.cols() != expected) {
    fail(ErrorKind::shape, std::string(what) + ": width " + std::to_string(x.cols()) +
                               " != model dimension " + std::to_string(expected));
  }
}

// Rows with α > 0 together with their coefficients.
std::pair<Matrix, std::vector<double>> support_set(const Matrix& x,
                                                   const std::vector<double>& alpha) {
  std::vector<std::size_t> idx;
  std::vector<double> coef;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] > 0.0) {
      idx.push_back(i);
      coef.push_back(alpha[i]);
    }
  }
  return {take_rows(x, idx), std::move(coef)};
}

double expansion(const KernelSpec& k, const Matrix& sv, std::span<const double> alpha,
                 std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) s += alpha[i] * k(sv.row(i), x);
  return s;
}

}  // namespace

OcSvmModel ocsvm_fit(const FeatureSet& x, double nu, const KernelSpec& kernel,
                     const SolverOptions& opts) {
  if (!(nu > 0.0 && nu <= 1.0)) fail(ErrorKind::parameter, "nu must be in (0, 1]");
  kernel.validate();
  check_training_set(x, "ocsvm_fit");
  const std::size_t n = x.n();
  const Matrix k = kernel_matrix(kernel, x.data);
  const std::vector<double> zero(n, 0.0);
  const double c = 1.0 / (nu * static_cast<double>(n));
  auto sol = solve_box_simplex(k, zero, c, opts);

  OcSvmModel m;
  m.nu = nu;
  m.kernel = kernel;
  m.rho = sol.offset;
  m.kkt_violation = sol.violation;
  m.iterations = sol.iterations;
  m.n_train = n;
  double obj = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) obj += sol.alpha[i] * k(i, j) * sol.alpha[j];
  m.dual_objective = 0.5 * obj;
  std::tie(m.support_vectors, m.alpha) = support_set(x.data, sol.alpha);
  return m;
}

std::vector<double> ocsvm_score(const OcSvmModel& model, const Matrix& x) {
  check_width(model.support_vectors.cols(), x, "ocsvm_score");
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    out[r] = expansion(model.kernel, model.support_vectors, model.alpha, x.row(r)) - model.rho;
  }
  return out;
}

SvddModel svdd_fit(const FeatureSet& x, double c, const KernelSpec& kernel,
                   const SolverOptions& opts) {
  kernel.validate();
  check_training_set(x, "svdd_fit");
  const std::size_t n = x.n();
  if (!(c * static_cast<double>(n) >= 1.0 - 1e-12) || !std::isfinite(c)) {
    fail(ErrorKind::parameter, "svdd_fit: C = " + std::to_string(c) + " < 1/n = " +
                                   std::to_string(1.0 / static_cast<double>(n)) +
                                   " makes the dual infeasible");
  }
  const Matrix k = kernel_matrix(kernel, x.data);
  Matrix q(n, n);
  std::vector<double> lin(n);
  for (std::size_t i = 0; i < n; ++i) {
    lin[i] = -k(i, i);
    for (std::size_t j = 0; j < n; ++j) q(i, j) = 2.0 * k(i, j);
  }
  auto sol = solve_box_simplex(q, lin, c, opts);

  SvddModel m;
  m.c = c;
  m.kernel = kernel;
  m.kkt_violation = sol.violation;
  m.iterations = sol.iterations;
  m.n_train = n;
  double aka = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) aka += sol.alpha[i] * k(i, j) * sol.alpha[j];
  m.center_norm2 = aka;
  // At a free support vector G = 2(Kα)ᵢ − kᵢᵢ equals the offset, and
  // ‖φ(xᵢ) − a‖² = kᵢᵢ − 2(Kα)ᵢ + αᵀKα = αᵀKα − offset.
  m.radius2 = std::max(aka - sol.offset, 0.0);
  std::tie(m.support_vectors, m.alpha) = support_set(x.data, sol.alpha);
  return m;
}

std::vector<double> svdd_score(const SvddModel& model, const Matrix& x) {
  check_width(model.support_vectors.cols(), x, "svdd_score");
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    const double dist2 = model.kernel(row, row) -
                         2.0 * expansion(model.kernel, model.support_vectors, model.alpha, row) +
                         model.center_norm2;
    out[r] = model.radius2 - dist2;
  }
  return out;
}

Matrix MpmModel::project(const Matrix& x) const {
  check_width(basis.rows(), x, "mpm project");
  return matmul(x, basis);
}

std::vector<double> MpmModel::input_space_normal() const {
  std::vector<double> v(basis.rows(), 0.0);
  for (std::size_t i = 0; i < basis.rows(); ++i)
    for (std::size_t j = 0; j < basis.cols(); ++j) v[i] += basis(i, j) * w[j];
  return v;
}

Matrix MpmModel::reconstruct(const Matrix& x) const {
  check_width(basis.rows(), x, "mpm reconstruct");
  Matrix centered = x;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) centered(r, c) -= mean[c];
  Matrix out = matmul(matmul(centered, basis), basis.transpose());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) += mean[c];
  return out;
}

MpmModel mpm_fit(const FeatureSet& x, std::size_t pca_dims, double lambda, double quantile) {
  check_training_set(x, "mpm_fit");
  const std::size_t n = x.n();
  const std::size_t d = x.d();
  if (pca_dims < 1 || pca_dims > std::min(n - 1, d)) {
    fail(ErrorKind::parameter, "mpm_fit: pca_dims " + std::to_string(pca_dims) +
                                   " outside [1, min(n-1, D)] = [1, " +
                                   std::to_string(std::min(n - 1, d)) + "]");
  }
  if (!(lambda > 0.0)) fail(ErrorKind::parameter, "mpm_fit: lambda must be > 0");
  if (!(quantile >= 0.0 && quantile < 1.0)) {
    fail(ErrorKind::parameter, "mpm_fit: quantile must be in [0, 1)");
  }

  MpmModel m;
  m.lambda = lambda;
  m.quantile = quantile;
  m.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) m.mean[c] += x.data(r, c);
  for (double& v : m.mean) v /= static_cast<double>(n);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                              static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r) {
    Eigen::VectorXd dev(static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < d; ++c) dev(static_cast<Eigen::Index>(c)) = x.data(r, c) - m.mean[c];
    cov.noalias() += dev * dev.transpose();
  }
  cov /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) fail(ErrorKind::numerical, "mpm_fit: PCA failed");

  // Eigenvalues ascend; take the top pca_dims and fix each axis' sign so its
  // largest-magnitude component is positive.
  m.basis = Matrix(d, pca_dims);
  for (std::size_t j = 0; j < pca_dims; ++j) {
    const auto col = eig.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - j));
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    const double sign = col(arg) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < d; ++i) m.basis(i, j) = sign * col(static_cast<Eigen::Index>(i));
  }

  const Matrix z = m.project(x.data);
  std::vector<double> mu(pca_dims, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < pca_dims; ++c) mu[c] += z(r, c);
  for (double& v : mu) v /= static_cast<double>(n);
  Matrix sigma(pca_dims, pca_dims);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t a = 0; a < pca_dims; ++a)
      for (std::size_t b = 0; b < pca_dims; ++b)
        sigma(a, b) += (z(r, a) - mu[a]) * (z(r, b) - mu[b]);
  for (std::size_t a = 0; a < pca_dims; ++a) {
    for (std::size_t b = 0; b < pca_dims; ++b) sigma(a, b) /= static_cast<double>(n);
    sigma(a, a) += lambda;
  }
  m.w = solve_spd(sigma, mu);
  const double norm = std::inner_product(m.w.begin(), m.w.end(), mu.begin(), 0.0);
  if (!(norm > 0.0)) {
    fail(ErrorKind::numerical, "mpm_fit: data mean projects to the origin; hyperplane undefined");
  }
  for (double& v : m.w) v /= norm;

  std::vector<double> train_scores(n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < pca_dims; ++c) train_scores[r] += m.w[c] * z(r, c);
  std::ranges::sort(train_scores);
  // Linear interpolation between order statistics.
  const double pos = quantile * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, n - 1);
  m.rho = train_scores[lo] + (pos - static_cast<double>(lo)) * (train_scores[hi] - train_scores[lo]);
  return m;
}

std::vector<double> mpm_score(const MpmModel& model, const Matrix& x) {
  const Matrix z = model.project(x);
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < model.w.size(); ++c) s += model.w[c] * z(r, c);
    out[r] = s - model.rho;
  }
  return out;
}

double bsvm_objective(std::span<const double> w, double b, double lambda, const Matrix& x,
                      std::span<const int> labels) {
  double reg = b * b;
  for (double v : w) reg += v * v;
  double hinge = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    const double f = std::inner_product(w.begin(), w.end(), row.begin(), b);
    hinge += std::max(0.0, 1.0 - labels[r] * f);
  }
  return 0.5 * lambda * reg + hinge / static_cast<double>(x.rows());
}

BsvmModel bsvm_fit(const FeatureSet& x, double sigma, double lambda, Rng& rng,
                   const BsvmOptions& opts) {
  if (!(sigma >= 0.0)) fail(ErrorKind::parameter, "bsvm_fit: sigma must be >= 0");
  if (!(lambda > 0.0)) fail(ErrorKind::parameter, "bsvm_fit: lambda must be > 0");
  if (x.n() == 0) fail(ErrorKind::input, "bsvm_fit: empty training set");
  if (!x.data.all_finite()) fail(ErrorKind::input, "bsvm_fit: non-finite features");
  const std::size_t n = x.n();
  const std::size_t d = x.d();
  const Matrix data = vstack(x.data, gaussian_sample(rng, n, d, 0.0, sigma));
  std::vector<int> labels(2 * n, -1);
  std::fill_n(labels.begin(), n, 1);
  const double m = static_cast<double>(2 * n);

  // θ = (w, b); both regularized.
  std::vector<double> theta(d + 1, 0.0);
  std::vector<double> avg(d + 1, 0.0);
  std::vector<double> sub(d + 1);
  BsvmModel model;
  model.lambda = lambda;
  model.sigma = sigma;
  for (std::size_t t = 1; t <= opts.iterations; ++t) {
    for (std::size_t k = 0; k <= d; ++k) sub[k] = lambda * theta[k];
    for (std::size_t r = 0; r < data.rows(); ++r) {
      const auto row = data.row(r);
      const double f = std::inner_product(row.begin(), row.end(), theta.begin(), theta[d]);
      if (labels[r] * f < 1.0) {
        for (std::size_t k = 0; k < d; ++k) sub[k] -= labels[r] * row[k] / m;
        sub[d] -= labels[r] / m;
      }
    }
    const double step = 1.0 / (lambda * static_cast<double>(t));
    for (std::size_t k = 0; k <= d; ++k) {
      theta[k] -= step * sub[k];
      avg[k] += (theta[k] - avg[k]) / static_cast<double>(t);
    }
    if (opts.checkpoint_every > 0 && t % opts.checkpoint_every == 0) {
      model.objective_history.push_back(
          bsvm_objective(std::span(avg).first(d), avg[d], lambda, data, labels));
    }
  }
  model.w.assign(avg.begin(), avg.begin() + static_cast<std::ptrdiff_t>(d));
  model.b = avg[d];
  return model;
}

std::vector<double> bsvm_score(const BsvmModel& model, const Matrix& x) {
  check_width(model.w.size(), x, "bsvm_score");
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    out[r] = std::inner_product(model.w.begin(), model.w.end(), row.begin(), model.b);
  }
  return out;
}

OcSvmPlusModel ocsvm_plus_fit(const OcCnnModel& model, const FeatureSet& x, double nu,
                              KernelSpec kernel, const SolverOptions& opts) {
  if (x.d() != model.input_dim()) {
    fail(ErrorKind::shape, "ocsvm_plus_fit: feature width " + std::to_string(x.d()) +
                               " != model input_dim " + std::to_string(model.input_dim()));
  }
  FeatureSet learned{extract_features(model, x.data), x.source + "+occnn"};
  if (kernel.kind == KernelKind::rbf && !(kernel.gamma > 0.0)) {
    kernel = default_kernel(learned.data, KernelKind::rbf);
  }
  return {model, ocsvm_fit(learned, nu, kernel, opts)};
}

std::vector<double> ocsvm_plus_score(const OcSvmPlusModel& model, const Matrix& x) {
  return ocsvm_score(model.svm, extract_features(model.network, x));
}

// ---------------------------------------------------------- persistence

namespace {

constexpr char kMagic[] = "OCBL";
constexpr std::uint16_t kVersion = 1;

enum class Tag : std::uint8_t { ocsvm = 1, svdd = 2, mpm = 3, bsvm = 4, ocsvm_plus = 5 };

void put_doubles(io::Writer& w, std::span<const double> v) {
  for (double x : v) w.f64(x);
}

std::vector<double> get_doubles(io::Reader& r, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = r.f64();
  return v;
}

std::uint32_t get_dim(io::Reader& r) {
  const auto v = r.u32();
  if (v > (1u << 24)) fail(ErrorKind::corrupt, "implausible dimension in baseline model");
  return v;
}

void put_kernel(io::Writer& w, const KernelSpec& k) {
  w.u8(static_cast<std::uint8_t>(k.kind));
  w.f64(k.gamma);
}

KernelSpec get_kernel(io::Reader& r) {
  const auto kind = r.u8();
  if (kind > 1) fail(ErrorKind::corrupt, "unknown kernel tag");
  return {static_cast<KernelKind>(kind), r.f64()};
}

void put_ocsvm(io::Writer& w, const OcSvmModel& m) {
  put_kernel(w, m.kernel);
  w.u32(static_cast<std::uint32_t>(m.support_vectors.rows()));
  w.u32(static_cast<std::uint32_t>(m.support_vectors.cols()));
  w.f64(m.nu);
  w.f64(m.rho);
  w.f64(m.kkt_violation);
  w.f64(m.dual_objective);
  w.u64(m.iterations);
  w.u64(m.n_train);
  put_doubles(w, m.support_vectors.values());
  put_doubles(w, m.alpha);
}

OcSvmModel get_ocsvm(io::Reader& r) {
  OcSvmModel m;
  m.kernel = get_kernel(r);
  const auto n = get_dim(r);
  const auto d = get_dim(r);
  m.nu = r.f64();
  m.rho = r.f64();
  m.kkt_violation = r.f64();
  m.dual_objective = r.f64();
  m.iterations = r.u64();
  m.n_train = r.u64();
  m.support_vectors = Matrix(n, d, get_doubles(r, std::size_t{n} * d));
  m.alpha = get_doubles(r, n);
  return m;
}

void put_svdd(io::Writer& w, const SvddModel& m) {
  put_kernel(w, m.kernel);
  w.u32(static_cast<std::uint32_t>(m.support_vectors.rows()));
  w.u32(static_cast<std::uint32_t>(m.support_vectors.cols()));
  w.f64(m.c);
  w.f64(m.radius2);
  w.f64(m.center_norm2);
  w.f64(m.kkt_violation);
  w.u64(m.iterations);
  w.u64(m.n_train);
  put_doubles(w, m.support_vectors.values());
  put_doubles(w, m.alpha);
}

SvddModel get_svdd(io::Reader& r) {
  SvddModel m;
  m.kernel = get_kernel(r);
  const auto n = get_dim(r);
  const auto d = get_dim(r);
  m.c = r.f64();
  m.radius2 = r.f64();
  m.center_norm2 = r.f64();
  m.kkt_violation = r.f64();
  m.iterations = r.u64();
  m.n_train = r.u64();
  m.support_vectors = Matrix(n, d, get_doubles(r, std::size_t{n} * d));
  m.alpha = get_doubles(r, n);
  return m;
}

void put_mpm(io::Writer& w, const MpmModel& m) {
  w.u32(static_cast<std::uint32_t>(m.basis.rows()));
  w.u32(static_cast<std::uint32_t>(m.basis.cols()));
  w.f64(m.lambda);
  w.f64(m.quantile);
  w.f64(m.rho);
  put_doubles(w, m.mean);
  put_doubles(w, m.basis.values());
  put_doubles(w, m.w);
}

MpmModel get_mpm(io::Reader& r) {
  MpmModel m;
  const auto d = get_dim(r);
  const auto p = get_dim(r);
  m.lambda = r.f64();
  m.quantile = r.f64();
  m.rho = r.f64();
  m.mean = get_doubles(r, d);
  m.basis = Matrix(d, p, get_doubles(r, std::size_t{d} * p));
  m.w = get_doubles(r, p);
  return m;
}

void put_bsvm(io::Writer& w, const BsvmModel& m) {
  w.u32(static_cast<std::uint32_t>(m.w.size()));
  w.f64(m.lambda);
  w.f64(m.sigma);
  w.f64(m.b);
  put_doubles(w, m.w);
  w.u32(static_cast<std::uint32_t>(m.objective_history.size()));
  put_doubles(w, m.objective_history);
}

BsvmModel get_bsvm(io::Reader& r) {
  BsvmModel m;
  const auto d = get_dim(r);
  m.lambda = r.f64();
  m.sigma = r.f64();
  m.b = r.f64();
  m.w = get_doubles(r, d);
  m.objective_history = get_doubles(r, get_dim(r));
  return m;
}

}  // namespace

const char* method_name(const BaselineModel& model) {
  constexpr const char* names[] = {"ocsvm", "svdd", "mpm", "bsvm", "ocsvm_plus"};
  return names[model.index()];
}

std::vector<double> score(const BaselineModel& model, const Matrix& x) {
  struct Visitor {
    const Matrix& x;
    std::vector<double> operator()(const OcSvmModel& m) const { return ocsvm_score(m, x); }
    std::vector<double> operator()(const SvddModel& m) const { return svdd_score(m, x); }
    std::vector<double> operator()(const MpmModel& m) const { return mpm_score(m, x); }
    std::vector<double> operator()(const BsvmModel& m) const { return bsvm_score(m, x); }
    std::vector<double> operator()(const OcSvmPlusModel& m) const { return ocsvm_plus_score(m, x); }
  };
  return std::visit(Visitor{x}, model);
}

std::size_t input_dim(const BaselineModel& model) {
  struct Visitor {
    std::size_t operator()(const OcSvmModel& m) const { return m.support_vectors.cols(); }
    std::size_t operator()(const SvddModel& m) const { return m.support_vectors.cols(); }
    std::size_t operator()(const MpmModel& m) const { return m.basis.rows(); }
    std::size_t operator()(const BsvmModel& m) const { return m.w.size(); }
    std::size_t operator()(const OcSvmPlusModel& m) const { return m.network.input_dim(); }
  };
  return std::visit(Visitor{}, model);
}

void save_baseline(std::ostream& out, const BaselineModel& model) {
  io::Writer w(out);
  w.magic({kMagic, 4});
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(model.index() + 1));
  struct Visitor {
    io::Writer& w;
    std::ostream& out;
    void operator()(const OcSvmModel& m) const { put_ocsvm(w, m); }
    void operator()(const SvddModel& m) const { put_svdd(w, m); }
    void operator()(const MpmModel& m) const { put_mpm(w, m); }
    void operator()(const BsvmModel& m) const { put_bsvm(w, m); }
    void operator()(const OcSvmPlusModel& m) const {
      std::ostringstream blob(std::ios::binary);
      save_model(blob, m.network);
      const std::string bytes = blob.str();
      w.u32(static_cast<std::uint32_t>(bytes.size()));
      w.bytes(bytes.data(), bytes.size());
      put_ocsvm(w, m.svm);
    }
  };
  std::visit(Visitor{w, out}, model);
}

BaselineModel load_baseline(std::istream& in) {
  io::Reader r(in);
  r.expect_magic({kMagic, 4});
  const auto version = r.u16();
  if (version != kVersion) {
    fail(ErrorKind::corrupt, "unsupported baseline model version " + std::to_string(version));
  }
  const auto tag = static_cast<Tag>(r.u8());
  BaselineModel model;
  switch (tag) {
    case Tag::ocsvm: model = get_ocsvm(r); break;
    case Tag::svdd: model = get_svdd(r); break;
    case Tag::mpm: model = get_mpm(r); break;
    case Tag::bsvm: model = get_bsvm(r); break;
    case Tag::ocsvm_plus: {
      const auto len = r.u32();
      if (len > (1u << 28)) fail(ErrorKind::corrupt, "implausible embedded model length");
      std::string bytes(len, '\0');
      r.bytes(bytes.data(), bytes.size());
      std::istringstream blob(bytes, std::ios::binary);
      OcSvmPlusModel m;
      m.network = load_model(blob);
      m.svm = get_ocsvm(r);
      model = std::move(m);
      break;
    }
    default:
      fail(ErrorKind::corrupt, "unknown baseline method tag " +
                                   std::to_string(static_cast<int>(tag)));
  }
  if (!r.at_end()) fail(ErrorKind::corrupt, "trailing bytes after baseline payload");
  return model;
}

void save_baseline(const std::filesystem::path& path, const BaselineModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  save_baseline(out, model);
}

BaselineModel load_baseline(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  return load_baseline(in);
}

}  // namespace occnn::baselines
