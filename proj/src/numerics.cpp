#include "occnn/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "occnn/error.hpp"

namespace occnn {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::shape: return "shape error";
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::input: return "input error";
    case ErrorKind::numerical: return "numerical error";
    case ErrorKind::convergence: return "convergence error";
    case ErrorKind::divergence: return "divergence error";
    case ErrorKind::protocol: return "protocol error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::format: return "format error";
    case ErrorKind::corrupt: return "corrupt artifact";
    case ErrorKind::usage: return "usage error";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorKind::shape, "matrix data length " + std::to_string(data_.size()) +
                               " != " + std::to_string(rows_) + "x" +
                               std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) fail(ErrorKind::shape, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::shape, "matmul: " + std::to_string(a.rows()) + "x" +
                               std::to_string(a.cols()) + " times " +
                               std::to_string(b.rows()) + "x" +
                               std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  if (top.cols() != bottom.cols()) {
    fail(ErrorKind::shape, "vstack: widths " + std::to_string(top.cols()) +
                               " and " + std::to_string(bottom.cols()));
  }
  std::vector<double> data(top.values().begin(), top.values().end());
  data.insert(data.end(), bottom.values().begin(), bottom.values().end());
  return Matrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

Matrix take_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m.rows()) fail(ErrorKind::shape, "row index out of range");
    std::ranges::copy(m.row(indices[i]), out.row(i).begin());
  }
  return out;
}

std::vector<double> solve_spd(const Matrix& a, std::span<const double> b) {
  if (a.rows() != a.cols() || a.rows() != b.size()) {
    fail(ErrorKind::shape, "solve_spd: matrix " + std::to_string(a.rows()) + "x" +
                               std::to_string(a.cols()) + ", rhs " +
                               std::to_string(b.size()));
  }
  const auto n = static_cast<Eigen::Index>(a.rows());
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> lhs(a.values().data(), n, n);
  Eigen::Map<const Eigen::VectorXd> rhs(b.data(), n);

  Eigen::LLT<Eigen::MatrixXd> llt(lhs);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::numerical, "solve_spd: matrix is not positive definite");
  }
  Eigen::VectorXd x = llt.solve(rhs);
  return {x.data(), x.data() + x.size()};
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng Rng::substream(std::string_view name) const {
  return Rng(splitmix64(seed_ ^ splitmix64(fnv1a(name))));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t n) {
  if (n <= 1) return 0;
  // Rejection on the top range keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

Matrix gaussian_sample(Rng& rng, std::size_t n, std::size_t d, double mu,
                       double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma) || !std::isfinite(mu)) {
    fail(ErrorKind::parameter, "gaussian_sample: sigma must be finite and >= 0");
  }
  Matrix out(n, d, mu);
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); i += 2) {
    const double u1 = rng.uniform_open();
    const double u2 = rng.uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    v[i] = mu + sigma * radius * std::cos(angle);
    if (i + 1 < v.size()) v[i + 1] = mu + sigma * radius * std::sin(angle);
  }
  return out;
}

std::vector<std::size_t> permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

std::pair<Matrix, std::vector<std::size_t>> shuffle_rows(Rng& rng, const Matrix& m) {
  auto perm = permutation(rng, m.rows());
  return {take_rows(m, perm), std::move(perm)};
}

}  // namespace occnn
