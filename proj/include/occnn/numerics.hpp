#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace occnn {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  Matrix transpose() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);

// Rows of `top` followed by rows of `bottom`; widths must agree.
Matrix vstack(const Matrix& top, const Matrix& bottom);

// Rows selected by index, in the given order.
Matrix take_rows(const Matrix& m, std::span<const std::size_t> indices);

/// Solves a·x = b for symmetric positive definite `a` by Cholesky
/// factorization. Throws ErrorKind::numerical on a non-positive pivot.
std::vector<double> solve_spd(const Matrix& a, std::span<const double> b);

/// Seedable generator with explicitly owned state. Uniform draws take the top
/// 53 bits of one 64-bit output, so streams are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  // Independent stream derived from (seed, name); used to keep the draws of
  // one consumer (training, splits, synthesis) unaffected by another.
  Rng substream(std::string_view name) const;

  std::uint64_t next_u64() { return engine_(); }
  double uniform();            // [0, 1)
  double uniform_open();       // (0, 1)
  std::size_t below(std::size_t n);  // [0, n), unbiased

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// n×d matrix of i.i.d. N(mu, sigma²) draws via Box–Muller; every pair of
/// entries consumes exactly two uniforms.
Matrix gaussian_sample(Rng& rng, std::size_t n, std::size_t d, double mu,
                       double sigma);

/// Fisher–Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

/// Returns the shuffled matrix together with the permutation applied
/// (row i of the result is row perm[i] of the input).
std::pair<Matrix, std::vector<std::size_t>> shuffle_rows(Rng& rng, const Matrix& m);

}  // namespace occnn
