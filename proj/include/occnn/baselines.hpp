#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "occnn/feature_set.hpp"
#include "occnn/numerics.hpp"
#include "occnn/occnn.hpp"

namespace occnn::baselines {

enum class KernelKind : std::uint8_t { linear = 0, rbf = 1 };

const char* to_string(KernelKind k) noexcept;
KernelKind parse_kernel(const std::string& s);

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double gamma = 1.0;  // rbf only

  void validate() const;
  double operator()(std::span<const double> a, std::span<const double> b) const;
};

/// rbf kernel with gamma = 1 / (D · var(x)), var taken over every entry of x.
KernelSpec default_kernel(const Matrix& x, KernelKind kind = KernelKind::rbf);

Matrix kernel_matrix(const KernelSpec& k, const Matrix& x);

/// Solver limits shared by OC-SVM and SVDD.
struct SolverOptions {
  double tolerance = 1e-6;           // stop when the maximal KKT violation drops below
  std::size_t max_sweeps = 100000;   // iteration cap, in units of n pair updates
};

// ---------------------------------------------------------------- OC-SVM

struct OcSvmModel {
  Matrix support_vectors;
  std::vector<double> alpha;  // one per support vector, sums to 1
  double rho = 0.0;
  double nu = 0.5;
  KernelSpec kernel;
  // Solver diagnostics over the full training set.
  double kkt_violation = 0.0;
  double dual_objective = 0.0;
  std::size_t iterations = 0;
  std::size_t n_train = 0;
};

/// ν-one-class SVM: min ½αᵀKα s.t. 0 ≤ αᵢ ≤ 1/(νn), Σα = 1, by maximal
/// violating pair SMO.
OcSvmModel ocsvm_fit(const FeatureSet& x, double nu, const KernelSpec& kernel,
                     const SolverOptions& opts = {});

/// Σ αᵢ k(svᵢ, x) − ρ per row; positive inside the estimated support.
std::vector<double> ocsvm_score(const OcSvmModel& model, const Matrix& x);

// ------------------------------------------------------------------ SVDD

struct SvddModel {
  Matrix support_vectors;
  std::vector<double> alpha;
  double c = 1.0;
  double radius2 = 0.0;
  double center_norm2 = 0.0;  // αᵀKα = ‖a‖² in feature space
  KernelSpec kernel;
  double kkt_violation = 0.0;
  std::size_t iterations = 0;
  std::size_t n_train = 0;
};

/// Minimal enclosing hypersphere: max Σαᵢkᵢᵢ − αᵀKα s.t. 0 ≤ αᵢ ≤ C, Σα = 1.
SvddModel svdd_fit(const FeatureSet& x, double c, const KernelSpec& kernel,
                   const SolverOptions& opts = {});

/// R² − ‖φ(x) − a‖² per row.
std::vector<double> svdd_score(const SvddModel& model, const Matrix& x);

// ------------------------------------------------------------------- MPM

struct MpmModel {
  std::vector<double> mean;  // PCA centering mean (D)
  Matrix basis;              // D × p, orthonormal columns
  std::vector<double> w;     // hyperplane normal in PCA coordinates, wᵀμ̂ = 1
  double rho = 0.0;
  double lambda = 1e-3;
  double quantile = 0.05;

  /// Projection onto the principal axes, kept relative to the origin:
  /// z = Bᵀx.
  Matrix project(const Matrix& x) const;
  /// Normal mapped back to input space, B·w.
  std::vector<double> input_space_normal() const;
  /// Rank-p reconstruction mean + B·Bᵀ(x − mean).
  Matrix reconstruct(const Matrix& x) const;
};

/// Second-order-statistics hyperplane w = (Σ̂ + λI)⁻¹μ̂ in the top
/// `pca_dims` principal axes, thresholded at the given lower quantile of the
/// training scores.
MpmModel mpm_fit(const FeatureSet& x, std::size_t pca_dims, double lambda,
                 double quantile = 0.05);

std::vector<double> mpm_score(const MpmModel& model, const Matrix& x);

// ------------------------------------------------------------------ BSVM

struct BsvmOptions {
  std::size_t iterations = 2000;
  std::size_t checkpoint_every = 100;
};

struct BsvmModel {
  std::vector<double> w;
  double b = 0.0;
  double lambda = 1e-3;
  double sigma = 0.01;
  // Objective of the averaged iterate at every checkpoint.
  std::vector<double> objective_history;
};

/// Linear soft-margin SVM separating the targets (+1) from n draws of
/// N(0, σ²I) (−1). Full-batch subgradient descent on
/// λ/2·‖(w, b)‖² + mean hinge loss with step 1/(λt); the averaged iterate is
/// returned.
BsvmModel bsvm_fit(const FeatureSet& x, double sigma, double lambda, Rng& rng,
                   const BsvmOptions& opts = {});

std::vector<double> bsvm_score(const BsvmModel& model, const Matrix& x);

/// Hinge objective the BSVM solver minimizes, for labels ±1.
double bsvm_objective(std::span<const double> w, double b, double lambda, const Matrix& x,
                      std::span<const int> labels);

// ------------------------------------------------------------- OC-SVM⁺

struct OcSvmPlusModel {
  OcCnnModel network;
  OcSvmModel svm;
};

/// OC-SVM fit on the trained network's extracted features. A kernel with
/// gamma <= 0 means "pick the default for the extracted features".
OcSvmPlusModel ocsvm_plus_fit(const OcCnnModel& model, const FeatureSet& x, double nu,
                              KernelSpec kernel, const SolverOptions& opts = {});

std::vector<double> ocsvm_plus_score(const OcSvmPlusModel& model, const Matrix& x);

// --------------------------------------------------------- persistence

using BaselineModel = std::variant<OcSvmModel, SvddModel, MpmModel, BsvmModel, OcSvmPlusModel>;

const char* method_name(const BaselineModel& model);
std::vector<double> score(const BaselineModel& model, const Matrix& x);
std::size_t input_dim(const BaselineModel& model);

// "OCBL" container: magic, u16 version, u8 method tag, method payload.
void save_baseline(std::ostream& out, const BaselineModel& model);
BaselineModel load_baseline(std::istream& in);
void save_baseline(const std::filesystem::path& path, const BaselineModel& model);
BaselineModel load_baseline(const std::filesystem::path& path);

}  // namespace occnn::baselines
