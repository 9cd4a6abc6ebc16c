#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "occnn/baselines.hpp"
#include "occnn/data_io.hpp"
#include "occnn/occnn.hpp"

namespace occnn::eval {

/// Twice the Mann–Whitney U statistic: 2·#{target > negative} + #{ties}.
/// An integer, so it can be compared exactly against a pair count.
std::uint64_t mann_whitney_u2(std::span<const double> target, std::span<const double> negative);

/// Probability that a random target outscores a random negative (ties ½),
/// computed from average ranks in O((n+m) log(n+m)).
double auroc(std::span<const double> target, std::span<const double> negative);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// One point per distinct score threshold (descending), plus (0,0).
std::vector<RocPoint> roc_curve(std::span<const double> target, std::span<const double> negative);

double trapezoid_area(std::span<const RocPoint> curve);

struct EvalReport {
  std::string method;
  std::string class_tag;
  double auroc = 0.0;
  std::size_t n_target_test = 0;
  std::size_t n_negative_test = 0;
  std::vector<RocPoint> roc;
  std::optional<std::string> error;  // set when the cell failed

  bool ok() const noexcept { return !error.has_value(); }
};

EvalReport evaluate(std::string method, std::string class_tag,
                    std::span<const double> target_scores,
                    std::span<const double> negative_scores);

// ------------------------------------------------------------ benchmark

using Scorer = std::function<std::vector<double>(const Matrix&)>;

/// A one-class method: fit on target-only training data, return a scorer
/// where higher means more target-like.
struct Method {
  std::string name;
  std::function<Scorer(const FeatureSet& train, Rng& rng)> fit;
};

/// Hyperparameters for the built-in methods. Zero means "derive the
/// default from the training data".
struct MethodParams {
  TrainConfig train;                 // occnn, ocsvm_plus
  std::vector<std::size_t> head_dims;  // empty: D_in → D_in → D_in
  nn::Activation classifier_activation = nn::Activation::relu;
  baselines::KernelKind kernel = baselines::KernelKind::rbf;
  double gamma = 0.0;
  double nu = 0.1;
  double svdd_c = 0.0;  // default 1 / (0.1 · n)
  std::size_t pca_dims = 0;  // default min(16, D, n − 1)
  double mpm_lambda = 1e-3;
  double mpm_quantile = 0.05;
  double bsvm_lambda = 1e-3;
};

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"occnn", "ocsvm", "ocsvm_plus",
                                                 "svdd",  "mpm",   "bsvm"};
  return names;
}

/// Built-in method by name; throws ErrorKind::parameter for unknown names.
Method make_method(const std::string& name, const MethodParams& params);

struct BenchmarkResult {
  std::string method;
  std::vector<EvalReport> cells;  // one per split, in split order
  double mean_auroc = 0.0;        // over successful cells only
  std::size_t failures = 0;
};

struct BenchmarkOptions {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Fits every method on every split's target-train set and scores both test
/// sets. A failing cell is recorded and left out of the mean; the run goes on.
/// Each cell draws from its own substream of `seed`, so results do not depend
/// on the method list or on the thread count.
std::vector<BenchmarkResult> run_benchmark(const std::vector<Method>& methods,
                                           const std::vector<data::ProtocolSplit>& splits,
                                           const BenchmarkOptions& opts = {});

/// method,class,auroc,n_pos,n_neg; one row per cell plus a "mean" row per method.
void write_results_csv(std::ostream& out, const std::vector<BenchmarkResult>& results);

/// Aligned text table: classes as rows, methods as columns, mean last.
void write_results_table(std::ostream& out, const std::vector<BenchmarkResult>& results,
                         const std::string& title = {});

}  // namespace occnn::eval
