#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../support/oracles.hpp"
#include "occnn/error.hpp"
#include "occnn/eval.hpp"

using namespace occnn;
using namespace occnn::eval;

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

// Scores on a coarse grid so ties are common.
std::vector<double> tied_scores(Rng& rng, std::size_t n) {
  std::vector<double> s(n);
  for (double& v : s) v = static_cast<double>(rng.below(6)) * 0.5;
  return s;
}

FeatureSet blob(Rng& rng, std::size_t n, double mu) {
  return {gaussian_sample(rng, n, 3, mu, 1.0), "blob"};
}

data::ProtocolSplit split_of(std::string tag, FeatureSet train, FeatureSet pos, FeatureSet neg) {
  data::ProtocolSplit s;
  s.class_tag = std::move(tag);
  s.target_train = std::move(train);
  s.target_test = std::move(pos);
  s.negative_test = std::move(neg);
  return s;
}

}  // namespace

TEST_CASE("auroc of hand-made cases") {
  const std::vector<double> t{0.9, 0.8, 0.7};
  const std::vector<double> f{0.1, 0.2};
  CHECK(auroc(t, f) == 1.0);
  CHECK(auroc(f, t) == 0.0);
  const std::vector<double> same{0.5, 0.5};
  CHECK(auroc(same, same) == 0.5);
  // 3 wins and 1 tie out of 4 pairs: (3 + 0.5) / 4.
  const std::vector<double> a{1.0, 0.5};
  const std::vector<double> b{0.5, 0.0};
  CHECK(auroc(a, b) == 0.875);
  CHECK(mann_whitney_u2(a, b) == 7);
}

TEST_CASE("rank statistic equals the pair count exactly") {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto t = tied_scores(rng, 1 + rng.below(50));
    const auto f = tied_scores(rng, 1 + rng.below(50));
    const auto pc = oracle::pair_count(t, f);
    CHECK(mann_whitney_u2(t, f) == pc.num);
    CHECK(pc.den == 2 * t.size() * f.size());
  }
}

TEST_CASE("roc curve is monotone and its area is the auroc") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = tied_scores(rng, 1 + rng.below(30));
    const auto f = tied_scores(rng, 1 + rng.below(30));
    const auto curve = roc_curve(t, f);
    REQUIRE(curve.size() >= 2);
    CHECK(curve.front().fpr == 0.0);
    CHECK(curve.front().tpr == 0.0);
    CHECK(curve.back().fpr == 1.0);
    CHECK(curve.back().tpr == 1.0);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i].fpr >= curve[i - 1].fpr);
      CHECK(curve[i].tpr >= curve[i - 1].tpr);
    }
    CHECK(trapezoid_area(curve) == doctest::Approx(auroc(t, f)).epsilon(1e-12));
  }
}

TEST_CASE("auroc input checks") {
  const std::vector<double> empty;
  const std::vector<double> one{1.0};
  const std::vector<double> nan{std::nan("")};
  CHECK(kind_of([&] { auroc(empty, one); }) == ErrorKind::input);
  CHECK(kind_of([&] { auroc(one, empty); }) == ErrorKind::input);
  CHECK(kind_of([&] { auroc(nan, one); }) == ErrorKind::input);
}

TEST_CASE("evaluate fills the report") {
  const std::vector<double> t{3, 2};
  const std::vector<double> f{1, 2, 0};
  const auto r = evaluate("m", "c", t, f);
  CHECK(r.method == "m");
  CHECK(r.class_tag == "c");
  CHECK(r.n_target_test == 2);
  CHECK(r.n_negative_test == 3);
  CHECK(r.auroc == doctest::Approx((2.0 * 5 + 1) / 12.0));
  CHECK(r.ok());
}

TEST_CASE("benchmark keeps method order, isolates failures, ignores thread count") {
  Rng rng(3);
  std::vector<data::ProtocolSplit> splits;
  splits.push_back(split_of("a", blob(rng, 40, 0.0), blob(rng, 10, 0.0), blob(rng, 10, 4.0)));
  splits.push_back(split_of("b", blob(rng, 40, 4.0), blob(rng, 10, 4.0), blob(rng, 10, 0.0)));

  MethodParams p;
  p.train.epochs = 2;
  std::vector<Method> methods{make_method("svdd", p), make_method("occnn", p),
                              make_method("ocsvm", p)};
  // A method that always throws.
  methods.push_back({"broken", [](const FeatureSet&, Rng&) -> Scorer {
                       fail(ErrorKind::numerical, "broken on purpose");
                     }});

  const auto one = run_benchmark(methods, splits, {7, 1});
  const auto four = run_benchmark(methods, splits, {7, 4});
  REQUIRE(one.size() == 4);
  CHECK(one[0].method == "svdd");
  CHECK(one[1].method == "occnn");
  CHECK(one[2].method == "ocsvm");
  CHECK(one[3].failures == 2);
  CHECK(std::isnan(one[3].mean_auroc));
  CHECK(one[2].failures == 0);
  CHECK(one[2].cells[0].auroc > 0.9);

  std::ostringstream csv1, csv4;
  write_results_csv(csv1, one);
  write_results_csv(csv4, four);
  CHECK(csv1.str() == csv4.str());
  CHECK(csv1.str().rfind("method,class,auroc,n_pos,n_neg\n", 0) == 0);
  CHECK(csv1.str().find("broken,a,nan,10,10\n") != std::string::npos);

  std::ostringstream table;
  write_results_table(table, one, "t");
  CHECK(table.str().find("FAILED") != std::string::npos);
}

TEST_CASE("a method's results do not depend on the other methods") {
  Rng rng(4);
  std::vector<data::ProtocolSplit> splits;
  splits.push_back(split_of("a", blob(rng, 30, 0.0), blob(rng, 10, 0.0), blob(rng, 10, 3.0)));
  MethodParams p;
  p.train.epochs = 3;
  const auto alone = run_benchmark({make_method("occnn", p)}, splits, {5, 1});
  const auto mixed =
      run_benchmark({make_method("bsvm", p), make_method("occnn", p)}, splits, {5, 1});
  CHECK(alone[0].cells[0].auroc == mixed[1].cells[0].auroc);
}

TEST_CASE("every built-in method runs") {
  Rng rng(5);
  std::vector<data::ProtocolSplit> splits;
  splits.push_back(split_of("a", blob(rng, 30, 2.0), blob(rng, 10, 2.0), blob(rng, 10, -2.0)));
  MethodParams p;
  p.train.epochs = 2;
  std::vector<Method> methods;
  for (const auto& name : method_names()) methods.push_back(make_method(name, p));
  const auto res = run_benchmark(methods, splits, {1, 2});
  for (const auto& r : res) {
    CAPTURE(r.method);
    CHECK(r.failures == 0);
  }
  CHECK(kind_of([&] { make_method("nope", p); }) == ErrorKind::parameter);
}
