#include "occnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "occnn/error.hpp"

namespace occnn::eval {

namespace {

void check_scores(std::span<const double> target, std::span<const double> negative) {
  if (target.empty() || negative.empty()) {
    fail(ErrorKind::input, "auroc: need at least one target and one negative score");
  }
  auto has_nan = [](std::span<const double> v) {
    return std::ranges::any_of(v, [](double s) { return std::isnan(s); });
  };
  if (has_nan(target) || has_nan(negative)) fail(ErrorKind::input, "auroc: NaN score");
}

}  // namespace

std::uint64_t mann_whitney_u2(std::span<const double> target, std::span<const double> negative) {
  check_scores(target, negative);
  const std::size_t n = target.size();
  const std::size_t total = n + negative.size();
  std::vector<std::pair<double, bool>> all;
  all.reserve(total);
  for (double s : target) all.emplace_back(s, true);
  for (double s : negative) all.emplace_back(s, false);
  std::ranges::sort(all, {}, &std::pair<double, bool>::first);

  // Tied block [i, j) shares the average 1-based rank (i + 1 + j) / 2; keep
  // it doubled so everything stays integral.
  std::uint64_t rank_sum2 = 0;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    std::uint64_t targets = 0;
    while (j < total && all[j].first == all[i].first) targets += all[j++].second ? 1 : 0;
    rank_sum2 += targets * (i + 1 + j);
    i = j;
  }
  return rank_sum2 - std::uint64_t{n} * (n + 1);
}

double auroc(std::span<const double> target, std::span<const double> negative) {
  const auto u2 = mann_whitney_u2(target, negative);
  return static_cast<double>(u2) /
         (2.0 * static_cast<double>(target.size()) * static_cast<double>(negative.size()));
}

std::vector<RocPoint> roc_curve(std::span<const double> target, std::span<const double> negative) {
  check_scores(target, negative);
  std::vector<double> t(target.begin(), target.end());
  std::vector<double> f(negative.begin(), negative.end());
  std::ranges::sort(t, std::greater<>{});
  std::ranges::sort(f, std::greater<>{});
  std::vector<double> thresholds(t);
  thresholds.insert(thresholds.end(), f.begin(), f.end());
  std::ranges::sort(thresholds, std::greater<>{});
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t ti = 0;
  std::size_t fi = 0;
  const auto nt = static_cast<double>(t.size());
  const auto nf = static_cast<double>(f.size());
  for (double thr : thresholds) {
    while (ti < t.size() && t[ti] >= thr) ++ti;
    while (fi < f.size() && f[fi] >= thr) ++fi;
    curve.push_back({static_cast<double>(fi) / nf, static_cast<double>(ti) / nt});
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  }
  return area;
}

EvalReport evaluate(std::string method, std::string class_tag,
                    std::span<const double> target_scores,
                    std::span<const double> negative_scores) {
  EvalReport r;
  r.method = std::move(method);
  r.class_tag = std::move(class_tag);
  r.n_target_test = target_scores.size();
  r.n_negative_test = negative_scores.size();
  r.auroc = auroc(target_scores, negative_scores);
  r.roc = roc_curve(target_scores, negative_scores);
  return r;
}

}  // namespace occnn::eval
