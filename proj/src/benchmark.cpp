#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <thread>

#include "occnn/error.hpp"
#include "occnn/eval.hpp"

namespace occnn::eval {

namespace {

nn::NetworkConfig network_for(const MethodParams& p, std::size_t input_dim) {
  nn::NetworkConfig cfg = default_network_config(input_dim);
  if (!p.head_dims.empty()) cfg.head_dims = p.head_dims;
  cfg.classifier_activation = p.classifier_activation;
  return cfg;
}

OcCnnModel fit_occnn(const MethodParams& p, const FeatureSet& train_set, Rng& rng) {
  TrainConfig cfg = p.train;
  cfg.seed = rng.next_u64();
  return train(train_set, cfg, network_for(p, train_set.d())).model;
}

baselines::KernelSpec kernel_for(const MethodParams& p, const Matrix& x) {
  if (p.kernel == baselines::KernelKind::rbf && p.gamma > 0.0) {
    return {p.kernel, p.gamma};
  }
  return baselines::default_kernel(x, p.kernel);
}

}  // namespace

Method make_method(const std::string& name, const MethodParams& params) {
  using namespace baselines;
  if (name == "occnn") {
    return {name, [params](const FeatureSet& x, Rng& rng) -> Scorer {
              auto model = std::make_shared<OcCnnModel>(fit_occnn(params, x, rng));
              return [model](const Matrix& q) { return score(*model, q); };
            }};
  }
  if (name == "ocsvm") {
    return {name, [params](const FeatureSet& x, Rng&) -> Scorer {
              auto model = std::make_shared<OcSvmModel>(
                  ocsvm_fit(x, params.nu, kernel_for(params, x.data)));
              return [model](const Matrix& q) { return ocsvm_score(*model, q); };
            }};
  }
  if (name == "ocsvm_plus") {
    return {name, [params](const FeatureSet& x, Rng& rng) -> Scorer {
              const OcCnnModel net = fit_occnn(params, x, rng);
              KernelSpec k{params.kernel, params.gamma};
              if (params.kernel == KernelKind::linear) k.gamma = 1.0;
              auto model = std::make_shared<OcSvmPlusModel>(ocsvm_plus_fit(net, x, params.nu, k));
              return [model](const Matrix& q) { return ocsvm_plus_score(*model, q); };
            }};
  }
  if (name == "svdd") {
    return {name, [params](const FeatureSet& x, Rng&) -> Scorer {
              const double c =
                  params.svdd_c > 0.0 ? params.svdd_c : 1.0 / (0.1 * static_cast<double>(x.n()));
              auto model = std::make_shared<SvddModel>(svdd_fit(x, c, kernel_for(params, x.data)));
              return [model](const Matrix& q) { return svdd_score(*model, q); };
            }};
  }
  if (name == "mpm") {
    return {name, [params](const FeatureSet& x, Rng&) -> Scorer {
              const std::size_t dims =
                  params.pca_dims > 0
                      ? params.pca_dims
                      : std::min<std::size_t>({16, x.d(), x.n() > 0 ? x.n() - 1 : 0});
              auto model = std::make_shared<MpmModel>(
                  mpm_fit(x, dims, params.mpm_lambda, params.mpm_quantile));
              return [model](const Matrix& q) { return mpm_score(*model, q); };
            }};
  }
  if (name == "bsvm") {
    return {name, [params](const FeatureSet& x, Rng& rng) -> Scorer {
              auto model = std::make_shared<BsvmModel>(
                  bsvm_fit(x, params.train.sigma, params.bsvm_lambda, rng));
              return [model](const Matrix& q) { return bsvm_score(*model, q); };
            }};
  }
  fail(ErrorKind::parameter, "unknown method '" + name + "'");
}

std::vector<BenchmarkResult> run_benchmark(const std::vector<Method>& methods,
                                           const std::vector<data::ProtocolSplit>& splits,
                                           const BenchmarkOptions& opts) {
  if (methods.empty()) fail(ErrorKind::parameter, "run_benchmark: no methods");
  if (splits.empty()) fail(ErrorKind::protocol, "run_benchmark: no protocol splits");

  std::vector<BenchmarkResult> results(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    results[m].method = methods[m].name;
    results[m].cells.resize(splits.size());
  }
  const Rng root = Rng(opts.seed).substream("train");

  auto run_cell = [&](std::size_t cell) {
    const std::size_t m = cell / splits.size();
    const std::size_t s = cell % splits.size();
    const auto& split = splits[s];
    EvalReport& report = results[m].cells[s];
    report.method = methods[m].name;
    report.class_tag = split.class_tag;
    report.n_target_test = split.target_test.n();
    report.n_negative_test = split.negative_test.n();
    try {
      Rng rng = root.substream(methods[m].name + "|" + split.class_tag);
      const Scorer scorer = methods[m].fit(split.target_train, rng);
      const auto pos = scorer(split.target_test.data);
      const auto neg = scorer(split.negative_test.data);
      report = evaluate(methods[m].name, split.class_tag, pos, neg);
    } catch (const std::exception& e) {
      report.error = e.what();
    }
  };

  const std::size_t cells = methods.size() * splits.size();
  const std::size_t workers = std::clamp<std::size_t>(opts.threads, 1, cells);
  if (workers == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) run_cell(c);
      });
    }
  }

  for (auto& r : results) {
    double sum = 0.0;
    std::size_t ok = 0;
    for (const auto& cell : r.cells) {
      if (cell.ok()) {
        sum += cell.auroc;
        ++ok;
      }
    }
    r.failures = r.cells.size() - ok;
    r.mean_auroc = ok ? sum / static_cast<double>(ok) : std::nan("");
  }
  return results;
}

namespace {

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<BenchmarkResult>& results) {
  out << "method,class,auroc,n_pos,n_neg\n";
  for (const auto& r : results) {
    std::size_t pos = 0;
    std::size_t neg = 0;
    for (const auto& c : r.cells) {
      out << r.method << ',' << c.class_tag << ',' << (c.ok() ? fixed(c.auroc, 6) : "nan") << ','
          << c.n_target_test << ',' << c.n_negative_test << '\n';
      pos += c.n_target_test;
      neg += c.n_negative_test;
    }
    out << r.method << ",mean," << fixed(r.mean_auroc, 6) << ',' << pos << ',' << neg << '\n';
  }
}

void write_results_table(std::ostream& out, const std::vector<BenchmarkResult>& results,
                         const std::string& title) {
  if (results.empty()) return;
  std::size_t label_w = 5;
  for (const auto& c : results.front().cells) label_w = std::max(label_w, c.class_tag.size());
  std::vector<std::size_t> widths;
  for (const auto& r : results) widths.push_back(std::max<std::size_t>(r.method.size(), 7));

  auto pad = [&out](const std::string& s, std::size_t w, bool left) {
    if (left) out << s;
    for (std::size_t i = s.size(); i < w; ++i) out << ' ';
    if (!left) out << s;
  };
  auto rule = [&] {
    out << std::string(label_w, '-');
    for (auto w : widths) out << "-+-" << std::string(w, '-');
    out << '\n';
  };

  if (!title.empty()) out << title << '\n';
  pad("class", label_w, true);
  for (std::size_t m = 0; m < results.size(); ++m) {
    out << " | ";
    pad(results[m].method, widths[m], false);
  }
  out << '\n';
  rule();
  for (std::size_t s = 0; s < results.front().cells.size(); ++s) {
    pad(results.front().cells[s].class_tag, label_w, true);
    for (std::size_t m = 0; m < results.size(); ++m) {
      const auto& c = results[m].cells[s];
      out << " | ";
      pad(c.ok() ? fixed(c.auroc, 4) : "FAILED", widths[m], false);
    }
    out << '\n';
  }
  rule();
  pad("mean", label_w, true);
  for (std::size_t m = 0; m < results.size(); ++m) {
    out << " | ";
    pad(fixed(results[m].mean_auroc, 4), widths[m], false);
  }
  out << '\n';
}

}  // namespace occnn::eval
