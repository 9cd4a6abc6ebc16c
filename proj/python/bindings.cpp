#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "occnn/baselines.hpp"
#include "occnn/data_io.hpp"
#include "occnn/error.hpp"
#include "occnn/eval.hpp"
#include "occnn/occnn.hpp"

namespace py = pybind11;
using namespace occnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) fail(ErrorKind::shape, "expected a 2-d array, got " + std::to_string(a.ndim()) + "-d");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return {rows, cols, std::vector<double>(a.data(), a.data() + rows * cols)};
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) fail(ErrorKind::shape, "expected a 1-d array, got " + std::to_string(a.ndim()) + "-d");
  return {a.data(), a.data() + a.size()};
}

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// Keeps the final loss history next to the model; load() leaves it empty.
struct PyNetwork {
  OcCnnModel model;
  std::vector<double> loss_history;
};

struct PyBaseline {
  baselines::BaselineModel model;
};

baselines::KernelSpec kernel_for(const Matrix& x, const std::string& kernel, double gamma) {
  const auto kind = baselines::parse_kernel(kernel);
  auto k = baselines::default_kernel(x, kind);
  if (gamma > 0.0) k.gamma = gamma;
  return k;
}

PyNetwork train_network(const Array& x, double sigma, double mu, double lr, std::size_t batch_size,
                        std::size_t epochs, std::uint64_t seed,
                        std::vector<std::size_t> head_dims, const std::string& resample) {
  TrainConfig cfg;
  cfg.sigma = sigma;
  cfg.mu = mu;
  cfg.lr = lr;
  cfg.batch_size = batch_size;
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.resample = parse_resample(resample);
  const FeatureSet fs{to_matrix(x), "python"};
  auto net_cfg = default_network_config(fs.d());
  if (!head_dims.empty()) net_cfg.head_dims = std::move(head_dims);
  py::gil_scoped_release release;
  auto r = train(fs, cfg, net_cfg);
  return {std::move(r.model), std::move(r.loss_history)};
}

std::vector<data::ProtocolSplit> splits_for(const std::vector<data::LabeledSet>& classes,
                                            const std::string& protocol, std::uint64_t seed,
                                            std::size_t novel_per_class,
                                            const std::string& abnormal_class) {
  auto rng = Rng(seed).substream("splits");
  if (protocol == "auth") return data::build_auth_protocol(classes, rng);
  if (protocol == "novelty") return data::build_novelty_protocol(classes, rng, novel_per_class);
  if (protocol == "abnormality") {
    std::vector<data::LabeledSet> normal;
    const data::LabeledSet* abnormal = nullptr;
    for (const auto& c : classes) {
      if (c.name == abnormal_class) abnormal = &c;
      else normal.push_back(c);
    }
    if (!abnormal) fail(ErrorKind::protocol, "no class named '" + abnormal_class + "'");
    return data::build_abnormality_protocol(normal, abnormal->features, rng);
  }
  fail(ErrorKind::parameter, "unknown protocol '" + protocol + "'");
}

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::input: return "input";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::parse: return "parse";
    case ErrorKind::format: return "format";
    case ErrorKind::corrupt: return "corrupt";
    case ErrorKind::usage: return "usage";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "One-class classifiers trained against Gaussian pseudo-negatives, plus baselines.";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("kind") = kind_name(e.kind());
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<PyNetwork>(m, "Network")
      .def_property_readonly("input_dim", [](const PyNetwork& n) { return n.model.input_dim(); })
      .def_property_readonly("feature_dim", [](const PyNetwork& n) { return n.model.feature_dim(); })
      .def_property_readonly("final_loss", [](const PyNetwork& n) { return n.model.final_loss; })
      .def_property_readonly("loss_history", [](const PyNetwork& n) { return n.loss_history; })
      .def_property_readonly("config", [](const PyNetwork& n) {
        const auto& c = n.model.config;
        py::dict d;
        d["sigma"] = c.sigma;
        d["mu"] = c.mu;
        d["lr"] = c.lr;
        d["batch_size"] = c.batch_size;
        d["epochs"] = c.epochs;
        d["seed"] = c.seed;
        d["resample"] = to_string(c.resample);
        d["head_dims"] = n.model.network.config.head_dims;
        return d;
      })
      .def("score", [](const PyNetwork& n, const Array& x) { return to_array(score(n.model, to_matrix(x))); },
           py::arg("x"), "Target-class probability per row.")
      .def("score_latent",
           [](const PyNetwork& n, const Array& z) { return to_array(score_latent(n.model, to_matrix(z))); },
           py::arg("z"), "Probability for points given in feature space, before normalization.")
      .def("features",
           [](const PyNetwork& n, const Array& x) { return to_array(extract_features(n.model, to_matrix(x))); },
           py::arg("x"))
      .def("save", [](const PyNetwork& n, const std::filesystem::path& p) { save_model(p, n.model); })
      .def("to_bytes", [](const PyNetwork& n) {
        std::ostringstream out;
        save_model(out, n.model);
        return py::bytes(out.str());
      });

  py::class_<PyBaseline>(m, "Baseline")
      .def_property_readonly("method", [](const PyBaseline& b) { return baselines::method_name(b.model); })
      .def_property_readonly("input_dim", [](const PyBaseline& b) { return baselines::input_dim(b.model); })
      .def("score",
           [](const PyBaseline& b, const Array& x) { return to_array(baselines::score(b.model, to_matrix(x))); },
           py::arg("x"), "Decision value per row; larger means more target-like.")
      .def("save", [](const PyBaseline& b, const std::filesystem::path& p) { baselines::save_baseline(p, b.model); })
      .def("to_bytes", [](const PyBaseline& b) {
        std::ostringstream out;
        baselines::save_baseline(out, b.model);
        return py::bytes(out.str());
      });

  m.def("train", &train_network, py::arg("x"), py::arg("sigma") = 0.01, py::arg("mu") = 0.0,
        py::arg("lr") = 1e-4, py::arg("batch_size") = 64, py::arg("epochs") = 30,
        py::arg("seed") = 0, py::arg("head_dims") = std::vector<std::size_t>{},
        py::arg("resample") = "batch",
        "Train the one-class network on the rows of x.");

  m.def("load", [](const std::filesystem::path& p) -> py::object {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + p.string());
    char magic[4] = {};
    in.read(magic, 4);
    in.seekg(0);
    if (std::string_view(magic, 4) == "OCNN") return py::cast(PyNetwork{load_model(in), {}});
    if (std::string_view(magic, 4) == "OCBL") return py::cast(PyBaseline{baselines::load_baseline(in)});
    fail(ErrorKind::corrupt, "bad magic in model file " + p.string());
  }, py::arg("path"), "Load a saved network or baseline model.");

  m.def("ocsvm", [](const Array& x, double nu, const std::string& kernel, double gamma) {
    const FeatureSet fs{to_matrix(x), ""};
    const auto k = kernel_for(fs.data, kernel, gamma);
    py::gil_scoped_release release;
    return PyBaseline{baselines::ocsvm_fit(fs, nu, k)};
  }, py::arg("x"), py::arg("nu") = 0.1, py::arg("kernel") = "rbf", py::arg("gamma") = 0.0);

  m.def("svdd", [](const Array& x, double c, const std::string& kernel, double gamma) {
    const FeatureSet fs{to_matrix(x), ""};
    const auto k = kernel_for(fs.data, kernel, gamma);
    if (c <= 0.0) c = 1.0 / (0.1 * static_cast<double>(fs.n()));
    py::gil_scoped_release release;
    return PyBaseline{baselines::svdd_fit(fs, c, k)};
  }, py::arg("x"), py::arg("c") = 0.0, py::arg("kernel") = "rbf", py::arg("gamma") = 0.0);

  m.def("mpm", [](const Array& x, std::size_t pca_dims, double lambda, double quantile) {
    const FeatureSet fs{to_matrix(x), ""};
    if (pca_dims == 0) pca_dims = std::min<std::size_t>({16, fs.d(), fs.n() > 0 ? fs.n() - 1 : 0});
    return PyBaseline{baselines::mpm_fit(fs, pca_dims, lambda, quantile)};
  }, py::arg("x"), py::arg("pca_dims") = 0, py::arg("lam") = 1e-3, py::arg("quantile") = 0.05);

  m.def("bsvm", [](const Array& x, double sigma, double lambda, std::uint64_t seed) {
    const FeatureSet fs{to_matrix(x), ""};
    auto rng = Rng(seed).substream("train");
    return PyBaseline{baselines::bsvm_fit(fs, sigma, lambda, rng)};
  }, py::arg("x"), py::arg("sigma") = 0.01, py::arg("lam") = 1e-3, py::arg("seed") = 0);

  m.def("ocsvm_plus", [](const PyNetwork& net, const Array& x, double nu) {
    const FeatureSet fs{to_matrix(x), ""};
    py::gil_scoped_release release;
    return PyBaseline{baselines::ocsvm_plus_fit(net.model, fs, nu, {baselines::KernelKind::rbf, 0.0})};
  }, py::arg("network"), py::arg("x"), py::arg("nu") = 0.1,
     "OC-SVM on the network's extracted features.");

  m.def("auroc", [](const Array& t, const Array& f) { return eval::auroc(to_vector(t), to_vector(f)); },
        py::arg("target"), py::arg("negative"));
  m.def("mann_whitney_u2",
        [](const Array& t, const Array& f) { return eval::mann_whitney_u2(to_vector(t), to_vector(f)); },
        py::arg("target"), py::arg("negative"), "Twice the Mann-Whitney U statistic, as an integer.");

  m.def("read_features", [](const std::filesystem::path& p, const std::string& format) {
    const auto f = format == "csv" ? data::FileFormat::csv : data::FileFormat::ocfv;
    return to_array(data::load_feature_file(p, f).data);
  }, py::arg("path"), py::arg("format") = "ocfv");
  m.def("write_features", [](const std::filesystem::path& p, const Array& x, const std::string& format) {
    const auto f = format == "csv" ? data::FileFormat::csv : data::FileFormat::ocfv;
    data::save_feature_file({to_matrix(x), ""}, p, f);
  }, py::arg("path"), py::arg("x"), py::arg("format") = "ocfv");

  m.def("synth", [](const std::string& kind, std::size_t classes, std::size_t n, std::size_t dim,
                    double separation, double noise, std::uint64_t seed) {
    data::SynthParams p{classes, n, dim, separation, noise};
    auto rng = Rng(seed).substream("synth");
    py::dict out;
    for (const auto& c : data::synth_dataset(data::parse_synth_kind(kind), p, rng))
      out[py::str(c.name)] = to_array(c.features.data);
    return out;
  }, py::arg("kind") = "manifold", py::arg("classes") = 2, py::arg("n") = 100, py::arg("dim") = 2,
     py::arg("separation") = 10.0, py::arg("noise") = 1.0, py::arg("seed") = 0,
     "Synthetic classes as {name: array}.");

  m.def("benchmark", [](const py::dict& classes, const std::vector<std::string>& methods,
                        const std::string& protocol, std::uint64_t seed, std::size_t threads,
                        std::size_t epochs, std::size_t novel_per_class,
                        const std::string& abnormal_class) {
    std::vector<data::LabeledSet> sets;
    for (const auto& [name, x] : classes) {
      const auto n = name.cast<std::string>();
      sets.push_back({n, {to_matrix(x.cast<Array>()), n}});
    }
    std::ranges::sort(sets, {}, &data::LabeledSet::name);
    eval::MethodParams params;
    params.train.epochs = epochs;
    std::vector<eval::Method> ms;
    for (const auto& name : methods) ms.push_back(eval::make_method(name, params));
    const auto splits = splits_for(sets, protocol, seed, novel_per_class, abnormal_class);
    std::vector<eval::BenchmarkResult> res;
    {
      py::gil_scoped_release release;
      res = eval::run_benchmark(ms, splits, {seed, threads});
    }
    py::dict out;
    for (const auto& r : res) {
      py::dict cells;
      for (const auto& c : r.cells) cells[py::str(c.class_tag)] = c.auroc;
      cells["mean"] = r.mean_auroc;
      out[py::str(r.method)] = cells;
    }
    return out;
  }, py::arg("classes"), py::arg("methods") = eval::method_names(), py::arg("protocol") = "auth",
     py::arg("seed") = 0, py::arg("threads") = 1, py::arg("epochs") = 30,
     py::arg("novel_per_class") = 50, py::arg("abnormal_class") = "abnormal",
     "AUROC per method and split; failed cells are NaN.");
}
