#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "occnn/data_io.hpp"

using namespace occnn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run occnn_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "occnn");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("occnn_cli_" + std::to_string(Rng(reinterpret_cast<std::uintptr_t>(this)).next_u64()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string at(const std::string& name) const { return (dir / name).string(); }

  std::string synth(const std::string& name, std::size_t classes = 3, std::size_t n = 40) {
    const auto r = occnn_cli({"synth", "--kind", "blobs", "--classes", std::to_string(classes),
                              "--n", std::to_string(n), "--dim", "4", "--out", at(name),
                              "--seed", "3"});
    REQUIRE(r.code == 0);
    return at(name + "/manifest.json");
  }
};

}  // namespace

TEST_CASE("help exits 0 and shows the defaults") {
  const auto top = occnn_cli({"--help"});
  CHECK(top.code == 0);
  const auto train = occnn_cli({"train", "--help"});
  CHECK(train.code == 0);
  CHECK(train.out.find("--sigma") != std::string::npos);
  CHECK(train.out.find("0.01") != std::string::npos);
  CHECK(train.out.find("0.0001") != std::string::npos);
  CHECK(train.out.find("[64]") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(occnn_cli({}).code == 2);
  CHECK(occnn_cli({"train"}).code == 2);
  CHECK(occnn_cli({"frobnicate"}).code == 2);
  Workspace ws;
  CHECK(occnn_cli({"synth", "--kind", "spiral", "--out", ws.at("x")}).code == 2);
}

TEST_CASE("synth writes loadable files reproducibly") {
  Workspace ws;
  const auto manifest = ws.synth("a");
  ws.synth("b");
  const auto classes = data::load_classes(data::load_manifest(manifest));
  REQUIRE(classes.size() == 3);
  for (const auto& c : classes) {
    CHECK(c.features.n() == 40);
    CHECK(c.features.d() == 4);
    CHECK(slurp(ws.at("a/" + c.name + ".ocfv")) == slurp(ws.at("b/" + c.name + ".ocfv")));
  }
}

TEST_CASE("train is byte-reproducible and echoes its settings") {
  Workspace ws;
  const auto manifest = ws.synth("d");
  const std::vector<std::string> common{"train", "--manifest", manifest, "--class", "class_01",
                                        "--epochs", "3", "--seed", "9"};
  auto args = common;
  args.insert(args.end(), {"--out", ws.at("m1.ocnn")});
  const auto r1 = occnn_cli(args);
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("sigma=0.01") != std::string::npos);
  CHECK(r1.out.find("batch=64") != std::string::npos);
  args = common;
  args.insert(args.end(), {"--out", ws.at("m2.ocnn")});
  REQUIRE(occnn_cli(args).code == 0);
  CHECK(slurp(ws.at("m1.ocnn")) == slurp(ws.at("m2.ocnn")));

  const auto loss = slurp(ws.at("m1.ocnn.loss.csv"));
  CHECK(loss.rfind("epoch,loss\n", 0) == 0);
  CHECK(std::count(loss.begin(), loss.end(), '\n') == 4);

  CHECK(occnn_cli({"train", "--manifest", manifest, "--class", "nobody", "--out",
                   ws.at("x.ocnn")}).code == 2);
}

TEST_CASE("score writes one probability per row and rejects bad models") {
  Workspace ws;
  const auto manifest = ws.synth("d");
  REQUIRE(occnn_cli({"train", "--manifest", manifest, "--class", "class_00", "--epochs", "2",
                     "--out", ws.at("m.ocnn")}).code == 0);
  const auto r = occnn_cli({"score", "--model", ws.at("m.ocnn"), "--input",
                            ws.at("d/class_02.ocfv")});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::size_t count = 0;
  for (std::string line; std::getline(lines, line); ++count) {
    const double s = std::stod(line);
    CHECK((s >= 0.0 && s <= 1.0));
  }
  CHECK(count == 40);

  std::string bytes = slurp(ws.at("m.ocnn"));
  bytes[0] = 'Z';
  std::ofstream(ws.at("bad.ocnn"), std::ios::binary) << bytes;
  const auto bad = occnn_cli({"score", "--model", ws.at("bad.ocnn"), "--input",
                              ws.at("d/class_02.ocfv")});
  CHECK(bad.code == 3);
  CHECK(bad.err.find("bad magic") != std::string::npos);

  const std::string good = slurp(ws.at("m.ocnn"));
  std::ofstream(ws.at("cut.ocnn"), std::ios::binary) << good.substr(0, good.size() / 2);
  CHECK(occnn_cli({"score", "--model", ws.at("cut.ocnn"), "--input",
                   ws.at("d/class_02.ocfv")}).code == 3);
}

TEST_CASE("baseline models train and score through the cli") {
  Workspace ws;
  const auto manifest = ws.synth("d");
  for (const std::string method : {"ocsvm", "svdd", "mpm", "bsvm", "ocsvm_plus"}) {
    CAPTURE(method);
    const auto model = ws.at(method + ".ocbl");
    REQUIRE(occnn_cli({"train", "--manifest", manifest, "--class", "class_00", "--method",
                       method, "--epochs", "2", "--out", model}).code == 0);
    const auto r = occnn_cli({"score", "--model", model, "--input", ws.at("d/class_00.ocfv")});
    CHECK(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 40);
  }
}

TEST_CASE("benchmark: column order, reproducible csv, exit codes") {
  Workspace ws;
  const auto manifest = ws.synth("d");
  const std::vector<std::string> args{"benchmark", "--manifest", manifest, "--protocol", "auth",
                                      "--method", "ocsvm,occnn,mpm", "--epochs", "2",
                                      "--threads", "3"};
  auto a = args;
  a.insert(a.end(), {"--out", ws.at("r1.csv")});
  const auto r1 = occnn_cli(a);
  REQUIRE(r1.code == 0);
  auto b = args;
  b.insert(b.end(), {"--out", ws.at("r2.csv")});
  REQUIRE(occnn_cli(b).code == 0);
  CHECK(slurp(ws.at("r1.csv")) == slurp(ws.at("r2.csv")));

  const auto header = r1.out.substr(r1.out.find("class"));
  const auto p_svm = header.find("ocsvm");
  const auto p_cnn = header.find("occnn");
  const auto p_mpm = header.find("mpm");
  CHECK(p_svm < p_cnn);
  CHECK(p_cnn < p_mpm);

  // 40 samples per class leave 32 for training, too few for 40 PCA axes.
  const auto partial = occnn_cli({"benchmark", "--manifest", manifest, "--method", "mpm,ocsvm",
                                  "--pca-dims", "40"});
  CHECK(partial.code == 1);
  CHECK(partial.err.find("mpm") != std::string::npos);

  const auto single = ws.synth("one", 1);
  CHECK(occnn_cli({"benchmark", "--manifest", single, "--protocol", "auth"}).code == 2);
}

TEST_CASE("divergence exits 4") {
  Workspace ws;
  const auto manifest = ws.synth("d");
  const auto r = occnn_cli({"train", "--manifest", manifest, "--class", "class_00", "--mu",
                            "1e308", "--out", ws.at("m.ocnn")});
  CHECK(r.code == 4);
  CHECK(r.err.find("non-finite") != std::string::npos);
}
