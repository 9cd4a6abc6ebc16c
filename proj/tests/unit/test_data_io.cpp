#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "occnn/data_io.hpp"
#include "occnn/error.hpp"

using namespace occnn;
using namespace occnn::data;
namespace fs = std::filesystem;

namespace {

template <typename F>
Error error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected occnn::Error");
  return Error(ErrorKind::usage, "");
}

template <typename F>
ErrorKind kind_of(F&& f) {
  return error_of(std::forward<F>(f)).kind();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("occnn_test_" + std::to_string(Rng(reinterpret_cast<std::uintptr_t>(this)).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<LabeledSet> classes_of(std::size_t count, std::size_t n, std::size_t d = 2) {
  std::vector<LabeledSet> out;
  for (std::size_t c = 0; c < count; ++c) {
    Matrix m(n, d);
    for (std::size_t r = 0; r < n; ++r) m(r, 0) = static_cast<double>(c * 1000 + r);
    out.push_back({"c" + std::to_string(c), FeatureSet{m, "c" + std::to_string(c)}});
  }
  return out;
}

// Identifies a row by its first entry (class·1000 + row).
std::set<double> ids(const FeatureSet& fs) {
  std::set<double> out;
  for (std::size_t r = 0; r < fs.n(); ++r) out.insert(fs.data(r, 0));
  return out;
}

bool disjoint(const std::set<double>& a, const std::set<double>& b) {
  return std::ranges::none_of(a, [&](double v) { return b.contains(v); });
}

}  // namespace

TEST_CASE("csv parses a plain two-line file") {
  std::istringstream in("1.0,2.0\n3.0,4.0");
  const auto fs = read_csv(in);
  CHECK(fs.n() == 2);
  CHECK(fs.d() == 2);
  CHECK(fs.data == Matrix{{1, 2}, {3, 4}});
}

TEST_CASE("csv round-trips doubles exactly") {
  Rng rng(1);
  const FeatureSet fs{gaussian_sample(rng, 7, 3, 0.0, 1e3), ""};
  std::stringstream buf;
  write_csv(buf, fs);
  CHECK(read_csv(buf).data == fs.data);
}

TEST_CASE("csv errors name the line") {
  std::istringstream ragged("1,2\n3,4\n5\n");
  const auto e = error_of([&] { read_csv(ragged); });
  CHECK(e.kind() == ErrorKind::parse);
  CHECK(std::string(e.what()).find("line 3") != std::string::npos);

  std::istringstream junk("1,2\n3,x\n");
  const auto j = error_of([&] { read_csv(junk); });
  CHECK(j.kind() == ErrorKind::parse);
  CHECK(std::string(j.what()).find("line 2") != std::string::npos);

  std::istringstream blank_inside("1,2\n\n3,4\n");
  CHECK(kind_of([&] { read_csv(blank_inside); }) == ErrorKind::parse);
  std::istringstream trailing_blank("1,2\n3,4\n\n");
  CHECK(read_csv(trailing_blank).n() == 2);
}

TEST_CASE("ocfv round-trips f32 payloads bitwise") {
  Rng rng(2);
  Matrix m = gaussian_sample(rng, 5, 4, 0.0, 1.0);
  for (double& v : m.values()) v = static_cast<double>(static_cast<float>(v));
  const FeatureSet fs{m, ""};
  std::stringstream first;
  write_ocfv(first, fs);
  CHECK(first.str().size() == 4 + 2 + 4 + 4 + 5 * 4 * 4);
  CHECK(first.str().substr(0, 4) == "OCFV");
  const auto back = read_ocfv(first);
  CHECK(back.data == m);
  std::stringstream second;
  write_ocfv(second, back);
  CHECK(second.str() == first.str());
}

TEST_CASE("ocfv header layout is little-endian") {
  const FeatureSet fs{Matrix{{1.0f, -2.0f, 0.5f}}, ""};
  std::stringstream buf;
  write_ocfv(buf, fs);
  const std::string b = buf.str();
  CHECK(static_cast<unsigned char>(b[4]) == 1);   // version low byte
  CHECK(static_cast<unsigned char>(b[5]) == 0);
  CHECK(static_cast<unsigned char>(b[6]) == 1);   // n = 1
  CHECK(static_cast<unsigned char>(b[10]) == 3);  // d = 3
  float first;
  std::memcpy(&first, b.data() + 14, 4);
  CHECK(first == 1.0f);
}

TEST_CASE("empty ocfv is header only") {
  const FeatureSet fs{Matrix(0, 6), ""};
  std::stringstream buf;
  write_ocfv(buf, fs);
  CHECK(buf.str().size() == 14);
  const auto back = read_ocfv(buf);
  CHECK(back.n() == 0);
  CHECK(back.d() == 6);
}

TEST_CASE("malformed ocfv files are parse errors with an offset") {
  const FeatureSet fs{Matrix{{1, 2}, {3, 4}}, ""};
  std::stringstream buf;
  write_ocfv(buf, fs);
  const std::string good = buf.str();

  std::istringstream truncated(good.substr(0, good.size() - 3));
  const auto t = error_of([&] { read_ocfv(truncated); });
  CHECK(t.kind() == ErrorKind::parse);
  CHECK(std::string(t.what()).find("offset") != std::string::npos);

  std::string bad = good;
  bad[1] = 'X';
  std::istringstream magic(bad);
  CHECK(kind_of([&] { read_ocfv(magic); }) == ErrorKind::parse);

  std::string version = good;
  version[4] = 9;
  std::istringstream ver(version);
  CHECK(kind_of([&] { read_ocfv(ver); }) == ErrorKind::parse);

  std::istringstream trailing(good + "x");
  CHECK(kind_of([&] { read_ocfv(trailing); }) == ErrorKind::parse);
}

TEST_CASE("feature files on disk honor the overwrite flag") {
  TempDir dir;
  const FeatureSet fs{Matrix{{1, 2}}, ""};
  const auto path = dir.path / "x.ocfv";
  save_feature_file(fs, path, FileFormat::ocfv);
  CHECK(load_feature_file(path, FileFormat::ocfv).data == fs.data);
  CHECK(kind_of([&] { save_feature_file(fs, path, FileFormat::ocfv, false); }) == ErrorKind::io);
  save_feature_file(FeatureSet{Matrix{{5, 6}}, ""}, path, FileFormat::ocfv, true);
  CHECK(load_feature_file(path, FileFormat::ocfv).data == Matrix{{5, 6}});
  CHECK(kind_of([&] { load_feature_file(dir.path / "missing.csv", FileFormat::csv); }) ==
        ErrorKind::io);
  CHECK(parse_format("binary") == FileFormat::ocfv);
}

TEST_CASE("manifest round-trip and width checks") {
  TempDir dir;
  save_feature_file(FeatureSet{Matrix{{1, 2}, {3, 4}}, ""}, dir.path / "b.csv", FileFormat::csv);
  save_feature_file(FeatureSet{Matrix{{5, 6}}, ""}, dir.path / "a.csv", FileFormat::csv);
  DatasetManifest m;
  m.dim = 2;
  m.format = FileFormat::csv;
  m.classes = {{"b", "b.csv"}, {"a", "a.csv"}};
  save_manifest(m, dir.path / "manifest.json");

  const auto back = load_manifest(dir.path / "manifest.json");
  CHECK(back.dim == 2);
  REQUIRE(back.classes.size() == 2);
  CHECK(back.classes[0].first == "a");  // sorted by name
  const auto sets = load_classes(back);
  CHECK(sets[0].features.n() == 1);
  CHECK(sets[1].features.n() == 2);

  std::ofstream(dir.path / "wide.json") << R"({"dim": 3, "format": "csv", "classes": {"a": "a.csv"}})";
  CHECK(kind_of([&] { load_classes(load_manifest(dir.path / "wide.json")); }) ==
        ErrorKind::format);
  std::ofstream(dir.path / "broken.json") << "{\"dim\": ";
  CHECK(kind_of([&] { load_manifest(dir.path / "broken.json"); }) == ErrorKind::parse);
}

TEST_CASE("abnormality protocol counts and disjointness") {
  const auto normal = classes_of(2, 100);
  const auto abnormal = classes_of(1, 40).front().features;
  const auto splits = build_abnormality_protocol(normal, abnormal, Rng(1));
  REQUIRE(splits.size() == 2);
  for (const auto& s : splits) {
    CHECK(s.target_train.n() == 60);
    CHECK(s.target_test.n() == 40);
    CHECK(s.negative_test.n() == 40);
    CHECK(disjoint(ids(s.target_train), ids(s.target_test)));
    for (const auto& [set, row] : s.negative_rows) CHECK(set == normal.size());
  }
  CHECK(kind_of([&] { build_abnormality_protocol(normal, FeatureSet{Matrix(0, 2), ""}, Rng(1)); }) ==
        ErrorKind::protocol);
}

TEST_CASE("auth protocol counts and negatives") {
  const auto users = classes_of(3, 10);
  const auto splits = build_auth_protocol(users, Rng(2));
  REQUIRE(splits.size() == 3);
  for (std::size_t u = 0; u < 3; ++u) {
    const auto& s = splits[u];
    CHECK(s.target_train.n() == 8);
    CHECK(s.target_test.n() == 2);
    CHECK(s.negative_test.n() == 4);
    CHECK(disjoint(ids(s.target_train), ids(s.target_test)));
    // Negatives are the other users' test rows, never anyone's train rows.
    std::set<double> other_tests;
    for (std::size_t v = 0; v < 3; ++v)
      if (v != u) for (double id : ids(splits[v].target_test)) other_tests.insert(id);
    CHECK(ids(s.negative_test) == other_tests);
  }
  CHECK(kind_of([&] { build_auth_protocol(classes_of(1, 10), Rng(2)); }) == ErrorKind::protocol);

  // 80/20 of 9 rounds toward train.
  const auto nine = build_auth_protocol(classes_of(2, 9), Rng(3));
  CHECK(nine[0].target_train.n() == 8);
  CHECK(nine[0].target_test.n() == 1);
}

TEST_CASE("novelty protocol counts and shared negatives") {
  const auto classes = classes_of(4, 20);
  const auto splits = build_novelty_protocol(classes, Rng(4), 50);
  REQUIRE(splits.size() == 2);
  for (const auto& s : splits) {
    CHECK(s.target_train.n() == 10);
    CHECK(s.target_test.n() == 10);
    CHECK(s.negative_test.n() == 40);
    CHECK(s.negative_test.data == splits[0].negative_test.data);
  }
  CHECK(splits[0].class_tag == "c0");
  CHECK(splits[1].class_tag == "c1");
  CHECK(kind_of([&] { build_novelty_protocol(classes_of(3, 20), Rng(4)); }) ==
        ErrorKind::protocol);
}

TEST_CASE("splits do not depend on class order") {
  auto classes = classes_of(3, 20);
  const auto a = build_auth_protocol(classes, Rng(5));
  std::ranges::reverse(classes);
  const auto b = build_auth_protocol(classes, Rng(5));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ids(a[i].target_train) == ids(b[2 - i].target_train));
    CHECK(ids(a[i].negative_test) == ids(b[2 - i].negative_test));
  }
}

TEST_CASE("synthetic blobs land on their centers") {
  Rng rng(6);
  SynthParams p;
  p.classes = 2;
  p.n_per_class = 400;
  p.dim = 3;
  p.separation = 10.0;
  p.noise = 1.0;
  const auto sets = synth_dataset(SynthKind::blobs, p, rng);
  REQUIRE(sets.size() == 2);
  std::vector<std::vector<double>> means;
  for (const auto& s : sets) {
    CHECK(s.features.n() == 400);
    CHECK(s.features.d() == 3);
    std::vector<double> mean(3, 0.0);
    for (std::size_t r = 0; r < 400; ++r)
      for (std::size_t k = 0; k < 3; ++k) mean[k] += s.features.data(r, k) / 400.0;
    means.push_back(mean);
  }
  // Anchors sit at (10/√2)·e_c, so the centers are 10 apart.
  const double scale = 10.0 / std::sqrt(2.0);
  CHECK(std::abs(means[0][0] - scale) < 0.5);
  CHECK(std::abs(means[1][1] - scale) < 0.5);
  CHECK(std::abs(means[0][1]) < 0.5);
}

TEST_CASE("synthetic data is reproducible and validated") {
  SynthParams p;
  p.classes = 3;
  p.dim = 5;
  for (auto kind : {SynthKind::blobs, SynthKind::ring, SynthKind::manifold}) {
    Rng a(7), b(7);
    const auto x = synth_dataset(kind, p, a);
    const auto y = synth_dataset(kind, p, b);
    REQUIRE(x.size() == 3);
    for (std::size_t c = 0; c < 3; ++c) CHECK(x[c].features.data == y[c].features.data);
  }
  Rng rng(8);
  p.noise = -1.0;
  CHECK(kind_of([&] { synth_dataset(SynthKind::blobs, p, rng); }) == ErrorKind::parameter);
  CHECK(kind_of([] { parse_synth_kind("spiral"); }) == ErrorKind::usage);
}
