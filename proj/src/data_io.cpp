#include "occnn/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "occnn/binary_io.hpp"
#include "occnn/error.hpp"

namespace occnn::data {

namespace fs = std::filesystem;

namespace {
constexpr char kMagic[] = "OCFV";
constexpr std::uint16_t kVersion = 1;
}  // namespace

FileFormat parse_format(const std::string& s) {
  if (s == "csv") return FileFormat::csv;
  if (s == "ocfv" || s == "binary") return FileFormat::ocfv;
  fail(ErrorKind::parameter, "unknown feature format '" + s + "' (expected csv or ocfv)");
}

const char* to_string(FileFormat f) noexcept { return f == FileFormat::csv ? "csv" : "ocfv"; }

FeatureSet read_ocfv(std::istream& in) {
  io::Reader r(in);
  try {
    r.expect_magic({kMagic, 4});
    const auto version = r.u16();
    if (version != kVersion) {
      fail(ErrorKind::parse, "unsupported OCFV version " + std::to_string(version));
    }
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    if (n > 0 && d == 0) fail(ErrorKind::parse, "OCFV header has rows but zero width");
    if (std::uint64_t{n} * d > (std::uint64_t{1} << 32)) {
      fail(ErrorKind::parse, "OCFV header declares an implausible payload");
    }
    FeatureSet out{Matrix(n, d), "ocfv"};
    for (double& v : out.data.values()) {
      const auto offset = r.offset();
      v = static_cast<double>(r.f32());
      if (!std::isfinite(v)) {
        fail(ErrorKind::parse, "non-finite value at byte offset " + std::to_string(offset));
      }
    }
    if (!r.at_end()) {
      fail(ErrorKind::parse, "trailing bytes after OCFV payload at byte offset " +
                                 std::to_string(r.offset()));
    }
    return out;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::corrupt) fail(ErrorKind::parse, e.what());
    throw;
  }
}

void write_ocfv(std::ostream& out, const FeatureSet& fs) {
  io::Writer w(out);
  w.magic({kMagic, 4});
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(fs.n()));
  w.u32(static_cast<std::uint32_t>(fs.d()));
  for (double v : fs.data.values()) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) fail(ErrorKind::format, "value not representable as finite f32");
    w.f32(f);
  }
}

FeatureSet read_csv(std::istream& in) {
  std::vector<double> values;
  std::size_t width = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      // Only a trailing run of blank lines is tolerated.
      std::string rest;
      while (std::getline(in, rest)) {
        ++line_no;
        if (!rest.empty() && rest != "\r") {
          fail(ErrorKind::parse, "blank line " + std::to_string(line_no - 1) + " inside CSV");
        }
      }
      break;
    }
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (;;) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{} || !std::isfinite(v)) {
        fail(ErrorKind::parse, "line " + std::to_string(line_no) + ", field " +
                                   std::to_string(count + 1) + ": not a finite number");
      }
      values.push_back(v);
      ++count;
      p = next;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      if (*p != ',') {
        fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": unexpected character '" +
                                   std::string(1, *p) + "'");
      }
      ++p;
    }
    if (rows == 0) {
      width = count;
    } else if (count != width) {
      fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + std::to_string(count) +
                                 " fields, expected " + std::to_string(width));
    }
    ++rows;
  }
  return {Matrix(rows, width, std::move(values)), "csv"};
}

void write_csv(std::ostream& out, const FeatureSet& fs) {
  char buf[64];
  for (std::size_t r = 0; r < fs.n(); ++r) {
    const auto row = fs.data.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out.put(',');
      auto res = std::to_chars(buf, buf + sizeof buf, row[c]);
      out.write(buf, res.ptr - buf);
    }
    out.put('\n');
  }
  if (!out) fail(ErrorKind::io, "CSV write failed");
}

FeatureSet load_feature_file(const fs::path& path, FileFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open feature file " + path.string());
  try {
    FeatureSet out = format == FileFormat::csv ? read_csv(in) : read_ocfv(in);
    out.source = path.filename().string();
    return out;
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void save_feature_file(const FeatureSet& set, const fs::path& path, FileFormat format,
                       bool overwrite) {
  if (!overwrite && fs::exists(path)) {
    fail(ErrorKind::io, "refusing to overwrite existing file " + path.string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  if (format == FileFormat::csv) {
    write_csv(out, set);
  } else {
    write_ocfv(out, set);
  }
}

fs::path DatasetManifest::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open manifest " + path.string());
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    const auto doc = nlohmann::json::parse(in);
    m.dim = doc.at("dim").get<std::size_t>();
    m.format = parse_format(doc.value("format", std::string("ocfv")));
    for (const auto& [name, file] : doc.at("classes").items()) {
      m.classes.emplace_back(name, fs::path(file.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "manifest " + path.string() + ": " + e.what());
  }
  if (m.dim == 0) fail(ErrorKind::format, "manifest " + path.string() + ": dim must be >= 1");
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  nlohmann::json doc;
  doc["dim"] = manifest.dim;
  doc["format"] = to_string(manifest.format);
  doc["classes"] = nlohmann::json::object();
  for (const auto& [name, file] : manifest.classes) doc["classes"][name] = file.generic_string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
}

std::vector<LabeledSet> load_classes(const DatasetManifest& manifest) {
  std::vector<LabeledSet> out;
  for (const auto& [name, file] : manifest.classes) {
    FeatureSet set = load_feature_file(manifest.resolve(file), manifest.format);
    if (set.n() > 0 && set.d() != manifest.dim) {
      fail(ErrorKind::format, "class '" + name + "' has d = " + std::to_string(set.d()) +
                                  ", manifest declares " + std::to_string(manifest.dim));
    }
    set.source = name;
    out.push_back({name, std::move(set)});
  }
  return out;
}

// ------------------------------------------------------------ protocols

namespace {

std::vector<std::size_t> shuffled_rows(const Rng& rng, const std::string& name, std::size_t n) {
  Rng stream = rng.substream("class:" + name);
  return permutation(stream, n);
}

FeatureSet subset(const LabeledSet& set, std::span<const std::size_t> rows, const char* role) {
  return {take_rows(set.features.data, rows), set.name + "/" + role};
}

FeatureSet gather(const std::vector<LabeledSet>& sets, const std::vector<RowRef>& refs,
                  std::size_t dim, const std::string& tag) {
  Matrix out(refs.size(), dim);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& src = sets[refs[i].first].features.data;
    std::ranges::copy(src.row(refs[i].second), out.row(i).begin());
  }
  return {std::move(out), tag};
}

std::size_t common_dim(const std::vector<LabeledSet>& sets) {
  std::size_t d = 0;
  for (const auto& s : sets) {
    if (s.features.n() == 0) continue;
    if (d == 0) d = s.features.d();
    if (s.features.d() != d) {
      fail(ErrorKind::format, "class '" + s.name + "' has d = " + std::to_string(s.features.d()) +
                                  ", expected " + std::to_string(d));
    }
  }
  return d;
}

}  // namespace

std::vector<ProtocolSplit> build_abnormality_protocol(const std::vector<LabeledSet>& normal,
                                                      const FeatureSet& abnormal,
                                                      const Rng& rng) {
  if (normal.empty()) fail(ErrorKind::protocol, "abnormality protocol: no normal classes");
  if (abnormal.n() < 1) {
    fail(ErrorKind::protocol, "abnormality protocol: need at least 1 abnormal sample, got 0");
  }
  const std::size_t d = common_dim(normal);
  if (d != 0 && abnormal.d() != d) {
    fail(ErrorKind::format, "abnormality protocol: abnormal set width differs from normal classes");
  }
  // The abnormal pool is treated as set index normal.size() in negative_rows.
  std::vector<ProtocolSplit> splits;
  for (const auto& cls : normal) {
    const std::size_t n = cls.features.n();
    const std::size_t m = std::min(abnormal.n(), n / 2);
    if (m < 1) {
      fail(ErrorKind::protocol, "abnormality protocol: class '" + cls.name + "' has " +
                                    std::to_string(n) +
                                    " normal samples; need at least 2 (1 train + 1 test)");
    }
    const auto order = shuffled_rows(rng, cls.name, n);
    Rng pick = rng.substream("abnormal:" + cls.name);
    const auto abnormal_order = permutation(pick, abnormal.n());

    ProtocolSplit s;
    s.class_tag = cls.name;
    s.test_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
    s.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(m), order.end());
    std::vector<std::size_t> neg(abnormal_order.begin(),
                                 abnormal_order.begin() + static_cast<std::ptrdiff_t>(m));
    for (auto r : neg) s.negative_rows.emplace_back(normal.size(), r);
    s.target_train = subset(cls, s.train_rows, "train");
    s.target_test = subset(cls, s.test_rows, "test");
    s.negative_test = {take_rows(abnormal.data, neg), "abnormal"};
    splits.push_back(std::move(s));
  }
  return splits;
}

std::vector<ProtocolSplit> build_auth_protocol(const std::vector<LabeledSet>& users,
                                               const Rng& rng) {
  if (users.size() < 2) {
    fail(ErrorKind::protocol, "auth protocol: need at least 2 users, got " +
                                  std::to_string(users.size()));
  }
  const std::size_t d = common_dim(users);
  std::vector<std::vector<std::size_t>> train(users.size()), test(users.size());
  for (std::size_t u = 0; u < users.size(); ++u) {
    const std::size_t n = users[u].features.n();
    const std::size_t n_train = (4 * n + 4) / 5;  // ceil(0.8 n)
    if (n_train < 1 || n_train >= n) {
      fail(ErrorKind::protocol, "auth protocol: user '" + users[u].name + "' has " +
                                    std::to_string(n) +
                                    " samples; an 80/20 split needs at least 5");
    }
    const auto order = shuffled_rows(rng, users[u].name, n);
    train[u].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    test[u].assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  }
  std::vector<ProtocolSplit> splits;
  for (std::size_t u = 0; u < users.size(); ++u) {
    ProtocolSplit s;
    s.class_tag = users[u].name;
    s.train_rows = train[u];
    s.test_rows = test[u];
    for (std::size_t o = 0; o < users.size(); ++o) {
      if (o == u) continue;
      for (auto r : test[o]) s.negative_rows.emplace_back(o, r);
    }
    s.target_train = subset(users[u], s.train_rows, "train");
    s.target_test = subset(users[u], s.test_rows, "test");
    s.negative_test = gather(users, s.negative_rows, d, "others/test");
    splits.push_back(std::move(s));
  }
  return splits;
}

std::vector<ProtocolSplit> build_novelty_protocol(const std::vector<LabeledSet>& classes,
                                                  const Rng& rng, std::size_t novel_per_class) {
  if (classes.size() < 2 || classes.size() % 2 != 0) {
    fail(ErrorKind::protocol, "novelty protocol: need an even number of classes >= 2, got " +
                                  std::to_string(classes.size()));
  }
  if (novel_per_class < 1) fail(ErrorKind::parameter, "novel_per_class must be >= 1");
  const std::size_t d = common_dim(classes);
  const std::size_t half = classes.size() / 2;

  std::vector<RowRef> novel;
  for (std::size_t c = half; c < classes.size(); ++c) {
    const auto order = shuffled_rows(rng, classes[c].name, classes[c].features.n());
    const std::size_t take = std::min(novel_per_class, order.size());
    for (std::size_t i = 0; i < take; ++i) novel.emplace_back(c, order[i]);
  }
  if (novel.empty()) fail(ErrorKind::protocol, "novelty protocol: novel classes are empty");
  const FeatureSet novel_set = gather(classes, novel, d, "novel");

  std::vector<ProtocolSplit> splits;
  for (std::size_t c = 0; c < half; ++c) {
    const std::size_t n = classes[c].features.n();
    const std::size_t n_train = (n + 1) / 2;
    if (n < 2) {
      fail(ErrorKind::protocol, "novelty protocol: target class '" + classes[c].name + "' has " +
                                    std::to_string(n) + " samples; need at least 2");
    }
    const auto order = shuffled_rows(rng, classes[c].name, n);
    ProtocolSplit s;
    s.class_tag = classes[c].name;
    s.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    s.negative_rows = novel;
    s.target_train = subset(classes[c], s.train_rows, "train");
    s.target_test = subset(classes[c], s.test_rows, "test");
    s.negative_test = novel_set;
    splits.push_back(std::move(s));
  }
  return splits;
}

// ------------------------------------------------------------ synthesis

SynthKind parse_synth_kind(const std::string& s) {
  if (s == "blobs") return SynthKind::blobs;
  if (s == "ring") return SynthKind::ring;
  if (s == "manifold") return SynthKind::manifold;
  fail(ErrorKind::usage, "unknown synthetic kind '" + s + "' (expected blobs, ring or manifold)");
}

const char* to_string(SynthKind k) noexcept {
  switch (k) {
    case SynthKind::blobs: return "blobs";
    case SynthKind::ring: return "ring";
    case SynthKind::manifold: return "manifold";
  }
  return "blobs";
}

namespace {

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  for (;;) {
    const Matrix g = gaussian_sample(rng, 1, d, 0.0, 1.0);
    double norm = 0.0;
    for (double v : g.values()) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 1e-8) {
      std::vector<double> u(g.values().begin(), g.values().end());
      for (double& v : u) v /= norm;
      return u;
    }
  }
}

// Unit vector orthogonal to `u`.
std::vector<double> orthogonal_unit(Rng& rng, const std::vector<double>& u) {
  for (;;) {
    auto v = random_unit(rng, u.size());
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    double norm = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      v[i] -= dot * u[i];
      norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    if (norm > 1e-6) {
      for (double& x : v) x /= norm;
      return v;
    }
  }
}

// Class anchors with pairwise distance `separation` (exact while classes <= dim).
std::vector<std::vector<double>> anchors(Rng& rng, const SynthParams& p) {
  const double scale = p.separation / std::numbers::sqrt2;
  std::vector<std::vector<double>> out;
  for (std::size_t c = 0; c < p.classes; ++c) {
    std::vector<double> a(p.dim, 0.0);
    if (p.classes <= p.dim) {
      a[c] = scale;
    } else {
      a = random_unit(rng, p.dim);
      for (double& v : a) v *= scale;
    }
    out.push_back(std::move(a));
  }
  return out;
}

constexpr double kConeSpread = 0.2;

std::string class_name(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "class_%02zu", c);
  return buf;
}

}  // namespace

std::vector<LabeledSet> synth_dataset(SynthKind kind, const SynthParams& p, Rng& rng) {
  if (p.classes < 1 || p.n_per_class < 1 || p.dim < 1) {
    fail(ErrorKind::parameter, "synth: classes, n_per_class and dim must be >= 1");
  }
  if (kind != SynthKind::blobs && p.dim < 2) {
    fail(ErrorKind::parameter, "synth: ring and manifold need dim >= 2");
  }
  if (!(p.separation >= 0.0) || !(p.noise >= 0.0)) {
    fail(ErrorKind::parameter, "synth: separation and noise must be >= 0");
  }
  std::vector<LabeledSet> out;
  const auto centers = anchors(rng, p);
  const auto axis = kind == SynthKind::manifold ? random_unit(rng, p.dim) : std::vector<double>{};
  for (std::size_t c = 0; c < p.classes; ++c) {
    Matrix x = gaussian_sample(rng, p.n_per_class, p.dim, 0.0, p.noise);
    switch (kind) {
      case SynthKind::blobs:
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t k = 0; k < p.dim; ++k) x(r, k) += centers[c][k];
        break;
      case SynthKind::ring: {
        const auto u = random_unit(rng, p.dim);
        const auto v = orthogonal_unit(rng, u);
        const double radius = p.separation / 4.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const double angle = 2.0 * std::numbers::pi * rng.uniform();
          for (std::size_t k = 0; k < p.dim; ++k) {
            x(r, k) += centers[c][k] +
                       radius * (std::cos(angle) * u[k] + std::sin(angle) * v[k]);
          }
        }
        break;
      }
      case SynthKind::manifold: {
        // x(t) = t·u + A·sin(ωt)·v, t ∈ [L/10, L] with L = separation. Every
        // class direction u sits in a narrow cone around one shared axis.
        std::vector<double> u(p.dim);
        const Matrix tilt = gaussian_sample(rng, 1, p.dim, 0.0, kConeSpread / std::sqrt(p.dim));
        double norm = 0.0;
        for (std::size_t k = 0; k < p.dim; ++k) {
          u[k] = axis[k] + tilt(0, k);
          norm += u[k] * u[k];
        }
        for (double& e : u) e /= std::sqrt(norm);
        const auto v = orthogonal_unit(rng, u);
        const double length = p.separation;
        const double amplitude = 0.15 * length;
        const double omega = 2.0 * std::numbers::pi * 1.5 / length;
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const double t = length * (0.1 + 0.9 * rng.uniform());
          const double warp = amplitude * std::sin(omega * t);
          for (std::size_t k = 0; k < p.dim; ++k) x(r, k) += t * u[k] + warp * v[k];
        }
        break;
      }
    }
    out.push_back({class_name(c), FeatureSet{std::move(x), class_name(c)}});
  }
  return out;
}

}  // namespace occnn::data
