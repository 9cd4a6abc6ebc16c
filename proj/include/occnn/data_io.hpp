#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "occnn/feature_set.hpp"
#include "occnn/numerics.hpp"

namespace occnn::data {

enum class FileFormat { csv, ocfv };

FileFormat parse_format(const std::string& s);  // "csv" | "ocfv" | "binary"
const char* to_string(FileFormat f) noexcept;

// OCFV: "OCFV", u16 version = 1, u32 n, u32 d, then n·d little-endian f32
// in row-major order.
FeatureSet read_ocfv(std::istream& in);
void write_ocfv(std::ostream& out, const FeatureSet& fs);

// Headerless CSV, one sample per line.
FeatureSet read_csv(std::istream& in);
void write_csv(std::ostream& out, const FeatureSet& fs);

FeatureSet load_feature_file(const std::filesystem::path& path, FileFormat format);
void save_feature_file(const FeatureSet& fs, const std::filesystem::path& path,
                       FileFormat format, bool overwrite = true);

/// {"dim": D, "classes": {"name": "path", ...}, "format": "ocfv|csv"}.
/// Relative paths resolve against the manifest's directory. Classes are kept
/// in name order.
struct DatasetManifest {
  std::size_t dim = 0;
  FileFormat format = FileFormat::ocfv;
  std::vector<std::pair<std::string, std::filesystem::path>> classes;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct LabeledSet {
  std::string name;
  FeatureSet features;
};

/// Loads every class of the manifest and checks each file against `dim`.
std::vector<LabeledSet> load_classes(const DatasetManifest& manifest);

// Source of one negative-test row: (index of the set in the protocol input,
// row within that set).
using RowRef = std::pair<std::size_t, std::size_t>;

struct ProtocolSplit {
  std::string class_tag;
  FeatureSet target_train;
  FeatureSet target_test;
  FeatureSet negative_test;
  std::vector<std::size_t> train_rows;  // rows of the target class
  std::vector<std::size_t> test_rows;
  std::vector<RowRef> negative_rows;
};

/// Per normal class: draw m = min(|abnormal|, n/2) abnormal rows and hold out
/// m normal rows, so the test set is balanced; the rest trains.
std::vector<ProtocolSplit> build_abnormality_protocol(const std::vector<LabeledSet>& normal,
                                                      const FeatureSet& abnormal, const Rng& rng);

/// Per user: ceil(80%) train / rest test; negatives are every other user's
/// test partition.
std::vector<ProtocolSplit> build_auth_protocol(const std::vector<LabeledSet>& users,
                                               const Rng& rng);

/// First half of the classes are targets, split half/half (odd counts favor
/// train); the second half contributes up to `novel_per_class` rows each to a
/// negative set shared by every split.
std::vector<ProtocolSplit> build_novelty_protocol(const std::vector<LabeledSet>& classes,
                                                  const Rng& rng,
                                                  std::size_t novel_per_class = 50);

enum class SynthKind { blobs, ring, manifold };

SynthKind parse_synth_kind(const std::string& s);
const char* to_string(SynthKind k) noexcept;

struct SynthParams {
  std::size_t classes = 2;
  std::size_t n_per_class = 100;
  std::size_t dim = 2;
  double separation = 10.0;  // distance between class anchors
  double noise = 1.0;        // isotropic noise standard deviation
};

/// blobs: Gaussian clusters with pairwise anchor distance `separation`.
/// ring: annulus of radius separation/4 in a random plane around each anchor.
/// manifold: per class, a sine-warped line leaving a shared origin along its
/// own direction (all within a narrow cone); the classes differ in direction
/// only, overlapping in norm.
std::vector<LabeledSet> synth_dataset(SynthKind kind, const SynthParams& params, Rng& rng);

}  // namespace occnn::data
