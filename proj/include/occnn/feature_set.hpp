#pragma once

#include <cstddef>
#include <string>

#include "occnn/numerics.hpp"

namespace occnn {

/// n×d block of feature vectors plus a free-form provenance tag.
struct FeatureSet {
  Matrix data;
  std::string source;

  std::size_t n() const noexcept { return data.rows(); }
  std::size_t d() const noexcept { return data.cols(); }
};

}  // namespace occnn
