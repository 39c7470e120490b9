#pragma once

// On-disk tensor checkpoint.
//
//   TSALIGN-CHECKPOINT 1\n
//   @<key> <value>\n            (zero or more metadata lines)
//   <name> <dim0> [<dim1> ...]\n (one line per tensor, in payload order)
//   END\n
//   <payload>                    little-endian float32, tensors concatenated
//                                in manifest order, row-major
//
// Names and metadata keys contain no whitespace. A tensor with a single
// dimension is loaded as a 1 x n matrix.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tsalign/tensor.hpp"

namespace tsalign {

struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  Matrix value;
};

struct TensorCheckpoint {
  std::map<std::string, std::string> metadata;
  std::vector<NamedTensor> tensors;

  void add(std::string name, const Matrix& value, std::vector<std::int64_t> shape = {});
  const NamedTensor* find(const std::string& name) const;
  const NamedTensor& at(const std::string& name) const;
};

/// Name -> expected shape.
using ShapeManifest = std::vector<std::pair<std::string, std::vector<std::int64_t>>>;

void save_checkpoint(const TensorCheckpoint& ckpt, const std::filesystem::path& path);
TensorCheckpoint read_checkpoint(const std::filesystem::path& path);

/// Throws ValidationError naming the first tensor that is missing or mis-shaped.
void check_manifest(const TensorCheckpoint& ckpt, const ShapeManifest& expected);

std::string format_shape(const std::vector<std::int64_t>& shape);

}  // namespace tsalign
