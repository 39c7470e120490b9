#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace tsalign {

/// Row-major dense matrix used for every tensor in the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Series = std::vector<double>;

/// Base error for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input (bad config, malformed file, shape mismatch at an API boundary).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A named trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  /// Accumulated by Tape::backward; a forward pass never touches `value`.
  mutable Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

void fill_normal(Matrix& m, double stddev, std::mt19937_64& rng);
void fill_uniform(Matrix& m, double bound, std::mt19937_64& rng);

/// Rounds every entry to the nearest 32-bit float so that the tensor survives
/// a checkpoint round trip unchanged.
void round_to_float(Matrix& m);

/// Incremental FNV-1a 64-bit content hash.
class Fingerprint {
 public:
  void update(std::string_view bytes);
  void update(const Matrix& m);
  void update(std::span<const double> values);
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 14695981039346656037ULL;
};

std::string to_hex(std::uint64_t value);

}  // namespace tsalign
