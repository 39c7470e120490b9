#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tsalign/tensor.hpp"

namespace tsalign::data {

/// A multivariate series as loaded from disk: `values` is [T_total x N].
struct RawDataset {
  std::string name;
  std::vector<std::string> timestamps;
  std::vector<std::int64_t> epoch_seconds;
  Matrix values;
  std::vector<std::string> channel_names;

  Eigen::Index length() const { return values.rows(); }
  Eigen::Index channels() const { return values.cols(); }
};

/// history is [N x L], target is [N x H]; target immediately follows history.
struct WindowPair {
  Matrix history;
  Matrix target;
  Eigen::Index start_index = 0;
};

struct SplitSpec {
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
  std::optional<double> few_shot_ratio;

  /// Throws ValidationError when fractions are non-positive or do not sum to 1.
  void validate() const;
};

struct Splits {
  RawDataset train;
  RawDataset val;
  RawDataset test;
  std::vector<std::string> warnings;
};

/// Dataset descriptor file (JSON). Relative `path` entries resolve against the
/// descriptor's directory.
struct DatasetDescriptor {
  std::string name;
  std::filesystem::path path;
  SplitSpec split;
  int L = 512;
  int H = 96;
  int stride = 1;
  int period = 24;
  std::string context;
  /// Fit per-channel mean/std on the train segment and standardize all splits.
  bool standardize = false;
};

DatasetDescriptor load_descriptor(const std::filesystem::path& path);

/// Parses an ISO-like datetime ("YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]", or
/// with a 'T' separator) into seconds since the Unix epoch.
std::optional<std::int64_t> parse_datetime(std::string_view text);

RawDataset load_csv(const std::filesystem::path& path, const std::string& name = "");

/// Windows at offsets 0, stride, 2*stride, ...; count = (T - L - H) / stride + 1.
std::vector<WindowPair> make_windows(const RawDataset& ds, int L, int H, int stride = 1);

/// Chronological split by row count. Segments shorter than `min_length`
/// produce a warning (and will yield zero windows).
Splits split_dataset(const RawDataset& ds, const SplitSpec& spec, Eigen::Index min_length = 0);

/// First ceil(ratio * n) windows.
std::vector<WindowPair> subsample_fewshot(const std::vector<WindowPair>& windows, double ratio);

/// Per-channel standardization fitted on `train` and applied to all three splits.
void standardize_splits(Splits& splits);

/// Loads, splits, and optionally standardizes the dataset a descriptor names.
Splits load_splits(const DatasetDescriptor& desc, int L, int H);

/// Line + sine(period) + Gaussian noise per channel, hourly timestamps.
RawDataset synthetic_dataset(int rows, int channels, int period, double noise,
                             std::uint64_t seed, double phase_shift = 0.0);

void write_csv(const RawDataset& ds, const std::filesystem::path& path);

}  // namespace tsalign::data
