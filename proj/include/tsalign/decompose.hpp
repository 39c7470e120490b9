#pragma once

#include <span>
#include <string>

#include "tsalign/tensor.hpp"

namespace tsalign::decompose {

enum class Method { moving_average, stl };

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct DecompConfig {
  /// Moving-average half width; the window is m = 2k + 1.
  int k = 12;
  int period = 24;
  Method method = Method::moving_average;
  /// STL smoothing span as a fraction of the series being smoothed.
  double loess_bandwidth = 0.3;

  void validate() const;
};

/// trend + seasonal + residual == input (residual is defined by subtraction).
struct ComponentTriple {
  Series trend;
  Series seasonal;
  Series residual;
  Method method = Method::moving_average;
  int period = 1;
};

/// Centered moving average of width 2k+1 with replicate-edge padding.
Series moving_average_trend(std::span<const double> x, int k);

/// Per-phase means of the detrended series, re-centered to zero over one
/// period, tiled to the input length.
Series estimate_seasonal(std::span<const double> detrended, int period);

ComponentTriple additive_decompose(std::span<const double> x, const DecompConfig& cfg);

/// Local-linear LOESS with tricube weights over the `span` nearest points.
Series loess_smooth(std::span<const double> y, int span);

/// Simplified STL: two inner passes of cycle-subseries LOESS, low-pass
/// removal, and LOESS trend smoothing; no robustness weights.
ComponentTriple stl_decompose(std::span<const double> x, const DecompConfig& cfg);

}  // namespace tsalign::decompose
