#include "tsalign/decompose.hpp"

#include <algorithm>
#include <cmath>

namespace tsalign::decompose {

Method parse_method(const std::string& name) {
  if (name == "moving_average" || name == "ma") return Method::moving_average;
  if (name == "stl") return Method::stl;
  throw ValidationError("unknown decomposition method '" + name + "'");
}

std::string to_string(Method m) { return m == Method::stl ? "stl" : "moving_average"; }

void DecompConfig::validate() const {
  if (k < 0) throw ValidationError("decomposition k must be >= 0");
  if (period < 1) throw ValidationError("decomposition period must be >= 1");
  if (!(loess_bandwidth > 0.0 && loess_bandwidth <= 1.0)) {
    throw ValidationError("loess_bandwidth must lie in (0, 1]");
  }
}

Series moving_average_trend(std::span<const double> x, int k) {
  if (x.empty()) throw ValidationError("moving_average_trend: empty input");
  if (k < 0) throw ValidationError("moving_average_trend: k must be >= 0");
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const double m = 2.0 * k + 1.0;
  Series out(x.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double sum = 0.0;
    for (std::ptrdiff_t j = t - k; j <= t + k; ++j) {
      sum += x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, n - 1))];
    }
    out[static_cast<std::size_t>(t)] = sum / m;
  }
  return out;
}

Series estimate_seasonal(std::span<const double> detrended, int period) {
  if (period < 1) throw ValidationError("estimate_seasonal: period must be >= 1");
  if (static_cast<std::size_t>(period) > detrended.size()) {
    throw ValidationError("period exceeds window");
  }
  const auto p = static_cast<std::size_t>(period);
  std::vector<double> sums(p, 0.0);
  std::vector<int> counts(p, 0);
  for (std::size_t i = 0; i < detrended.size(); ++i) {
    sums[i % p] += detrended[i];
    ++counts[i % p];
  }
  double mean_of_means = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    sums[i] /= counts[i];
    mean_of_means += sums[i];
  }
  mean_of_means /= static_cast<double>(p);
  Series out(detrended.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sums[i % p] - mean_of_means;
  return out;
}

namespace {

Series subtract(std::span<const double> a, std::span<const double> b) {
  Series out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

ComponentTriple close_identity(std::span<const double> x, Series trend, Series seasonal,
                               Method method, int period) {
  ComponentTriple c;
  c.residual.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) c.residual[i] = x[i] - trend[i] - seasonal[i];
  c.trend = std::move(trend);
  c.seasonal = std::move(seasonal);
  c.method = method;
  c.period = period;
  return c;
}

// Trailing moving sum of width w, divided by w; output has n - w + 1 entries.
Series moving_mean(std::span<const double> x, int w) {
  const auto n = x.size();
  const auto width = static_cast<std::size_t>(w);
  Series out(n - width + 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < width; ++i) sum += x[i];
  out[0] = sum / w;
  for (std::size_t i = width; i < n; ++i) {
    sum += x[i] - x[i - width];
    out[i - width + 1] = sum / w;
  }
  return out;
}

// Local-linear tricube fit over the `span` points nearest to `pos`,
// evaluated at `pos` (which may lie outside [0, n-1]).
double loess_at(std::span<const double> y, int span, double pos) {
  const auto n = static_cast<std::ptrdiff_t>(y.size());
  const std::ptrdiff_t q = std::min<std::ptrdiff_t>(span, n);
  const double widen = span > n ? 0.5 * static_cast<double>(span - n) : 0.0;
  const auto centre = static_cast<std::ptrdiff_t>(std::lround(pos));
  const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(centre - q / 2, 0, n - q);
  const std::ptrdiff_t hi = lo + q - 1;
  const double h =
      std::max(pos - static_cast<double>(lo), static_cast<double>(hi) - pos) + widen + 1.0;
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
  for (std::ptrdiff_t j = lo; j <= hi; ++j) {
    const double d = static_cast<double>(j) - pos;
    const double u = std::abs(d) / h;
    const double w = std::pow(1.0 - u * u * u, 3);
    const double v = y[static_cast<std::size_t>(j)];
    s0 += w;
    s1 += w * d;
    s2 += w * d * d;
    t0 += w * v;
    t1 += w * d * v;
  }
  const double det = s0 * s2 - s1 * s1;
  return std::abs(det) > 1e-12 * std::max(1.0, s0 * s2) ? (s2 * t0 - s1 * t1) / det : t0 / s0;
}

int odd_at_least(double v) {
  auto i = static_cast<int>(std::ceil(v));
  return i % 2 == 0 ? i + 1 : i;
}

int span_for(double bandwidth, std::size_t n) {
  return std::max(3, static_cast<int>(std::ceil(bandwidth * static_cast<double>(n))));
}

}  // namespace

ComponentTriple additive_decompose(std::span<const double> x, const DecompConfig& cfg) {
  cfg.validate();
  if (cfg.method == Method::stl) return stl_decompose(x, cfg);
  Series trend = moving_average_trend(x, cfg.k);
  Series seasonal = estimate_seasonal(subtract(x, trend), cfg.period);
  return close_identity(x, std::move(trend), std::move(seasonal), cfg.method, cfg.period);
}

Series loess_smooth(std::span<const double> y, int span) {
  if (y.empty()) return {};
  if (span < 1) throw ValidationError("loess_smooth: span must be >= 1");
  Series out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = loess_at(y, span, static_cast<double>(i));
  return out;
}

ComponentTriple stl_decompose(std::span<const double> x, const DecompConfig& cfg) {
  cfg.validate();
  const auto n = x.size();
  const int period = cfg.period;
  const auto p = static_cast<std::size_t>(period);
  if (n < 2 * p) throw ValidationError("stl_decompose: window shorter than two periods");

  constexpr int kInnerIterations = 2;
  const int lowpass_span = odd_at_least(std::max(3, period));
  const int trend_span = std::max(span_for(cfg.loess_bandwidth, n), odd_at_least(1.5 * period));
  Series trend(n, 0.0);
  Series seasonal(n, 0.0);
  for (int iter = 0; iter < kInnerIterations; ++iter) {
    const Series detrended = subtract(x, trend);
    // Cycle-subseries smoothing, extended by one period on each side.
    Series cycle(n + 2 * p);
    for (std::size_t phase = 0; phase < p; ++phase) {
      Series sub;
      for (std::size_t i = phase; i < n; i += p) sub.push_back(detrended[i]);
      const int span = span_for(cfg.loess_bandwidth, sub.size());
      cycle[phase] = loess_at(sub, span, -1.0);
      for (std::size_t j = 0; j < sub.size(); ++j) {
        cycle[phase + p * (j + 1)] = loess_at(sub, span, static_cast<double>(j));
      }
      cycle[phase + p * (sub.size() + 1)] = loess_at(sub, span, static_cast<double>(sub.size()));
    }
    // Low-pass: MA(p), MA(p), MA(3), then LOESS; n + 2p entries shrink to n.
    const Series low = loess_smooth(
        moving_mean(moving_mean(moving_mean(cycle, period), period), 3), lowpass_span);
    for (std::size_t i = 0; i < n; ++i) seasonal[i] = cycle[i + p] - low[i];
    trend = loess_smooth(subtract(x, seasonal), trend_span);
  }
  return close_identity(x, std::move(trend), std::move(seasonal), Method::stl, cfg.period);
}

}  // namespace tsalign::decompose
