#include "tsalign/preprocess.hpp"

#include <cmath>
#include <sstream>

namespace tsalign::preprocess {

std::pair<Series, NormStats> instance_normalize(std::span<const double> x, double epsilon) {
  if (x.empty()) throw ValidationError("instance_normalize: empty input");
  const auto n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  NormStats stats{mean, std::sqrt(var), epsilon};
  Series out(x.size());
  const double denom = stats.std + epsilon;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / denom;
  return {std::move(out), stats};
}

Series denormalize(std::span<const double> y, const NormStats& stats) {
  Series out(y.size());
  const double s = stats.std + stats.epsilon;
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * s + stats.mean;
  return out;
}

int patch_count(int L, int patch_len, int stride) {
  if (patch_len < 1 || patch_len > L) {
    std::ostringstream os;
    os << "patch length " << patch_len << " must lie in [1, L=" << L << "]";
    throw ValidationError(os.str());
  }
  if (stride < 1 || stride > patch_len) {
    std::ostringstream os;
    os << "patch stride " << stride << " must lie in [1, patch length=" << patch_len << "]";
    throw ValidationError(os.str());
  }
  return (L - patch_len) / stride + 2;
}

PatchSet patchify(std::span<const double> x, int patch_len, int stride) {
  const int L = static_cast<int>(x.size());
  const int K = patch_count(L, patch_len, stride);
  PatchSet p;
  p.count = K;
  p.length = patch_len;
  p.stride = stride;
  p.patches.resize(K, patch_len);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < patch_len; ++j) {
      const int idx = std::min(k * stride + j, L - 1);
      p.patches(k, j) = x[static_cast<std::size_t>(idx)];
    }
  }
  return p;
}

PatchEmbedder::PatchEmbedder(const std::string& name, int patch_len, int dim,
                             std::mt19937_64& rng) {
  Matrix w(patch_len, dim);
  fill_uniform(w, 1.0 / std::sqrt(static_cast<double>(patch_len)), rng);
  weight = Parameter(name + ".weight", std::move(w));
  bias = Parameter(name + ".bias", Matrix::Zero(1, dim));
}

ad::Var embed_patches(ad::Tape& tape, ad::Var patches, const PatchEmbedder& emb) {
  if (patches.cols() != emb.weight.value.rows()) {
    throw ValidationError("embed_patches: patch length does not match embedder weight rows");
  }
  return ad::add_row(ad::matmul(patches, tape.parameter(emb.weight)), tape.parameter(emb.bias));
}

Matrix embed_patches(const PatchSet& p, const PatchEmbedder& emb) {
  ad::Tape tape;
  return embed_patches(tape, tape.constant(p.patches), emb).value();
}

}  // namespace tsalign::preprocess
