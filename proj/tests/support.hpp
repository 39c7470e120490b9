#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>

#include "tsalign/backbone.hpp"
#include "tsalign/data.hpp"
#include "tsalign/model.hpp"

namespace tsalign::fixtures {

/// Small backbone used across unit tests: V=64, D=16, T_max=128, 4 heads.
inline std::shared_ptr<const FrozenBackbone> tiny_backbone(std::uint64_t seed = 3) {
  return std::make_shared<const FrozenBackbone>(init_mini_backbone(seed, 64, 16, 128, 4));
}

/// L=48, H=8, patches of 16 at stride 8 (K=6), period 12.
inline ModelConfig tiny_model_config() {
  ModelConfig c;
  c.L = 48;
  c.H = 8;
  c.patch_len = 16;
  c.stride = 8;
  c.align_heads = 4;
  c.decomp.k = 6;
  c.decomp.period = 12;
  c.max_prompt_tokens = 16;
  c.prompt.dataset_context = "synthetic";
  return c;
}

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double sd = 1.0) {
  Matrix m(r, c);
  std::mt19937_64 rng(seed);
  fill_normal(m, sd, rng);
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("tsalign_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Writes a small synthetic dataset, its descriptor, and a run config that
/// trains the tiny model for `steps` steps. Returns the config path.
inline std::filesystem::path write_tiny_run(const std::filesystem::path& dir, int steps = 2,
                                            double phase = 0.0, const std::string& name = "syn") {
  write_csv(data::synthetic_dataset(400, 2, 12, 0.05, 2, phase), dir / (name + ".csv"));
  std::ofstream(dir / (name + ".json"))
      << R"({"name": ")" << name << R"(", "path": ")" << name
      << R"(.csv", "L": 48, "H": 8, "period": 12, "stride": 8, "context": "synthetic"})";
  const auto cfg = dir / (name + "_run.json");
  std::ofstream(cfg) << R"({
    "dataset": ")" << name << R"(.json",
    "backbone": {"kind": "mini", "seed": 3, "vocab": 64, "dim": 16, "max_positions": 128, "heads": 4},
    "model": {"patch_len": 16, "stride": 8, "decomposition": {"k": 6},
              "prompt": {"max_tokens": 16}},
    "train": {"learning_rate": 0.01, "batch_size": 4, "max_epochs": 1, "max_steps": )"
                     << steps << R"(, "val_limit": 4}
  })";
  return cfg;
}

}  // namespace tsalign::fixtures
