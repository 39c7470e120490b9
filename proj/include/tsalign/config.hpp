#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsalign/backbone.hpp"
#include "tsalign/data.hpp"
#include "tsalign/evaluation.hpp"
#include "tsalign/model.hpp"
#include "tsalign/training.hpp"

namespace tsalign::config {

struct BackboneSpec {
  /// "mini" (seeded random stand-in) or "checkpoint".
  std::string kind = "mini";
  std::uint64_t seed = 0;
  int vocab = 256;
  int dim = 64;
  int max_positions = 512;
  int heads = 4;
  std::filesystem::path path;
  /// Optional byte-pair tokenizer files for checkpoint backbones.
  std::filesystem::path vocab_json;
  std::filesystem::path merges;
};

/// A fully merged and validated run configuration.
struct RunConfig {
  /// Merged document with paths made absolute; this is what gets snapshotted.
  nlohmann::json document;
  std::filesystem::path dataset_path;
  data::DatasetDescriptor dataset;
  BackboneSpec backbone;
  ModelConfig model;
  training::TrainConfig train;
  std::vector<int> horizons;
  evaluation::Variant variant = evaluation::Variant::default_;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
};

/// Applies "a.b.c=value" overrides; values parse as JSON when possible and
/// fall back to plain strings.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

/// Parses and validates `doc`; relative paths resolve against `base_dir`.
/// Every problem is collected into one ValidationError.
RunConfig parse_run_config(nlohmann::json doc, const std::filesystem::path& base_dir);

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

std::shared_ptr<const FrozenBackbone> build_backbone(const BackboneSpec& spec);

/// Resolves an anchor spec: "default", "noise", "synonyms", a file path, or a list.
std::vector<std::string> resolve_anchors(const nlohmann::json& spec,
                                         const std::filesystem::path& base_dir);

}  // namespace tsalign::config
