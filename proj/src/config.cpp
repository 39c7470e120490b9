#include "tsalign/config.hpp"

#include <fstream>
#include <set>

#include "tsalign/tokenizer.hpp"

namespace tsalign::config {

using nlohmann::json;

namespace {

class FieldReader {
 public:
  explicit FieldReader(std::vector<std::string>& errors) : errors_(errors) {}

  template <class T>
  void get(const json& obj, const std::string& section, const char* key, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      errors_.push_back(qualified(section, key) + ": wrong type (" + obj.at(key).dump() + ")");
    }
  }

  void allow(const json& obj, const std::string& section, std::initializer_list<const char*> keys) {
    if (obj.is_null()) return;
    if (!obj.is_object()) {
      errors_.push_back((section.empty() ? "config" : section) + ": expected an object");
      return;
    }
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items()) {
      if (!known.count(k)) errors_.push_back(qualified(section, k.c_str()) + ": unknown field");
    }
  }

  static std::string qualified(const std::string& section, const char* key) {
    return section.empty() ? std::string(key) : section + "." + key;
  }

 private:
  std::vector<std::string>& errors_;
};

const json& section(const json& doc, const char* key) {
  static const json empty = json::object();
  if (doc.is_object() && doc.contains(key)) return doc.at(key);
  return empty;
}

std::filesystem::path absolute_from(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute()) return p;
  return std::filesystem::weakly_canonical(base / p);
}

std::filesystem::path anchor_dir() { return std::filesystem::path(TSALIGN_DATA_DIR) / "anchors"; }

}  // namespace

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError("override '" + o + "' is not of the form key=value");
    }
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ValidationError("override '" + o + "' has an empty key segment");
      if (!node->is_object()) *node = json::object();
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
}

std::vector<std::string> resolve_anchors(const json& spec, const std::filesystem::path& base_dir) {
  if (spec.is_array()) {
    std::vector<std::string> words = spec.get<std::vector<std::string>>();
    if (words.empty()) throw ValidationError("anchor list is empty");
    return words;
  }
  if (!spec.is_string()) throw ValidationError("anchors must be a name, a file path, or a list");
  const std::string name = spec.get<std::string>();
  if (name == "default") return alignment::default_anchor_words();
  if (name == "noise") return alignment::noise_anchor_words();
  if (name == "synonyms") return alignment::synonym_anchor_words();
  std::filesystem::path p = absolute_from(name, base_dir);
  if (!std::filesystem::exists(p) && std::filesystem::exists(anchor_dir() / name)) p = anchor_dir() / name;
  return alignment::read_word_list(p);
}

RunConfig parse_run_config(json doc, const std::filesystem::path& base_dir) {
  std::vector<std::string> errors;
  FieldReader r(errors);
  RunConfig rc;

  r.allow(doc, "", {"dataset", "backbone", "model", "train", "horizons", "variant", "seed", "output_dir"});

  // Dataset descriptor.
  std::string dataset;
  r.get(doc, "", "dataset", dataset);
  bool have_dataset = false;
  if (dataset.empty()) {
    errors.emplace_back("dataset: required (path to a dataset descriptor)");
  } else {
    rc.dataset_path = absolute_from(dataset, base_dir);
    doc["dataset"] = rc.dataset_path.string();
    if (!std::filesystem::exists(rc.dataset_path)) {
      errors.push_back("dataset: descriptor not found: " + rc.dataset_path.string());
    } else {
      try {
        rc.dataset = data::load_descriptor(rc.dataset_path);
        rc.dataset.split.validate();
        have_dataset = true;
        if (!std::filesystem::exists(rc.dataset.path)) {
          errors.push_back("dataset: data file not found: " + rc.dataset.path.string());
        }
      } catch (const std::exception& e) {
        errors.push_back(std::string("dataset: ") + e.what());
      }
    }
  }

  // Backbone.
  const json& bb = section(doc, "backbone");
  r.allow(bb, "backbone", {"kind", "seed", "vocab", "dim", "max_positions", "heads", "path", "vocab_json", "merges"});
  BackboneSpec& b = rc.backbone;
  r.get(bb, "backbone", "kind", b.kind);
  r.get(bb, "backbone", "seed", b.seed);
  r.get(bb, "backbone", "vocab", b.vocab);
  r.get(bb, "backbone", "dim", b.dim);
  r.get(bb, "backbone", "max_positions", b.max_positions);
  r.get(bb, "backbone", "heads", b.heads);
  std::string path, vocab_json, merges;
  r.get(bb, "backbone", "path", path);
  r.get(bb, "backbone", "vocab_json", vocab_json);
  r.get(bb, "backbone", "merges", merges);
  b.path = absolute_from(path, base_dir);
  b.vocab_json = absolute_from(vocab_json, base_dir);
  b.merges = absolute_from(merges, base_dir);
  if (doc.contains("backbone") && doc["backbone"].is_object()) {
    if (!path.empty()) doc["backbone"]["path"] = b.path.string();
    if (!vocab_json.empty()) doc["backbone"]["vocab_json"] = b.vocab_json.string();
    if (!merges.empty()) doc["backbone"]["merges"] = b.merges.string();
  }
  if (b.kind == "mini") {
    if (b.vocab < 64) errors.emplace_back("backbone.vocab must be >= 64");
    if (b.dim < 1) errors.emplace_back("backbone.dim must be >= 1");
    if (b.max_positions < 1) errors.emplace_back("backbone.max_positions must be >= 1");
    if (b.heads < 1 || (b.dim >= 1 && b.dim % b.heads != 0)) {
      errors.emplace_back("backbone.heads must divide backbone.dim");
    }
  } else if (b.kind == "checkpoint") {
    if (b.path.empty()) {
      errors.emplace_back("backbone.path: required for a checkpoint backbone");
    } else if (!std::filesystem::exists(b.path)) {
      errors.push_back("backbone.path: not found: " + b.path.string());
    }
    if (b.vocab_json.empty() != b.merges.empty()) {
      errors.emplace_back("backbone.vocab_json and backbone.merges must be given together");
    }
  } else {
    errors.push_back("backbone.kind: unknown value '" + b.kind + "' (expected mini or checkpoint)");
  }

  // Model.
  const json& m = section(doc, "model");
  r.allow(m, "model",
          {"L", "patch_len", "stride", "align_heads", "proto_seasonal", "proto_residual",
           "decomposition", "align", "per_channel_alignment", "anchors", "prompt"});
  ModelConfig& mc = rc.model;
  if (have_dataset) {
    mc.L = rc.dataset.L;
    mc.H = rc.dataset.H;
    mc.decomp.period = rc.dataset.period;
    mc.prompt.dataset_context = rc.dataset.context;
  }
  r.get(m, "model", "L", mc.L);
  r.get(m, "model", "patch_len", mc.patch_len);
  r.get(m, "model", "stride", mc.stride);
  r.get(m, "model", "align_heads", mc.align_heads);
  r.get(m, "model", "proto_seasonal", mc.proto_seasonal);
  r.get(m, "model", "proto_residual", mc.proto_residual);
  r.get(m, "model", "per_channel_alignment", mc.per_channel_alignment);

  const json& dc = section(m, "decomposition");
  r.allow(dc, "model.decomposition", {"method", "k", "period", "loess_bandwidth"});
  std::string method = decompose::to_string(mc.decomp.method);
  r.get(dc, "model.decomposition", "method", method);
  try {
    mc.decomp.method = decompose::parse_method(method);
  } catch (const ValidationError& e) {
    errors.push_back(std::string("model.decomposition.method: ") + e.what());
  }
  r.get(dc, "model.decomposition", "k", mc.decomp.k);
  r.get(dc, "model.decomposition", "period", mc.decomp.period);
  r.get(dc, "model.decomposition", "loess_bandwidth", mc.decomp.loess_bandwidth);

  const json& al = section(m, "align");
  r.allow(al, "model.align", {"trend", "seasonal", "residual"});
  r.get(al, "model.align", "trend", mc.align[0]);
  r.get(al, "model.align", "seasonal", mc.align[1]);
  r.get(al, "model.align", "residual", mc.align[2]);

  if (m.is_object() && m.contains("anchors")) {
    try {
      mc.anchor_words = resolve_anchors(m.at("anchors"), base_dir);
    } catch (const std::exception& e) {
      errors.push_back(std::string("model.anchors: ") + e.what());
    }
  }

  const json& pr = section(m, "prompt");
  r.allow(pr, "model.prompt",
          {"context", "instruction", "include_stats", "include_instruction", "max_tokens", "soft_len"});
  r.get(pr, "model.prompt", "context", mc.prompt.dataset_context);
  r.get(pr, "model.prompt", "instruction", mc.prompt.instruction_pattern);
  r.get(pr, "model.prompt", "include_stats", mc.prompt.include_stats);
  r.get(pr, "model.prompt", "include_instruction", mc.prompt.include_instruction);
  r.get(pr, "model.prompt", "max_tokens", mc.max_prompt_tokens);
  r.get(pr, "model.prompt", "soft_len", mc.soft_prompt_len);

  // Training.
  const json& tr = section(doc, "train");
  r.allow(tr, "train",
          {"learning_rate", "batch_size", "max_epochs", "max_steps", "patience", "optimizer", "val_limit"});
  training::TrainConfig& tc = rc.train;
  r.get(tr, "train", "learning_rate", tc.learning_rate);
  r.get(tr, "train", "batch_size", tc.batch_size);
  r.get(tr, "train", "max_epochs", tc.max_epochs);
  r.get(tr, "train", "max_steps", tc.max_steps);
  r.get(tr, "train", "patience", tc.patience);
  r.get(tr, "train", "val_limit", tc.val_limit);
  std::string opt = training::to_string(tc.optimizer);
  r.get(tr, "train", "optimizer", opt);
  try {
    tc.optimizer = training::parse_optimizer(opt);
  } catch (const ValidationError& e) {
    errors.push_back(std::string("train.optimizer: ") + e.what());
  }
  for (const auto& e : tc.validate()) errors.push_back(e);

  // Horizons, variant, seed, output.
  if (have_dataset) rc.horizons = {rc.dataset.H};
  r.get(doc, "", "horizons", rc.horizons);
  if (rc.horizons.empty()) errors.emplace_back("horizons: at least one horizon is required");
  for (int h : rc.horizons) {
    if (h < 1) errors.push_back("horizons: " + std::to_string(h) + " is not >= 1");
  }
  if (!rc.horizons.empty()) mc.H = rc.horizons.front();

  std::string variant = "default";
  r.get(doc, "", "variant", variant);
  try {
    rc.variant = evaluation::parse_variant(variant);
    evaluation::apply_variant(mc, rc.variant, anchor_dir());
  } catch (const ValidationError& e) {
    errors.push_back(std::string("variant: ") + e.what());
  }
  if (doc.is_object() && doc.contains("seed") && !doc["seed"].is_null()) {
    std::uint64_t s = 0;
    r.get(doc, "", "seed", s);
    rc.seed = s;
  }
  r.get(doc, "", "output_dir", rc.output_dir);

  // Model-level checks against the backbone shape.
  if (b.kind == "mini" && b.vocab >= 64 && b.dim >= 1 && b.max_positions >= 1 && b.heads >= 1 &&
      b.dim % b.heads == 0) {
    try {
      const FrozenBackbone shape_only = init_mini_backbone(b.seed, b.vocab, b.dim, b.max_positions, b.heads);
      for (int h : rc.horizons) {
        ModelConfig probe = mc;
        probe.H = std::max(1, h);
        for (const auto& e : probe.validate(shape_only)) {
          const std::string line = "model: " + e;
          if (std::find(errors.begin(), errors.end(), line) == errors.end()) errors.push_back(line);
        }
      }
    } catch (const std::exception& e) {
      errors.push_back(std::string("backbone: ") + e.what());
    }
  }
  if (have_dataset && rc.dataset.stride < 1) errors.emplace_back("dataset: stride must be >= 1");

  if (!errors.empty()) {
    std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                      (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
  if (doc.is_object() && doc.contains("model") && doc["model"].is_object() && doc["model"].contains("anchors")) {
    doc["model"]["anchors"] = mc.anchor_words;
  }
  rc.document = std::move(doc);
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  apply_overrides(doc, overrides);
  return parse_run_config(std::move(doc), std::filesystem::absolute(path).parent_path());
}

std::shared_ptr<const FrozenBackbone> build_backbone(const BackboneSpec& spec) {
  if (spec.kind == "mini") {
    return std::make_shared<const FrozenBackbone>(
        init_mini_backbone(spec.seed, spec.vocab, spec.dim, spec.max_positions, spec.heads));
  }
  std::shared_ptr<const Tokenizer> tok;
  if (!spec.vocab_json.empty()) {
    tok = std::make_shared<const BpeTokenizer>(BpeTokenizer::from_files(spec.vocab_json, spec.merges));
  }
  return std::make_shared<const FrozenBackbone>(load_checkpoint(spec.path, spec.heads, tok));
}

}  // namespace tsalign::config
