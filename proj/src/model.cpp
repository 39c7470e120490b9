#include "tsalign/model.hpp"

#include <sstream>

namespace tsalign {

using alignment::Component;

namespace {

constexpr std::size_t idx(Component c) { return static_cast<std::size_t>(c); }

Series row_of(const Matrix& m, Eigen::Index r) {
  Series out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

const Series& component_of(const decompose::ComponentTriple& t, Component c) {
  switch (c) {
    case Component::trend: return t.trend;
    case Component::seasonal: return t.seasonal;
    case Component::residual: return t.residual;
  }
  return t.residual;
}

Matrix as_matrix(const Matrix& m) { return m; }

}  // namespace

int ModelConfig::patch_count() const { return preprocess::patch_count(L, patch_len, stride); }

int ModelConfig::prototypes(Component c, int vocab_size) const {
  const int explicit_count = c == Component::seasonal ? proto_seasonal : proto_residual;
  if (explicit_count > 0) return explicit_count;
  const int anchors = static_cast<int>(anchor_words.size());
  if (vocab_size > 5000) return c == Component::seasonal ? 100 : 500;
  const int seasonal = std::max(anchors + 1, vocab_size / 8);
  if (c == Component::seasonal) return seasonal;
  return std::max(seasonal + 1, vocab_size / 4);
}

std::vector<std::string> ModelConfig::validate(const FrozenBackbone& backbone) const {
  std::vector<std::string> errors;
  auto err = [&errors](const std::string& e) { errors.push_back(e); };
  if (L < 1) err("model.L must be >= 1");
  if (H < 1) err("model.H must be >= 1");
  if (patch_len < 1 || patch_len > L) err("model.patch_len must lie in [1, L]");
  if (stride < 1 || stride > patch_len) err("model.stride must lie in [1, patch_len]");
  try {
    decomp.validate();
  } catch (const ValidationError& e) {
    err(std::string("model.decomposition: ") + e.what());
  }
  if (decomp.period > L) err("model.decomposition.period exceeds the window length L");
  if (decomp.method == decompose::Method::stl && 2 * decomp.period > L) {
    err("stl decomposition needs L >= 2 * period");
  }
  const int D = backbone.dim();
  const int V = backbone.vocab_size();
  if (align_heads < 1 || D % align_heads != 0) {
    err("model.align_heads must divide the backbone width " + std::to_string(D));
  }
  if (anchor_words.empty()) err("anchor list is empty");
  const int A = static_cast<int>(anchor_words.size());
  const int vs = prototypes(Component::seasonal, V);
  const int vr = prototypes(Component::residual, V);
  if (align[idx(Component::seasonal)] || align[idx(Component::residual)]) {
    if (!(vs < vr)) err("prototype counts must satisfy seasonal < residual");
    if (!(vr < V)) err("residual prototype count must be below the vocabulary size " + std::to_string(V));
    if (align[idx(Component::trend)] && !(A < vs)) {
      err("anchor count must be below the seasonal prototype count");
    }
  }
  if (per_channel_alignment && channels < 1) err("per-channel alignment needs channels >= 1");
  if (max_prompt_tokens < 0) err("prompt.max_tokens must be >= 0");
  if (soft_prompt_len < 0) err("prompt.soft_prompt_len must be >= 0");
  if (patch_len >= 1 && patch_len <= L && stride >= 1 && stride <= patch_len) {
    const int S = soft_prompt_len + max_prompt_tokens + patch_count();
    if (S > backbone.max_positions()) {
      err("soft prompt + max prompt tokens + patch count (" + std::to_string(S) +
          ") exceeds the backbone's " + std::to_string(backbone.max_positions()) + " positions");
    }
  }
  if (!(norm_epsilon >= 0.0)) err("normalization epsilon must be >= 0");
  return errors;
}

Model::Model(ModelConfig config, std::shared_ptr<const FrozenBackbone> backbone, std::uint64_t seed)
    : config_(std::move(config)), backbone_(std::move(backbone)) {
  if (!backbone_) throw ValidationError("model needs a backbone");
  if (auto errors = config_.validate(*backbone_); !errors.empty()) {
    std::string msg = "invalid model configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
  std::mt19937_64 rng(seed);
  const int D = backbone_->dim();
  const int K = config_.patch_count();
  const int V = backbone_->vocab_size();
  const int copies = config_.per_channel_alignment ? config_.channels : 1;

  if (config_.align[idx(Component::trend)]) {
    anchors_ = alignment::resolve_anchor_embeddings(config_.anchor_words, *backbone_);
  }
  for (Component c : alignment::kComponents) {
    const auto i = idx(c);
    const std::string name = alignment::to_string(c);
    embedders_[i] = preprocess::PatchEmbedder("embed." + name, config_.patch_len, D, rng);
    if (config_.align[i]) {
      for (int ch = 0; ch < copies; ++ch) {
        std::string bname = "align." + name;
        if (config_.per_channel_alignment) bname += ".c" + std::to_string(ch);
        align_blocks_[i].push_back(
            alignment::make_cross_attention(bname, c, D, config_.align_heads, rng));
      }
      if (c != Component::trend) {
        banks_[i] = alignment::make_prototype_bank(c, config_.prototypes(c, V), V, rng);
      }
    }
    heads_[i] = head::make_projection_head(c, K, D, config_.H, rng);
    if (config_.soft_prompt_len > 0) {
      Matrix sp(config_.soft_prompt_len, D);
      fill_normal(sp, 0.02, rng);
      soft_prompts_[i] = Parameter("soft_prompt." + name, std::move(sp));
    }
  }
  // Start from float32-representable values so an untrained model survives a
  // checkpoint round trip unchanged.
  for (Parameter* p : trainable()) round_to_float(p->value);
}

std::string Model::anchor_hash() const { return alignment::word_list_hash(config_.anchor_words); }

const alignment::CrossAttentionBlock* Model::align_block(Component c, int channel) const {
  const auto& blocks = align_blocks_[idx(c)];
  if (blocks.empty()) return nullptr;
  if (!config_.per_channel_alignment) return &blocks.front();
  if (channel < 0 || channel >= static_cast<int>(blocks.size())) {
    throw ValidationError("channel " + std::to_string(channel) +
                          " has no per-channel alignment weights");
  }
  return &blocks[static_cast<std::size_t>(channel)];
}

ForwardResult Model::forward(ad::Tape& tape, const Matrix& window, ForwardTrace* trace) const {
  if (window.cols() != config_.L) {
    throw ValidationError("window length " + std::to_string(window.cols()) +
                          " does not match model L=" + std::to_string(config_.L));
  }
  const int N = static_cast<int>(window.rows());
  const int K = config_.patch_count();
  if (trace) trace->channels.assign(static_cast<std::size_t>(N), {});

  std::array<std::vector<ad::Var>, 3> rows;
  for (int ch = 0; ch < N; ++ch) {
    const Series x = row_of(window, ch);
    decompose::ComponentTriple parts = decompose::additive_decompose(x, config_.decomp);
    for (Component c : alignment::kComponents) {
      const auto i = idx(c);
      auto [norm, stats] = preprocess::instance_normalize(component_of(parts, c), config_.norm_epsilon);
      const preprocess::PatchSet patches = preprocess::patchify(norm, config_.patch_len, config_.stride);
      ad::Var tokens = preprocess::embed_patches(tape, tape.constant(patches.patches), embedders_[i]);

      if (const auto* block = align_block(c, ch)) {
        alignment::AlignmentContext ctx;
        ctx.anchors = anchors();
        ctx.bank = banks_[i] ? &*banks_[i] : nullptr;
        ctx.vocab_table = &backbone_->vocab_table();
        alignment::Aligned aligned = alignment::align_component(tape, c, *block, tokens, ctx);
        tokens = aligned.embeddings;
        if (trace) trace->channels[static_cast<std::size_t>(ch)].attention[i] = std::move(aligned.weights);
      }

      const std::string text = prompt::render_prompt(config_.prompt, c, prompt::summarize(norm),
                                                     config_.L, config_.H);
      const prompt::PromptEmbedding pe = prompt::embed_prompt(text, *backbone_, config_.max_prompt_tokens);
      ad::Var seq = prompt::prefix_concat(tape, pe, tokens);
      int prefix = pe.length();
      if (soft_prompts_[i]) {
        seq = ad::concat_rows({tape.parameter(*soft_prompts_[i]), seq});
        prefix += config_.soft_prompt_len;
      }

      ad::Var hidden = backbone_->forward(tape, seq);
      ad::Var states = head::slice_patch_states(hidden, prefix, K);
      ad::Var y = head::project_component(tape, states, heads_[i]);
      rows[i].push_back(ad::affine(y, stats.std + stats.epsilon, stats.mean));

      if (trace) {
        auto& tc = trace->channels[static_cast<std::size_t>(ch)];
        tc.stats[i] = stats;
        tc.prompts[i] = text;
      }
    }
    if (trace) trace->channels[static_cast<std::size_t>(ch)].decomposition = std::move(parts);
  }

  ForwardResult out;
  for (std::size_t i = 0; i < 3; ++i) out.components[i] = ad::concat_rows(rows[i]);
  out.combined = ad::add(ad::add(out.components[0], out.components[1]), out.components[2]);
  return out;
}

Forecast Model::predict(const Matrix& window, ForwardTrace* trace) const {
  ad::Tape tape;
  ForwardResult r = forward(tape, window, trace);
  Forecast f;
  for (std::size_t i = 0; i < 3; ++i) f.per_component[i] = as_matrix(r.components[i].value());
  f.combined = r.combined.value();
  return f;
}

Forecast forward_pipeline(const Matrix& window, const Model& model) { return model.predict(window); }

std::vector<Matrix> Model::trend_attention(std::span<const double> series, int channel) const {
  const auto* block = align_block(Component::trend, channel);
  if (block == nullptr || !anchors_) throw ValidationError("no alignment to export");
  if (static_cast<int>(series.size()) != config_.L) {
    throw ValidationError("series length does not match model L");
  }
  const decompose::ComponentTriple parts = decompose::additive_decompose(series, config_.decomp);
  auto [norm, stats] = preprocess::instance_normalize(parts.trend, config_.norm_epsilon);
  const preprocess::PatchSet patches = preprocess::patchify(norm, config_.patch_len, config_.patch_len);
  ad::Tape tape;
  ad::Var tokens = preprocess::embed_patches(tape, tape.constant(patches.patches),
                                             embedders_[idx(Component::trend)]);
  alignment::AlignmentContext ctx;
  ctx.anchors = anchors();
  return alignment::align_component(tape, Component::trend, *block, tokens, ctx).weights;
}

std::vector<const Parameter*> Model::trainable() const {
  std::vector<const Parameter*> out;
  for (const auto& e : embedders_) {
    out.push_back(&e.weight);
    out.push_back(&e.bias);
  }
  for (const auto& blocks : align_blocks_) {
    for (const auto& b : blocks) {
      out.push_back(&b.wq);
      out.push_back(&b.wk);
      out.push_back(&b.wv);
    }
  }
  for (const auto& bank : banks_) {
    if (bank) out.push_back(&bank->probe);
  }
  for (const auto& h : heads_) {
    out.push_back(&h.weight);
    out.push_back(&h.bias);
  }
  for (const auto& sp : soft_prompts_) {
    if (sp) out.push_back(&*sp);
  }
  return out;
}

std::vector<Parameter*> Model::trainable() {
  std::vector<Parameter*> out;
  for (const Parameter* p : std::as_const(*this).trainable()) out.push_back(const_cast<Parameter*>(p));
  return out;
}

ParameterPartition Model::partition() {
  ParameterPartition p;
  p.trainable = trainable();
  p.frozen = backbone_->named_tensors();
  if (anchors_) p.frozen.emplace_back("anchors.trend", &anchors_->embeddings);
  return p;
}

std::string Model::trainable_fingerprint() const {
  Fingerprint fp;
  for (const Parameter* p : trainable()) {
    fp.update(p->name);
    fp.update(p->value);
  }
  return fp.hex();
}

std::string Model::frozen_fingerprint() const {
  Fingerprint fp;
  fp.update(backbone_->fingerprint());
  if (anchors_) fp.update(anchors_->embeddings);
  return fp.hex();
}

TensorCheckpoint Model::to_checkpoint() const {
  TensorCheckpoint ck;
  ck.metadata["kind"] = "model";
  ck.metadata["backbone_fingerprint"] = backbone_->fingerprint();
  ck.metadata["anchor_hash"] = anchor_hash();
  for (const Parameter* p : trainable()) ck.add(p->name, p->value);
  return ck;
}

void Model::load_checkpoint(const TensorCheckpoint& ckpt) {
  if (auto it = ckpt.metadata.find("backbone_fingerprint");
      it == ckpt.metadata.end() || it->second != backbone_->fingerprint()) {
    throw ValidationError("checkpoint was trained against a different backbone (fingerprint mismatch)");
  }
  auto params = trainable();
  if (params.size() != ckpt.tensors.size()) {
    throw ValidationError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    const NamedTensor& t = ckpt.at(p->name);
    if (t.value.rows() != p->value.rows() || t.value.cols() != p->value.cols()) {
      throw ValidationError("checkpoint tensor '" + p->name + "' has shape " + format_shape(t.shape) +
                            ", model expects [" + std::to_string(p->value.rows()) + " x " +
                            std::to_string(p->value.cols()) + "]");
    }
  }
  for (Parameter* p : params) {
    p->value = ckpt.at(p->name).value;
    p->zero_grad();
  }
}

void Model::save(const std::filesystem::path& path) const { save_checkpoint(to_checkpoint(), path); }

void Model::load(const std::filesystem::path& path) { load_checkpoint(read_checkpoint(path)); }

}  // namespace tsalign
