#include "tsalign/backbone.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace tsalign {

namespace {

std::string block_prefix(int i) { return "h." + std::to_string(i) + "."; }

Matrix concat_cols(const Matrix& a, const Matrix& b, const Matrix& c) {
  Matrix out(a.rows(), a.cols() + b.cols() + c.cols());
  out << a, b, c;
  return out;
}

}  // namespace

FrozenBackbone::FrozenBackbone(Matrix token_table, Matrix position_table,
                               std::vector<BackboneBlock> blocks, Matrix lnf_gamma, Matrix lnf_beta,
                               int heads, std::shared_ptr<const Tokenizer> tokenizer)
    : token_table_(std::move(token_table)),
      position_table_(std::move(position_table)),
      blocks_(std::move(blocks)),
      lnf_gamma_(std::move(lnf_gamma)),
      lnf_beta_(std::move(lnf_beta)),
      heads_(heads),
      tokenizer_(std::move(tokenizer)) {
  if (heads_ < 1 || dim() % heads_ != 0) {
    throw ValidationError("backbone width " + std::to_string(dim()) +
                          " is not divisible by head count " + std::to_string(heads_));
  }
  if (static_cast<int>(blocks_.size()) != kBlocks) {
    throw ValidationError("backbone needs exactly " + std::to_string(kBlocks) + " blocks");
  }
  if (position_table_.cols() != token_table_.cols()) {
    throw ValidationError("positional table width does not match token table width");
  }
  if (!tokenizer_) tokenizer_ = std::make_shared<HashTokenizer>(vocab_size());
}

ad::Var FrozenBackbone::forward(ad::Tape& tape, ad::Var embedded) const {
  const auto S = embedded.rows();
  if (embedded.cols() != dim()) {
    throw ValidationError("backbone input width " + std::to_string(embedded.cols()) +
                          " does not match model width " + std::to_string(dim()));
  }
  if (S > max_positions()) {
    throw ValidationError("sequence length " + std::to_string(S) + " exceeds backbone maximum " +
                          std::to_string(max_positions()));
  }
  auto c = [&tape](const Matrix& m) { return tape.constant_ref(m); };
  ad::Var x = ad::add(embedded, tape.constant(position_table_.topRows(S)));
  for (const BackboneBlock& b : blocks_) {
    ad::Var a = ad::layer_norm(x, c(b.ln1_gamma), c(b.ln1_beta));
    ad::Var q = ad::add_row(ad::matmul(a, c(b.wq)), c(b.bq));
    ad::Var k = ad::add_row(ad::matmul(a, c(b.wk)), c(b.bk));
    ad::Var v = ad::add_row(ad::matmul(a, c(b.wv)), c(b.bv));
    ad::Var att = ad::attention(q, k, v, heads_, /*causal=*/true);
    x = ad::add(x, ad::add_row(ad::matmul(att, c(b.attn_proj_w)), c(b.attn_proj_b)));
    ad::Var m = ad::layer_norm(x, c(b.ln2_gamma), c(b.ln2_beta));
    ad::Var hdn = ad::gelu(ad::add_row(ad::matmul(m, c(b.fc_w)), c(b.fc_b)));
    x = ad::add(x, ad::add_row(ad::matmul(hdn, c(b.fc_proj_w)), c(b.fc_proj_b)));
  }
  return ad::layer_norm(x, c(lnf_gamma_), c(lnf_beta_));
}

Matrix FrozenBackbone::forward(const Matrix& embedded) const {
  ad::Tape tape;
  return forward(tape, tape.constant(embedded)).value();
}

std::vector<std::pair<std::string, const Matrix*>> FrozenBackbone::named_tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  out.emplace_back("wte", &token_table_);
  out.emplace_back("wpe", &position_table_);
  for (int i = 0; i < kBlocks; ++i) {
    const auto& b = blocks_[static_cast<std::size_t>(i)];
    const auto p = block_prefix(i);
    out.emplace_back(p + "ln_1.weight", &b.ln1_gamma);
    out.emplace_back(p + "ln_1.bias", &b.ln1_beta);
    out.emplace_back(p + "attn.wq", &b.wq);
    out.emplace_back(p + "attn.wk", &b.wk);
    out.emplace_back(p + "attn.wv", &b.wv);
    out.emplace_back(p + "attn.bq", &b.bq);
    out.emplace_back(p + "attn.bk", &b.bk);
    out.emplace_back(p + "attn.bv", &b.bv);
    out.emplace_back(p + "attn.c_proj.weight", &b.attn_proj_w);
    out.emplace_back(p + "attn.c_proj.bias", &b.attn_proj_b);
    out.emplace_back(p + "ln_2.weight", &b.ln2_gamma);
    out.emplace_back(p + "ln_2.bias", &b.ln2_beta);
    out.emplace_back(p + "mlp.c_fc.weight", &b.fc_w);
    out.emplace_back(p + "mlp.c_fc.bias", &b.fc_b);
    out.emplace_back(p + "mlp.c_proj.weight", &b.fc_proj_w);
    out.emplace_back(p + "mlp.c_proj.bias", &b.fc_proj_b);
  }
  out.emplace_back("ln_f.weight", &lnf_gamma_);
  out.emplace_back("ln_f.bias", &lnf_beta_);
  return out;
}

std::string FrozenBackbone::fingerprint() const {
  Fingerprint fp;
  for (const auto& [name, m] : named_tensors()) {
    fp.update(name);
    fp.update(*m);
  }
  return fp.hex();
}

ShapeManifest backbone_manifest(int V, int D, int T, int blocks) {
  const std::int64_t d = D;
  ShapeManifest m;
  m.push_back({"wte", {V, d}});
  m.push_back({"wpe", {T, d}});
  for (int i = 0; i < blocks; ++i) {
    const auto p = block_prefix(i);
    m.push_back({p + "ln_1.weight", {d}});
    m.push_back({p + "ln_1.bias", {d}});
    m.push_back({p + "attn.c_attn.weight", {d, 3 * d}});
    m.push_back({p + "attn.c_attn.bias", {3 * d}});
    m.push_back({p + "attn.c_proj.weight", {d, d}});
    m.push_back({p + "attn.c_proj.bias", {d}});
    m.push_back({p + "ln_2.weight", {d}});
    m.push_back({p + "ln_2.bias", {d}});
    m.push_back({p + "mlp.c_fc.weight", {d, 4 * d}});
    m.push_back({p + "mlp.c_fc.bias", {4 * d}});
    m.push_back({p + "mlp.c_proj.weight", {4 * d, d}});
    m.push_back({p + "mlp.c_proj.bias", {d}});
  }
  m.push_back({"ln_f.weight", {d}});
  m.push_back({"ln_f.bias", {d}});
  return m;
}

TensorCheckpoint FrozenBackbone::to_checkpoint() const {
  TensorCheckpoint ck;
  const std::int64_t d = dim();
  ck.metadata["kind"] = "backbone";
  ck.metadata["heads"] = std::to_string(heads_);
  ck.add("wte", token_table_);
  ck.add("wpe", position_table_);
  for (int i = 0; i < kBlocks; ++i) {
    const auto& b = blocks_[static_cast<std::size_t>(i)];
    const auto p = block_prefix(i);
    ck.add(p + "ln_1.weight", b.ln1_gamma, {d});
    ck.add(p + "ln_1.bias", b.ln1_beta, {d});
    ck.add(p + "attn.c_attn.weight", concat_cols(b.wq, b.wk, b.wv));
    ck.add(p + "attn.c_attn.bias", concat_cols(b.bq, b.bk, b.bv), {3 * d});
    ck.add(p + "attn.c_proj.weight", b.attn_proj_w);
    ck.add(p + "attn.c_proj.bias", b.attn_proj_b, {d});
    ck.add(p + "ln_2.weight", b.ln2_gamma, {d});
    ck.add(p + "ln_2.bias", b.ln2_beta, {d});
    ck.add(p + "mlp.c_fc.weight", b.fc_w);
    ck.add(p + "mlp.c_fc.bias", b.fc_b, {4 * d});
    ck.add(p + "mlp.c_proj.weight", b.fc_proj_w);
    ck.add(p + "mlp.c_proj.bias", b.fc_proj_b, {d});
  }
  ck.add("ln_f.weight", lnf_gamma_, {d});
  ck.add("ln_f.bias", lnf_beta_, {d});
  return ck;
}

FrozenBackbone init_mini_backbone(std::uint64_t seed, int V, int D, int T, int heads) {
  if (V < 64) throw ValidationError("mini backbone vocabulary must be >= 64");
  if (D < 1 || T < 1) throw ValidationError("mini backbone dimensions must be positive");
  if (heads < 1 || D % heads != 0) {
    throw ValidationError("mini backbone width must be divisible by the head count");
  }
  std::mt19937_64 rng(seed);
  auto normal = [&rng](int r, int c, double sd) {
    Matrix m(r, c);
    fill_normal(m, sd, rng);
    round_to_float(m);
    return m;
  };
  const double proj_sd = 0.02 / std::sqrt(2.0 * FrozenBackbone::kBlocks);
  Matrix wte = normal(V, D, 0.1);
  Matrix wpe = normal(T, D, 0.02);
  std::vector<BackboneBlock> blocks(FrozenBackbone::kBlocks);
  for (auto& b : blocks) {
    b.ln1_gamma = Matrix::Ones(1, D);
    b.ln1_beta = Matrix::Zero(1, D);
    b.wq = normal(D, D, 0.02);
    b.wk = normal(D, D, 0.02);
    b.wv = normal(D, D, 0.02);
    b.bq = b.bk = b.bv = Matrix::Zero(1, D);
    b.attn_proj_w = normal(D, D, proj_sd);
    b.attn_proj_b = Matrix::Zero(1, D);
    b.ln2_gamma = Matrix::Ones(1, D);
    b.ln2_beta = Matrix::Zero(1, D);
    b.fc_w = normal(D, 4 * D, 0.02);
    b.fc_b = Matrix::Zero(1, 4 * D);
    b.fc_proj_w = normal(4 * D, D, proj_sd);
    b.fc_proj_b = Matrix::Zero(1, D);
  }
  return FrozenBackbone(std::move(wte), std::move(wpe), std::move(blocks), Matrix::Ones(1, D),
                        Matrix::Zero(1, D), heads, nullptr);
}

FrozenBackbone load_checkpoint(const std::filesystem::path& path, const ShapeManifest& expected,
                               int heads, std::shared_ptr<const Tokenizer> tokenizer) {
  TensorCheckpoint ck = read_checkpoint(path);
  check_manifest(ck, expected);
  const Matrix& wte = ck.at("wte").value;
  const Eigen::Index D = wte.cols();
  // Everything the assembled backbone reads must be present and shaped, even
  // if the caller's manifest was partial.
  check_manifest(ck, backbone_manifest(static_cast<int>(wte.rows()), static_cast<int>(D),
                                       static_cast<int>(ck.at("wpe").value.rows())));
  std::vector<BackboneBlock> blocks(FrozenBackbone::kBlocks);
  for (int i = 0; i < FrozenBackbone::kBlocks; ++i) {
    auto& b = blocks[static_cast<std::size_t>(i)];
    const auto p = block_prefix(i);
    auto get = [&](const std::string& n) { return ck.at(p + n).value; };
    b.ln1_gamma = get("ln_1.weight");
    b.ln1_beta = get("ln_1.bias");
    const Matrix qkv = get("attn.c_attn.weight");
    const Matrix qkv_b = get("attn.c_attn.bias");
    b.wq = qkv.middleCols(0, D);
    b.wk = qkv.middleCols(D, D);
    b.wv = qkv.middleCols(2 * D, D);
    b.bq = qkv_b.middleCols(0, D);
    b.bk = qkv_b.middleCols(D, D);
    b.bv = qkv_b.middleCols(2 * D, D);
    b.attn_proj_w = get("attn.c_proj.weight");
    b.attn_proj_b = get("attn.c_proj.bias");
    b.ln2_gamma = get("ln_2.weight");
    b.ln2_beta = get("ln_2.bias");
    b.fc_w = get("mlp.c_fc.weight");
    b.fc_b = get("mlp.c_fc.bias");
    b.fc_proj_w = get("mlp.c_proj.weight");
    b.fc_proj_b = get("mlp.c_proj.bias");
  }
  return FrozenBackbone(wte, ck.at("wpe").value, std::move(blocks), ck.at("ln_f.weight").value,
                        ck.at("ln_f.bias").value, heads, std::move(tokenizer));
}

FrozenBackbone load_checkpoint(const std::filesystem::path& path, int heads,
                               std::shared_ptr<const Tokenizer> tokenizer) {
  TensorCheckpoint ck = read_checkpoint(path);
  const NamedTensor* wte = ck.find("wte");
  if (wte == nullptr) throw ValidationError("checkpoint is missing tensor 'wte'");
  const NamedTensor* wpe = ck.find("wpe");
  if (wpe == nullptr) throw ValidationError("checkpoint is missing tensor 'wpe'");
  return load_checkpoint(path,
                         backbone_manifest(static_cast<int>(wte->value.rows()),
                                           static_cast<int>(wte->value.cols()),
                                           static_cast<int>(wpe->value.rows())),
                         heads, std::move(tokenizer));
}

}  // namespace tsalign
