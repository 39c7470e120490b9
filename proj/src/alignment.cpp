#include "tsalign/alignment.hpp"

#include <cmath>
#include <fstream>

namespace tsalign::alignment {

std::string to_string(Component c) {
  switch (c) {
    case Component::trend: return "trend";
    case Component::seasonal: return "seasonal";
    case Component::residual: return "residual";
  }
  return "?";
}

Component parse_component(const std::string& name) {
  if (name == "trend") return Component::trend;
  if (name == "seasonal") return Component::seasonal;
  if (name == "residual") return Component::residual;
  throw ValidationError("unknown component '" + name + "'");
}

const std::vector<std::string>& default_anchor_words() {
  static const std::vector<std::string> w = {
      "increase", "decrease", "upward",     "downward",   "linear",     "exponential",
      "drift",    "stable",   "volatile",   "stationary", "persistent", "rapid"};
  return w;
}

const std::vector<std::string>& noise_anchor_words() {
  static const std::vector<std::string> w = {"banana", "violin", "castle", "purple",
                                             "ocean",  "pencil", "tiger",  "velvet",
                                             "lantern", "marble", "poetry", "garden"};
  return w;
}

const std::vector<std::string>& synonym_anchor_words() {
  static const std::vector<std::string> w = {"rise", "increase", "climb",    "grow",
                                             "expand", "ascend", "fall",     "decrease",
                                             "decline", "shrink", "contract", "descend"};
  return w;
}

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open word list " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    words.push_back(line.substr(b, e - b + 1));
  }
  if (words.empty()) throw ValidationError("word list " + path.string() + " is empty");
  return words;
}

std::string word_list_hash(const std::vector<std::string>& words) {
  Fingerprint fp;
  for (const auto& w : words) {
    fp.update(w);
    fp.update("\n");
  }
  return fp.hex();
}

AnchorSet resolve_anchor_embeddings(const std::vector<std::string>& words,
                                    const FrozenBackbone& backbone) {
  if (words.empty()) throw ValidationError("anchor list is empty");
  const Matrix& E = backbone.vocab_table();
  AnchorSet set;
  set.words = words;
  set.embeddings.resize(static_cast<Eigen::Index>(words.size()), E.cols());
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::vector<int> ids;
    try {
      ids = backbone.tokenizer().encode_word(words[i]);
    } catch (const ValidationError& e) {
      throw ValidationError("anchor word '" + words[i] + "' cannot be resolved: " + e.what());
    }
    if (ids.empty()) throw ValidationError("anchor word '" + words[i] + "' cannot be resolved");
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(E.cols());
    for (int id : ids) {
      if (id < 0 || id >= E.rows()) {
        throw ValidationError("anchor word '" + words[i] + "' maps outside the vocabulary");
      }
      sum += E.row(id);
    }
    set.embeddings.row(static_cast<Eigen::Index>(i)) =
        ids.size() == 1 ? Eigen::RowVectorXd(E.row(ids[0])) : Eigen::RowVectorXd(sum / static_cast<double>(ids.size()));
  }
  return set;
}

PrototypeBank make_prototype_bank(Component component, int count, int vocab_size,
                                  std::mt19937_64& rng) {
  if (count < 1) throw ValidationError("prototype count must be >= 1");
  Matrix probe(count, vocab_size);
  fill_normal(probe, 1.0 / std::sqrt(static_cast<double>(vocab_size)), rng);
  PrototypeBank bank;
  bank.component = component;
  bank.probe = Parameter("probe." + to_string(component), std::move(probe));
  return bank;
}

ad::Var probe_prototypes(ad::Tape& tape, const PrototypeBank& bank, const Matrix& vocab_table) {
  if (bank.probe.value.cols() != vocab_table.rows()) {
    throw ValidationError("probe has " + std::to_string(bank.probe.value.cols()) +
                          " columns but the vocabulary table has " +
                          std::to_string(vocab_table.rows()) + " rows");
  }
  return ad::matmul(tape.parameter(bank.probe), tape.constant_ref(vocab_table));
}

Matrix probe_prototypes(const PrototypeBank& bank, const Matrix& vocab_table) {
  ad::Tape tape;
  return probe_prototypes(tape, bank, vocab_table).value();
}

CrossAttentionBlock make_cross_attention(const std::string& name, Component component, int dim,
                                         int heads, std::mt19937_64& rng) {
  if (heads < 1 || dim % heads != 0) {
    throw ValidationError("cross-attention width " + std::to_string(dim) +
                          " is not divisible by " + std::to_string(heads) + " heads");
  }
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  auto init = [&](const char* suffix) {
    Matrix m(dim, dim);
    fill_normal(m, sd, rng);
    return Parameter(name + "." + suffix, std::move(m));
  };
  CrossAttentionBlock b;
  b.component = component;
  b.heads = heads;
  b.wq = init("wq");
  b.wk = init("wk");
  b.wv = init("wv");
  return b;
}

ad::Var cross_attend(ad::Tape& tape, const CrossAttentionBlock& block, ad::Var queries_src,
                     ad::Var kv_src, std::vector<Matrix>* weights) {
  if (kv_src.rows() == 0) throw ValidationError("empty key set");
  if (queries_src.cols() != block.dim() || kv_src.cols() != block.dim()) {
    throw ValidationError("cross_attend: input width does not match projection width");
  }
  ad::Var q = ad::matmul(queries_src, tape.parameter(block.wq));
  ad::Var k = ad::matmul(kv_src, tape.parameter(block.wk));
  ad::Var v = ad::matmul(kv_src, tape.parameter(block.wv));
  return ad::attention(q, k, v, block.heads, /*causal=*/false, weights);
}

std::pair<Matrix, std::vector<Matrix>> cross_attend(const CrossAttentionBlock& block,
                                                    const Matrix& queries_src,
                                                    const Matrix& kv_src) {
  ad::Tape tape;
  std::vector<Matrix> w;
  Matrix out =
      cross_attend(tape, block, tape.constant(queries_src), tape.constant(kv_src), &w).value();
  return {std::move(out), std::move(w)};
}

Aligned align_component(ad::Tape& tape, Component component, const CrossAttentionBlock& block,
                        ad::Var patches_embedded, const AlignmentContext& ctx) {
  if (block.component != component) {
    throw ValidationError("alignment block for " + to_string(block.component) + " used for " +
                          to_string(component));
  }
  ad::Var kv;
  if (component == Component::trend) {
    if (ctx.anchors == nullptr) throw ValidationError("trend alignment needs an anchor set");
    kv = tape.constant_ref(ctx.anchors->embeddings);
  } else {
    if (ctx.bank == nullptr || ctx.vocab_table == nullptr) {
      throw ValidationError(to_string(component) + " alignment needs a prototype bank");
    }
    if (ctx.bank->component != component) {
      throw ValidationError("prototype bank for " + to_string(ctx.bank->component) +
                            " used for " + to_string(component));
    }
    kv = probe_prototypes(tape, *ctx.bank, *ctx.vocab_table);
  }
  Aligned out;
  out.embeddings = cross_attend(tape, block, patches_embedded, kv, &out.weights);
  return out;
}

}  // namespace tsalign::alignment
