#include "tsalign/autodiff.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>

namespace tsalign {

void fill_normal(Matrix& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

void fill_uniform(Matrix& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

void round_to_float(Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
}

void Fingerprint::update(std::string_view bytes) {
  for (unsigned char c : bytes) {
    state_ ^= c;
    state_ *= 1099511628211ULL;
  }
}

void Fingerprint::update(std::span<const double> values) {
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      state_ ^= (bits >> (8 * b)) & 0xFFu;
      state_ *= 1099511628211ULL;
    }
  }
}

void Fingerprint::update(const Matrix& m) {
  const double dims[2] = {static_cast<double>(m.rows()), static_cast<double>(m.cols())};
  update(std::span<const double>(dims, 2));
  update(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string Fingerprint::hex() const { return to_hex(state_); }

}  // namespace tsalign

namespace tsalign::ad {

const Matrix& Var::value() const { return tape_->value(id_); }
bool Var::needs_grad() const { return tape_->needs_grad(id_); }

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = *nodes_[id];
  return n.ref ? *n.ref : n.owned;
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::constant_ref(const Matrix& value) {
  auto node = std::make_unique<Node>();
  node->ref = &value;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& p) {
  auto node = std::make_unique<Node>();
  node->ref = &p.value;
  node->needs_grad = true;
  node->param = &p;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Matrix value, bool needs_grad, BackwardFn fn) {
  auto node = std::make_unique<Node>();
  node->owned = std::move(value);
  node->needs_grad = needs_grad;
  if (needs_grad) node->backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = *nodes_[v.id()];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss, double seed) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ValidationError("backward() requires a scalar (1x1) loss node");
  }
  if (!needs_grad(loss.id())) return;
  accumulate(loss, Matrix::Constant(1, 1, seed));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = *nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
    n.grad.resize(0, 0);
  }
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}

bool any_grad(std::initializer_list<Var> vs) {
  for (const Var& v : vs) {
    if (v.needs_grad()) return true;
  }
  return false;
}

}  // namespace

Var matmul(Var a, Var b, bool ta, bool tb) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  const auto inner_a = ta ? A.rows() : A.cols();
  const auto inner_b = tb ? B.cols() : B.rows();
  require(inner_a == inner_b, "matmul: inner dimension mismatch");
  Matrix out;
  if (!ta && !tb) out.noalias() = A * B;
  else if (!ta && tb) out.noalias() = A * B.transpose();
  else if (ta && !tb) out.noalias() = A.transpose() * B;
  else out.noalias() = A.transpose() * B.transpose();

  return a.tape()->push(std::move(out), any_grad({a, b}), [a, b, ta, tb](Tape& t, const Matrix& g) {
    const Matrix& A = a.value();
    const Matrix& B = b.value();
    if (a.needs_grad()) {
      // out = op(A) op(B)  =>  d op(A) = G op(B)^T
      Matrix dA;
      if (!ta && !tb) dA.noalias() = g * B.transpose();
      else if (!ta && tb) dA.noalias() = g * B;
      else if (ta && !tb) dA.noalias() = B * g.transpose();
      else dA.noalias() = B.transpose() * g.transpose();
      t.accumulate(a, dA);
    }
    if (b.needs_grad()) {
      Matrix dB;
      if (!ta && !tb) dB.noalias() = A.transpose() * g;
      else if (!ta && tb) dB.noalias() = g.transpose() * A;
      else if (ta && !tb) dB.noalias() = A * g;
      else dB.noalias() = g.transpose() * A.transpose();
      t.accumulate(b, dB);
    }
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Matrix out = a.value() + b.value();
  return a.tape()->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  Matrix out = a.value() - b.value();
  return a.tape()->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (b.needs_grad()) t.accumulate(b, -g);
  });
}

Var add_row(Var a, Var b) {
  require(b.rows() == 1 && b.cols() == a.cols(), "add_row: bias must be 1 x cols");
  Matrix out = a.value();
  out.rowwise() += b.value().row(0);
  return a.tape()->push(std::move(out), any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (b.needs_grad()) t.accumulate(b, g.colwise().sum());
  });
}

Var scale(Var a, double s) { return affine(a, s, 0.0); }

Var affine(Var a, double s, double c) {
  Matrix out = (a.value().array() * s + c).matrix();
  return a.tape()->push(std::move(out), a.needs_grad(),
                        [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  return a.tape()->push(std::move(out), a.needs_grad(), [a](Tape& t, const Matrix& g) {
    const Matrix& x = a.value();
    Matrix dx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double d = 0.5 * (1.0 + th) +
                       0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      dx.data()[i] = g.data()[i] * d;
    }
    t.accumulate(a, dx);
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& X = x.value();
  const auto cols = X.cols();
  require(gamma.rows() == 1 && gamma.cols() == cols && beta.rows() == 1 && beta.cols() == cols,
          "layer_norm: gamma/beta must be 1 x cols");
  Matrix xhat(X.rows(), cols);
  std::vector<double> inv_std(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mean = X.row(r).mean();
    const double var = (X.row(r).array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    xhat.row(r) = (X.row(r).array() - mean) * is;
  }
  Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return x.tape()->push(
      std::move(out), any_grad({x, gamma, beta}),
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                           const Matrix& g) {
        if (gamma.needs_grad()) t.accumulate(gamma, (g.array() * xhat.array()).colwise().sum());
        if (beta.needs_grad()) t.accumulate(beta, g.colwise().sum());
        if (!x.needs_grad()) return;
        const auto n = static_cast<double>(xhat.cols());
        Matrix dxhat = g.array().rowwise() * gamma.value().row(0).array();
        Matrix dx(xhat.rows(), xhat.cols());
        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
          const double m1 = dxhat.row(r).sum() / n;
          const double m2 = dxhat.row(r).dot(xhat.row(r)) / n;
          dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) *
                      inv_std[static_cast<std::size_t>(r)];
        }
        t.accumulate(x, dx);
      });
}

Var attention(Var q, Var k, Var v, int heads, bool causal, std::vector<Matrix>* probs_out) {
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  require(heads >= 1 && Q.cols() % heads == 0, "attention: width not divisible by heads");
  require(K.cols() == Q.cols() && V.cols() == Q.cols(), "attention: q/k/v width mismatch");
  require(K.rows() == V.rows(), "attention: k/v row mismatch");
  require(K.rows() >= 1, "attention: empty key set");
  require(!causal || Q.rows() == K.rows(), "attention: causal mask needs square scores");

  const Eigen::Index dk = Q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const Eigen::Index sq = Q.rows();
  const Eigen::Index sk = K.rows();

  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  Matrix out(sq, Q.cols());
  for (int h = 0; h < heads; ++h) {
    const auto c0 = h * dk;
    Matrix s;
    s.noalias() = Q.middleCols(c0, dk) * K.middleCols(c0, dk).transpose();
    s *= scale;
    for (Eigen::Index i = 0; i < sq; ++i) {
      const Eigen::Index limit = causal ? i + 1 : sk;
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < limit; ++j) mx = std::max(mx, s(i, j));
      double denom = 0.0;
      for (Eigen::Index j = 0; j < limit; ++j) {
        s(i, j) = std::exp(s(i, j) - mx);
        denom += s(i, j);
      }
      for (Eigen::Index j = 0; j < limit; ++j) s(i, j) /= denom;
      for (Eigen::Index j = limit; j < sk; ++j) s(i, j) = 0.0;
    }
    out.middleCols(c0, dk).noalias() = s * V.middleCols(c0, dk);
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  if (probs_out != nullptr) *probs_out = probs;

  return q.tape()->push(
      std::move(out), any_grad({q, k, v}),
      [q, k, v, heads, dk, scale, probs = std::move(probs)](Tape& t, const Matrix& g) {
        const Matrix& Q = q.value();
        const Matrix& K = k.value();
        const Matrix& V = v.value();
        Matrix dQ = Matrix::Zero(Q.rows(), Q.cols());
        Matrix dK = Matrix::Zero(K.rows(), K.cols());
        Matrix dV = Matrix::Zero(V.rows(), V.cols());
        for (int h = 0; h < heads; ++h) {
          const auto c0 = h * dk;
          const Matrix& P = probs[static_cast<std::size_t>(h)];
          const auto gh = g.middleCols(c0, dk);
          if (v.needs_grad()) dV.middleCols(c0, dk).noalias() = P.transpose() * gh;
          Matrix dP;
          dP.noalias() = gh * V.middleCols(c0, dk).transpose();
          // softmax backward: dS = P * (dP - rowsum(dP * P))
          Matrix dS = P.cwiseProduct(dP);
          const Eigen::VectorXd rs = dS.rowwise().sum();
          dS -= P.cwiseProduct(rs.replicate(1, P.cols()));
          dS *= scale;
          if (q.needs_grad()) dQ.middleCols(c0, dk).noalias() = dS * K.middleCols(c0, dk);
          if (k.needs_grad()) dK.middleCols(c0, dk).noalias() = dS.transpose() * Q.middleCols(c0, dk);
        }
        t.accumulate(q, dQ);
        t.accumulate(k, dK);
        t.accumulate(v, dV);
      });
}

Var slice_rows(Var a, Eigen::Index first, Eigen::Index count) {
  require(first >= 0 && count >= 0 && first + count <= a.rows(), "slice_rows: out of range");
  Matrix out = a.value().middleRows(first, count);
  return a.tape()->push(std::move(out), a.needs_grad(), [a, first, count](Tape& t, const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    d.middleRows(first, count) = g;
    t.accumulate(a, d);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const auto cols = parts.front().cols();
  Eigen::Index rows = 0;
  bool grad = false;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
    grad = grad || p.needs_grad();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return parts.front().tape()->push(std::move(out), grad, [parts](Tape& t, const Matrix& g) {
    Eigen::Index r = 0;
    for (const Var& p : parts) {
      if (p.needs_grad()) t.accumulate(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  require(rows * cols == a.value().size(), "reshape: element count mismatch");
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return a.tape()->push(std::move(out), a.needs_grad(), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Eigen::Map<const Matrix>(g.data(), a.rows(), a.cols()));
  });
}

Var mse(Var pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse: shape mismatch");
  Matrix diff = pred.value() - target;
  const double n = static_cast<double>(diff.size());
  Matrix out = Matrix::Constant(1, 1, diff.squaredNorm() / n);
  return pred.tape()->push(std::move(out), pred.needs_grad(),
                           [pred, diff = std::move(diff), n](Tape& t, const Matrix& g) {
                             t.accumulate(pred, diff * (2.0 * g(0, 0) / n));
                           });
}

}  // namespace tsalign::ad
