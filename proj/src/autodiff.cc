// Copyright (c) 2026 The GhostVec Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ghostvec/autodiff.h"

#include <cmath>
#include <cstring>
#include <numbers>

#include "ghostvec/digest.h"

namespace ghostvec::ad {

Parameter& ParameterSet::add(const std::string& name, Matrix value) {
  for (const auto& p : params_)
    if (p->name == name) throw ParameterError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix::Zero(value.rows(), value.cols());
  p->value = std::move(value);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw ParameterError("unknown parameter: " + name);
}

const Parameter& ParameterSet::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return *p;
  throw ParameterError("unknown parameter: " + name);
}

size_t ParameterSet::count() const {
  size_t n = 0;
  for (const auto& p : params_) n += static_cast<size_t>(p->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

std::string ParameterSet::checksum() const {
  std::string blob;
  for (const auto& p : params_) {
    blob += p->name;
    blob += ':' + std::to_string(p->value.rows()) + 'x' + std::to_string(p->value.cols()) + ';';
    blob.append(reinterpret_cast<const char*>(p->value.data()),
                static_cast<size_t>(p->value.size()) * sizeof(double));
  }
  return sha256_hex(blob);
}

Adam::Adam(ParameterSet& params, double beta1, double beta2, double eps)
    : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_.all()) {
    m1_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    m2_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(double lr, double grad_scale) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_), bc2 = 1.0 - std::pow(beta2_, t_);
  auto& ps = params_.all();
  for (size_t k = 0; k < ps.size(); ++k) {
    const Matrix gk = ps[k]->grad * grad_scale;
    m1_[k] = beta1_ * m1_[k] + (1 - beta1_) * gk;
    m2_[k] = beta2_ * m2_[k] + (1 - beta2_) * gk.cwiseProduct(gk);
    ps[k]->value.array() -= lr * (m1_[k].array() / bc1) / ((m2_[k].array() / bc2).sqrt() + eps_);
  }
}

Var Graph::push(Matrix value, bool requires_grad, std::function<void(Graph&)> bw) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(Matrix v, bool requires_grad) { return push(std::move(v), requires_grad); }

Var Graph::param(Parameter& p) {
  Node n;
  n.ref = &p.value;
  n.requires_grad = track_params_;
  n.param = track_params_ ? &p : nullptr;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Graph::value(Var v) const { return val(v.id); }

Matrix Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(val(v.id).rows(), val(v.id).cols());
  return n.grad;
}

Matrix& Graph::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(val(id).rows(), val(id).cols());
  return n.grad;
}

bool Graph::any_grad(std::initializer_list<Var> vs) const {
  for (Var v : vs)
    if (nodes_[v.id].requires_grad) return true;
  return false;
}

void Graph::backward(Var out) {
  if (val(out.id).size() != 1) throw ShapeError("backward: output must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_ref(out.id).setOnes();
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this);
    if (n.param) n.param->grad += n.grad;
  }
}

namespace {

void check_same(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

}  // namespace

Var Graph::matmul(Var a, Var b) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.cols() != B.rows()) throw ShapeError("matmul: inner dimensions differ");
  const int self = static_cast<int>(nodes_.size());
  return push(A * B, any_grad({a, b}), [a, b, self](Graph& g) {
    const Matrix& G = g.nodes_[self].grad;
    if (g.nodes_[a.id].requires_grad) g.grad_ref(a.id).noalias() += G * g.val(b.id).transpose();
    if (g.nodes_[b.id].requires_grad) g.grad_ref(b.id).noalias() += g.val(a.id).transpose() * G;
  });
}

Var Graph::add(Var a, Var b) {
  check_same(val(a.id), val(b.id), "add");
  const int self = static_cast<int>(nodes_.size());
  return push(val(a.id) + val(b.id), any_grad({a, b}), [a, b, self](Graph& g) {
    const Matrix& G = g.nodes_[self].grad;
    if (g.nodes_[a.id].requires_grad) g.grad_ref(a.id) += G;
    if (g.nodes_[b.id].requires_grad) g.grad_ref(b.id) += G;
  });
}

Var Graph::add_row(Var a, Var row) {
  const Matrix& A = val(a.id);
  const Matrix& R = val(row.id);
  if (R.rows() != 1 || R.cols() != A.cols()) throw ShapeError("add_row: row vector width mismatch");
  const int self = static_cast<int>(nodes_.size());
  Matrix out = A.rowwise() + R.row(0);
  return push(std::move(out), any_grad({a, row}), [a, row, self](Graph& g) {
    const Matrix& G = g.nodes_[self].grad;
    if (g.nodes_[a.id].requires_grad) g.grad_ref(a.id) += G;
    if (g.nodes_[row.id].requires_grad) g.grad_ref(row.id) += G.colwise().sum();
  });
}

Var Graph::scale(Var a, double s) {
  const int self = static_cast<int>(nodes_.size());
  return push(val(a.id) * s, any_grad({a}),
              [a, s, self](Graph& g) { g.grad_ref(a.id) += g.nodes_[self].grad * s; });
}

Var Graph::gelu(Var a) {
  const Matrix& X = val(a.id);
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  Matrix out = X.unaryExpr([inv_sqrt2](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), any_grad({a}), [a, self, inv_sqrt2](Graph& g) {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix d = g.val(a.id).unaryExpr([&](double x) {
      return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
    });
    g.grad_ref(a.id) += g.nodes_[self].grad.cwiseProduct(d);
  });
}

Var Graph::tanh(Var a) {
  Matrix out = val(a.id).array().tanh().matrix();
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), any_grad({a}), [a, self](Graph& g) {
    const Matrix& Y = g.val(self);
    g.grad_ref(a.id).array() += g.nodes_[self].grad.array() * (1.0 - Y.array().square());
  });
}

Var Graph::layer_norm(Var a, Var gamma, Var beta, double eps) {
  const Matrix& X = val(a.id);
  const Matrix& Gm = val(gamma.id);
  const Matrix& Bt = val(beta.id);
  if (Gm.rows() != 1 || Gm.cols() != X.cols() || Bt.rows() != 1 || Bt.cols() != X.cols())
    throw ShapeError("layer_norm: gamma/beta width mismatch");
  const Eigen::Index n = X.cols();
  auto xhat = std::make_shared<Matrix>(X.rows(), n);
  auto inv_sigma = std::make_shared<Vector>(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().mean();
    (*inv_sigma)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (X.row(r).array() - mu) * (*inv_sigma)(r);
  }
  Matrix out = (xhat->array().rowwise() * Gm.row(0).array()).rowwise() + Bt.row(0).array();
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), any_grad({a, gamma, beta}),
              [a, gamma, beta, self, xhat, inv_sigma](Graph& g) {
                const Matrix& G = g.nodes_[self].grad;
                if (g.nodes_[gamma.id].requires_grad)
                  g.grad_ref(gamma.id) += G.cwiseProduct(*xhat).colwise().sum();
                if (g.nodes_[beta.id].requires_grad) g.grad_ref(beta.id) += G.colwise().sum();
                if (g.nodes_[a.id].requires_grad) {
                  const RowVector gm = g.val(gamma.id).row(0);
                  Matrix& GA = g.grad_ref(a.id);
                  for (Eigen::Index r = 0; r < G.rows(); ++r) {
                    const RowVector dxhat = G.row(r).cwiseProduct(gm);
                    const double m1 = dxhat.mean();
                    const double m2 = dxhat.cwiseProduct(xhat->row(r)).mean();
                    GA.row(r) += (*inv_sigma)(r) *
                                 (dxhat.array() - m1 - xhat->row(r).array() * m2).matrix();
                  }
                }
              });
}

Var Graph::normalize_cols(Var a, const RowVector& shift, const RowVector& inv_scale) {
  const Matrix& X = val(a.id);
  if (shift.size() != X.cols() || inv_scale.size() != X.cols())
    throw ShapeError("normalize_cols: statistics width mismatch");
  Matrix out = (X.rowwise() - shift).array().rowwise() * inv_scale.array();
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), any_grad({a}), [a, self, inv_scale](Graph& g) {
    g.grad_ref(a.id).array() += g.nodes_[self].grad.array().rowwise() * inv_scale.array();
  });
}

Var Graph::attention(Var q, Var k, Var v, int heads, bool causal) {
  const Matrix& Q = val(q.id);
  const Matrix& K = val(k.id);
  const Matrix& V = val(v.id);
  if (Q.cols() != K.cols() || K.cols() != V.cols() || K.rows() != V.rows())
    throw ShapeError("attention: q/k/v shapes incompatible");
  if (heads < 1 || Q.cols() % heads != 0) throw ShapeError("attention: width not divisible by heads");
  if (causal && Q.rows() > K.rows()) throw ShapeError("attention: causal needs Tq <= Tk");
  const Eigen::Index tq = Q.rows(), tk = K.rows(), dk = Q.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  auto probs = std::make_shared<std::vector<Matrix>>(heads);
  Matrix out(tq, Q.cols());
  for (int h = 0; h < heads; ++h) {
    Matrix s = Q.middleCols(h * dk, dk) * K.middleCols(h * dk, dk).transpose() * inv_sqrt;
    for (Eigen::Index i = 0; i < tq; ++i) {
      const Eigen::Index limit = causal ? i + 1 : tk;
      const double mx = s.row(i).head(limit).maxCoeff();
      double sum = 0;
      for (Eigen::Index j = 0; j < tk; ++j) {
        const double e = j < limit ? std::exp(s(i, j) - mx) : 0.0;
        s(i, j) = e;
        sum += e;
      }
      s.row(i) /= sum;
    }
    out.middleCols(h * dk, dk).noalias() = s * V.middleCols(h * dk, dk);
    (*probs)[h] = std::move(s);
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), any_grad({q, k, v}),
              [q, k, v, heads, dk, inv_sqrt, probs, self](Graph& g) {
                const Matrix& G = g.nodes_[self].grad;
                const bool gq = g.nodes_[q.id].requires_grad, gk = g.nodes_[k.id].requires_grad,
                           gv = g.nodes_[v.id].requires_grad;
                for (int h = 0; h < heads; ++h) {
                  const Matrix& P = (*probs)[h];
                  const auto Gh = G.middleCols(h * dk, dk);
                  if (gv) g.grad_ref(v.id).middleCols(h * dk, dk).noalias() += P.transpose() * Gh;
                  if (!gq && !gk) continue;
                  Matrix dP = Gh * g.val(v.id).middleCols(h * dk, dk).transpose();
                  const Vector rowdot = dP.cwiseProduct(P).rowwise().sum();
                  Matrix dS = P.cwiseProduct(dP.colwise() - rowdot) * inv_sqrt;
                  if (gq)
                    g.grad_ref(q.id).middleCols(h * dk, dk).noalias() +=
                        dS * g.val(k.id).middleCols(h * dk, dk);
                  if (gk)
                    g.grad_ref(k.id).middleCols(h * dk, dk).noalias() +=
                        dS.transpose() * g.val(q.id).middleCols(h * dk, dk);
                }
              });
}

Var Graph::embedding(Var table, const std::vector<int>& ids) {
  const Matrix& T = val(table.id);
  Matrix out(static_cast<Eigen::Index>(ids.size()), T.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= T.rows()) throw ShapeError("embedding: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = T.row(ids[i]);
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), any_grad({table}), [table, ids, self](Graph& g) {
    const Matrix& G = g.nodes_[self].grad;
    Matrix& GT = g.grad_ref(table.id);
    for (size_t i = 0; i < ids.size(); ++i) GT.row(ids[i]) += G.row(static_cast<Eigen::Index>(i));
  });
}

Var Graph::stack_frames2(Var a) {
  const Matrix& X = val(a.id);
  const Eigen::Index t = X.rows(), f = X.cols(), t2 = (t + 1) / 2;
  if (t == 0) throw ShapeError("stack_frames2: empty input");
  Matrix out(t2, 2 * f);
  for (Eigen::Index r = 0; r < t2; ++r) {
    out.row(r).head(f) = X.row(2 * r);
    out.row(r).tail(f) = X.row(std::min(2 * r + 1, t - 1));
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), any_grad({a}), [a, self, t, f, t2](Graph& g) {
    const Matrix& G = g.nodes_[self].grad;
    Matrix& GA = g.grad_ref(a.id);
    for (Eigen::Index r = 0; r < t2; ++r) {
      GA.row(2 * r) += G.row(r).head(f);
      GA.row(std::min(2 * r + 1, t - 1)) += G.row(r).tail(f);
    }
  });
}

Var Graph::dropout(Var a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw ParameterError("dropout: p must be < 1");
  const Matrix& X = val(a.id);
  auto mask = std::make_shared<Matrix>(X.rows(), X.cols());
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask->size(); ++i) mask->data()[i] = rng.uniform() < p ? 0.0 : keep;
  const int self = static_cast<int>(nodes_.size());
  return push(X.cwiseProduct(*mask), any_grad({a}), [a, self, mask](Graph& g) {
    g.grad_ref(a.id) += g.nodes_[self].grad.cwiseProduct(*mask);
  });
}

Var Graph::mean_rows(Var a) {
  const Matrix& X = val(a.id);
  if (X.rows() == 0) throw ShapeError("mean_rows: empty input");
  const int self = static_cast<int>(nodes_.size());
  const double inv = 1.0 / static_cast<double>(X.rows());
  return push(X.colwise().mean(), any_grad({a}), [a, self, inv](Graph& g) {
    g.grad_ref(a.id).rowwise() += g.nodes_[self].grad.row(0) * inv;
  });
}

Var Graph::std_rows(Var a, double eps) {
  const Matrix& X = val(a.id);
  if (X.rows() == 0) throw ShapeError("std_rows: empty input");
  const RowVector mu = X.colwise().mean();
  auto centered = std::make_shared<Matrix>(X.rowwise() - mu);
  RowVector sd = (centered->array().square().colwise().mean() + eps).sqrt().matrix();
  const int self = static_cast<int>(nodes_.size());
  const double inv_t = 1.0 / static_cast<double>(X.rows());
  return push(sd, any_grad({a}), [a, self, centered, inv_t](Graph& g) {
    const RowVector coef = g.nodes_[self].grad.row(0).cwiseQuotient(g.val(self).row(0)) * inv_t;
    g.grad_ref(a.id).array() += centered->array().rowwise() * coef.array();
  });
}

Var Graph::concat_cols(Var a, Var b) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.rows() != B.rows()) throw ShapeError("concat_cols: row counts differ");
  Matrix out(A.rows(), A.cols() + B.cols());
  out << A, B;
  const int self = static_cast<int>(nodes_.size());
  const Eigen::Index ca = A.cols(), cb = B.cols();
  return push(std::move(out), any_grad({a, b}), [a, b, self, ca, cb](Graph& g) {
    const Matrix& G = g.nodes_[self].grad;
    if (g.nodes_[a.id].requires_grad) g.grad_ref(a.id) += G.leftCols(ca);
    if (g.nodes_[b.id].requires_grad) g.grad_ref(b.id) += G.rightCols(cb);
  });
}

Var Graph::cross_entropy(Var logits, const std::vector<int>& targets,
                         const std::vector<uint8_t>& mask) {
  const Matrix& L = val(logits.id);
  if (static_cast<Eigen::Index>(targets.size()) != L.rows() || mask.size() != targets.size())
    throw ShapeError("cross_entropy: targets/mask must have one entry per row");
  int count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  auto probs = std::make_shared<Matrix>(Matrix::Zero(L.rows(), L.cols()));
  double loss = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || targets[i] >= L.cols()) throw ShapeError("cross_entropy: target out of range");
    const double mx = L.row(i).maxCoeff();
    const RowVector e = (L.row(i).array() - mx).exp().matrix();
    const double sum = e.sum();
    probs->row(i) = e / sum;
    loss += -(L(i, targets[i]) - mx - std::log(sum));
  }
  if (count > 0) loss /= count;
  Matrix out(1, 1);
  out(0, 0) = loss;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), any_grad({logits}) && count > 0,
              [logits, targets, mask, probs, count, self](Graph& g) {
                const double go = g.nodes_[self].grad(0, 0) / count;
                Matrix& GL = g.grad_ref(logits.id);
                for (Eigen::Index i = 0; i < GL.rows(); ++i) {
                  if (!mask[i]) continue;
                  GL.row(i) += probs->row(i) * go;
                  GL(i, targets[i]) -= go;
                }
              });
}

}  // namespace ghostvec::ad
