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

#ifndef GHOSTVEC_AUTODIFF_H_
#define GHOSTVEC_AUTODIFF_H_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ghostvec/common.h"

namespace ghostvec::ad {

// A named trainable tensor. `grad` accumulates across backward passes until
// zeroed by the optimizer.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Owns parameters with stable addresses, in registration order.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Matrix value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  std::vector<std::unique_ptr<Parameter>>& all() { return params_; }
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  size_t count() const;  // scalar parameter count
  void zero_grad();
  // SHA-256 over names, shapes and raw values.
  std::string checksum() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Adam with bias correction. Gradients are read from Parameter::grad.
class Adam {
 public:
  Adam(ParameterSet& params, double beta1 = 0.9, double beta2 = 0.98, double eps = 1e-9);
  void step(double lr, double grad_scale = 1.0);

 private:
  ParameterSet& params_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Matrix> m1_, m2_;
};

struct Var {
  int id = -1;
};

// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so
// backward() is a single reverse sweep.
class Graph {
 public:
  // With track_params=false, parameters enter as constants and no gradient
  // ever reaches Parameter::grad.
  explicit Graph(bool track_params = true) : track_params_(track_params) {}

  Var input(Matrix v, bool requires_grad = false);
  Var param(Parameter& p);

  const Matrix& value(Var v) const;
  // Zero matrix of the right shape if no gradient flowed to `v`.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Seeds d(out)/d(out) = 1 for a 1x1 output and propagates.
  void backward(Var out);

  // Ops. Shapes follow Eigen conventions; row vectors broadcast where noted.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // row: 1 x cols, broadcast over rows
  Var scale(Var a, double s);
  Var gelu(Var a);
  Var tanh(Var a);
  Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-5);
  // Column-wise (x - shift) * inv_scale with constant statistics.
  Var normalize_cols(Var a, const RowVector& shift, const RowVector& inv_scale);
  // Multi-head scaled dot-product attention; q: Tq x D, k/v: Tk x D.
  Var attention(Var q, Var k, Var v, int heads, bool causal);
  Var embedding(Var table, const std::vector<int>& ids);
  // Concatenates consecutive frame pairs: T x F -> ceil(T/2) x 2F. An odd
  // final frame is paired with itself.
  Var stack_frames2(Var a);
  Var dropout(Var a, double p, Rng& rng);
  Var mean_rows(Var a);                      // 1 x cols
  Var std_rows(Var a, double eps = 1e-5);    // 1 x cols, sqrt(var + eps)
  Var concat_cols(Var a, Var b);
  // Mean over masked rows of -log softmax(logits)[target]; 1 x 1.
  // An all-zero mask yields 0 with zero gradient.
  Var cross_entropy(Var logits, const std::vector<int>& targets,
                    const std::vector<uint8_t>& mask);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix own;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::function<void(Graph&)> backward;
  };

  Var push(Matrix value, bool requires_grad, std::function<void(Graph&)> bw = nullptr);
  Matrix& grad_ref(int id);
  const Matrix& val(int id) const { return nodes_[id].ref ? *nodes_[id].ref : nodes_[id].own; }
  bool any_grad(std::initializer_list<Var> vs) const;

  bool track_params_;
  std::vector<Node> nodes_;
};

}  // namespace ghostvec::ad

#endif  // GHOSTVEC_AUTODIFF_H_
