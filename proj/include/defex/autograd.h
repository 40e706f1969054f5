// Copyright 2026 The defex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation of one forward pass. Parameters live
// outside the tape; their gradients are accumulated inside it, so a frozen
// model can be shared read-only between tapes. A tape created with
// record=false evaluates values only.

#ifndef DEFEX_AUTOGRAD_H_
#define DEFEX_AUTOGRAD_H_

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace defex::ad {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
};

class Tape;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::function<void()> backward;
  Tape* tape = nullptr;
};

class Var {
 public:
  Var() = default;
  explicit Var(Node* node) : node_(node) {}

  const Matrix& value() const { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  Node* node() const { return node_; }
  Tape& tape() const { return *node_->tape; }

 private:
  Node* node_ = nullptr;
};

class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var Constant(Matrix value);
  // One node per parameter per tape; repeated calls return the same node.
  Var Param(const Parameter& p);
  // Rows of an embedding table; the backward pass scatters into the
  // table's gradient.
  Var Embed(const Parameter& table, std::span<const int> ids);

  // Seeds d(root)/d(root) = 1 and propagates. root must be 1x1.
  void Backward(Var root);

  // Accumulated gradient for p, or nullptr if p took no part in the pass.
  const Matrix* Gradient(const Parameter& p) const;

  // Op plumbing: a new node whose gradient is tracked iff any input's is.
  Var Make(Matrix value, bool requires_grad);

 private:
  Matrix& TableGradient(const Parameter& table);

  bool record_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::unordered_map<const Parameter*, Node*> param_nodes_;
  std::unordered_map<const Parameter*, Matrix> grads_;
};

// a (n x k) * b (k x m)
Var MatMul(Var a, Var b);
// a (n x k) * b^T where b is (m x k)
Var MatMulTransposed(Var a, Var b);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
// Adds a 1 x m row to every row of a.
Var AddRow(Var a, Var row);
Var Scale(Var a, double s);
Var AddScalar(Var a, double s);
// tanh approximation of the Gaussian error linear unit.
Var Gelu(Var a);
Var SoftmaxRows(Var a);
Var LayerNorm(Var x, Var gain, Var bias, double eps = 1e-5);
Var SliceCols(Var a, Eigen::Index begin, Eigen::Index count);
Var ConcatCols(std::span<const Var> parts);
// Mean of rows [begin, end) as a 1 x m row.
Var MeanRows(Var a, Eigen::Index begin, Eigen::Index end);
// Cosine similarity of two equal-length rows as a 1x1 value. Throws
// kDegenerate if either has zero norm.
Var Cosine(Var u, Var v);
// Elementwise max(0, x); the sub-gradient at 0 is taken as 0.
Var Relu(Var a);
// Sum of 1x1 values.
Var SumScalars(std::span<const Var> terms);

}  // namespace defex::ad

#endif  // DEFEX_AUTOGRAD_H_
