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

#include "defex/autograd.h"

#include <cmath>

#include "defex/error.h"

namespace defex::ad {
namespace {

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

bool Tracks(Var v) { return v.node()->requires_grad; }

void CheckSameShape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    Fail(ErrorKind::kInternal, std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var Tape::Make(Matrix value, bool requires_grad) {
  auto node = std::make_unique<Node>();
  node->requires_grad = record_ && requires_grad;
  if (node->requires_grad) node->grad = Matrix::Zero(value.rows(), value.cols());
  node->value = std::move(value);
  node->tape = this;
  nodes_.push_back(std::move(node));
  return Var(nodes_.back().get());
}

Var Tape::Constant(Matrix value) { return Make(std::move(value), false); }

Var Tape::Param(const Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(it->second);
  Var v = Make(p.value, true);
  param_nodes_.emplace(&p, v.node());
  return v;
}

Matrix& Tape::TableGradient(const Parameter& table) {
  auto it = grads_.find(&table);
  if (it == grads_.end()) {
    it = grads_.emplace(&table, Matrix::Zero(table.value.rows(), table.value.cols()))
             .first;
  }
  return it->second;
}

Var Tape::Embed(const Parameter& table, std::span<const int> ids) {
  Matrix rows(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.value.rows()) {
      Fail(ErrorKind::kInternal, "embedding id out of range");
    }
    rows.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
  }
  Var out = Make(std::move(rows), true);
  if (out.node()->requires_grad) {
    Node* o = out.node();
    std::vector<int> id_copy(ids.begin(), ids.end());
    Matrix* g = &TableGradient(table);
    o->backward = [o, g, id_copy = std::move(id_copy)] {
      for (size_t i = 0; i < id_copy.size(); ++i) {
        g->row(id_copy[i]) += o->grad.row(static_cast<Eigen::Index>(i));
      }
    };
  }
  return out;
}

void Tape::Backward(Var root) {
  if (!record_) Fail(ErrorKind::kInternal, "backward on a non-recording tape");
  if (root.rows() != 1 || root.cols() != 1) {
    Fail(ErrorKind::kInternal, "backward root must be a scalar");
  }
  if (!root.node()->requires_grad) return;
  root.node()->grad(0, 0) += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (n->requires_grad && n->backward) n->backward();
  }
  for (const auto& [param, node] : param_nodes_) {
    Matrix& g = TableGradient(*param);
    g += node->grad;
  }
}

const Matrix* Tape::Gradient(const Parameter& p) const {
  auto it = grads_.find(&p);
  return it == grads_.end() ? nullptr : &it->second;
}

Var MatMul(Var a, Var b) {
  if (a.cols() != b.rows()) Fail(ErrorKind::kInternal, "MatMul: shape mismatch");
  Var out = a.tape().Make(a.value() * b.value(), Tracks(a) || Tracks(b));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    o->backward = [o, an, bn] {
      if (an->requires_grad) an->grad.noalias() += o->grad * bn->value.transpose();
      if (bn->requires_grad) bn->grad.noalias() += an->value.transpose() * o->grad;
    };
  }
  return out;
}

Var MatMulTransposed(Var a, Var b) {
  if (a.cols() != b.cols()) {
    Fail(ErrorKind::kInternal, "MatMulTransposed: shape mismatch");
  }
  Var out = a.tape().Make(a.value() * b.value().transpose(), Tracks(a) || Tracks(b));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    o->backward = [o, an, bn] {
      if (an->requires_grad) an->grad.noalias() += o->grad * bn->value;
      if (bn->requires_grad) bn->grad.noalias() += o->grad.transpose() * an->value;
    };
  }
  return out;
}

Var Add(Var a, Var b) {
  CheckSameShape(a, b, "Add");
  Var out = a.tape().Make(a.value() + b.value(), Tracks(a) || Tracks(b));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    o->backward = [o, an, bn] {
      if (an->requires_grad) an->grad += o->grad;
      if (bn->requires_grad) bn->grad += o->grad;
    };
  }
  return out;
}

Var Sub(Var a, Var b) {
  CheckSameShape(a, b, "Sub");
  Var out = a.tape().Make(a.value() - b.value(), Tracks(a) || Tracks(b));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    o->backward = [o, an, bn] {
      if (an->requires_grad) an->grad += o->grad;
      if (bn->requires_grad) bn->grad -= o->grad;
    };
  }
  return out;
}

Var AddRow(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    Fail(ErrorKind::kInternal, "AddRow: shape mismatch");
  }
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  Var out = a.tape().Make(std::move(v), Tracks(a) || Tracks(row));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node(), *rn = row.node();
    o->backward = [o, an, rn] {
      if (an->requires_grad) an->grad += o->grad;
      if (rn->requires_grad) rn->grad += o->grad.colwise().sum();
    };
  }
  return out;
}

Var Scale(Var a, double s) {
  Var out = a.tape().Make(a.value() * s, Tracks(a));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node();
    o->backward = [o, an, s] { an->grad += o->grad * s; };
  }
  return out;
}

Var AddScalar(Var a, double s) {
  Matrix v = a.value().array() + s;
  Var out = a.tape().Make(std::move(v), Tracks(a));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node();
    o->backward = [o, an] { an->grad += o->grad; };
  }
  return out;
}

Var Gelu(Var a) {
  const auto& x = a.value().array();
  Eigen::ArrayXXd inner = kGeluScale * (x + kGeluCubic * x.cube());
  Eigen::ArrayXXd t = inner.tanh();
  Matrix v = (0.5 * x * (1.0 + t)).matrix();
  Var out = a.tape().Make(std::move(v), Tracks(a));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node();
    o->backward = [o, an, t = std::move(t)] {
      const auto& x = an->value.array();
      Eigen::ArrayXXd d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) *
                                                kGeluScale *
                                                (1.0 + 3.0 * kGeluCubic * x.square());
      an->grad.array() += o->grad.array() * d;
    };
  }
  return out;
}

Var SoftmaxRows(Var a) {
  Matrix v = a.value();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double m = v.row(r).maxCoeff();
    v.row(r) = (v.row(r).array() - m).exp();
    v.row(r) /= v.row(r).sum();
  }
  Var out = a.tape().Make(std::move(v), Tracks(a));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node();
    o->backward = [o, an] {
      for (Eigen::Index r = 0; r < o->value.rows(); ++r) {
        const double dot = o->grad.row(r).dot(o->value.row(r));
        an->grad.row(r).array() +=
            o->value.row(r).array() * (o->grad.row(r).array() - dot);
      }
    };
  }
  return out;
}

Var LayerNorm(Var x, Var gain, Var bias, double eps) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    Fail(ErrorKind::kInternal, "LayerNorm: shape mismatch");
  }
  Matrix normed(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.value().row(r).mean();
    const auto centered = x.value().row(r).array() - mean;
    const double var = centered.square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normed.row(r) = (centered * inv_std(r)).matrix();
  }
  Matrix v = normed;
  v.array().rowwise() *= gain.value().row(0).array();
  v.rowwise() += bias.value().row(0);
  Var out = x.tape().Make(std::move(v), Tracks(x) || Tracks(gain) || Tracks(bias));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *xn = x.node(), *gn = gain.node(), *bn = bias.node();
    o->backward = [o, xn, gn, bn, normed = std::move(normed),
                   inv_std = std::move(inv_std)] {
      if (gn->requires_grad) {
        gn->grad += (o->grad.array() * normed.array()).colwise().sum().matrix();
      }
      if (bn->requires_grad) bn->grad += o->grad.colwise().sum();
      if (xn->requires_grad) {
        for (Eigen::Index r = 0; r < o->grad.rows(); ++r) {
          Eigen::ArrayXd dxhat =
              (o->grad.row(r).array() * gn->value.row(0).array()).transpose();
          const Eigen::ArrayXd xhat = normed.row(r).array().transpose();
          const double mean_d = dxhat.mean();
          const double mean_dx = (dxhat * xhat).mean();
          xn->grad.row(r).array() +=
              (inv_std(r) * (dxhat - mean_d - xhat * mean_dx)).transpose();
        }
      }
    };
  }
  return out;
}

Var SliceCols(Var a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count <= 0 || begin + count > a.cols()) {
    Fail(ErrorKind::kInternal, "SliceCols: out of range");
  }
  Var out = a.tape().Make(a.value().middleCols(begin, count), Tracks(a));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node();
    o->backward = [o, an, begin, count] {
      an->grad.middleCols(begin, count) += o->grad;
    };
  }
  return out;
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) Fail(ErrorKind::kInternal, "ConcatCols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool tracks = false;
  for (const Var& p : parts) {
    if (p.rows() != rows) Fail(ErrorKind::kInternal, "ConcatCols: row mismatch");
    cols += p.cols();
    tracks = tracks || Tracks(p);
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  Var out = parts[0].tape().Make(std::move(v), tracks);
  if (out.node()->requires_grad) {
    Node* o = out.node();
    std::vector<Node*> inputs;
    for (const Var& p : parts) inputs.push_back(p.node());
    o->backward = [o, inputs = std::move(inputs)] {
      Eigen::Index at = 0;
      for (Node* in : inputs) {
        const Eigen::Index c = in->value.cols();
        if (in->requires_grad) in->grad += o->grad.middleCols(at, c);
        at += c;
      }
    };
  }
  return out;
}

Var MeanRows(Var a, Eigen::Index begin, Eigen::Index end) {
  if (begin < 0 || end <= begin || end > a.rows()) {
    Fail(ErrorKind::kArgument, "MeanRows: empty or out-of-range row span");
  }
  const double inv = 1.0 / static_cast<double>(end - begin);
  Matrix v = a.value().middleRows(begin, end - begin).colwise().sum() * inv;
  Var out = a.tape().Make(std::move(v), Tracks(a));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node();
    o->backward = [o, an, begin, end, inv] {
      for (Eigen::Index r = begin; r < end; ++r) an->grad.row(r) += o->grad.row(0) * inv;
    };
  }
  return out;
}

Var Cosine(Var u, Var v) {
  if (u.rows() != 1 || v.rows() != 1 || u.cols() != v.cols()) {
    Fail(ErrorKind::kInternal, "Cosine: expects two equal-length rows");
  }
  const double nu = u.value().norm();
  const double nv = v.value().norm();
  if (nu == 0.0 || nv == 0.0) {
    Fail(ErrorKind::kDegenerate, "cosine of a zero vector");
  }
  const double c = u.value().row(0).dot(v.value().row(0)) / (nu * nv);
  Matrix out_v(1, 1);
  out_v(0, 0) = c;
  Var out = u.tape().Make(std::move(out_v), Tracks(u) || Tracks(v));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *un = u.node(), *vn = v.node();
    o->backward = [o, un, vn, nu, nv, c] {
      const double g = o->grad(0, 0);
      if (un->requires_grad) {
        un->grad += g * (vn->value / (nu * nv) - c * un->value / (nu * nu));
      }
      if (vn->requires_grad) {
        vn->grad += g * (un->value / (nu * nv) - c * vn->value / (nv * nv));
      }
    };
  }
  return out;
}

Var Relu(Var a) {
  Matrix v = a.value().cwiseMax(0.0);
  Var out = a.tape().Make(std::move(v), Tracks(a));
  if (out.node()->requires_grad) {
    Node *o = out.node(), *an = a.node();
    o->backward = [o, an] {
      an->grad.array() += (an->value.array() > 0.0).select(o->grad.array(), 0.0);
    };
  }
  return out;
}

Var SumScalars(std::span<const Var> terms) {
  if (terms.empty()) Fail(ErrorKind::kInternal, "SumScalars: no terms");
  double total = 0.0;
  bool tracks = false;
  for (const Var& t : terms) {
    if (t.rows() != 1 || t.cols() != 1) {
      Fail(ErrorKind::kInternal, "SumScalars: terms must be 1x1");
    }
    total += t.scalar();
    tracks = tracks || Tracks(t);
  }
  Matrix v(1, 1);
  v(0, 0) = total;
  Var out = terms[0].tape().Make(std::move(v), tracks);
  if (out.node()->requires_grad) {
    Node* o = out.node();
    std::vector<Node*> inputs;
    for (const Var& t : terms) inputs.push_back(t.node());
    o->backward = [o, inputs = std::move(inputs)] {
      for (Node* in : inputs) {
        if (in->requires_grad) in->grad(0, 0) += o->grad(0, 0);
      }
    };
  }
  return out;
}

}  // namespace defex::ad
