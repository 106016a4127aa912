/*
 * Copyright 2026 The wfem-gp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "wfem/tape.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>
#include <utility>

namespace wfem::ad {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

Var Tape::push(Node node, const char* what) {
  if (!node.value.allFinite()) {
    throw NumericError(std::string(what) + " produced a non-finite value",
                       static_cast<long>(nodes_.size()));
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Eigen::MatrixXd value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}

Var Tape::scalar_constant(double value) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var Tape::param(const HyperParams& params, int offset, int rows, int cols) {
  if (offset < 0 || offset + rows * cols > params.size()) {
    throw ShapeError("param: block range exceeds parameter vector");
  }
  Node n;
  n.op = Op::kParam;
  n.param_offset = offset;
  n.needs_grad = true;
  n.value = Eigen::Map<const Eigen::MatrixXd>(params.values.data() + offset,
                                              rows, cols);
  return push(std::move(n), "param");
}

Var Tape::param_vector(const HyperParams& params) {
  return param(params, 0, params.size(), 1);
}

Var Tape::matmul(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.value.cols() != nb.value.rows()) {
    throw ShapeError("matmul: inner dimensions disagree");
  }
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = na.value * nb.value;
  return push(std::move(n), "matmul");
}

namespace {
void require_same_shape(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                        const char* what) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ShapeError(std::string(what) + ": shapes disagree");
  }
}
}  // namespace

Var Tape::add(Var a, Var b) {
  require_same_shape(node(a).value, node(b).value, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value + node(b).value;
  return push(std::move(n), "add");
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(node(a).value, node(b).value, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value - node(b).value;
  return push(std::move(n), "sub");
}

Var Tape::neg(Var a) {
  Node n;
  n.op = Op::kNeg;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = -node(a).value;
  return push(std::move(n), "neg");
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.payload = s;
  n.needs_grad = node(a).needs_grad;
  n.value = s * node(a).value;
  return push(std::move(n), "scale");
}

Var Tape::add_const(Var a, double c) {
  Node n;
  n.op = Op::kAddConst;
  n.a = a.id;
  n.payload = c;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.array() + c;
  return push(std::move(n), "add_const");
}

Var Tape::add_diag(Var a, double c) {
  if (node(a).value.rows() != node(a).value.cols()) {
    throw ShapeError("add_diag: matrix must be square");
  }
  Node n;
  n.op = Op::kAddDiag;
  n.a = a.id;
  n.payload = c;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value;
  n.value.diagonal().array() += c;
  return push(std::move(n), "add_diag");
}

Var Tape::add_row(Var a, Var row) {
  const Node& na = node(a);
  const Node& nr = node(row);
  if (nr.value.rows() != 1 || nr.value.cols() != na.value.cols()) {
    throw ShapeError("add_row: row vector shape disagrees");
  }
  Node n;
  n.op = Op::kAddRow;
  n.a = a.id;
  n.b = row.id;
  n.needs_grad = na.needs_grad || nr.needs_grad;
  n.value = na.value.rowwise() + nr.value.row(0);
  return push(std::move(n), "add_row");
}

Var Tape::cmul(Var a, Var b) {
  require_same_shape(node(a).value, node(b).value, "cmul");
  Node n;
  n.op = Op::kCMul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = node(a).value.cwiseProduct(node(b).value);
  return push(std::move(n), "cmul");
}

Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::kTranspose;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.transpose();
  return push(std::move(n), "transpose");
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.array().tanh();
  return push(std::move(n), "tanh");
}

Var Tape::exp(Var a) {
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.array().exp();
  return push(std::move(n), "exp");
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.unaryExpr(&stable_sigmoid);
  return push(std::move(n), "sigmoid");
}

Var Tape::softplus(Var a) {
  Node n;
  n.op = Op::kSoftplus;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.unaryExpr(&stable_softplus);
  return push(std::move(n), "softplus");
}

Var Tape::sqrt(Var a) {
  Node n;
  n.op = Op::kSqrt;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = node(a).value.array().sqrt();
  return push(std::move(n), "sqrt");
}

Var Tape::pairwise_sqdist(Var a) {
  const Eigen::MatrixXd& x = node(a).value;
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Node n;
  n.op = Op::kPairwiseSqDist;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = (sq.replicate(1, x.rows()) + sq.transpose().replicate(x.rows(), 1) -
             2.0 * (x * x.transpose()))
                .cwiseMax(0.0);
  n.value.diagonal().setZero();
  return push(std::move(n), "pairwise_sqdist");
}

Var Tape::cross_sqdist(Var a, Var b) {
  const Eigen::MatrixXd& x = node(a).value;
  const Eigen::MatrixXd& y = node(b).value;
  if (x.cols() != y.cols()) {
    throw ShapeError("cross_sqdist: feature dimensions disagree");
  }
  Node n;
  n.op = Op::kCrossSqDist;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = (x.rowwise().squaredNorm().replicate(1, y.rows()) +
             y.rowwise().squaredNorm().transpose().replicate(x.rows(), 1) -
             2.0 * (x * y.transpose()))
                .cwiseMax(0.0);
  return push(std::move(n), "cross_sqdist");
}

Var Tape::cholesky(Var a) {
  const Eigen::MatrixXd& m = node(a).value;
  if (m.rows() != m.cols()) throw ShapeError("cholesky: matrix must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw IllConditionedError("cholesky: matrix is not positive definite");
  }
  Node n;
  n.op = Op::kCholesky;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  n.value = llt.matrixL();
  return push(std::move(n), "cholesky");
}

Var Tape::solve_lower(Var chol, Var b) {
  const Eigen::MatrixXd& l = node(chol).value;
  if (l.rows() != node(b).value.rows()) {
    throw ShapeError("solve_lower: dimensions disagree");
  }
  Node n;
  n.op = Op::kSolveLower;
  n.a = chol.id;
  n.b = b.id;
  n.needs_grad = node(chol).needs_grad || node(b).needs_grad;
  n.value = l.triangularView<Eigen::Lower>().solve(node(b).value);
  return push(std::move(n), "solve_lower");
}

Var Tape::solve_lower_t(Var chol, Var b) {
  const Eigen::MatrixXd& l = node(chol).value;
  if (l.rows() != node(b).value.rows()) {
    throw ShapeError("solve_lower_t: dimensions disagree");
  }
  Node n;
  n.op = Op::kSolveLowerT;
  n.a = chol.id;
  n.b = b.id;
  n.needs_grad = node(chol).needs_grad || node(b).needs_grad;
  n.value = l.triangularView<Eigen::Lower>().transpose().solve(node(b).value);
  return push(std::move(n), "solve_lower_t");
}

Var Tape::logdet_chol(Var chol) {
  Node n;
  n.op = Op::kLogDetChol;
  n.a = chol.id;
  n.needs_grad = node(chol).needs_grad;
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = 2.0 * node(chol).value.diagonal().array().log().sum();
  n.value = std::move(v);
  return push(std::move(n), "logdet_chol");
}

Var Tape::dot(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.value.cols() != 1 || nb.value.cols() != 1 ||
      na.value.rows() != nb.value.rows()) {
    throw ShapeError("dot: arguments must be equal-length column vectors");
  }
  Node n;
  n.op = Op::kDot;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = na.value.col(0).dot(nb.value.col(0));
  n.value = std::move(v);
  return push(std::move(n), "dot");
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.needs_grad = node(a).needs_grad;
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = node(a).value.sum();
  n.value = std::move(v);
  return push(std::move(n), "sum");
}

double Tape::scalar(Var v) const {
  const Eigen::MatrixXd& m = node(v).value;
  if (m.rows() != 1 || m.cols() != 1) {
    throw ShapeError("scalar: node is not 1x1");
  }
  return m(0, 0);
}

void Tape::accumulate(int id, const Eigen::MatrixXd& g) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Eigen::VectorXd Tape::gradient(Var output, int n_params) {
  const Eigen::MatrixXd& out = node(output).value;
  if (out.rows() != 1 || out.cols() != 1) {
    throw ShapeError("gradient: output must be a scalar node");
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);

  Eigen::MatrixXd seed(1, 1);
  seed(0, 0) = 1.0;
  nodes_[output.id].grad = seed;

  for (int i = output.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.needs_grad) continue;
    const Eigen::MatrixXd& g = n.grad;
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kMatMul:
        if (wants(n.a)) accumulate(n.a, g * nodes_[n.b].value.transpose());
        if (wants(n.b)) accumulate(n.b, nodes_[n.a].value.transpose() * g);
        break;
      case Op::kAdd:
        if (wants(n.a)) accumulate(n.a, g);
        if (wants(n.b)) accumulate(n.b, g);
        break;
      case Op::kSub:
        if (wants(n.a)) accumulate(n.a, g);
        if (wants(n.b)) accumulate(n.b, -g);
        break;
      case Op::kNeg:
        if (wants(n.a)) accumulate(n.a, -g);
        break;
      case Op::kScale:
        if (wants(n.a)) accumulate(n.a, n.payload * g);
        break;
      case Op::kAddConst:
      case Op::kAddDiag:
        if (wants(n.a)) accumulate(n.a, g);
        break;
      case Op::kAddRow:
        if (wants(n.a)) accumulate(n.a, g);
        if (wants(n.b)) accumulate(n.b, g.colwise().sum());
        break;
      case Op::kCMul:
        if (wants(n.a)) accumulate(n.a, g.cwiseProduct(nodes_[n.b].value));
        if (wants(n.b)) accumulate(n.b, g.cwiseProduct(nodes_[n.a].value));
        break;
      case Op::kTranspose:
        if (wants(n.a)) accumulate(n.a, g.transpose());
        break;
      case Op::kTanh:
        if (wants(n.a)) {
          accumulate(n.a, g.cwiseProduct(
                              (1.0 - n.value.array().square()).matrix()));
        }
        break;
      case Op::kExp:
        if (wants(n.a)) accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::kSigmoid:
        if (wants(n.a)) {
          accumulate(n.a, g.cwiseProduct(
                              (n.value.array() * (1.0 - n.value.array()))
                                  .matrix()));
        }
        break;
      case Op::kSoftplus:
        if (wants(n.a)) {
          accumulate(n.a, g.cwiseProduct(
                              nodes_[n.a].value.unaryExpr(&stable_sigmoid)));
        }
        break;
      case Op::kSqrt:
        if (wants(n.a)) {
          accumulate(n.a, g.cwiseQuotient(2.0 * n.value));
        }
        break;
      case Op::kPairwiseSqDist:
        if (wants(n.a)) {
          // adjoint of S_ij = ||a_i - a_j||^2:
          //   a_bar = 2 (diag(R 1) A - R A) with R = G + G^T
          const Eigen::MatrixXd& a = nodes_[n.a].value;
          const Eigen::MatrixXd r = g + g.transpose();
          accumulate(n.a, 2.0 * (r.rowwise().sum().asDiagonal() * a - r * a));
        }
        break;
      case Op::kCrossSqDist: {
        const Eigen::MatrixXd& a = nodes_[n.a].value;
        const Eigen::MatrixXd& b = nodes_[n.b].value;
        if (wants(n.a)) {
          accumulate(n.a,
                     2.0 * (g.rowwise().sum().asDiagonal() * a - g * b));
        }
        if (wants(n.b)) {
          accumulate(n.b, 2.0 * (g.colwise().sum().transpose().asDiagonal() * b -
                                 g.transpose() * a));
        }
        break;
      }
      case Op::kCholesky:
        if (wants(n.a)) {
          // Iain Murray's reverse-mode rule for A = L L^T:
          //   P = lower(L^T G) with the diagonal halved
          //   A_bar = (S + S^T) / 2,  S = L^-T P L^-1
          const Eigen::MatrixXd& l = n.value;
          Eigen::MatrixXd p =
              (l.transpose() * g).triangularView<Eigen::Lower>();
          p.diagonal() *= 0.5;
          Eigen::MatrixXd s = l.triangularView<Eigen::Lower>()
                                  .transpose()
                                  .solve(p);
          s = l.triangularView<Eigen::Lower>()
                  .transpose()
                  .solve(s.transpose())
                  .transpose();
          // s = L^-T P L^-1 at this point
          accumulate(n.a, 0.5 * (s + s.transpose()));
        }
        break;
      case Op::kSolveLower: {
        // x = L^-1 b:  b_bar = L^-T g,  L_bar = -tril(b_bar x^T)
        const Eigen::MatrixXd& l = nodes_[n.a].value;
        const Eigen::MatrixXd bbar =
            l.triangularView<Eigen::Lower>().transpose().solve(g);
        if (wants(n.b)) accumulate(n.b, bbar);
        if (wants(n.a)) {
          Eigen::MatrixXd lbar =
              (-(bbar * n.value.transpose())).triangularView<Eigen::Lower>();
          accumulate(n.a, lbar);
        }
        break;
      }
      case Op::kSolveLowerT: {
        // x = L^-T b:  b_bar = L^-1 g,  L_bar = -tril(x b_bar^T)
        const Eigen::MatrixXd& l = nodes_[n.a].value;
        const Eigen::MatrixXd bbar =
            l.triangularView<Eigen::Lower>().solve(g);
        if (wants(n.b)) accumulate(n.b, bbar);
        if (wants(n.a)) {
          Eigen::MatrixXd lbar =
              (-(n.value * bbar.transpose())).triangularView<Eigen::Lower>();
          accumulate(n.a, lbar);
        }
        break;
      }
      case Op::kLogDetChol:
        if (wants(n.a)) {
          const Eigen::MatrixXd& l = nodes_[n.a].value;
          Eigen::MatrixXd lbar = Eigen::MatrixXd::Zero(l.rows(), l.cols());
          lbar.diagonal() = 2.0 * g(0, 0) * l.diagonal().cwiseInverse();
          accumulate(n.a, lbar);
        }
        break;
      case Op::kDot:
        if (wants(n.a)) accumulate(n.a, g(0, 0) * nodes_[n.b].value);
        if (wants(n.b)) accumulate(n.b, g(0, 0) * nodes_[n.a].value);
        break;
      case Op::kSum:
        if (wants(n.a)) {
          accumulate(n.a, Eigen::MatrixXd::Constant(nodes_[n.a].value.rows(),
                                                    nodes_[n.a].value.cols(),
                                                    g(0, 0)));
        }
        break;
    }
  }

  Eigen::VectorXd flat = Eigen::VectorXd::Zero(n_params);
  for (int i = 0; i <= output.id; ++i) {
    const Node& n = nodes_[i];
    if (n.op != Op::kParam || n.grad.size() == 0) continue;
    const int len = static_cast<int>(n.value.size());
    if (n.param_offset + len > n_params) {
      throw ShapeError("gradient: parameter leaf exceeds n_params");
    }
    flat.segment(n.param_offset, len) +=
        Eigen::Map<const Eigen::VectorXd>(n.grad.data(), len);
  }
  return flat;
}

GradResult grad_scalar(const HyperParams& params,
                       const std::function<Var(Tape&)>& build) {
  Tape tape;
  Var out = build(tape);
  GradResult result;
  result.value = tape.scalar(out);
  result.grad = tape.gradient(out, params.size());
  return result;
}

Var tape_mlp_forward(Tape& tape, const HyperParams& params, Block block,
                     const Eigen::MatrixXd& inputs) {
  const MlpSpec& spec = params.layout->spec(block);
  if (inputs.cols() != spec.input_dim) {
    throw ShapeError("tape_mlp_forward: input dimension disagrees with spec");
  }
  Var h = tape.constant(inputs);
  detail::for_each_layer(
      *params.layout, block,
      [&](int w_off, int in, int out, int b_off, bool last) {
        Var w = tape.param(params, w_off, in, out);
        Var b = tape.param(params, b_off, 1, out);
        h = tape.add_row(tape.matmul(h, w), b);
        if (!last) h = tape.tanh(h);
      });
  return h;
}

}  // namespace wfem::ad
