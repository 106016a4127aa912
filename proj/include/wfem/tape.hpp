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

#ifndef WFEM_TAPE_HPP_
#define WFEM_TAPE_HPP_

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "wfem/errors.hpp"
#include "wfem/mlp.hpp"

namespace wfem::ad {

/// Handle to a node on a Tape. Scalars are 1x1 matrices.
struct Var {
  int id = -1;
};

/// Reverse-mode tape over dense matrix operations. A Tape records a single
/// forward evaluation; gradient() then propagates adjoints back to every
/// parameter leaf and scatters them into a flat vector aligned with the
/// HyperParams the leaves were created from.
///
/// The matrix-factorization nodes (cholesky, triangular solves,
/// log-determinant) are what make the GP evidence differentiable in one
/// reverse sweep. A Tape is single-owner: record and differentiate from one
/// thread; independent tapes may run concurrently.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves ----
  Var constant(Eigen::MatrixXd value);
  Var scalar_constant(double value);
  /// View of values[offset, offset+rows*cols) reshaped column-major.
  /// Gradients of all leaves sharing an offset range accumulate.
  Var param(const HyperParams& params, int offset, int rows, int cols);
  /// The whole flat vector as an (n, 1) leaf (used by the hyper-prior term).
  Var param_vector(const HyperParams& params);

  // ---- algebra ----
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var scale(Var a, double s);
  Var add_const(Var a, double c);        // elementwise
  Var add_diag(Var a, double c);         // square matrices
  Var add_row(Var a, Var row);           // (M x C) + broadcast (1 x C)
  Var cmul(Var a, Var b);                // elementwise product
  Var transpose(Var a);

  // ---- elementwise nonlinearities ----
  Var tanh(Var a);
  Var exp(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var sqrt(Var a);

  // ---- geometry ----
  /// S_ij = ||row_i(A) - row_j(A)||^2, (M x p) -> (M x M).
  Var pairwise_sqdist(Var a);
  /// S_ij = ||row_i(A) - row_j(B)||^2, (M x p),(Q x p) -> (M x Q).
  Var cross_sqdist(Var a, Var b);

  // ---- factorization ----
  /// Lower Cholesky factor of an SPD matrix. Throws IllConditionedError if
  /// the factorization fails (callers pre-condition with jitter).
  Var cholesky(Var a);
  Var solve_lower(Var chol, Var b);       // L x = b
  Var solve_lower_t(Var chol, Var b);     // L^T x = b
  Var logdet_chol(Var chol);              // 2 sum log diag(L)

  // ---- reductions ----
  Var dot(Var a, Var b);                  // column vectors -> scalar
  Var sum(Var a);                         // sum of all entries -> scalar

  // ---- access ----
  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Reverse sweep from a scalar node. Returns d(output)/d(theta) as a flat
  /// vector of length n_params. Leaves the tape intact (grads are reset on
  /// each call), so several outputs can be differentiated from one tape.
  Eigen::VectorXd gradient(Var output, int n_params);

 private:
  enum class Op {
    kConstant, kParam, kMatMul, kAdd, kSub, kNeg, kScale, kAddConst,
    kAddDiag, kAddRow, kCMul, kTranspose, kTanh, kExp, kSigmoid, kSoftplus,
    kSqrt, kPairwiseSqDist, kCrossSqDist, kCholesky, kSolveLower,
    kSolveLowerT, kLogDetChol, kDot, kSum,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double payload = 0.0;
    int param_offset = -1;
    bool needs_grad = false;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;  // allocated lazily during the reverse sweep
  };

  Var push(Node node, const char* what);
  const Node& node(Var v) const { return nodes_[v.id]; }
  void accumulate(int id, const Eigen::MatrixXd& g);
  bool wants(int id) const { return id >= 0 && nodes_[id].needs_grad; }

  std::vector<Node> nodes_;
};

struct GradResult {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// Records `build` on a fresh tape and differentiates the scalar it returns
/// with respect to `params`.
GradResult grad_scalar(const HyperParams& params,
                       const std::function<Var(Tape&)>& build);

/// Differentiable MLP forward pass; rows of `inputs` are input vectors.
Var tape_mlp_forward(Tape& tape, const HyperParams& params, Block block,
                     const Eigen::MatrixXd& inputs);

}  // namespace wfem::ad

#endif  // WFEM_TAPE_HPP_
