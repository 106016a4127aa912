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

#ifndef WFEM_GP_CLASSIFY_HPP_
#define WFEM_GP_CLASSIFY_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "wfem/gp.hpp"

namespace wfem {

double sigmoid(double x);
Eigen::VectorXd sigmoid(const Eigen::VectorXd& x);

struct LaplaceConfig {
  int max_iterations = 20;
  double tolerance = 1e-8;  // infinity norm of the stationarity residual
  int unroll = 10;          // fixed Newton count on the differentiable path
};

/// Newton mode of the centered latent posterior. The likelihood acts on
/// t = u + mean; the prior on u is N(0, K). `mode` stores u-hat and `w` the
/// logistic curvature sigma(t-hat)(1 - sigma(t-hat)).
struct LaplaceState {
  Eigen::VectorXd mode;
  Eigen::VectorXd w;
  bool converged = false;
  int iterations = 0;
};

struct ClassPredictConfig {
  int samples = 256;  // R, latent draws for the predictive integral
  std::uint64_t seed = 0;
  LaplaceConfig laplace;
};

/// Newton mode finding on an explicit kernel matrix (unit-testable with stub
/// kernels). Labels must be 0/1.
LaplaceState laplace_newton(const Eigen::MatrixXd& kernel,
                            const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& labels,
                            const LaplaceConfig& cfg = {});

LaplaceState laplace_mode(const HyperParams& params, const ModelConfig& model,
                          const TaskDataset& data, const LaplaceConfig& cfg = {});

/// Latent predictive moments at a query input given the converged mode.
GPPredictive latent_predict(const HyperParams& params, const ModelConfig& model,
                            const TaskDataset& data, const LaplaceState& state,
                            const Eigen::VectorXd& x);

std::vector<GPPredictive> latent_predict_batch(const HyperParams& params,
                                               const ModelConfig& model,
                                               const TaskDataset& data,
                                               const LaplaceState& state,
                                               const Eigen::MatrixXd& queries);

/// Monte-Carlo class probability: mean of sigma over R draws from the latent
/// predictive. Deterministic per cfg.seed.
double class_probability(const HyperParams& params, const ModelConfig& model,
                         const TaskDataset& data, const LaplaceState& state,
                         const Eigen::VectorXd& x, const ClassPredictConfig& cfg);

/// Same MC integral applied to precomputed latent moments.
double class_probability_from_moments(const GPPredictive& latent,
                                      int samples, std::uint64_t seed);

/// Laplace-approximate log marginal likelihood of a classification task,
/// evaluated through the fixed-unroll Newton recursion (identical arithmetic
/// to the differentiable path).
double approx_log_marginal(const HyperParams& params, const ModelConfig& model,
                           const TaskDataset& data, const LaplaceConfig& cfg = {});

/// Differentiable variant; `converged`, when given, reports whether the
/// unrolled recursion reached the stationarity tolerance.
ad::Var class_evidence_on_tape(ad::Tape& tape, const HyperParams& params,
                               const ModelConfig& model, const TaskDataset& data,
                               const LaplaceConfig& cfg = {},
                               bool* converged = nullptr);

}  // namespace wfem

#endif  // WFEM_GP_CLASSIFY_HPP_
