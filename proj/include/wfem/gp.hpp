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

#ifndef WFEM_GP_HPP_
#define WFEM_GP_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "wfem/dataset.hpp"
#include "wfem/mlp.hpp"
#include "wfem/tape.hpp"

namespace wfem {

/// Network architecture plus Gaussian likelihood. The kernel is
/// k(x,x') = 1/2 exp(-||phi(x) - phi(x')||^2) with phi the feature net, so
/// k(x,x) = 1/2 identically; the mean function is the mean net.
struct ModelConfig {
  MlpSpec mean_net{1, {32, 32, 32, 32}, 1};
  MlpSpec feature_net{1, {32, 32, 32, 32}, 2};
  double noise_variance = 0.01;  // sigma^2 of the observation noise

  ParamLayoutPtr make_layout() const {
    return ParamLayout::make(mean_net, feature_net);
  }
};

/// Diagonal-jitter escalation policy for positive-definite factorizations.
struct JitterPolicy {
  double initial = 1e-8;
  double max = 1e-4;
  double factor = 10.0;
};

/// Smallest jitter from the policy for which A + jitter*I admits a Cholesky
/// factorization. Throws IllConditionedError when even `max` fails.
double choose_jitter(const Eigen::MatrixXd& a, const JitterPolicy& policy = {});

/// Factors A + jitter*I, escalating jitter per policy.
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd a,
                                                 const JitterPolicy& policy = {},
                                                 double* jitter_used = nullptr);

double kernel_eval(const HyperParams& params, const ModelConfig& model,
                   const Eigen::VectorXd& x, const Eigen::VectorXd& x2);

/// Kernel matrix K(X) of the deep kernel; rows of `inputs` are points.
Eigen::MatrixXd kernel_matrix(const HyperParams& params, const ModelConfig& model,
                              const Eigen::MatrixXd& inputs);

/// Prior mean vector and covariance matrix at the given inputs.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> prior_moments(
    const HyperParams& params, const ModelConfig& model,
    const Eigen::MatrixXd& inputs);

/// Closed-form GP posterior at one query point. An empty dataset returns the
/// prior (mean-net value, 1/2).
GPPredictive posterior_predict(const HyperParams& params, const ModelConfig& model,
                               const TaskDataset& data, const Eigen::VectorXd& x);

/// Batch variant sharing one factorization across query rows.
std::vector<GPPredictive> posterior_predict_batch(const HyperParams& params,
                                                  const ModelConfig& model,
                                                  const TaskDataset& data,
                                                  const Eigen::MatrixXd& queries);

/// Log marginal likelihood ln p(y|X) of a regression task, via Cholesky.
double log_marginal_likelihood(const HyperParams& params, const ModelConfig& model,
                               const TaskDataset& data);

/// Records the same quantity on a tape so its theta-gradient is available.
ad::Var evidence_on_tape(ad::Tape& tape, const HyperParams& params,
                         const ModelConfig& model, const TaskDataset& data);

}  // namespace wfem

#endif  // WFEM_GP_HPP_
