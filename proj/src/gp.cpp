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

#include "wfem/gp.hpp"

#include <cmath>
#include <numbers>

namespace wfem {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}

double choose_jitter(const Eigen::MatrixXd& a, const JitterPolicy& policy) {
  Eigen::MatrixXd work = a;
  for (double jitter = policy.initial; jitter <= policy.max * (1.0 + 1e-12);
       jitter *= policy.factor) {
    work = a;
    work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) return jitter;
  }
  throw IllConditionedError(
      "choose_jitter: matrix not positive definite within jitter budget");
}

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd a,
                                                 const JitterPolicy& policy,
                                                 double* jitter_used) {
  const double jitter = choose_jitter(a, policy);
  a.diagonal().array() += jitter;
  if (jitter_used != nullptr) *jitter_used = jitter;
  return Eigen::LLT<Eigen::MatrixXd>(a);
}

double kernel_eval(const HyperParams& params, const ModelConfig& model,
                   const Eigen::VectorXd& x, const Eigen::VectorXd& x2) {
  if (x.size() != x2.size()) {
    throw ShapeError("kernel_eval: inputs have different dimensions");
  }
  const Eigen::VectorXd fx = mlp_forward(params, Block::FeatureNet, x);
  const Eigen::VectorXd fx2 = mlp_forward(params, Block::FeatureNet, x2);
  return 0.5 * std::exp(-(fx - fx2).squaredNorm());
}

Eigen::MatrixXd kernel_matrix(const HyperParams& params, const ModelConfig& model,
                              const Eigen::MatrixXd& inputs) {
  const Eigen::MatrixXd phi =
      mlp_forward_batch(params, Block::FeatureNet, inputs);
  const Eigen::VectorXd sq = phi.rowwise().squaredNorm();
  Eigen::MatrixXd dist = sq.replicate(1, phi.rows()) +
                         sq.transpose().replicate(phi.rows(), 1) -
                         2.0 * (phi * phi.transpose());
  dist = dist.cwiseMax(0.0);
  dist.diagonal().setZero();
  return 0.5 * (-dist).array().exp();
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> prior_moments(
    const HyperParams& params, const ModelConfig& model,
    const Eigen::MatrixXd& inputs) {
  if (inputs.rows() == 0) {
    throw DomainError("prior_moments: input list is empty");
  }
  Eigen::VectorXd mean =
      mlp_forward_batch(params, Block::MeanNet, inputs).col(0);
  return {std::move(mean), kernel_matrix(params, model, inputs)};
}

namespace {

/// Shared precomputation for posterior prediction on one task.
struct PosteriorCache {
  Eigen::LLT<Eigen::MatrixXd> llt;  // of K + sigma^2 I + jitter I
  Eigen::VectorXd alpha;            // Ktilde^-1 (y - mean)
  Eigen::MatrixXd phi;              // training features
};

PosteriorCache make_cache(const HyperParams& params, const ModelConfig& model,
                          const TaskDataset& data) {
  PosteriorCache cache;
  auto [mean, cov] = prior_moments(params, model, data.x);
  cov.diagonal().array() += model.noise_variance;
  cache.llt = cholesky_with_jitter(std::move(cov));
  cache.alpha = cache.llt.solve(data.y - mean);
  cache.phi = mlp_forward_batch(params, Block::FeatureNet, data.x);
  return cache;
}

GPPredictive predict_one(const PosteriorCache& cache, const HyperParams& params,
                         const ModelConfig& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd fx = mlp_forward(params, Block::FeatureNet, x);
  const Eigen::VectorXd kvec =
      0.5 *
      (-(cache.phi.rowwise() - fx.transpose()).rowwise().squaredNorm().array())
          .exp();
  GPPredictive out;
  out.mean = mlp_forward(params, Block::MeanNet, x)(0) + kvec.dot(cache.alpha);
  const Eigen::VectorXd v = cache.llt.matrixL().solve(kvec);
  out.variance = std::max(0.0, 0.5 - v.squaredNorm());
  return out;
}

}  // namespace

GPPredictive posterior_predict(const HyperParams& params, const ModelConfig& model,
                               const TaskDataset& data, const Eigen::VectorXd& x) {
  if (data.size() == 0) {
    return {mlp_forward(params, Block::MeanNet, x)(0), 0.5};
  }
  return predict_one(make_cache(params, model, data), params, model, x);
}

std::vector<GPPredictive> posterior_predict_batch(const HyperParams& params,
                                                  const ModelConfig& model,
                                                  const TaskDataset& data,
                                                  const Eigen::MatrixXd& queries) {
  std::vector<GPPredictive> out;
  out.reserve(queries.rows());
  if (data.size() == 0) {
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
      out.push_back({mlp_forward(params, Block::MeanNet,
                                 queries.row(i).transpose())(0),
                     0.5});
    }
    return out;
  }
  const PosteriorCache cache = make_cache(params, model, data);
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    out.push_back(predict_one(cache, params, model, queries.row(i).transpose()));
  }
  return out;
}

double log_marginal_likelihood(const HyperParams& params,
                               const ModelConfig& model,
                               const TaskDataset& data) {
  const int m = data.size();
  if (m < 1) throw DomainError("log_marginal_likelihood: task is empty");
  auto [mean, cov] = prior_moments(params, model, data.x);
  cov.diagonal().array() += model.noise_variance;
  const Eigen::LLT<Eigen::MatrixXd> llt = cholesky_with_jitter(std::move(cov));
  const Eigen::VectorXd resid = data.y - mean;
  const Eigen::VectorXd z = llt.matrixL().solve(resid);
  const double logdet =
      2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - 0.5 * logdet - 0.5 * m * kLogTwoPi;
}

ad::Var evidence_on_tape(ad::Tape& tape, const HyperParams& params,
                         const ModelConfig& model, const TaskDataset& data) {
  const int m = data.size();
  if (m < 1) throw DomainError("evidence_on_tape: task is empty");

  ad::Var phi = ad::tape_mlp_forward(tape, params, Block::FeatureNet, data.x);
  ad::Var mean = ad::tape_mlp_forward(tape, params, Block::MeanNet, data.x);
  ad::Var kernel = tape.scale(tape.exp(tape.neg(tape.pairwise_sqdist(phi))), 0.5);

  // Pick the jitter on the value before recording, so the recorded graph
  // factors exactly once.
  Eigen::MatrixXd ktilde_value = tape.value(kernel);
  ktilde_value.diagonal().array() += model.noise_variance;
  const double jitter = choose_jitter(ktilde_value);

  ad::Var ktilde = tape.add_diag(kernel, model.noise_variance + jitter);
  ad::Var chol = tape.cholesky(ktilde);
  ad::Var resid = tape.sub(tape.constant(data.y), mean);
  ad::Var z = tape.solve_lower(chol, resid);
  ad::Var quad = tape.dot(z, z);
  ad::Var logdet = tape.logdet_chol(chol);
  return tape.add_const(
      tape.add(tape.scale(quad, -0.5), tape.scale(logdet, -0.5)),
      -0.5 * m * kLogTwoPi);
}

}  // namespace wfem
